"""Numpy implementations of the sign-table kernels (fallback for ``_ckernels``)."""
import numpy as np


def voter_risks(table, w_pos, w_neg):
    neg = table < 0
    return np.where(neg, w_pos, w_neg).sum(axis=1)


def disagreement_matrix(table, w):
    t = table.astype(np.float64)
    same = (t * w) @ t.T
    out = 0.5 * (w.sum() - same)
    out = 0.5 * (out + out.T)
    np.fill_diagonal(out, 0.0)
    return np.maximum(out, 0.0)


def joint_error_matrix(table, w_pos, w_neg):
    neg = (table < 0).astype(np.float64)
    pos = 1.0 - neg
    out = (neg * w_pos) @ neg.T + (pos * w_neg) @ pos.T
    out = 0.5 * (out + out.T)
    np.fill_diagonal(out, voter_risks(table, w_pos, w_neg))
    return out


def quadratic_form(mat, a, b):
    return float(a @ mat @ b)
