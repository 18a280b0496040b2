"""Kernel dispatch over sign tables.

The compiled loops (``_ckernels``) beat numpy on small tables, where call
overhead dominates (the verification campaigns run tens of thousands of
6-point instances).  Past ``BLAS_CUTOFF`` pairwise operations the numpy path,
which goes through BLAS, is faster and is used even when the extension is
built.  Set ``PACBAYES_DA_PURE=1`` to force numpy everywhere.
"""
import os

import numpy as np

from . import _pykernels

BACKEND = "python"
BLAS_CUTOFF = 12_000
_compiled = None

if not os.environ.get("PACBAYES_DA_PURE"):
    try:
        from . import _ckernels as _compiled

        BACKEND = "cython"
    except ImportError:
        pass


def _table(table):
    return np.ascontiguousarray(table, dtype=np.int8)


def _vec(w):
    return np.ascontiguousarray(w, dtype=np.float64)


def _pick(impl, work):
    if impl is not None:
        return impl
    if _compiled is not None and work <= BLAS_CUTOFF:
        return _compiled
    return _pykernels


def voter_risks(table, w_pos, w_neg, impl=None):
    """Per-voter risk: mass of the (point, label) atoms the voter gets wrong."""
    table = _table(table)
    impl = impl or _compiled or _pykernels
    return np.asarray(impl.voter_risks(table, _vec(w_pos), _vec(w_neg)))


def disagreement_matrix(table, w, impl=None):
    """Pairwise disagreement mass under point weights ``w``."""
    table = _table(table)
    impl = _pick(impl, table.shape[0] ** 2 * table.shape[1])
    return np.asarray(impl.disagreement_matrix(table, _vec(w)))


def joint_error_matrix(table, w_pos, w_neg, impl=None):
    """Pairwise joint-error mass; ``w_pos``/``w_neg`` are the masses of labels +1/-1."""
    table = _table(table)
    impl = _pick(impl, table.shape[0] ** 2 * table.shape[1])
    return np.asarray(impl.joint_error_matrix(table, _vec(w_pos), _vec(w_neg)))


def quadratic_form(mat, a, b=None, impl=None):
    a = _vec(a)
    b = a if b is None else _vec(b)
    mat = np.ascontiguousarray(mat, dtype=np.float64)
    impl = _pick(impl, mat.size)
    return float(impl.quadratic_form(mat, a, b))
