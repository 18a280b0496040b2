"""Empirical counterparts of the exact quantities, computed from samples.

Each estimator builds the empirical ``FiniteDomain`` (mass ``1/m`` per row)
and hands it to :mod:`pacbayes_da.core`, so sample estimates and exact values
share one code path.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import core
from .core import FiniteDomain, Posterior, VoterMatrix
from .errors import AlignmentError, ContractError, PacBayesDAError


def _rows(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] == 0 or x.shape[1] == 0:
        raise PacBayesDAError("a sample needs at least one row and one feature")
    if not np.all(np.isfinite(x)):
        raise PacBayesDAError("sample features must be finite")
    x.setflags(write=False)
    return x


@dataclass(frozen=True, eq=False)
class LabeledSample:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = _rows(self.x)
        y = np.asarray(self.y)
        if y.shape != (x.shape[0],):
            raise AlignmentError("one label per row is required")
        if not np.all((y == 1) | (y == -1)):
            raise PacBayesDAError("labels must be -1 or +1")
        y = y.astype(np.int8)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def m(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def take(self, idx) -> "LabeledSample":
        return LabeledSample(self.x[idx], self.y[idx])

    def unlabeled(self) -> "UnlabeledSample":
        return UnlabeledSample(self.x)


@dataclass(frozen=True, eq=False)
class UnlabeledSample:
    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _rows(self.x))

    @property
    def m(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def take(self, idx) -> "UnlabeledSample":
        return UnlabeledSample(self.x[idx])


@dataclass(frozen=True, eq=False)
class SamplePair:
    """Labeled source sample and unlabeled target sample."""

    source: LabeledSample
    target: UnlabeledSample

    def __post_init__(self):
        if isinstance(self.target, LabeledSample):
            object.__setattr__(self, "target", self.target.unlabeled())
        if self.source.d != self.target.d:
            raise AlignmentError(f"source has dimension {self.source.d}, target {self.target.d}")


# --------------------------------------------------------------------------
# voter pools


class VoterPool:
    """A finite set of deterministic +-1 classifiers on feature vectors."""

    def __len__(self) -> int:
        raise NotImplementedError

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Return an ``n x len(x)`` array of predictions."""
        raise NotImplementedError


class CallablePool(VoterPool):
    """Pool built from plain callables mapping one feature vector to -1/+1."""

    def __init__(self, voters: Sequence[Callable]):
        self.voters = list(voters)
        if not self.voters:
            raise PacBayesDAError("a voter pool needs at least one voter")

    def __len__(self):
        return len(self.voters)

    def predict(self, x):
        return np.array([[h(row) for row in x] for h in self.voters])


class TablePool(VoterPool):
    """Voters of a ``VoterMatrix`` looked up by the point index stored in ``x[:, 0]``."""

    def __init__(self, voters: VoterMatrix):
        self.voters = voters

    def __len__(self):
        return self.voters.n

    def predict(self, x):
        idx = np.asarray(x)[:, 0].astype(np.int64)
        return self.voters.table[:, idx]


def evaluate_voters(x, pool: VoterPool) -> VoterMatrix:
    """Sign matrix of ``pool`` on the rows of ``x`` (a sample or an array)."""
    if isinstance(x, (LabeledSample, UnlabeledSample)):
        x = x.x
    if len(pool) == 0:
        raise PacBayesDAError("a voter pool needs at least one voter")
    x = _rows(x)
    pred = np.asarray(pool.predict(x))
    if pred.shape != (len(pool), x.shape[0]):
        raise ContractError(f"pool returned shape {pred.shape}, expected {(len(pool), x.shape[0])}")
    if not np.all((pred == 1) | (pred == -1)):
        raise ContractError("voters must predict exactly -1 or +1")
    return VoterMatrix(pred.astype(np.int8))


def _as_matrix(x, voters) -> VoterMatrix:
    if isinstance(voters, VoterPool):
        return evaluate_voters(x, voters)
    if voters.table.shape[1] != np.asarray(x).shape[0]:
        raise AlignmentError(f"voters evaluated on {voters.table.shape[1]} rows, sample has {np.asarray(x).shape[0]}")
    return voters


# --------------------------------------------------------------------------
# empirical domains


def empirical_domain(sample: LabeledSample) -> FiniteDomain:
    """Uniform mass ``1/m`` on each labeled row."""
    return FiniteDomain.uniform_on(sample.y)


def empirical_pair(pair: SamplePair, voters) -> tuple[FiniteDomain, FiniteDomain, VoterMatrix]:
    """Source and target empirical domains over the concatenated rows of both samples.

    ``voters`` is a pool or a ``(source_matrix, target_matrix)`` tuple.  The
    target domain carries its mass on label +1; only its marginal is used.
    """
    ms, mt = pair.source.m, pair.target.m
    if isinstance(voters, VoterPool):
        vs, vt = evaluate_voters(pair.source.x, voters), evaluate_voters(pair.target.x, voters)
    else:
        vs, vt = voters
        vs, vt = _as_matrix(pair.source.x, vs), _as_matrix(pair.target.x, vt)
        if vs.n != vt.n:
            raise AlignmentError("source and target voter matrices have different voter counts")
    points = tuple(f"s{k}" for k in range(ms)) + tuple(f"t{k}" for k in range(mt))
    src = np.zeros((ms + mt, 2))
    src[np.arange(ms), (pair.source.y > 0).astype(int)] = 1.0 / ms
    tgt = np.zeros((ms + mt, 2))
    tgt[ms:, 1] = 1.0 / mt
    table = np.hstack([vs.table, vt.table])
    return FiniteDomain(points, src), FiniteDomain(points, tgt), VoterMatrix(table)


def empirical_risks(sample: LabeledSample, voters) -> np.ndarray:
    return core.voter_risks(empirical_domain(sample), _as_matrix(sample.x, voters))


def empirical_gibbs_risk(sample: LabeledSample, voters, rho: Posterior) -> float:
    return core.gibbs_risk(empirical_domain(sample), _as_matrix(sample.x, voters), rho)


def empirical_majority_vote_risk(sample: LabeledSample, voters, rho: Posterior) -> float:
    return core.majority_vote_risk(empirical_domain(sample), _as_matrix(sample.x, voters), rho)


def empirical_joint_error(sample: LabeledSample, voters, rho: Posterior) -> float:
    return core.expected_joint_error(empirical_domain(sample), _as_matrix(sample.x, voters), rho)


def empirical_disagreement_matrices(pair: SamplePair, voters) -> tuple[np.ndarray, np.ndarray]:
    src, tgt, table = empirical_pair(pair, voters)
    return core.pair_disagreement(src, table), core.pair_disagreement(tgt, table)


def empirical_domain_disagreement(pair: SamplePair, voters, rho: Posterior) -> float:
    """Plug-in estimate ``|rho^T (M_S - M_T) rho|`` from the two samples."""
    src, tgt, table = empirical_pair(pair, voters)
    return core.domain_disagreement(src, tgt, table, rho)


# --------------------------------------------------------------------------
# CSV


def read_csv(path, require_labels: bool | None = None):
    """Read a sample CSV: header row, ``d`` feature columns, optional final ``label`` column.

    Returns a ``LabeledSample`` when a label column is present, otherwise an
    ``UnlabeledSample``.  ``require_labels=True``/``False`` turns presence or
    absence of labels into an error.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PacBayesDAError(f"{path}: empty file, header row required") from None
        header = [h.strip() for h in header]
        labeled = bool(header) and header[-1].lower() == "label"
        if require_labels and not labeled:
            raise PacBayesDAError(f"{path}: line 1: labeled sample required but no 'label' column")
        if require_labels is False and labeled:
            raise PacBayesDAError(f"{path}: line 1: unlabeled sample expected but found a 'label' column")
        d = len(header) - labeled
        if d < 1:
            raise PacBayesDAError(f"{path}: line 1: no feature columns")
        xs, ys = [], []
        for row in reader:
            lineno = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise PacBayesDAError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                xs.append([float(c) for c in row[:d]])
            except ValueError as exc:
                raise PacBayesDAError(f"{path}: line {lineno}: {exc}") from None
            if labeled:
                try:
                    label = int(float(row[-1]))
                except ValueError:
                    label = 0
                if label not in (-1, 1) or float(row[-1]) != label:
                    raise PacBayesDAError(f"{path}: line {lineno}: label must be -1 or +1, got {row[-1]!r}")
                ys.append(label)
    if not xs:
        raise PacBayesDAError(f"{path}: no data rows")
    x = np.array(xs)
    return LabeledSample(x, np.array(ys)) if labeled else UnlabeledSample(x)


def write_csv(path, sample) -> None:
    labeled = isinstance(sample, LabeledSample)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{j}" for j in range(sample.d)] + (["label"] if labeled else []))
        for k in range(sample.m):
            row = [repr(float(v)) for v in sample.x[k]]
            if labeled:
                row.append(int(sample.y[k]))
            w.writerow(row)
