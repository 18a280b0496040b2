"""Exact risk, disagreement and joint-error computations on finite domains.

Every quantity is a weighted sum over the atoms of a finite domain or a
quadratic form in the posterior, so nothing here is approximate.  Domains that
are compared with each other (source vs. target) must be defined over the same
point list, and voter tables are evaluated once per point.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .errors import AlignmentError, PacBayesDAError, SupportError

LABELS = (-1, 1)
NORMALIZATION_TOL = 1e-9
# silent renormalization below this deviation
_SILENT_TOL = 1e-12
TIE_TOL = 1e-12


def _label_column(label) -> int:
    if label == -1:
        return 0
    if label == 1:
        return 1
    raise PacBayesDAError(f"labels must be -1 or +1, got {label!r}")


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


def _normalized(values: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise PacBayesDAError(f"{what} contains non-finite values")
    if np.any(values < 0):
        raise PacBayesDAError(f"{what} contains negative entries")
    total = float(values.sum())
    dev = abs(total - 1.0)
    if dev > NORMALIZATION_TOL:
        raise PacBayesDAError(f"{what} sums to {total!r}, not 1 (tolerance {NORMALIZATION_TOL})")
    if dev > _SILENT_TOL:
        warnings.warn(f"{what} sums to {total!r}; renormalizing", stacklevel=3)
    return values / total


@dataclass(frozen=True, eq=False)
class FiniteDomain:
    """Joint pmf over ``points x {-1, +1}``.

    ``mass[k, 0]`` is the mass of ``(points[k], -1)`` and ``mass[k, 1]`` the
    mass of ``(points[k], +1)``.  ``features`` optionally attaches a feature
    vector to every point so that voter pools can be evaluated on the domain.
    """

    points: tuple
    mass: np.ndarray
    features: np.ndarray | None = None

    def __post_init__(self):
        points = tuple(str(p) for p in self.points)
        if not points:
            raise PacBayesDAError("a domain needs at least one point")
        if len(set(points)) != len(points):
            raise PacBayesDAError("duplicate point identifiers")
        mass = np.asarray(self.mass, dtype=np.float64)
        if mass.shape != (len(points), 2):
            raise AlignmentError(f"mass has shape {mass.shape}, expected ({len(points)}, 2)")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "mass", _frozen(_normalized(mass, "domain pmf")))
        if self.features is not None:
            feats = np.asarray(self.features, dtype=np.float64)
            if feats.ndim == 1:
                feats = feats[:, None]
            if feats.shape[0] != len(points):
                raise AlignmentError("one feature vector per point is required")
            object.__setattr__(self, "features", _frozen(feats))

    @classmethod
    def from_triples(cls, triples: Iterable, points: Sequence | None = None, features=None):
        """Build from ``(point, label, mass)`` triples; unlisted atoms get mass 0."""
        triples = list(triples)
        if points is None:
            points = list(dict.fromkeys(str(p) for p, _, _ in triples))
        index = {str(p): k for k, p in enumerate(points)}
        mass = np.zeros((len(points), 2))
        for p, label, m in triples:
            if str(p) not in index:
                raise AlignmentError(f"unknown point {p!r}")
            mass[index[str(p)], _label_column(label)] += float(m)
        return cls(tuple(points), mass, features)

    @classmethod
    def uniform_on(cls, labeled_rows, features=None):
        """Uniform mass on each ``label`` of a list, one point per row (empirical domain)."""
        labels = np.asarray(labeled_rows)
        m = len(labels)
        mass = np.zeros((m, 2))
        mass[np.arange(m), (labels > 0).astype(int)] = 1.0 / m
        return cls(tuple(f"r{k}" for k in range(m)), mass, features)

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def marginal(self) -> np.ndarray:
        return self.mass.sum(axis=1)

    @property
    def neg(self) -> np.ndarray:
        return self.mass[:, 0]

    @property
    def pos(self) -> np.ndarray:
        return self.mass[:, 1]

    def with_marginal(self, marginal) -> "FiniteDomain":
        """Same point list, labels dropped: all mass of each point put on label +1.

        Only marginal-based quantities are meaningful on the result.
        """
        mass = np.zeros((self.size, 2))
        mass[:, 1] = marginal
        return FiniteDomain(self.points, mass, self.features)

    def triples(self):
        for k, p in enumerate(self.points):
            for col, label in enumerate(LABELS):
                yield p, label, float(self.mass[k, col])

    def to_dict(self) -> dict:
        out = {
            "points": list(self.points),
            "pmf": [[p, y, m] for p, y, m in self.triples()],
        }
        if self.features is not None:
            out["features"] = self.features.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "FiniteDomain":
        try:
            return cls.from_triples(data["pmf"], points=data.get("points"), features=data.get("features"))
        except (KeyError, TypeError) as exc:
            raise PacBayesDAError(f"malformed domain JSON: {exc}") from exc


@dataclass(frozen=True, eq=False)
class VoterMatrix:
    """Sign table ``table[h, k] = h(points[k])`` with entries in {-1, +1}."""

    table: np.ndarray
    points: tuple | None = None

    def __post_init__(self):
        table = np.asarray(self.table)
        if table.ndim == 1:
            table = table[None, :]
        if table.ndim != 2 or table.shape[0] == 0 or table.shape[1] == 0:
            raise PacBayesDAError("voter table must be a non-empty n x |points| array")
        if not np.all((table == 1) | (table == -1)):
            raise PacBayesDAError("voter table entries must be exactly -1 or +1")
        object.__setattr__(self, "table", _frozen(table.astype(np.int8)))
        if self.points is not None:
            points = tuple(str(p) for p in self.points)
            if len(points) != table.shape[1]:
                raise AlignmentError("voter table column count does not match its point list")
            object.__setattr__(self, "points", points)

    @property
    def n(self) -> int:
        return self.table.shape[0]

    def check(self, domain: FiniteDomain) -> None:
        if self.table.shape[1] != domain.size:
            raise AlignmentError(
                f"voters evaluated on {self.table.shape[1]} points, domain has {domain.size}"
            )
        if self.points is not None and self.points != domain.points:
            raise AlignmentError("voter table is bound to a different point list")

    def permuted(self, order) -> "VoterMatrix":
        return VoterMatrix(self.table[np.asarray(order)], self.points)

    def to_dict(self) -> dict:
        out = {"table": self.table.astype(int).tolist()}
        if self.points is not None:
            out["points"] = list(self.points)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "VoterMatrix":
        try:
            return cls(np.asarray(data["table"]), data.get("points"))
        except (KeyError, TypeError) as exc:
            raise PacBayesDAError(f"malformed voter JSON: {exc}") from exc


@dataclass(frozen=True, eq=False)
class Posterior:
    """Probability vector over the voters (also used for priors)."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise PacBayesDAError("posterior weights must be a non-empty vector")
        object.__setattr__(self, "weights", _frozen(_normalized(w, "posterior")))

    @classmethod
    def uniform(cls, n: int) -> "Posterior":
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def point_mass(cls, n: int, i: int) -> "Posterior":
        w = np.zeros(n)
        w[i] = 1.0
        return cls(w)

    @property
    def n(self) -> int:
        return self.weights.size

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights > 0)

    def permuted(self, order) -> "Posterior":
        return Posterior(self.weights[np.asarray(order)])

    def to_dict(self) -> dict:
        return {"weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, data) -> "Posterior":
        if isinstance(data, dict):
            data = data.get("weights")
        if data is None:
            raise PacBayesDAError("malformed posterior JSON: missing weights")
        return cls(np.asarray(data, dtype=np.float64))


def load_json(path, kind):
    """Read a ``FiniteDomain``/``VoterMatrix``/``Posterior`` JSON file."""
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise PacBayesDAError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    return kind.from_dict(data)


def _check_rho(voters: VoterMatrix, rho: Posterior) -> None:
    if rho.n != voters.n:
        raise AlignmentError(f"posterior has {rho.n} weights for {voters.n} voters")


def _check_pair(source: FiniteDomain, target: FiniteDomain) -> None:
    if source.points != target.points:
        raise AlignmentError("source and target must be defined over the same point list")


# --------------------------------------------------------------------------
# matrices


def voter_risks(domain: FiniteDomain, voters: VoterMatrix) -> np.ndarray:
    """Risk of every voter on ``domain``."""
    voters.check(domain)
    return kernels.voter_risks(voters.table, domain.pos, domain.neg)


def pair_disagreement(domain: FiniteDomain, voters: VoterMatrix) -> np.ndarray:
    """n x n matrix of disagreement probabilities under the marginal of ``domain``."""
    voters.check(domain)
    return kernels.disagreement_matrix(voters.table, domain.marginal)


def joint_error_matrix(domain: FiniteDomain, voters: VoterMatrix) -> np.ndarray:
    """n x n matrix of probabilities that two voters err on the same example."""
    voters.check(domain)
    return kernels.joint_error_matrix(voters.table, domain.pos, domain.neg)


# --------------------------------------------------------------------------
# scalar quantities


def gibbs_risk(domain: FiniteDomain, voters: VoterMatrix, rho: Posterior) -> float:
    _check_rho(voters, rho)
    return float(rho.weights @ voter_risks(domain, voters))


def majority_vote(voters: VoterMatrix, rho: Posterior) -> np.ndarray:
    """Predictions of the rho-weighted vote on every point; ties go to +1."""
    _check_rho(voters, rho)
    score = rho.weights @ voters.table
    return np.where(score >= 0, 1, -1).astype(np.int8)


def majority_vote_risk(domain: FiniteDomain, voters: VoterMatrix, rho: Posterior) -> float:
    voters.check(domain)
    pred = majority_vote(voters, rho)
    return float(np.where(pred > 0, domain.neg, domain.pos).sum())


def expected_disagreement(dis_matrix: np.ndarray, rho: Posterior, other: Posterior | None = None) -> float:
    """``rho^T M other`` (``other`` defaults to ``rho``)."""
    dis_matrix = np.asarray(dis_matrix, dtype=np.float64)
    n = dis_matrix.shape[0]
    if dis_matrix.shape != (n, n) or rho.n != n or (other is not None and other.n != n):
        raise AlignmentError("disagreement matrix and posterior sizes differ")
    b = None if other is None else other.weights
    return kernels.quadratic_form(dis_matrix, rho.weights, b)


def domain_disagreement(source: FiniteDomain, target: FiniteDomain, voters: VoterMatrix, rho: Posterior) -> float:
    _check_pair(source, target)
    _check_rho(voters, rho)
    diff = pair_disagreement(source, voters) - pair_disagreement(target, voters)
    return abs(kernels.quadratic_form(diff, rho.weights))


def expected_joint_error(domain: FiniteDomain, voters: VoterMatrix, rho: Posterior) -> float:
    _check_rho(voters, rho)
    return kernels.quadratic_form(joint_error_matrix(domain, voters), rho.weights)


def lambda_rho(source: FiniteDomain, target: FiniteDomain, voters: VoterMatrix, rho: Posterior) -> float:
    """Absolute gap between target and source expected joint errors."""
    _check_pair(source, target)
    return abs(expected_joint_error(target, voters, rho) - expected_joint_error(source, voters, rho))


def chi_squared(target: FiniteDomain, source: FiniteDomain) -> float:
    """Chi-squared divergence of ``target`` from ``source`` over (point, label) atoms.

    Raises ``SupportError`` unless both pmfs are positive on exactly the same atoms.
    """
    _check_pair(source, target)
    ps, pt = source.mass.ravel(), target.mass.ravel()
    s_supp, t_supp = ps > 0, pt > 0
    if np.any(s_supp != t_supp):
        bad = np.flatnonzero(s_supp != t_supp)
        atoms = [(source.points[k // 2], LABELS[k % 2]) for k in bad[:5]]
        raise SupportError(f"source and target do not share the same support, e.g. atoms {atoms}")
    ratio = pt[s_supp] / ps[s_supp] - 1.0
    return float(np.sum(ps[s_supp] * ratio * ratio))


def hdh_sup_distance(source: FiniteDomain, target: FiniteDomain, voters: VoterMatrix) -> tuple[float, float]:
    """``(sup |R_DT(h,h') - R_DS(h,h')|, half of it)`` over all voter pairs."""
    _check_pair(source, target)
    diff = np.abs(pair_disagreement(target, voters) - pair_disagreement(source, voters))
    sup = float(diff.max())
    return sup, 0.5 * sup


def best_target_posterior(target: FiniteDomain, voters: VoterMatrix) -> Posterior:
    """Minimizer of the target Gibbs risk: uniform over the minimum-risk voters."""
    risks = voter_risks(target, voters)
    best = risks <= risks.min() + TIE_TOL
    return Posterior(best / best.sum())
