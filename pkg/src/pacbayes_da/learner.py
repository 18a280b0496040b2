"""Exponentiated-gradient minimization of the observable part of the PAC-Bayesian bound.

The objective over the simplex is::

    J(rho) = c' R_S(rho) + alpha' / 2 |rho^T (M_S - M_T) rho| + K KL(rho || pi) / m

with ``K = c'/c + alpha'/alpha``.  The lambda term and ``(alpha' - 1) / 2`` do
not depend on ``rho``; they only enter the final report.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .bounds import BoundConfig, BoundReport, bound_theorem3, catoni_constants
from .core import Posterior
from .errors import BoundaryError, ConfigError
from .estimators import (
    SamplePair,
    VoterPool,
    empirical_disagreement_matrices,
    empirical_gibbs_risk,
    empirical_majority_vote_risk,
    empirical_risks,
    evaluate_voters,
)

_TINY = np.finfo(np.float64).tiny
MAX_HALVINGS = 30
# the |q| term makes the objective non-convex; small pools also restart near every vertex
VERTEX_START_LIMIT = 8
VERTEX_WEIGHT = 0.9


@dataclass(frozen=True)
class LearnerConfig:
    c: float = 1.0
    alpha: float = 1.0
    delta: float = 0.05
    m: int = 1
    step_size: float = 0.1
    max_iters: int = 1000
    tolerance: float = 1e-8
    lambda_mode: str = "constant"
    lambda_value: float = 0.0
    multistart: bool = True

    def __post_init__(self):
        self.bound_config()  # validates c, alpha, delta, m, lambda
        if not self.step_size > 0:
            raise ConfigError(f"step_size must be > 0, got {self.step_size}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ConfigError(f"max_iters must be a positive integer, got {self.max_iters}")
        if not self.tolerance > 0:
            raise ConfigError(f"tolerance must be > 0, got {self.tolerance}")

    def bound_config(self) -> BoundConfig:
        return BoundConfig(self.c, self.alpha, self.delta, self.m, self.lambda_mode, self.lambda_value)


@dataclass
class TrainResult:
    posterior: Posterior
    trace: list
    report: BoundReport
    iterations: int
    stop_reason: str
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "posterior": self.posterior.weights.tolist(),
            "objective_trace": list(self.trace),
            "report": self.report.to_dict(),
            "iterations": self.iterations,
            "stop_reason": self.stop_reason,
            "extras": self.extras,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


class Objective:
    """Objective and gradient on raw weight vectors, with the data terms precomputed."""

    def __init__(self, risks, dis_diff, pi, config):
        self.risks = np.asarray(risks, dtype=np.float64)
        self.diff = np.asarray(dis_diff, dtype=np.float64)
        self.pi = np.asarray(pi.weights if isinstance(pi, Posterior) else pi, dtype=np.float64)
        self.cp, self.ap = catoni_constants(config.c, config.alpha)
        self.kl_weight = (self.cp / config.c + self.ap / config.alpha) / config.m

    @classmethod
    def from_samples(cls, pair: SamplePair, voters, pi: Posterior, config) -> "Objective":
        if isinstance(voters, VoterPool):
            voters = (evaluate_voters(pair.source.x, voters), evaluate_voters(pair.target.x, voters))
        ms, mt = empirical_disagreement_matrices(pair, voters)
        return cls(empirical_risks(pair.source, voters[0]), ms - mt, pi, config)

    def _kl(self, w):
        supp = w > 0
        return float(np.sum(w[supp] * np.log(w[supp] / self.pi[supp])))

    def value(self, w) -> float:
        w = np.asarray(w, dtype=np.float64)
        q = float(w @ self.diff @ w)
        return self.cp * float(w @ self.risks) + self.ap * 0.5 * abs(q) + self.kl_weight * self._kl(w)

    def _parts(self, w):
        dw = self.diff @ w
        smooth = self.cp * self.risks + self.kl_weight * (np.log(w / self.pi) + 1.0)
        return smooth, dw, float(w @ dw)

    def gradient(self, w) -> np.ndarray:
        """Gradient with the subgradient ``sign(0) = 0`` for the absolute value."""
        w = np.asarray(w, dtype=np.float64)
        if np.any(w <= 0):
            raise BoundaryError("gradient needs a strictly positive posterior")
        smooth, dw, q = self._parts(w)
        return smooth + self.ap * np.sign(q) * dw

    def subgradients(self, w):
        """Candidate descent directions for one step.

        First the plain gradient, then the element of the ``|q|`` subdifferential
        whose exponentiated-gradient direction leaves ``q`` unchanged to first
        order (a step along the kink ``q = 0``), then the remaining extreme
        choices as a fallback.
        """
        smooth, dw, q = self._parts(w)
        yield smooth + self.ap * np.sign(q) * dw
        cs = w * (smooth - w @ smooth)
        cd = w * (dw - w @ dw)
        curv = self.ap * float(dw @ cd)
        if curv > 0:
            s = float(np.clip(-(dw @ cs) / curv, -1.0, 1.0))
            yield smooth + self.ap * s * dw
        for s in (-np.sign(q), 0.0) if q != 0 else (-1.0, 1.0):
            yield smooth + self.ap * s * dw


def objective(pair: SamplePair, voters, rho: Posterior, pi: Posterior, config) -> float:
    return Objective.from_samples(pair, voters, pi, config).value(rho.weights)


def gradient(pair: SamplePair, voters, rho: Posterior, pi: Posterior, config) -> np.ndarray:
    return Objective.from_samples(pair, voters, pi, config).gradient(rho.weights)


def eg_step(w, g, eta):
    """``w * exp(-eta g)`` renormalized, computed in the log domain."""
    logw = np.log(w) - eta * g
    logw -= logw.max()
    out = np.exp(logw)
    out = np.maximum(out / out.sum(), _TINY)
    return out / out.sum()


def _backtrack(obj, w, g, cur, eta):
    for _ in range(MAX_HALVINGS + 1):
        cand = eg_step(w, g, eta)
        val = obj.value(cand)
        if val <= cur:
            return cand, val
        eta *= 0.5
    return None


def minimize(obj: Objective, start, config: LearnerConfig, callback=None):
    """Exponentiated gradient with per-step halving; returns (w, trace, iters, stop reason).

    Each iteration tries the directions of ``obj.subgradients`` in order and
    keeps the best accepted step among the first two candidates, falling back
    to the others only when neither decreases the objective.  ``callback(w)``
    sees every accepted iterate.
    """
    w = np.asarray(start, dtype=np.float64)
    if np.any(w <= 0):
        raise BoundaryError("training needs a strictly positive prior")
    cur = obj.value(w)
    trace = [cur]
    reason = "max_iters"
    it = 0
    for it in range(1, config.max_iters + 1):
        best = None
        for k, g in enumerate(obj.subgradients(w)):
            if k >= 2 and best is not None:
                break
            step = _backtrack(obj, w, g, cur, config.step_size)
            if step is not None and (best is None or step[1] < best[1]):
                best = step
        if best is None:
            reason = "no_descent"
            break
        change = cur - best[1]
        w, cur = best
        trace.append(cur)
        if callback is not None:
            callback(w)
        if change < config.tolerance:
            reason = "tolerance"
            break
    return w, trace, it, reason


def train(pair: SamplePair, voters, pi: Posterior, config: LearnerConfig, **domains) -> TrainResult:
    """Learn a posterior from a sample pair.

    Runs from ``pi`` and, when ``config.multistart`` is set and the pool has
    at most ``VERTEX_START_LIMIT`` voters, also from ``pi`` pulled towards each
    vertex; the run with the lowest final objective wins (ties keep ``pi``).
    The trace is that of the winning run.  Extra keyword arguments (``source_domain``,
    ``target_domain``, ``domain_voters``) are forwarded to the final bound
    evaluation for the exact/prop4 lambda modes.
    """
    if isinstance(voters, VoterPool):
        voters = (evaluate_voters(pair.source.x, voters), evaluate_voters(pair.target.x, voters))
    bc = config.bound_config()
    if pi.n != voters[0].n:
        raise ConfigError(f"prior has {pi.n} weights for {voters[0].n} voters")
    obj = Objective.from_samples(pair, voters, pi, bc)
    best, finals = None, []
    for label, start in _starts(pi, config):
        run = minimize(obj, start, config)
        finals.append({"start": label, "objective": run[1][-1], "iterations": run[2]})
        if best is None or run[1][-1] < best[1][1][-1]:
            best = (label, run)
    label, (w, trace, iters, reason) = best
    rho = Posterior(w)
    report = bound_theorem3(pair, voters, rho, pi, bc, **domains)
    report.config = asdict(config)
    return TrainResult(rho, trace, report, iters, reason, {"start": label, "starts": finals})


def _starts(pi: Posterior, config: LearnerConfig):
    """``pi`` first, then (for small pools) ``pi`` pulled towards each vertex."""
    yield "prior", pi.weights
    if not config.multistart or pi.n == 1 or pi.n > VERTEX_START_LIMIT:
        return
    for k in range(pi.n):
        w = (1 - VERTEX_WEIGHT) * pi.weights
        w[k] += VERTEX_WEIGHT
        yield f"vertex_{k}", w


def simplex_grid(n: int, resolution: float = 0.01):
    """All points of the simplex with coordinates on a ``resolution`` grid (n <= 3 is practical)."""
    steps = int(round(1 / resolution))
    if n == 1:
        return np.ones((1, 1))
    if n == 2:
        a = np.arange(steps + 1) / steps
        return np.stack([a, 1 - a], axis=1)
    if n == 3:
        i, j = np.meshgrid(np.arange(steps + 1), np.arange(steps + 1), indexing="ij")
        keep = i + j <= steps
        i, j = i[keep], j[keep]
        return np.stack([i, j, steps - i - j], axis=1) / steps
    raise ValueError("grid search is only implemented for n <= 3")


def grid_minimum(obj: Objective, resolution: float = 0.01) -> tuple[float, np.ndarray]:
    grid = simplex_grid(obj.risks.size, resolution)
    vals = np.array([obj.value(w) for w in grid])
    k = int(np.argmin(vals))
    return float(vals[k]), grid[k]


def heldout_risks(sample, pool_or_matrix, rho: Posterior) -> dict:
    """Gibbs and majority-vote risks of ``rho`` on a labeled sample."""
    return {
        "gibbs_risk": empirical_gibbs_risk(sample, pool_or_matrix, rho),
        "majority_vote_risk": empirical_majority_vote_risk(sample, pool_or_matrix, rho),
    }


__all__ = [
    "LearnerConfig",
    "Objective",
    "TrainResult",
    "eg_step",
    "gradient",
    "grid_minimum",
    "heldout_risks",
    "minimize",
    "objective",
    "simplex_grid",
    "train",
]
