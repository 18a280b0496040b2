"""Random verification instances, synthetic adaptation tasks and stump pools.

Every generator is a pure function of its arguments and seed.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import core
from .core import FiniteDomain, Posterior, VoterMatrix
from .errors import ConfigError, PacBayesDAError, SupportError
from .estimators import LabeledSample, SamplePair, UnlabeledSample, VoterPool

KINDS = ("random_finite", "chi2_perturbed", "rotated_moons", "label_flip")


@dataclass(frozen=True)
class DatasetSpec:
    kind: str
    n_points: int = 4
    n_voters: int = 3
    concentration: float = 1.0
    magnitude: float = 0.0
    angle: float = 0.0
    noise: float = 0.05
    noise_rate: float = 0.1
    m_source: int = 100
    m_target: int = 100
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        for name in ("n_points", "n_voters", "m_source", "m_target"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ConfigError(f"{name} must be an integer >= 1, got {v}")
        if not self.concentration > 0:
            raise ConfigError("Dirichlet concentration must be > 0")
        if not 0 <= self.angle < 180:
            raise ConfigError(f"rotation angle must lie in [0, 180), got {self.angle}")
        if not 0 <= self.noise_rate <= 0.5:
            raise ConfigError(f"noise rate must lie in [0, 1/2], got {self.noise_rate}")
        if self.noise < 0:
            raise ConfigError("moons noise must be >= 0")
        if not 0 <= self.magnitude < 1:
            raise ConfigError(f"perturbation magnitude must lie in [0, 1), got {self.magnitude}")

    def to_dict(self) -> dict:
        return asdict(self)


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def random_domain(n_points: int, rng, concentration: float = 1.0, points=None) -> FiniteDomain:
    points = points or tuple(f"x{k}" for k in range(n_points))
    mass = rng.dirichlet(np.full(2 * n_points, concentration)).reshape(n_points, 2)
    return FiniteDomain(points, mass)


def random_finite_instance(spec: DatasetSpec, seed) -> tuple[FiniteDomain, FiniteDomain, VoterMatrix, Posterior]:
    """Dirichlet source and target pmfs, uniform +-1 voter table, Dirichlet posterior."""
    if spec.kind != "random_finite":
        raise ConfigError(f"random_finite_instance needs kind 'random_finite', got {spec.kind!r}")
    rng = _rng(seed)
    n, k = spec.n_points, spec.n_voters
    source = random_domain(n, rng, spec.concentration)
    target = random_domain(n, rng, spec.concentration, source.points)
    table = rng.choice(np.array([-1, 1], dtype=np.int8), size=(k, n))
    rho = Posterior(rng.dirichlet(np.full(k, spec.concentration)))
    return source, target, VoterMatrix(table, source.points), rho


def chi2_perturbed_pair(base: FiniteDomain, magnitude: float, seed) -> tuple[FiniteDomain, FiniteDomain, float]:
    """Multiplicative perturbation ``P_T = P_S (1 + magnitude * u)`` of a positive base pmf.

    ``u`` is a random direction with zero mean under ``P_S`` and ``max |u| = 1``,
    so the target keeps every atom positive exactly when ``magnitude < 1`` and
    the divergence grows as ``magnitude**2``.  Returns ``(source, target, chi2)``.
    """
    p = base.mass.ravel()
    if np.any(p <= 0):
        raise SupportError("base domain must put positive mass on every atom")
    if not magnitude >= 0:
        raise ConfigError(f"magnitude must be >= 0, got {magnitude}")
    if magnitude == 0:
        return base, base, 0.0
    rng = _rng(seed)
    u = rng.standard_normal(p.size)
    u -= p @ u
    scale = np.abs(u).max()
    u = u / scale if scale > 0 else u
    target_mass = p * (1 + magnitude * u)
    if np.any(target_mass <= 0):
        raise SupportError(f"magnitude {magnitude} destroys the shared support")
    target = FiniteDomain(base.points, (target_mass / target_mass.sum()).reshape(-1, 2), base.features)
    return base, target, core.chi_squared(target, base)


def label_flip_pair(base: FiniteDomain, noise_rate: float) -> tuple[FiniteDomain, FiniteDomain]:
    """Target = source with every label flipped with probability ``noise_rate`` (same marginal)."""
    if not 0 <= noise_rate <= 0.5:
        raise ConfigError(f"noise rate must lie in [0, 1/2], got {noise_rate}")
    if noise_rate == 0:
        return base, base
    m = base.mass
    flipped = (1 - noise_rate) * m + noise_rate * m[:, ::-1]
    return base, FiniteDomain(base.points, flipped, base.features)


# --------------------------------------------------------------------------
# two moons


def _moons(m: int, noise: float, rng) -> tuple[np.ndarray, np.ndarray]:
    y = np.where(rng.random(m) < 0.5, 1, -1)
    t = rng.uniform(0.0, math.pi, m)
    upper = np.stack([np.cos(t), np.sin(t)], axis=1)
    lower = np.stack([1.0 - np.cos(t), -np.sin(t) - 0.5], axis=1)
    x = np.where((y > 0)[:, None], upper, lower)
    x = x + noise * rng.standard_normal((m, 2))
    return x, y


def rotate(x: np.ndarray, angle_deg: float) -> np.ndarray:
    a = math.radians(angle_deg)
    rot = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
    return x @ rot.T


def rotated_moons(m_source: int, m_target: int, angle: float, noise: float, seed) -> tuple[SamplePair, LabeledSample]:
    """Two half-circle source task and a target rotated by ``angle`` degrees about the origin.

    Label +1 rows lie on the unit upper half-circle, label -1 rows on the lower
    half-circle centred at (1, -0.5).  Returns the (labeled source, unlabeled
    target) pair and an independent labeled target sample for evaluation.
    """
    DatasetSpec("rotated_moons", angle=angle, noise=noise, m_source=m_source, m_target=m_target)
    rng = _rng(seed)
    xs, ys = _moons(m_source, noise, rng)
    xt, _ = _moons(m_target, noise, rng)
    xh, yh = _moons(m_target, noise, rng)
    pair = SamplePair(LabeledSample(xs, ys), UnlabeledSample(rotate(xt, angle)))
    return pair, LabeledSample(rotate(xh, angle), yh)


# --------------------------------------------------------------------------
# stumps


class StumpPool(VoterPool):
    """Decision stumps ``x -> s * sign(x[j] - theta)`` with ``sign(0) = +1``."""

    def __init__(self, features, thresholds, polarities):
        self.features = np.asarray(features, dtype=np.int64)
        self.thresholds = np.asarray(thresholds, dtype=np.float64)
        self.polarities = np.asarray(polarities, dtype=np.int8)
        if self.features.size == 0:
            raise PacBayesDAError("a voter pool needs at least one voter")

    def __len__(self):
        return self.features.size

    def predict(self, x):
        x = np.asarray(x, dtype=np.float64)
        raw = np.where(x[:, self.features].T >= self.thresholds[:, None], 1, -1)
        return (raw * self.polarities[:, None]).astype(np.int8)

    def to_dict(self) -> dict:
        return {
            "features": self.features.tolist(),
            "thresholds": self.thresholds.tolist(),
            "polarities": self.polarities.astype(int).tolist(),
        }


def stump_pool(rows, count: int, seed) -> StumpPool:
    """``count`` stumps with thresholds at random quantiles of the rows.

    For unlabeled rows (an array or an ``UnlabeledSample``) stumps come in
    (s, -s) polarity pairs on the same (feature, threshold); an odd ``count``
    leaves the last stump with a random polarity.

    For a ``LabeledSample`` every stump gets its own (feature, threshold).
    Stumps 0 and 1 still form a polarity pair, and the rest take the polarity
    with the lower error on the labeled rows (+1 on ties).
    """
    if int(count) != count or count < 1:
        raise ConfigError(f"stump count must be an integer >= 1, got {count}")
    labels = rows.y if isinstance(rows, LabeledSample) else None
    x = np.asarray(rows.x if hasattr(rows, "x") else rows, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] == 0:
        raise PacBayesDAError("stump thresholds need at least one row")
    rng = _rng(seed)
    n_base = count if labels is not None else (count + 1) // 2
    feats = rng.integers(0, x.shape[1], n_base)
    qs = rng.random(n_base)
    thr = np.array([np.quantile(x[:, j], q) for j, q in zip(feats, qs)])
    if labels is not None:
        if count >= 2:
            feats[1], thr[1] = feats[0], thr[0]
        pool = StumpPool(feats, thr, np.ones(count, dtype=np.int8))
        err = np.mean(pool.predict(x) != labels[None, :], axis=1)
        polarities = np.where(err <= 0.5, 1, -1).astype(np.int8)
        if count >= 2:
            polarities[1] = -polarities[0]
        return StumpPool(feats, thr, polarities)
    features = np.repeat(feats, 2)[:count]
    thresholds = np.repeat(thr, 2)[:count]
    polarities = np.tile(np.array([1, -1], dtype=np.int8), n_base)[:count]
    if count % 2:
        polarities[-1] = rng.choice(np.array([-1, 1], dtype=np.int8))
    return StumpPool(features, thresholds, polarities)


__all__ = [
    "KINDS",
    "DatasetSpec",
    "StumpPool",
    "chi2_perturbed_pair",
    "label_flip_pair",
    "random_domain",
    "random_finite_instance",
    "rotate",
    "rotated_moons",
    "stump_pool",
]
