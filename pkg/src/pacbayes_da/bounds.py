"""Term-by-term evaluation of the domain adaptation bounds.

Report term names are fixed:

``theorem2`` (exact)
    ``source_gibbs_risk``, ``half_domain_disagreement``, ``lambda_rho``
``theorem1`` (exact, the earlier bound with ``rho*_T``)
    ``source_gibbs_risk``, ``domain_disagreement``, ``lambda_rho_rho_star``
``theorem3`` (PAC-Bayesian, from samples)
    ``source_risk_term``, ``disagreement_term``, ``complexity_term``,
    ``lambda_term``, ``constant_term``

The right-hand side of a report is always the plain sum of its terms.
Anything else (true target risk, raw divergences, constants) goes to
``details`` and is never summed.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import core
from .core import FiniteDomain, Posterior, VoterMatrix
from .errors import AbsoluteContinuityError, AlignmentError, ConfigError
from .estimators import (
    LabeledSample,
    SamplePair,
    TablePool,
    UnlabeledSample,
    empirical_domain_disagreement,
    empirical_gibbs_risk,
    evaluate_voters,
)

LAMBDA_MODES = ("exact", "prop4", "constant")


@dataclass(frozen=True)
class BoundConfig:
    c: float = 1.0
    alpha: float = 1.0
    delta: float = 0.05
    m: int = 1
    lambda_mode: str = "constant"
    lambda_value: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.c) and self.c > 0):
            raise ConfigError(f"c must be > 0, got {self.c}")
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise ConfigError(f"alpha must be > 0, got {self.alpha}")
        if not (0 < self.delta <= 1):
            raise ConfigError(f"delta must lie in (0, 1], got {self.delta}")
        if int(self.m) != self.m or self.m < 1:
            raise ConfigError(f"m must be a positive integer, got {self.m}")
        if self.lambda_mode not in LAMBDA_MODES:
            raise ConfigError(f"lambda_mode must be one of {LAMBDA_MODES}, got {self.lambda_mode!r}")
        if not (math.isfinite(self.lambda_value) and self.lambda_value >= 0):
            raise ConfigError(f"constant lambda must be >= 0, got {self.lambda_value}")


@dataclass
class BoundReport:
    kind: str
    terms: dict
    lambda_source: str
    details: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @property
    def rhs(self) -> float:
        return float(sum(self.terms.values()))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["rhs"] = self.rhs
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def csv_row(self) -> dict:
        row = {"kind": self.kind, "rhs": self.rhs, "lambda_source": self.lambda_source}
        row.update({f"term.{k}": v for k, v in self.terms.items()})
        row.update({f"detail.{k}": v for k, v in self.details.items() if isinstance(v, (int, float))})
        return row


def reports_to_csv(reports: Sequence[BoundReport]) -> str:
    """One CSV row per report; columns are the union of all report fields in first-seen order."""
    rows = [r.csv_row() for r in reports]
    cols = list(dict.fromkeys(k for row in rows for k in row))
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


# --------------------------------------------------------------------------
# constants and divergences


def catoni_constants(c: float, alpha: float) -> tuple[float, float]:
    """``c' = c / (1 - e^-c)`` and ``alpha' = 2 alpha / (1 - e^(-2 alpha))``."""
    if not (math.isfinite(c) and c > 0) or not (math.isfinite(alpha) and alpha > 0):
        raise ConfigError(f"c and alpha must be positive, got c={c}, alpha={alpha}")
    return c / -math.expm1(-c), 2 * alpha / -math.expm1(-2 * alpha)


def kl_categorical(rho: Posterior, pi: Posterior) -> float:
    if rho.n != pi.n:
        raise AlignmentError(f"rho has {rho.n} entries, pi has {pi.n}")
    r, p = rho.weights, pi.weights
    supp = r > 0
    if np.any(p[supp] == 0):
        raise AbsoluteContinuityError("rho puts mass on voters where the prior is zero")
    return max(float(np.sum(r[supp] * np.log(r[supp] / p[supp]))), 0.0)


# --------------------------------------------------------------------------
# exact bounds


def bound_theorem2(source: FiniteDomain, target: FiniteDomain, voters: VoterMatrix, rho: Posterior) -> BoundReport:
    risk_s = core.gibbs_risk(source, voters, rho)
    dis = core.domain_disagreement(source, target, voters, rho)
    e_s = core.expected_joint_error(source, voters, rho)
    e_t = core.expected_joint_error(target, voters, rho)
    return BoundReport(
        kind="theorem2",
        terms={
            "source_gibbs_risk": risk_s,
            "half_domain_disagreement": 0.5 * dis,
            "lambda_rho": abs(e_t - e_s),
        },
        lambda_source="exact",
        details={
            "target_gibbs_risk": core.gibbs_risk(target, voters, rho),
            "domain_disagreement": dis,
            "source_joint_error": e_s,
            "target_joint_error": e_t,
        },
    )


def bound_theorem1(source: FiniteDomain, target: FiniteDomain, voters: VoterMatrix, rho: Posterior) -> BoundReport:
    rho_star = core.best_target_posterior(target, voters)
    risk_s = core.gibbs_risk(source, voters, rho)
    dis = core.domain_disagreement(source, target, voters, rho)
    star_risk = core.gibbs_risk(target, voters, rho_star)
    cross_t = core.expected_disagreement(core.pair_disagreement(target, voters), rho, rho_star)
    cross_s = core.expected_disagreement(core.pair_disagreement(source, voters), rho, rho_star)
    return BoundReport(
        kind="theorem1",
        terms={
            "source_gibbs_risk": risk_s,
            "domain_disagreement": dis,
            "lambda_rho_rho_star": star_risk + cross_t + cross_s,
        },
        lambda_source="exact",
        details={
            "target_gibbs_risk": core.gibbs_risk(target, voters, rho),
            "best_target_gibbs_risk": star_risk,
            "target_cross_disagreement": cross_t,
            "source_cross_disagreement": cross_s,
            "best_target_posterior": rho_star.weights.tolist(),
        },
    )


def prop4_lambda_bound(source: FiniteDomain, target: FiniteDomain, voters: VoterMatrix, rho: Posterior) -> float:
    """``sqrt(chi2(P_T || P_S) * e_S)``; requires shared support."""
    chi2 = core.chi_squared(target, source)
    return math.sqrt(chi2 * core.expected_joint_error(source, voters, rho))


# --------------------------------------------------------------------------
# PAC-Bayesian bound from samples


def theorem3_terms(source_risk: float, dis: float, kl: float, lam: float, config: BoundConfig) -> dict:
    cp, ap = catoni_constants(config.c, config.alpha)
    return {
        "source_risk_term": cp * source_risk,
        "disagreement_term": ap * 0.5 * dis,
        "complexity_term": (cp / config.c + ap / config.alpha) * (kl + math.log(3 / config.delta)) / config.m,
        "lambda_term": lam,
        "constant_term": 0.5 * (ap - 1),
    }


def _lambda_value(config, rho, source_domain, target_domain, domain_voters):
    if config.lambda_mode == "constant":
        return config.lambda_value
    if source_domain is None or target_domain is None or domain_voters is None:
        raise ConfigError(f"lambda_mode={config.lambda_mode!r} needs the true source/target domains and their voter table")
    if config.lambda_mode == "exact":
        return core.lambda_rho(source_domain, target_domain, domain_voters, rho)
    return prop4_lambda_bound(source_domain, target_domain, domain_voters, rho)


def bound_theorem3(
    pair: SamplePair,
    voters,
    rho: Posterior,
    pi: Posterior,
    config: BoundConfig,
    *,
    source_domain: FiniteDomain | None = None,
    target_domain: FiniteDomain | None = None,
    domain_voters: VoterMatrix | None = None,
) -> BoundReport:
    """Evaluate the PAC-Bayesian bound on a sample pair.

    ``voters`` is a ``VoterPool`` or a ``(source_matrix, target_matrix)``
    tuple.  Both samples must have exactly ``config.m`` rows.  The exact and
    prop4 lambda modes need the true domains and the voter table on them.
    """
    if pair.source.m != config.m or pair.target.m != config.m:
        raise AlignmentError(
            f"sample sizes (m_S={pair.source.m}, m_t={pair.target.m}) must both equal m={config.m}"
        )
    kl = kl_categorical(rho, pi)
    vs, vt = (evaluate_voters(pair.source.x, voters), evaluate_voters(pair.target.x, voters)) if not isinstance(voters, tuple) else voters
    risk = empirical_gibbs_risk(pair.source, vs, rho)
    dis = empirical_domain_disagreement(pair, (vs, vt), rho)
    lam = _lambda_value(config, rho, source_domain, target_domain, domain_voters)
    cp, ap = catoni_constants(config.c, config.alpha)
    details = {
        "c_prime": cp,
        "alpha_prime": ap,
        "empirical_source_gibbs_risk": risk,
        "empirical_domain_disagreement": dis,
        "kl": kl,
        "ln_3_over_delta": math.log(3 / config.delta),
        "m": config.m,
        "lambda_value": lam,
    }
    if source_domain is not None and target_domain is not None and domain_voters is not None:
        details["target_gibbs_risk"] = core.gibbs_risk(target_domain, domain_voters, rho)
    return BoundReport(
        kind="theorem3",
        terms=theorem3_terms(risk, dis, kl, lam, config),
        lambda_source=config.lambda_mode,
        details=details,
        config=asdict(config),
    )


# --------------------------------------------------------------------------
# Monte Carlo coverage


@dataclass
class CoverageResult:
    trials: int
    violations: int
    violation_rate: float
    delta: float
    per_trial: list
    note: str = (
        "finite set of test posteriors: a violation-free run checks a necessary "
        "condition of the simultaneous-over-posteriors statement"
    )

    def to_dict(self) -> dict:
        return asdict(self)


def draw_finite_pair(source: FiniteDomain, target: FiniteDomain, m: int, rng: np.random.Generator) -> SamplePair:
    """Draw ``S ~ P_S^m`` and ``T ~ D_T^m``; features are the point indices."""
    atoms = rng.choice(2 * source.size, size=m, p=source.mass.ravel())
    pts_s, labels = atoms // 2, np.where(atoms % 2 == 1, 1, -1)
    pts_t = rng.choice(target.size, size=m, p=target.marginal)
    return SamplePair(
        LabeledSample(pts_s.astype(np.float64)[:, None], labels),
        UnlabeledSample(pts_t.astype(np.float64)[:, None]),
    )


def _coverage_trial(args):
    source, target, voters, pi, config, posteriors, true_risks, seed, t = args
    rng = np.random.default_rng([seed, t])
    pair = draw_finite_pair(source, target, config.m, rng)
    pool = TablePool(voters)
    mats = (evaluate_voters(pair.source.x, pool), evaluate_voters(pair.target.x, pool))
    worst = -math.inf
    for rho, true_risk in zip(posteriors, true_risks):
        rep = bound_theorem3(
            pair, mats, rho, pi, config,
            source_domain=source, target_domain=target, domain_voters=voters,
        )
        worst = max(worst, true_risk - rep.rhs)
    return {"trial": t, "max_excess": worst, "violated": bool(worst > 0)}


def verify_theorem3_coverage(
    source: FiniteDomain,
    target: FiniteDomain,
    voters: VoterMatrix,
    pi: Posterior,
    config: BoundConfig,
    trials: int,
    test_posteriors: Sequence[Posterior],
    seed: int,
    workers: int = 1,
) -> CoverageResult:
    """Fraction of sampled ``(S, T)`` draws where some test posterior breaks the bound.

    Trial ``t`` uses the generator seeded by ``(seed, t)``, so results do not
    depend on ``workers``.
    """
    if int(trials) != trials or trials < 1:
        raise ConfigError(f"trials must be a positive integer, got {trials}")
    if not test_posteriors:
        raise ConfigError("at least one test posterior is required")
    true_risks = [core.gibbs_risk(target, voters, rho) for rho in test_posteriors]
    jobs = [
        (source, target, voters, pi, config, list(test_posteriors), true_risks, seed, t)
        for t in range(int(trials))
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_coverage_trial, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        rows = [_coverage_trial(j) for j in jobs]
    violations = sum(r["violated"] for r in rows)
    return CoverageResult(int(trials), violations, violations / trials, config.delta, rows)


__all__ = [
    "BoundConfig",
    "BoundReport",
    "CoverageResult",
    "bound_theorem1",
    "bound_theorem2",
    "bound_theorem3",
    "catoni_constants",
    "draw_finite_pair",
    "kl_categorical",
    "prop4_lambda_bound",
    "reports_to_csv",
    "theorem3_terms",
    "verify_theorem3_coverage",
]
