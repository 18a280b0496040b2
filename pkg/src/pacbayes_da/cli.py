"""Command-line front end: ``verify``, ``bounds``, ``train`` and ``gen``.

Exit codes: 0 success, 1 a verification found a violation, 2 usage or
configuration error.  Stochastic subcommands need ``--seed`` or the
``PACBAYES_DA_SEED`` environment variable (the flag wins).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import core, datagen, estimators, verify
from .bounds import BoundConfig, bound_theorem1, bound_theorem2, bound_theorem3, prop4_lambda_bound, reports_to_csv
from .core import FiniteDomain, Posterior, VoterMatrix
from .errors import ConfigError, PacBayesDAError
from .learner import LearnerConfig, heldout_risks, train

SEED_ENV = "PACBAYES_DA_SEED"


class UsageError(Exception):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write(path, text: str) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _seed(args, required: bool) -> int | None:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None
    if required:
        raise UsageError(f"this subcommand is stochastic: pass --seed or set {SEED_ENV}")
    return None


def _check_paths(inputs, outputs) -> None:
    ins = {Path(p).resolve() for p in inputs if p}
    outs = [Path(p).resolve() for p in outputs if p and str(p) != "-"]
    if len(set(outs)) != len(outs) or ins & set(outs):
        raise UsageError("input and output paths must be distinct")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help=f"master seed (default: ${SEED_ENV})")
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def _bound_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--lambda-mode", choices=("exact", "prop4", "constant"), default="constant")
    p.add_argument("--lambda-value", type=float, default=0.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pacbayes-da", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run a randomized verification campaign")
    p.add_argument("--suite", choices=verify.SUITES, required=True)
    p.add_argument("--instances", type=int, default=1000, help="instances (trials for thm3-coverage)")
    p.add_argument("--m", type=int, default=100, help="sample size for thm3-coverage")
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--slack", type=float, default=0.03)
    p.add_argument("--posteriors", type=int, default=10, help="random test posteriors besides the prior")
    p.add_argument("--workers", type=int, default=1)
    _common(p)

    p = sub.add_parser("bounds", help="evaluate bounds exactly (domain JSON) or from samples (CSV)")
    p.add_argument("--source-domain")
    p.add_argument("--target-domain")
    p.add_argument("--voters", help="voter table JSON for exact mode")
    p.add_argument("--source", help="labeled source CSV")
    p.add_argument("--target", help="unlabeled target CSV")
    p.add_argument("--pool-size", type=int, default=50, help="number of stumps in empirical mode")
    p.add_argument("--rho", help="posterior JSON (default: the prior)")
    p.add_argument("--prior", help="prior JSON (default: uniform)")
    _bound_args(p)
    _common(p)

    p = sub.add_parser("train", help="learn a posterior over a stump pool")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--heldout", help="labeled target CSV used only for evaluation")
    p.add_argument("--pool-size", type=int, default=50)
    p.add_argument("--prior", help="prior JSON (default: uniform)")
    p.add_argument("--step-size", type=float, default=0.1)
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--tolerance", type=float, default=1e-8)
    p.add_argument("--no-multistart", action="store_true", help="run from the prior only")
    _bound_args(p)
    _common(p)

    p = sub.add_parser("gen", help="generate datasets")
    p.add_argument("--kind", choices=datagen.KINDS, required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--points", type=int, default=4)
    p.add_argument("--voters", type=int, default=3)
    p.add_argument("--concentration", type=float, default=1.0)
    p.add_argument("--magnitude", type=float, default=0.5)
    p.add_argument("--angle", type=float, default=30.0)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--noise-rate", type=float, default=0.1)
    p.add_argument("--m-source", type=int, default=300)
    p.add_argument("--m-target", type=int, default=300)
    p.add_argument("--seed", type=int, default=None, help=f"master seed (default: ${SEED_ENV})")
    return parser


# --------------------------------------------------------------------------
# subcommands


def cmd_verify(args) -> int:
    seed = _seed(args, required=True)
    if args.instances < 1:
        raise UsageError("--instances must be >= 1")
    kw = {}
    if args.suite == "thm3-coverage":
        kw = dict(m=args.m, delta=args.delta, slack=args.slack, n_posteriors=args.posteriors, workers=args.workers)
    res = verify.run_suite(args.suite, args.instances, seed, **kw)
    config = {"command": "verify", "suite": args.suite, "instances": args.instances, "seed": seed, **kw}
    config.pop("workers", None)
    if args.format == "json":
        _write(args.out, _dump({"config": config, "summary": res.summary, "passed": res.passed, "rows": res.rows}))
    else:
        cols = list(res.rows[0])
        lines = [",".join(cols)] + [",".join(repr(r[c]) if isinstance(r[c], float) else str(r[c]) for c in cols) for r in res.rows]
        _write(args.out, "\n".join(lines) + "\n")
        summary_path = None if args.out in (None, "-") else f"{args.out}.summary.json"
        _write(summary_path, _dump({"config": config, "summary": res.summary, "passed": res.passed}))
    print(f"{args.suite}: {'PASS' if res.passed else 'VIOLATION'} {json.dumps(res.summary, sort_keys=True)}", file=sys.stderr)
    return 0 if res.passed else 1


def _posterior(path, n, default=None) -> Posterior:
    if path is None:
        return default if default is not None else Posterior.uniform(n)
    rho = core.load_json(path, Posterior)
    if rho.n != n:
        raise ConfigError(f"{path}: {rho.n} weights for {n} voters")
    return rho


def _subsample(pair: estimators.SamplePair, seed: int):
    ms, mt = pair.source.m, pair.target.m
    if ms == mt:
        return pair, None
    m = min(ms, mt)
    rng = np.random.default_rng([seed, 1])
    record = {"m_source": ms, "m_target": mt, "m": m, "seed": seed}
    src, tgt = pair.source, pair.target
    if ms > m:
        src = src.take(np.sort(rng.choice(ms, m, replace=False)))
        record["subsampled"] = "source"
    else:
        tgt = tgt.take(np.sort(rng.choice(mt, m, replace=False)))
        record["subsampled"] = "target"
    return estimators.SamplePair(src, tgt), record


def _load_pair(args):
    source = estimators.read_csv(args.source, require_labels=True)
    target = estimators.read_csv(args.target)
    if isinstance(target, estimators.LabeledSample):
        target = target.unlabeled()
    return estimators.SamplePair(source, target)


def _pool(pair, count, seed):
    rows = np.vstack([pair.source.x, pair.target.x])
    return datagen.stump_pool(rows, count, [seed, 0])


def cmd_bounds(args) -> int:
    exact = args.source is None and args.target is None
    inputs = [args.source_domain, args.target_domain, args.voters, args.source, args.target, args.rho, args.prior]
    _check_paths(inputs, [args.out])
    if exact:
        if not (args.source_domain and args.target_domain and args.voters):
            raise UsageError("exact mode needs --source-domain, --target-domain and --voters (or give --source/--target CSVs)")
        source = core.load_json(args.source_domain, FiniteDomain)
        target = core.load_json(args.target_domain, FiniteDomain)
        voters = core.load_json(args.voters, VoterMatrix)
        rho = _posterior(args.rho, voters.n)
        reports = [bound_theorem1(source, target, voters, rho), bound_theorem2(source, target, voters, rho)]
        extra = {}
        try:
            extra["prop4_lambda_bound"] = prop4_lambda_bound(source, target, voters, rho)
            extra["chi_squared"] = core.chi_squared(target, source)
        except PacBayesDAError as exc:
            extra["prop4_error"] = str(exc)
            print(f"prop4: {exc}", file=sys.stderr)
        sup, half = core.hdh_sup_distance(source, target, voters)
        extra.update(hdh_sup=sup, hdh_half_sup=half)
        config = {"command": "bounds", "mode": "exact", "source_domain": args.source_domain,
                  "target_domain": args.target_domain, "voters": args.voters, "rho": rho.weights.tolist()}
        for rep in reports:
            rep.config = config
    else:
        if not (args.source and args.target):
            raise UsageError("empirical mode needs both --source and --target")
        seed = _seed(args, required=True)
        pair, sub_record = _subsample(_load_pair(args), seed)
        pool = _pool(pair, args.pool_size, seed)
        pi = _posterior(args.prior, len(pool))
        rho = _posterior(args.rho, len(pool), default=pi)
        bc = BoundConfig(args.c, args.alpha, args.delta, pair.source.m, args.lambda_mode, args.lambda_value)
        domains = {}
        if args.lambda_mode != "constant":
            domains = _domains_with_features(args, pool)
        rep = bound_theorem3(pair, pool, rho, pi, bc, **domains)
        rep.config = {**rep.config, "command": "bounds", "mode": "empirical", "source": args.source,
                      "target": args.target, "pool_size": args.pool_size, "seed": seed,
                      "subsampling": sub_record, "prior": pi.weights.tolist(), "rho": rho.weights.tolist()}
        reports, extra = [rep], {}
    if args.format == "json":
        _write(args.out, _dump({"reports": [r.to_dict() for r in reports], "extra": extra}))
    else:
        _write(args.out, reports_to_csv(reports))
    return 0


def _domains_with_features(args, pool):
    if not (args.source_domain and args.target_domain):
        raise ConfigError(
            f"lambda mode {args.lambda_mode!r} needs the true domains: pass --source-domain/--target-domain "
            "JSON files whose points carry feature vectors"
        )
    source = core.load_json(args.source_domain, FiniteDomain)
    target = core.load_json(args.target_domain, FiniteDomain)
    if source.features is None:
        raise ConfigError("domain JSON has no 'features'; cannot evaluate the voter pool on it")
    return {"source_domain": source, "target_domain": target,
            "domain_voters": estimators.evaluate_voters(source.features, pool)}


def cmd_train(args) -> int:
    seed = _seed(args, required=True)
    _check_paths([args.source, args.target, args.heldout, args.prior], [args.out])
    pair, sub_record = _subsample(_load_pair(args), seed)
    pool = _pool(pair, args.pool_size, seed)
    pi = _posterior(args.prior, len(pool))
    cfg = LearnerConfig(
        c=args.c, alpha=args.alpha, delta=args.delta, m=pair.source.m, step_size=args.step_size,
        max_iters=args.max_iters, tolerance=args.tolerance, lambda_mode=args.lambda_mode,
        lambda_value=args.lambda_value, multistart=not args.no_multistart,
    )
    if args.lambda_mode != "constant":
        raise ConfigError("train reports use --lambda-mode constant (true domains are unknown for CSV samples)")
    result = train(pair, pool, pi, cfg)
    result.extras["config"] = {"command": "train", "source": args.source, "target": args.target,
                               "heldout": args.heldout, "pool_size": args.pool_size, "seed": seed,
                               "subsampling": sub_record, **result.report.config}
    result.extras["pool"] = pool.to_dict()
    if args.heldout:
        held = estimators.read_csv(args.heldout, require_labels=True)
        result.extras["heldout"] = {
            "trained": heldout_risks(held, pool, result.posterior),
            "uniform": heldout_risks(held, pool, Posterior.uniform(len(pool))),
        }
    if args.format == "json":
        _write(args.out, result.to_json() + "\n")
    else:
        _write(args.out, reports_to_csv([result.report]))
    return 0


def cmd_gen(args) -> int:
    seed = _seed(args, required=True)
    spec = datagen.DatasetSpec(
        args.kind, n_points=args.points, n_voters=args.voters, concentration=args.concentration,
        magnitude=args.magnitude if args.kind == "chi2_perturbed" else 0.0, angle=args.angle, noise=args.noise,
        noise_rate=args.noise_rate, m_source=args.m_source, m_target=args.m_target,
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    if spec.kind == "random_finite":
        s, t, v, rho = datagen.random_finite_instance(spec, seed)
        files = {"source.json": s.to_dict(), "target.json": t.to_dict(), "voters.json": v.to_dict(),
                 "rho.json": rho.to_dict()}
    elif spec.kind in ("chi2_perturbed", "label_flip"):
        rng = np.random.default_rng([seed, 0])
        base = datagen.random_domain(spec.n_points, rng, spec.concentration)
        if spec.kind == "chi2_perturbed":
            s, t, chi2 = datagen.chi2_perturbed_pair(base, spec.magnitude, [seed, 1])
            files["chi2.json"] = {"chi_squared": chi2, "magnitude": spec.magnitude}
        else:
            s, t = datagen.label_flip_pair(base, spec.noise_rate)
        table = rng.choice(np.array([-1, 1]), size=(spec.n_voters, spec.n_points))
        files.update({"source.json": s.to_dict(), "target.json": t.to_dict(),
                      "voters.json": VoterMatrix(table, s.points).to_dict()})
    else:
        pair, held = datagen.rotated_moons(spec.m_source, spec.m_target, spec.angle, spec.noise, seed)
        estimators.write_csv(out / "source.csv", pair.source)
        estimators.write_csv(out / "target.csv", pair.target)
        estimators.write_csv(out / "target_heldout.csv", held)
    for name, data in files.items():
        _write(out / name, _dump(data))
    _write(out / "manifest.json", _dump({"command": "gen", "seed": seed, "spec": spec.to_dict()}))
    return 0


COMMANDS = {"verify": cmd_verify, "bounds": cmd_bounds, "train": cmd_train, "gen": cmd_gen}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        return COMMANDS[args.command](args)
    except (UsageError, PacBayesDAError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
