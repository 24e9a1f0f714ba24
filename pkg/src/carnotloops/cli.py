"""Unified command-line entry point.

Subcommands: basis, signature, lift, sample, flow, holonomy, delta, moments,
verify.  Stochastic subcommands require an explicit --seed (verify has a
fixed documented default so its reports are reproducible out of the box).
Config files are JSON; flags override config keys; unknown keys are
rejected.  Outputs are byte-identical for identical (config, seed, version),
independent of the worker count, which is deliberately not echoed.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__, holonomy, loops, sde, tensoralg, verify
from .carnot import CarnotGroup
from .freelie import DimensionCapError, get_basis, witt_dimension
from .paths import read_path_file, write_path_file
from .util import derive_seed, substream


def _fail(msg: str, code: int = 1) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def _dump_json(obj, filename: str | None):
    text = json.dumps(obj, sort_keys=True, indent=1)
    if filename:
        with open(filename, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


# ---------------------------------------------------------------------------
# config handling

def _load_config(args, allowed: set[str], required: set[str] = frozenset()) -> dict:
    cfg = {}
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
        unknown = set(cfg) - allowed
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)} (allowed: {sorted(allowed)})")
    for key in allowed:
        flag = getattr(args, key, None)
        if flag is not None:
            cfg[key] = flag  # flags win
    missing = required - set(cfg)
    if missing:
        raise ValueError(f"missing config keys: {sorted(missing)}")
    return cfg


def _sampler_config(block: dict | None, seed: int) -> loops.SamplerConfig:
    block = dict(block or {})
    unknown = set(block) - {"m", "eps", "rho", "burnin", "thinning", "sigma0",
                            "indep_prob", "max_tries", "adapt"}
    if unknown:
        raise ValueError(f"unknown sampler keys: {sorted(unknown)}")
    return loops.SamplerConfig(seed=seed, **block)


# ---------------------------------------------------------------------------
# subcommands

def _cmd_basis(args) -> int:
    basis = get_basis(args.d, args.step, max_dim=None if args.no_cap else 1000)
    dims = {j: witt_dimension(args.d, j) for j in range(1, args.step + 1)}
    if args.json:
        _dump_json({"d": args.d, "step": args.step,
                    "level_dims": dims, "total_dim": basis.dim,
                    "words": ["".join(map(str, w)) for w in basis.words]}, None)
        return 0
    print(f"free Lie algebra over d={args.d}, truncated at step {args.step}: "
          f"dimension {basis.dim}")
    for j in range(1, args.step + 1):
        words = " ".join("".join(map(str, w)) for w in basis.by_level[j])
        print(f"level {j} (dim {dims[j]}): {words}")
    return 0


def _cmd_signature(args) -> int:
    path = read_path_file(args.path)
    if args.lyndon or args.logsig:
        series = tensoralg.log_signature(path, args.level)
        if args.lyndon:
            for w in get_basis(path.d, args.level, max_dim=None).words:
                print("".join(map(str, w)), repr(float(series.coeffs.get(w, 0.0))))
            return 0
        tensor = tensoralg.lie_to_tensor(series)
    else:
        tensor = tensoralg.path_signature(path, args.level)
    for k in range(args.level + 1):
        if k == 0:
            print(f"level 0: {tensor.levels[0]!r}")
            continue
        entries = " ".join(repr(float(v)) for v in tensor.levels[k])
        print(f"level {k}: {entries}")
    return 0


def _cmd_lift(args) -> int:
    path = read_path_file(args.path)
    group = CarnotGroup(path.d, args.step)
    lifted = group.lift_path(path)
    labels = ["".join(map(str, w)) for w in group.words]
    if args.json:
        _dump_json({"d": path.d, "step": args.step, "words": labels,
                    "times": [repr(float(t)) for t in path.times],
                    "coords": [[repr(float(v)) for v in row] for row in lifted]}, None)
        return 0
    print("t " + " ".join(labels))
    for t, row in zip(path.times, lifted):
        print(" ".join([repr(float(t))] + [repr(float(v)) for v in row]))
    return 0


def _cmd_sample(args) -> int:
    cfg = loops.SamplerConfig(m=args.m, eps=args.eps, seed=args.seed)
    records = []
    residuals = []
    info: dict = {"sampler": args.sampler}
    if args.sampler == "bridge":
        if args.step != 1:
            return _fail("bridge sampler is exact only for --step 1")
        vals = loops.bridge_values_batch(args.d, args.T, args.m, args.count,
                                         args.seed, workers=args.workers)
        residuals = [0.0] * args.count
    elif args.sampler == "reject":
        vals, res, stats = loops.rejection_values_batch(
            args.d, args.step, args.T, cfg, args.count, args.seed, workers=args.workers)
        residuals = res.tolist()
        info.update(stats)
    elif args.sampler == "mcmc":
        vals, res, diag = loops.mcmc_values_batch(
            args.d, args.step, args.T, cfg, args.count, args.seed)
        residuals = res.tolist()
        info.update(diag)
    else:
        return _fail(f"unknown sampler {args.sampler!r}", 2)
    times = np.linspace(0.0, args.T, args.m + 1)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(f"# carnotloops samples d={args.d} N={args.step} T={args.T!r} "
                 f"m={args.m} count={args.count}\n")
        for idx in range(args.count):
            fh.write(f"# sample {idx} residual {residuals[idx]!r}\n")
            fh.write(f"{args.d} {args.m}\n")
            for t, x in zip(times, vals[idx]):
                fh.write(" ".join([repr(float(t))] + [repr(float(v)) for v in x]) + "\n")
            records.append(idx)
    summary = {
        "config": {"d": args.d, "step": args.step, "T": args.T, "m": args.m,
                   "eps": args.eps, "count": args.count, "sampler": args.sampler,
                   "seed": args.seed},
        "sampler_info": info,
        "residuals": {"mean": float(np.mean(residuals)), "max": float(np.max(residuals))},
        "version": __version__,
    }
    _dump_json(summary, args.out + ".summary.json")
    print(f"wrote {len(records)} samples to {args.out}")
    return 0


def _cmd_flow(args) -> int:
    vf = sde.resolve_fields(args.vf)
    path = read_path_file(args.path)
    x0 = [float(v) for v in args.x0.split(",")]
    result = sde.integrate_flow(vf, x0, path, substeps=args.substeps,
                                error_estimate=True)
    print("terminal " + " ".join(repr(float(v)) for v in result.state))
    print(f"diagnostics {json.dumps(result.diagnostics, sort_keys=True)}")
    return 0


_HOLONOMY_KEYS = {"vf", "f", "x0", "N", "T_grid", "M", "sampler", "sampler_config",
                  "seed", "substeps", "antithetic"}


def _cmd_holonomy(args) -> int:
    cfg = _load_config(args, _HOLONOMY_KEYS, required={"vf", "f", "x0", "N", "T_grid", "M", "seed"})
    vf = sde.resolve_fields(cfg["vf"])
    seed = int(cfg["seed"])
    scfg = _sampler_config(cfg.get("sampler_config"), seed)
    grid = [float(t) for t in cfg["T_grid"]]
    fit = holonomy.slope_fit(
        vf, cfg["f"], [float(v) for v in cfg["x0"]], int(cfg["N"]), grid,
        int(cfg["M"]), scfg, seed=seed, sampler=cfg.get("sampler", "auto"),
        antithetic=bool(cfg.get("antithetic", False)),
        substeps=int(cfg.get("substeps", 2)), workers=args.workers)
    rows = ["T,estimate,stderr,M"]
    for est in fit.estimates:
        rows.append(f"{est.T!r},{est.value!r},{est.stderr!r},{est.M}")
    csv_text = "\n".join(rows) + "\n"
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(csv_text)
    else:
        print(csv_text, end="")
    report = {
        "config": {k: cfg[k] for k in sorted(cfg)},
        "fit": {
            "exponent": fit.exponent, "exponent_se": fit.exponent_se,
            "constant": fit.constant, "constant_se": fit.constant_se,
            "inconclusive": fit.inconclusive,
            "diffs": [float(v) for v in fit.diffs],
            "stderrs": [float(v) for v in fit.stderrs],
        },
        "version": __version__,
    }
    _dump_json(report, args.out)
    return 0


_DELTA_KEYS = {"vf", "f", "x0", "N", "M", "sampler_config", "seed", "use_monte_carlo"}


def _cmd_delta(args) -> int:
    cfg = _load_config(args, _DELTA_KEYS, required={"vf", "f", "x0", "N"})
    vf = sde.resolve_fields(cfg["vf"])
    x0 = [float(v) for v in cfg["x0"]]
    N = int(cfg["N"])
    moments = None
    if cfg.get("use_monte_carlo"):
        if "seed" not in cfg:
            return _fail("Monte Carlo delta needs a seed (no silent entropy)")
        seed = int(cfg["seed"])
        scfg = _sampler_config(cfg.get("sampler_config"), seed)
        moments = holonomy.loop_moment_matrix(vf.d, N, int(cfg.get("M", 10_000)),
                                              scfg, seed=seed, workers=args.workers)
    value = holonomy.delta_apply(vf, cfg["f"], x0, N, moments=moments)
    report = {"config": {k: cfg[k] for k in sorted(cfg)}, "delta": value,
              "coefficients": "monte-carlo" if moments is not None else "exact",
              "version": __version__}
    _dump_json(report, args.out)
    return 0


_MOMENTS_KEYS = {"d", "N", "M", "sampler", "sampler_config", "seed"}


def _cmd_moments(args) -> int:
    cfg = _load_config(args, _MOMENTS_KEYS, required={"d", "N", "M", "seed"})
    seed = int(cfg["seed"])
    scfg = _sampler_config(cfg.get("sampler_config"), seed)
    mm = holonomy.loop_moment_matrix(int(cfg["d"]), int(cfg["N"]), int(cfg["M"]),
                                     scfg, seed=seed,
                                     sampler=cfg.get("sampler", "auto"),
                                     workers=args.workers)
    words = ["".join(map(str, w)) for w in mm.words]
    rows = ["I,J,moment,stderr"]
    for a, wa in enumerate(words):
        for b, wb in enumerate(words):
            rows.append(f"{wa},{wb},{mm.matrix[a, b]!r},{mm.stderr[a, b]!r}")
    csv_text = "\n".join(rows) + "\n"
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(csv_text)
    else:
        print(csv_text, end="")
    report = {
        "config": {k: cfg[k] for k in sorted(cfg)},
        "words": words,
        "matrix": [[float(v) for v in row] for row in mm.matrix],
        "stderr": [[float(v) for v in row] for row in mm.stderr],
        "first_moments": [float(v) for v in mm.first_moments],
        "first_stderr": [float(v) for v in mm.first_stderr],
        "version": __version__,
    }
    _dump_json(report, args.out)
    return 0


def _cmd_verify(args) -> int:
    report = verify.build_report(quick=not args.full, seed=args.seed,
                                 workers=args.workers, verbose_print=print)
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(verify.report_bytes(report))
    print(f"{sum(c['passed'] for c in report['criteria'])}/{len(report['criteria'])} criteria passed")
    return 0 if report["all_passed"] else 1


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="carnotloops", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("basis", help="print the Lyndon basis and level dimensions")
    q.add_argument("--d", type=int, required=True)
    q.add_argument("--step", type=int, required=True)
    q.add_argument("--json", action="store_true")
    q.add_argument("--no-cap", action="store_true", help="disable the dimension cap")
    q.set_defaults(fn=_cmd_basis)

    q = sub.add_parser("signature", help="signature of a path file")
    q.add_argument("--path", required=True)
    q.add_argument("--level", type=int, required=True)
    q.add_argument("--logsig", action="store_true", help="print the tensor logarithm")
    q.add_argument("--lyndon", action="store_true", help="print Lyndon log-signature coordinates")
    q.set_defaults(fn=_cmd_signature)

    q = sub.add_parser("lift", help="lift a path into the free Carnot group")
    q.add_argument("--path", required=True)
    q.add_argument("--step", type=int, required=True)
    q.add_argument("--json", action="store_true")
    q.set_defaults(fn=_cmd_lift)

    q = sub.add_parser("sample", help="sample N-step Brownian loops")
    q.add_argument("--d", type=int, required=True)
    q.add_argument("--step", type=int, required=True)
    q.add_argument("--T", type=float, required=True)
    q.add_argument("--m", type=int, required=True)
    q.add_argument("--eps", type=float, default=0.05)
    q.add_argument("--count", type=int, required=True)
    q.add_argument("--sampler", choices=["bridge", "reject", "mcmc"], required=True)
    q.add_argument("--seed", type=int, required=True)
    q.add_argument("--out", required=True)
    q.add_argument("--workers", type=int, default=1)
    q.set_defaults(fn=_cmd_sample)

    q = sub.add_parser("flow", help="integrate a Stratonovich flow along a path file")
    q.add_argument("--vf", required=True, help="vector-field file or builtin name")
    q.add_argument("--x0", required=True, help="comma-separated initial state")
    q.add_argument("--path", required=True)
    q.add_argument("--substeps", type=int, default=8)
    q.set_defaults(fn=_cmd_flow)

    for name, fn, keys in (("holonomy", _cmd_holonomy, _HOLONOMY_KEYS),
                           ("delta", _cmd_delta, _DELTA_KEYS),
                           ("moments", _cmd_moments, _MOMENTS_KEYS)):
        q = sub.add_parser(name, help=f"{name} estimation from a JSON config")
        q.add_argument("--config", help="JSON config file")
        q.add_argument("--out", help="JSON report path (stdout if omitted)")
        q.add_argument("--csv", help="CSV output path (stdout if omitted)")
        q.add_argument("--workers", type=int, default=1)
        q.add_argument("--seed", type=int, dest="seed")
        if "M" in keys:
            q.add_argument("--M", type=int, dest="M")
        if "N" in keys:
            q.add_argument("--N", type=int, dest="N")
        q.set_defaults(fn=fn)

    q = sub.add_parser("verify", help="run the acceptance suite at reduced scale")
    q.add_argument("--quick", action="store_true",
                   help="quick profile (the default; kept for explicitness)")
    q.add_argument("--full", action="store_true", help="full acceptance scale")
    q.add_argument("--seed", type=int, default=verify.DEFAULT_VERIFY_SEED)
    q.add_argument("--workers", type=int, default=1)
    q.add_argument("--out", help="write the JSON report here")
    q.set_defaults(fn=_cmd_verify)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, DimensionCapError, FileNotFoundError,
            loops.IterationCapError, sde.SaturationError,
            sde.IntegrationBlowupError, json.JSONDecodeError) as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
