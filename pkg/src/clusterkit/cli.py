"""Command-line entry point.

Exit codes: 0 success, 1 negative finding, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Sequence

from . import _jsonfmt
from .axioms import consistency_sweep, richness_sweep, scale_invariance
from .clustering import (
    DEFAULT_RESTARTS,
    SeedingMode,
    detect_range,
    estimate_hitting_probability,
    hitting_probability_bound,
    mode_for,
)
from .core import (
    Criterion,
    DistanceError,
    DistanceMatrix,
    Partition,
    PartitionError,
    beta,
    quality,
    quality_lower_bound,
)
from .embedding import analyze, embed, euclideanize
from .generators import GenerationError, generate_euclidean, generate_two_valued
from .separability import ORACLE_CAP, brute_force_optimal, certify
from .transforms import TransformKind, TransformSpec, shift_squared, validate_transform

EXIT_OK, EXIT_NEGATIVE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _sizes(text: str) -> list[int]:
    try:
        sizes = [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad --sizes value {text!r}") from exc
    if not sizes or any(s < 2 for s in sizes):
        raise argparse.ArgumentTypeError("--sizes needs comma-separated integers >= 2")
    return sizes


def _emit(report: dict, args: argparse.Namespace, human: str) -> None:
    text = _jsonfmt.dumps(report) + "\n"
    out = getattr(args, "report", None)
    if out:
        Path(out).write_text(text)
    if getattr(args, "human", False):
        sys.stdout.write(human.rstrip() + "\n")
    else:
        sys.stdout.write(text)


def _read_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def _load_matrix(path: str) -> DistanceMatrix:
    p = Path(path)
    if p.is_dir():
        p = p / "matrix.json"
    try:
        return DistanceMatrix.load(p)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        raise UsageError(f"malformed matrix {p}: {exc}") from exc


def _load_partition(path: str) -> Partition:
    p = Path(path)
    if p.is_dir():
        p = p / "partition.json"
    try:
        return Partition.from_dict(_read_json(p))
    except PartitionError as exc:
        raise UsageError(f"malformed partition {p}: {exc}") from exc


def _bundle_criterion(bundle: Path, default: str) -> Criterion:
    cert_path = bundle / "certificate.json"
    if cert_path.exists():
        return Criterion(_read_json(cert_path).get("criterion", default))
    return Criterion(default)


# ---------------------------------------------------------------------------
# verbs


def cmd_generate(args: argparse.Namespace) -> int:
    criterion = Criterion(args.criterion)
    meta: dict = {"sizes": args.sizes, "criterion": criterion.value, "seed": args.seed}
    coords = None
    try:
        if args.two_valued:
            if args.intra is None or args.inter is None:
                raise UsageError("--two-valued needs --intra and --inter")
            d, g = generate_two_valued(args.sizes, args.intra, args.inter)
            meta.update(kind="two_valued", intra=args.intra, inter=args.inter)
        else:
            data, g, _ = generate_euclidean(
                args.sizes, args.dim, args.spread, args.margin, args.seed, criterion
            )
            d = data.distances()
            coords = data
            meta.update(kind="euclidean", dim=args.dim, spread=args.spread, margin=args.margin)
    except (ValueError, GenerationError) as exc:
        raise UsageError(str(exc)) from exc
    cert = certify(d, g, criterion)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "matrix.json").write_text(d.to_json() + "\n")
    (out / "partition.json").write_text(g.to_json() + "\n")
    (out / "certificate.json").write_text(_jsonfmt.dumps(cert.to_dict()) + "\n")
    (out / "meta.json").write_text(_jsonfmt.dumps(meta) + "\n")
    if coords is not None:
        (out / "coords.json").write_text(_jsonfmt.dumps(coords.to_dict()) + "\n")
    report = {"bundle": str(out), "n": d.n, "k": g.k, "certificate": cert.to_dict(), "meta": meta}
    human = (
        f"wrote {out}: n={d.n} k={g.k} {criterion.value} certificate "
        f"{'valid' if cert.valid else 'INVALID'} (min_inter={cert.min_inter:.6g}, "
        f"threshold={cert.threshold:.6g})"
    )
    _emit(report, args, human)
    return EXIT_OK


def cmd_detect(args: argparse.Namespace) -> int:
    d = _load_matrix(args.matrix)
    k_max = args.kmax if args.kmax is not None else max(2, d.n // 2)
    res = detect_range(d, k_max, args.criterion, args.restarts, args.seed)
    report = res.to_dict()
    if res.found:
        human = f"level {res.level} {res.criterion.value} clustering: {res.partition.to_dict()['clusters']}"
    else:
        human = f"no {res.criterion.value} range clustering for k in 2..{k_max}"
    _emit(report, args, human)
    return EXIT_OK if res.found else EXIT_NEGATIVE


def cmd_verify(args: argparse.Namespace) -> int:
    bundle = Path(args.bundle)
    d = _load_matrix(args.bundle)
    g = _load_partition(args.bundle)
    if g.n != d.n:
        raise UsageError("partition and matrix sizes differ")
    if not args.no_oracle and d.n > ORACLE_CAP:
        raise UsageError(f"n={d.n} exceeds the oracle cap of {ORACLE_CAP}; pass --no-oracle")
    criterion = Criterion(args.criterion) if args.criterion else _bundle_criterion(bundle, "variational")
    checks: list[dict] = []
    cert = certify(d, g, criterion)
    checks.append({"name": f"{criterion.value}_certificate", "passed": cert.valid, "detail": cert.to_dict()})
    q = quality(d, g)
    bound = quality_lower_bound(d, g)
    checks.append(
        {"name": "q_lower_bound", "passed": q >= bound * (1 - 1e-12), "detail": {"q": q, "bound": bound}}
    )
    shift = beta(shift_squared(d, 1.0), g) - beta(d, g)
    checks.append(
        {"name": "beta_shift", "passed": math.isclose(shift, 1.0, rel_tol=1e-9), "detail": {"delta": 1.0, "beta_change": shift}}
    )
    if not args.no_oracle:
        res = brute_force_optimal(d, g.k, 2)
        checks.append(
            {
                "name": "oracle_optimal",
                "passed": res.best_partition == g,
                "detail": {
                    "best_partition": res.best_partition.to_dict()["clusters"],
                    "best_q": res.best_value,
                    "planted_q": q,
                    "unique": res.unique,
                    "examined": res.partitions_examined,
                },
            }
        )
    ok = all(c["passed"] for c in checks)
    report = {"bundle": str(bundle), "passed": ok, "checks": checks}
    human = "\n".join(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}" for c in checks)
    _emit(report, args, human)
    return EXIT_OK if ok else EXIT_NEGATIVE


def cmd_transform(args: argparse.Namespace) -> int:
    d = _load_matrix(args.matrix)
    try:
        spec = TransformSpec.from_dict(_read_json(Path(args.spec)))
    except (KeyError, ValueError) as exc:
        raise UsageError(f"malformed transform spec: {exc}") from exc
    g = spec.reference_partition
    if g is None:
        g = _load_partition(args.partition) if args.partition else Partition((tuple(range(d.n)),), min_size=1)
    try:
        d2 = spec.apply(d)
    except (ValueError, DistanceError) as exc:
        raise UsageError(str(exc)) from exc
    rep = validate_transform(d, d2, g, spec.kind)
    if args.out:
        Path(args.out).write_text(d2.to_json() + "\n")
    report = {"spec": spec.to_dict(), "validation": rep.to_dict(), "matrix": d2.to_dict()}
    human = "\n".join(f"{'PASS' if c.passed else 'FAIL'} {c.name}" for c in rep.checks)
    _emit(report, args, human)
    return EXIT_OK if rep.passed else EXIT_NEGATIVE


def cmd_embed(args: argparse.Namespace) -> int:
    d = _load_matrix(args.matrix)
    info = analyze(d)
    if info.is_psd:
        data, delta = embed(d), 0.0
    elif args.no_shift:
        report = {"analysis": info.to_dict(), "embedding": None}
        _emit(report, args, f"not embeddable: min eigenvalue {info.min_eigenvalue:.6g}")
        return EXIT_NEGATIVE
    else:
        data, delta = euclideanize(d)
    report = {"analysis": info.to_dict(), "delta_used": delta, "embedding": data.to_dict()}
    if args.out:
        Path(args.out).write_text(_jsonfmt.dumps(data.to_dict()) + "\n")
    human = f"dim={data.dim} delta_used={delta:.6g} psd_input={info.is_psd}"
    _emit(report, args, human)
    return EXIT_OK


def cmd_experiment_hitting(args: argparse.Namespace) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    d = _load_matrix(args.bundle)
    g = _load_partition(args.bundle)
    mode = SeedingMode(args.mode) if args.mode in ("dsquared", "residual_dsquared") else mode_for(args.mode)
    m = min(g.sizes)
    bound = hitting_probability_bound(m, g.k)
    est = estimate_hitting_probability(d, g, mode, args.trials, args.seed)
    floor = bound - 3 * est.stderr
    ok = est.estimate >= floor
    report = {
        "m": m,
        "k": g.k,
        "mode": mode.value,
        "seed": args.seed,
        "bound": bound,
        "floor": floor,
        "passed": ok,
        **est.to_dict(),
    }
    human = (
        f"bound={bound:.6f} estimate={est.estimate:.6f} "
        f"99% CI=[{est.ci_low:.6f}, {est.ci_high:.6f}] {'PASS' if ok else 'FAIL'}"
    )
    _emit(report, args, human)
    return EXIT_OK if ok else EXIT_NEGATIVE


def cmd_axiom_check(args: argparse.Namespace) -> int:
    bundle = Path(args.bundle)
    d = _load_matrix(args.bundle)
    criterion = Criterion(args.criterion) if args.criterion else _bundle_criterion(bundle, "variational")
    k_max = args.kmax if args.kmax is not None else max(2, d.n // 2)
    sweeps = [
        scale_invariance(d, k_max, criterion, (1e-3, 1e3), args.restarts, args.seed),
        consistency_sweep(d, k_max, criterion, args.specs, None, args.restarts, args.seed),
    ]
    if args.richness_max >= 4:
        sweeps.append(
            richness_sweep(range(4, args.richness_max + 1), criterion, args.restarts, args.seed)
        )
    controls = []
    if criterion is Criterion.RESIDUAL:
        # plain (not keep-min) shrink: preservation is not promised, only reported
        controls.append(
            consistency_sweep(
                d, k_max, criterion, args.specs, TransformKind.CONVERGENT, args.restarts,
                args.seed, name="negative_control[convergent_consistency]",
            )
        )
    ok = all(s.passed for s in sweeps)
    report = {
        "criterion": criterion.value,
        "k_max": k_max,
        "seed": args.seed,
        "passed": ok,
        "sweeps": [s.to_dict() for s in sweeps],
        "controls": [s.to_dict() for s in controls],
    }
    lines = [f"{'PASS' if s.passed else 'FAIL'} {s.name} {s.preserved}/{s.total}" for s in sweeps]
    lines += [f"INFO {s.name} {s.preserved}/{s.total}" for s in controls]
    _emit(report, args, "\n".join(lines))
    return EXIT_OK if ok else EXIT_NEGATIVE


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clusterkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--human", action="store_true", help="print a summary instead of JSON")
        p.add_argument("--report", help="also write the JSON report to this file")

    crit = [c.value for c in Criterion]

    p = sub.add_parser("generate", help="write a bundle with a planted certified clustering")
    p.add_argument("--sizes", type=_sizes, required=True)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--spread", type=float, default=1.0)
    p.add_argument("--margin", type=float, default=1.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--criterion", choices=crit, default="variational")
    p.add_argument("--two-valued", action="store_true")
    p.add_argument("--intra", type=float)
    p.add_argument("--inter", type=float)
    p.add_argument("--out", default="bundle")
    common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("detect", help="find the range clustering of a matrix")
    p.add_argument("matrix", help="matrix .json/.csv or a bundle directory")
    p.add_argument("--kmax", type=int)
    p.add_argument("--criterion", choices=crit, default="variational")
    p.add_argument("--restarts", type=int, default=DEFAULT_RESTARTS)
    p.add_argument("--seed", type=int, default=0)
    common(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("verify", help="check a bundle's certificate and optimality")
    p.add_argument("bundle")
    p.add_argument("--criterion", choices=crit)
    p.add_argument("--no-oracle", action="store_true")
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("transform", help="apply a TransformSpec and validate the result")
    p.add_argument("matrix")
    p.add_argument("--spec", required=True)
    p.add_argument("--partition")
    p.add_argument("--out")
    common(p)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("embed", help="Euclidean coordinates (shifting squared distances if needed)")
    p.add_argument("matrix")
    p.add_argument("--no-shift", action="store_true")
    p.add_argument("--out")
    common(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("experiment", help="Monte Carlo experiments")
    exp = p.add_subparsers(dest="experiment", required=True)
    h = exp.add_parser("hitting", help="seeding hit-all frequency vs the product bound")
    h.add_argument("bundle")
    h.add_argument("--trials", type=int, default=10_000)
    h.add_argument(
        "--mode", default="dsquared",
        choices=["dsquared", "residual_dsquared", *crit],
    )
    h.add_argument("--seed", type=int, default=0)
    common(h)
    h.set_defaults(func=cmd_experiment_hitting)

    p = sub.add_parser("axiom-check", help="scale / consistency / richness sweeps")
    p.add_argument("bundle")
    p.add_argument("--criterion", choices=crit)
    p.add_argument("--kmax", type=int)
    p.add_argument("--specs", type=int, default=10)
    p.add_argument("--richness-max", type=int, default=6)
    p.add_argument("--restarts", type=int, default=DEFAULT_RESTARTS)
    p.add_argument("--seed", type=int, default=0)
    common(p)
    p.set_defaults(func=cmd_axiom_check)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"clusterkit {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
