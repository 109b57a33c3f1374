"""Command-line entry point.

Every analysis is a subcommand; every run writes its outputs plus a manifest
recording the configuration, the seed, and SHA-256 hashes of all input and
output files. Exit codes: 0 success, 2 usage error, 3 input error,
4 numeric/domain error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import forge, mftma, report, response, stats, store, surrogate

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_NUMERIC = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # exit 2 with one-line message
        raise UsageError(message)


class UsageError(Exception):
    pass


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir: Path, config: dict, inputs: list, outputs: list) -> None:
    config = {k: v for k, v in config.items() if k != "func"}
    manifest = {
        "config": config,
        "inputs": {str(p): _sha256(Path(p)) for p in inputs},
        "outputs": {str(p): _sha256(Path(p)) for p in outputs},
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def _load_bundle(args) -> store.DatasetBundle:
    logits = store.load_matrix(args.logits, args.format)
    if getattr(args, "labels", None):
        labels = store.load_labels(args.labels)
    else:
        labels = store.LabelVector(np.argmax(logits.values, axis=1))
    flags = store.load_flags(args.flags) if getattr(args, "flags", None) else None
    return store.validate_bundle(logits, labels, flags)


def _csv(path: Path, header: str, rows) -> Path:
    lines = [header]
    for row in rows:
        lines.append(",".join(f"{v:.17g}" if isinstance(v, float) else str(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def _cmd_stats(args) -> int:
    bundle = _load_bundle(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = []
    ml = stats.max_logit_distribution(bundle.logits, args.bin_width)
    outputs.append(_csv(out / "max_logit.csv", "bin_left,bin_right,count", ml.histogram))
    outputs.append(
        _csv(out / "max_logit_summary.csv", "mean,std,skewness",
             [(ml.mean, ml.std, ml.skewness)])
    )
    gaps = stats.logit_gaps(bundle.logits)
    outputs.append(_csv(out / "gaps.csv", "gap", [(float(g),) for g in gaps]))
    gd = stats.gap_distribution(bundle.logits, args.bin_width)
    outputs.append(_csv(out / "gap_hist.csv", "bin_left,bin_right,count", gd.histogram))
    if bundle.flags is not None:
        curve = stats.gap_accuracy_curve(bundle, args.bin_width, args.min_count)
        outputs.append(
            _csv(out / "gap_accuracy.csv",
                 "gap_low,gap_high,n_samples,adversarial_accuracy", curve.bins)
        )
    inputs = [args.logits] + [p for p in (args.labels, args.flags) if p]
    _write_manifest(out, vars(args) | {"subcommand": "stats"}, inputs, outputs)
    return EXIT_OK


def _cmd_overlap(args) -> int:
    m1 = store.load_matrix(args.logits, args.format)
    m2 = store.load_matrix(args.logits2, args.format)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    k_max = args.k if args.k else m1.cols
    curve = stats.average_overlap(m1, m2, k_max)
    rows = [(int(k), float(v)) for k, v in zip(curve.k_values, curve.ao_at_k)]
    outputs = [_csv(out / "overlap.csv", "k,ao_at_k", rows)]
    if args.labels:
        labels = store.load_labels(args.labels)
        b1 = store.validate_bundle(m1, labels)
        b2 = store.validate_bundle(m2, labels)
        perm = stats.within_class_permuted_overlap(b1, b2, k_max, args.seed)
        rows = [(int(k), float(v)) for k, v in zip(perm.k_values, perm.ao_at_k)]
        outputs.append(_csv(out / "overlap_permuted.csv", "k,ao_at_k", rows))
    inputs = [args.logits, args.logits2] + ([args.labels] if args.labels else [])
    _write_manifest(out, vars(args) | {"subcommand": "overlap"}, inputs, outputs)
    return EXIT_OK


def _cmd_manipulate(args) -> int:
    m = store.load_matrix(args.logits, args.format)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = forge.ManipulationSpec(kind=args.kind, k=args.k, seed=args.seed)
    labels = store.load_labels(args.labels) if args.labels else None
    index_source = (
        store.load_matrix(args.index_source, args.format) if args.index_source else None
    )
    result = forge.apply_manipulation(spec, m, labels=labels, index_source=index_source)
    target = out / f"{args.kind}.lgt"
    store.store_matrix(result, target, args.format)
    inputs = [args.logits] + [p for p in (args.labels, args.index_source) if p]
    _write_manifest(out, vars(args) | {"subcommand": "manipulate"}, inputs, [target])
    return EXIT_OK


def _cmd_analytic(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = []
    n = args.n_classes
    grid_c = np.arange(args.beta_min, args.beta_max + 1e-12, args.beta_step)
    grid_w = grid_c.copy()
    if args.surface:
        surf = surrogate.mean_field_loss_surface(
            grid_c, grid_w, n, args.error_rate, args.branch
        )
        rows = [
            (float(bc), float(bw), float(surf[i, j]))
            for i, bc in enumerate(grid_c)
            for j, bw in enumerate(grid_w)
        ]
        outputs.append(
            _csv(out / "loss_surface.csv", "beta_correct,beta_wrong,loss", rows)
        )
    if args.shrinkage:
        rows = []
        for bc in grid_c:
            for bw in grid_w:
                try:
                    params = surrogate.MeanFieldParams(float(bc), float(bw), n, args.error_rate)
                    ok_c = surrogate.admissible(
                        surrogate.SurrogateSpec(n, float(bc), "correct", args.branch))
                    ok_w = surrogate.admissible(
                        surrogate.SurrogateSpec(n, float(bw), "misclassified", args.branch))
                    if not (ok_c and ok_w):
                        raise surrogate.DomainError("inadmissible")
                    val = surrogate.gap_shrinkage(
                        surrogate.GapShiftInput(params, args.epsilon, 1.0, 1.0),
                        args.branch,
                    )
                except surrogate.DomainError:
                    val = float("nan")
                rows.append((float(bc), float(bw), val))
        outputs.append(
            _csv(out / "gap_shrinkage.csv", "beta_correct,beta_wrong,shrinkage", rows)
        )
    if args.threshold:
        rows = []
        for nn in range(4, args.n_classes + 1):
            try:
                th = surrogate.admissibility_threshold(nn, "misclassified", args.branch)
            except surrogate.SearchError:
                th = float("nan")
            rows.append((nn, th))
        outputs.append(_csv(out / "threshold.csv", "n_classes,threshold", rows))
    if not outputs:
        raise UsageError("analytic requires at least one of --surface/--shrinkage/--threshold")
    _write_manifest(out, vars(args) | {"subcommand": "analytic"}, [], outputs)
    return EXIT_OK


def _cmd_response(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params = surrogate.MeanFieldParams(
        args.beta_correct, args.beta_wrong, args.n_classes, args.error_rate
    )
    predicted, mean, std = response.gap_shift_experiment(
        params, args.n_data, args.n_feats, args.epsilon,
        sigma0=args.sigma0, c=args.c, seed=args.seed,
    )
    rows = [(args.beta_correct, args.beta_wrong, predicted, mean, std)]
    outputs = [
        _csv(out / "gap_shift.csv",
             "beta_correct,beta_wrong,predicted,measured_mean,measured_std", rows)
    ]
    _write_manifest(out, vars(args) | {"subcommand": "response"}, [], outputs)
    return EXIT_OK


def _cmd_mftma(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = [ln.strip() for ln in Path(args.manifolds).read_text().splitlines() if ln.strip()]
    if not files:
        raise store.ParseError(f"{args.manifolds}: empty manifold manifest")
    base = Path(args.manifolds).parent
    clouds = []
    for name in files:
        p = Path(name)
        if not p.is_absolute():
            p = base / p
        clouds.append(store.load_matrix(p, args.format).values)
    mset = mftma.ManifoldSet(tuple(clouds))
    if args.project_centers:
        mset = mftma.project_null_centers(mset)
    result = mftma.mftma_capacity(mset, args.n_samples, args.kappa, args.seed)
    rows = [(
        result.alpha_mftma, result.radius, result.dimension,
        result.center_correlation, result.n_gaussian_samples, result.seed,
    )]
    outputs = [
        _csv(out / "mftma.csv",
             "alpha_mftma,radius,dimension,center_correlation,n_samples,seed", rows)
    ]
    if args.empirical:
        cap = mftma.empirical_capacity(mset, args.n_dichotomies, args.seed)
        outputs.append(
            _csv(out / "empirical_capacity.csv", "alpha_empirical", [(cap,)])
        )
    _write_manifest(
        out, vars(args) | {"subcommand": "mftma"}, [args.manifolds], outputs
    )
    return EXIT_OK


def _cmd_report(args) -> int:
    produced = report.emit_report(args.out)
    for p in produced:
        print(p)
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="logitlab", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, logits=True):
        if logits:
            p.add_argument("--logits", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--format", choices=("text", "binary"), default="binary")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("stats", help="distributional statistics")
    common(p)
    p.add_argument("--labels")
    p.add_argument("--flags")
    p.add_argument("--bin-width", type=float, default=0.25, dest="bin_width")
    p.add_argument("--min-count", type=int, default=50, dest="min_count")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("overlap", help="average overlap of two logit matrices")
    common(p)
    p.add_argument("--logits2", required=True)
    p.add_argument("--labels")
    p.add_argument("--k", type=int, default=0)
    p.set_defaults(func=_cmd_overlap)

    p = sub.add_parser("manipulate", help="distillation-target manipulations")
    common(p)
    p.add_argument("--kind", required=True,
                   choices=("fix_k_permute", "fix_k_average", "correct_fix_1", "hybrid"))
    p.add_argument("--k", type=int)
    p.add_argument("--labels")
    p.add_argument("--index-source", dest="index_source")
    p.set_defaults(func=_cmd_manipulate)

    p = sub.add_parser("analytic", help="surrogate-model surfaces and thresholds")
    common(p, logits=False)
    p.add_argument("--surface", action="store_true")
    p.add_argument("--shrinkage", action="store_true")
    p.add_argument("--threshold", action="store_true")
    p.add_argument("--n-classes", type=int, default=10, dest="n_classes")
    p.add_argument("--error-rate", type=float, default=0.2, dest="error_rate")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--branch", choices=("plus", "minus"), default="plus")
    p.add_argument("--beta-min", type=float, default=3.0, dest="beta_min")
    p.add_argument("--beta-max", type=float, default=10.0, dest="beta_max")
    p.add_argument("--beta-step", type=float, default=0.25, dest="beta_step")
    p.set_defaults(func=_cmd_analytic)

    p = sub.add_parser("response", help="linear-response gap-shift experiment")
    common(p, logits=False)
    p.add_argument("--n-data", type=int, default=200, dest="n_data")
    p.add_argument("--n-feats", type=int, default=100, dest="n_feats")
    p.add_argument("--n-classes", type=int, default=10, dest="n_classes")
    p.add_argument("--beta-correct", type=float, default=5.0, dest="beta_correct")
    p.add_argument("--beta-wrong", type=float, default=5.0, dest="beta_wrong")
    p.add_argument("--error-rate", type=float, default=0.2, dest="error_rate")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--sigma0", type=float, default=1e-3)
    p.add_argument("--c", type=float, default=1.0)
    p.set_defaults(func=_cmd_response)

    p = sub.add_parser("mftma", help="manifold capacity analysis")
    common(p, logits=False)
    p.add_argument("--manifolds", required=True,
                   help="text file listing one matrix file per manifold")
    p.add_argument("--n-samples", type=int, default=200, dest="n_samples")
    p.add_argument("--kappa", type=float, default=0.0)
    p.add_argument("--project-centers", action="store_true", dest="project_centers")
    p.add_argument("--empirical", action="store_true")
    p.add_argument("--n-dichotomies", type=int, default=50, dest="n_dichotomies")
    p.set_defaults(func=_cmd_mftma)

    p = sub.add_parser("report", help="render SVGs from emitted CSV")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as e:
        print(f"error: usage: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, store.StoreError, report.ReportError) as e:
        print(f"error: input: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (
        surrogate.SurrogateError,
        response.ResponseError,
        mftma.MftmaError,
        stats.StatsError,
        np.linalg.LinAlgError,
    ) as e:
        print(f"error: numeric: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
