"""Command-line entry point.

Subcommands: ``synth``, ``cluster``, ``fid``, ``search``, ``eval``
(``compare`` / ``sweep-k``), and ``serve``. Exit codes: 0 success,
1 validation error, 2 I/O error. All diagnostics go to stderr; only data
(the FID value) is printed to stdout.

Option precedence is flags > ``--config`` JSON file > built-in defaults;
the config file maps long option names (without dashes, underscores for
hyphens) to values. Thread count falls back to the ``FIDSEARCH_THREADS``
environment variable, then to the CPU count.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .clustering import identity_features, kmeans, save_clustering
from .errors import ValidationError
from .evalharness import compare_strategies, sweep_k
from .features_io import (
    FeatureTable,
    load_features,
    load_identities,
    save_features,
    save_identities,
)
from .fid import fid, summarize
from .search import SearchParams, run_search
from .synth import generate, load_population_spec

DEFAULTS = {
    "k": 100,
    "seed": 0,
    "max_iter": 300,
    "tol": 1e-4,
    "min_cluster_images": 2,
    "base_seed": 0,
    "host": "127.0.0.1",
    "port": 8000,
}


def _detect_format(path: str) -> str:
    return "csv" if path.endswith(".csv") else "binary"


def _load_table(path: str) -> FeatureTable:
    return load_features(path, format=_detect_format(path))


class _Options:
    """Merged view over CLI flags, an optional config file, and defaults."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config = {}
        if getattr(args, "config", None):
            try:
                self.config = json.loads(Path(args.config).read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise ValidationError(f"--config: invalid JSON: {exc}") from None
            if not isinstance(self.config, dict):
                raise ValidationError("--config: expected a JSON object")

    def get(self, name: str, default=None):
        value = getattr(self.args, name, None)
        if value is not None:
            return value
        if name in self.config:
            return self.config[name]
        if default is not None:
            return default
        return DEFAULTS.get(name)

    def threads(self) -> int:
        value = self.get("threads", default=0)
        if value:
            return int(value)
        env = os.environ.get("FIDSEARCH_THREADS")
        if env:
            try:
                return max(1, int(env))
            except ValueError:
                raise ValidationError(f"FIDSEARCH_THREADS={env!r} is not an integer") from None
        return os.cpu_count() or 1


def _search_params(opts: _Options, **paths: str | None) -> SearchParams:
    return SearchParams(
        max_iter=int(opts.get("max_iter")),
        tol=float(opts.get("tol")),
        min_cluster_images=int(opts.get("min_cluster_images")),
        threads=opts.threads(),
        **paths,
    )


def _require_positive(name: str, value: int) -> int:
    if value < 1:
        raise ValidationError(f"{name} must be >= 1, got {value}")
    return value


def _require_seed(name: str, value: int) -> int:
    if value < 0:
        raise ValidationError(f"{name} must be a non-negative integer, got {value}")
    return value


# -- subcommand handlers ---------------------------------------------------


def cmd_synth(args: argparse.Namespace) -> int:
    spec = load_population_spec(args.spec)
    table, index = generate(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_features(table, out / "features.bin", format="binary")
    save_identities(index, out / "identities.tsv")
    print(
        f"wrote {table.n} images / {index.n_identities} identities (d={table.dim}) to {out}",
        file=sys.stderr,
    )
    return 0


def cmd_cluster(args: argparse.Namespace) -> int:
    opts = _Options(args)
    k = _require_positive("--k", int(opts.get("k")))
    seed = _require_seed("--seed", int(opts.get("seed")))
    table = _load_table(args.features)
    index = load_identities(args.identities, table)
    identity_ids, feats = identity_features(table, index)
    clustering = kmeans(
        feats,
        k,
        seed=seed,
        max_iter=int(opts.get("max_iter")),
        tol=float(opts.get("tol")),
        ids=identity_ids,
    )
    save_clustering(clustering, args.out)
    print(
        f"k={clustering.k} inertia={clustering.inertia:.6g} iterations={clustering.n_iter} "
        f"sizes[min/max]={clustering.sizes.min()}/{clustering.sizes.max()}",
        file=sys.stderr,
    )
    return 0


def cmd_fid(args: argparse.Namespace) -> int:
    a = _load_table(args.a)
    b = _load_table(args.b)
    value = fid(summarize(a.data), summarize(b.data))
    print(repr(float(value)))
    return 0


def cmd_search(args: argparse.Namespace) -> int:
    opts = _Options(args)
    n = _require_positive("--n", int(args.n))
    k = _require_positive("--k", int(opts.get("k")))
    seed = _require_seed("--seed", int(opts.get("seed")))
    pool = _load_table(args.pool)
    index = load_identities(args.identities, pool)
    target = _load_table(args.target)
    params = _search_params(
        opts,
        pool_path=args.pool,
        identities_path=args.identities,
        target_path=args.target,
    )
    manifest = run_search(pool, index, target, k=k, n=n, seed=seed, params=params)
    manifest.write(args.out)
    ids_out = args.ids_out or str(Path(args.out).with_suffix(".ids"))
    manifest.write_id_list(ids_out)
    print(f"selected {len(manifest.selected)} images -> {args.out}, {ids_out}", file=sys.stderr)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    opts = _Options(args)
    seeds = _require_positive("--seeds", int(args.seeds))
    base_seed = _require_seed("--base-seed", int(opts.get("base_seed")))
    pool = _load_table(args.pool)
    index = load_identities(args.identities, pool)
    target = _load_table(args.target)
    params = _search_params(opts)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.eval_cmd == "compare":
        k = _require_positive("--k", int(opts.get("k")))
        n_list = [_require_positive("--n-list", int(v)) for v in args.n_list.split(",")]
        report = compare_strategies(
            pool, index, target, k=k, n_list=n_list, seeds=seeds, base_seed=base_seed, params=params
        )
        report.write(out / "compare.csv", out / "compare_summary.json")
        print(f"wrote {out / 'compare.csv'} and {out / 'compare_summary.json'}", file=sys.stderr)
    else:
        n = _require_positive("--n", int(args.n))
        k_list = [_require_positive("--k-list", int(v)) for v in args.k_list.split(",")]
        report = sweep_k(
            pool, index, target, k_list=k_list, n=n, seeds=seeds, base_seed=base_seed, params=params
        )
        report.write(out / "sweep_k.csv", out / "sweep_k_summary.json")
        print(f"wrote {out / 'sweep_k.csv'} and {out / 'sweep_k_summary.json'}", file=sys.stderr)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    opts = _Options(args)
    uvicorn.run(create_app(), host=str(opts.get("host")), port=int(opts.get("port")))
    return 0


# -- parser ----------------------------------------------------------------


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON config file; flags override its values")
    sub.add_argument("--threads", type=int, help="internal parallelism cap (default: CPU count)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fidsearch",
        description="Search a data pool for a training subset matching a target distribution.",
    )
    sub = parser.add_subparsers(dest="cmd", metavar="command")

    p = sub.add_parser("synth", help="generate a synthetic population from a JSON spec")
    p.add_argument("--spec", required=True, help="population spec JSON file")
    p.add_argument("--out", required=True, help="output directory (features.bin, identities.tsv)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("cluster", help="cluster a pool's identity-averaged features")
    p.add_argument("--features", required=True, help="feature table (binary or .csv)")
    p.add_argument("--identities", help="identity manifest (default: one identity per image)")
    p.add_argument("--k", type=int, help="number of clusters (default 100)")
    p.add_argument("--seed", type=int, help="clustering seed (default 0)")
    p.add_argument("--max-iter", type=int, help="Lloyd iteration cap (default 300)")
    p.add_argument("--tol", type=float, help="relative centroid-shift stop (default 1e-4)")
    p.add_argument("--out", required=True, help="output directory (assignments.tsv, centroids.bin)")
    _add_common(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("fid", help="print the Frechet distance between two feature tables")
    p.add_argument("--a", required=True, help="first feature table")
    p.add_argument("--b", required=True, help="second feature table")
    p.set_defaults(func=cmd_fid)

    p = sub.add_parser("search", help="select a training subset matching the target")
    p.add_argument("--pool", required=True, help="pool feature table")
    p.add_argument("--identities", help="pool identity manifest (default: one identity per image)")
    p.add_argument("--target", required=True, help="target feature table")
    p.add_argument("--k", type=int, help="number of clusters (default 100)")
    p.add_argument("--n", type=int, required=True, help="number of images to select")
    p.add_argument("--seed", type=int, help="root seed (default 0)")
    p.add_argument("--max-iter", type=int, help="Lloyd iteration cap (default 300)")
    p.add_argument("--tol", type=float, help="relative centroid-shift stop (default 1e-4)")
    p.add_argument(
        "--min-cluster-images", type=int, help="smallest scorable cluster (default 2)"
    )
    p.add_argument("--out", required=True, help="manifest JSON output path")
    p.add_argument("--ids-out", help="plain ID list output (default: <out> with .ids suffix)")
    _add_common(p)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("eval", help="strategy comparison and cluster-count sweep reports")
    esub = p.add_subparsers(dest="eval_cmd", metavar="report")
    for name in ("compare", "sweep-k"):
        e = esub.add_parser(
            name,
            help="greedy vs random over set sizes" if name == "compare" else "FID vs cluster count",
        )
        e.add_argument("--pool", required=True)
        e.add_argument("--identities")
        e.add_argument("--target", required=True)
        e.add_argument("--seeds", type=int, required=True, help="number of trials per point")
        e.add_argument("--base-seed", type=int, help="root seed for all trial streams (default 0)")
        e.add_argument("--max-iter", type=int)
        e.add_argument("--tol", type=float)
        e.add_argument("--min-cluster-images", type=int)
        e.add_argument("--out", required=True, help="report output directory")
        if name == "compare":
            e.add_argument("--k", type=int, help="number of clusters (default 100)")
            e.add_argument("--n-list", required=True, help="comma-separated set sizes")
        else:
            e.add_argument("--k-list", required=True, help="comma-separated cluster counts")
            e.add_argument("--n", type=int, required=True, help="set size")
        _add_common(e)
        e.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", help="bind address (default 127.0.0.1)")
    p.add_argument("--port", type=int, help="port (default 8000)")
    p.add_argument("--config")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    if getattr(args, "cmd", None) is None or not hasattr(args, "func"):
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
