"""
lifemine command line interface

    lifemine ingest      --checkins c.csv [--venues v.csv] [--users u.csv] --out ds/
    lifemine preprocess  --in ds/ --radius-m 30 --out ds_ext/
    lifemine stats       --in ds/ --metric shares --bucket hour24 --out shares.csv
    lifemine nmf         --in A.csv --k 3 --out model/
    lifemine cp          --in ds/ --time-mode hour24 --k 12 --out model/
    lifemine lifestyles  --in ds/ --mode temporal --day-class weekday --out report/
    lifemine synth       --spec spec.json --out ds/
    lifemine run         --config pipeline.json

Exit codes: 0 success, 1 failed stage or unreadable input, 2 invalid
configuration or parameters.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import pandas as pd
from pydantic import ValidationError

from src import __version__
from src.analysis.stats import (
    box_stats_frame,
    category_box_stats,
    ccdf,
    restrict_to_city,
    share_series,
    venue_checkin_counts,
    visit_stats_frame,
    visiting_frequency,
)
from src.core.app import SeedStreams, configure_logging
from src.core.config import AnalysisConfig, ExtensionConfig, get_settings, load_pipeline_config
from src.core.exceptions import ConfigurationError, LifemineError
from src.core.models import validate_dataset
from src.core.pipeline import (
    EXIT_CONFIG_ERROR,
    EXIT_OK,
    EXIT_STAGE_FAILED,
    analyze_spatial,
    analyze_temporal,
    analyze_tensor,
    run_pipeline,
    write_csv,
    write_json,
)
from src.models.cp_als import cp_als
from src.models.lifestyle import build_tensor, describe_tensor_components
from src.models.nmf import ActivityMatrix, nmf
from src.parsers.base_parser import ParsingError
from src.parsers.checkin_parser import ingest_dataset, load_dataset, write_dataset
from src.preprocess.extension import preprocess_dataset
from src.synth.generator import generate_dataset, generate_matrix, load_spec, temporal_names

logger = logging.getLogger("lifemine.cli")


def cmd_ingest(args: argparse.Namespace) -> int:
    dataset, reports = ingest_dataset(args.checkins, args.venues, args.users, args.format)
    out = write_dataset(dataset, args.out)

    rejects = [
        {"table": table, "line": r.line_number, "reason": r.reason}
        for table, report in reports.items()
        for r in report.rejects
    ]
    write_csv(pd.DataFrame(rejects, columns=["table", "line", "reason"]), out / "rejects.csv")
    report = validate_dataset(dataset)
    write_json(report.to_dict(), out / "validation.json")

    for table, r in reports.items():
        print(f"📥 {table}: {r.accepted_rows} accepted, {r.rejected_rows} rejected")
    if not report.is_empty:
        print(f"⚠️  Validation findings: {report.counts()}")
    return EXIT_OK


def cmd_preprocess(args: argparse.Namespace) -> int:
    cfg = ExtensionConfig(
        radius_m=args.radius_m,
        min_span_days=args.min_span_days,
        min_checkins=args.min_checkins,
        extend_first=args.extend_first,
    )
    dataset = preprocess_dataset(load_dataset(args.input), cfg)
    write_dataset(dataset, args.out)
    write_json(dataset.provenance.get("extension", {}), Path(args.out) / "extension.json")
    print(f"✅ {dataset.summary()}")
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.input)
    out = Path(args.out)

    if args.metric == "shares":
        series = share_series(dataset, args.bucket, args.top_n, args.days, not args.no_dedupe, args.city)
        write_csv(series.to_frame(), out)
        if args.svg:
            from src.analysis.charts import share_chart

            share_chart(series, out.with_suffix(".svg"))
        return EXIT_OK

    scoped = restrict_to_city(dataset, args.city)
    if args.metric == "visitfreq":
        write_csv(visit_stats_frame(visiting_frequency(scoped)), out)
    elif args.metric == "boxstats":
        boxes = category_box_stats(visiting_frequency(scoped), dataset.venue_index)
        write_csv(box_stats_frame(boxes), out)
        if args.svg:
            from src.analysis.charts import box_chart

            box_chart(boxes, out.with_suffix(".svg"))
    else:
        points = ccdf(venue_checkin_counts(scoped))
        write_csv(pd.DataFrame(points, columns=["threshold", "probability"]), out)
        if args.svg:
            from src.analysis.charts import ccdf_chart

            ccdf_chart(points, out.with_suffix(".svg"))
    return EXIT_OK


def cmd_nmf(args: argparse.Namespace) -> int:
    matrix = ActivityMatrix.from_csv(args.input)
    model = nmf(matrix, args.k, tol=args.tol, max_iter=args.max_iter, seed=args.seed)
    model.save(args.out)
    print(f"✅ NMF k={model.k}: objective {model.objective:.6g} after {model.iterations} iterations")
    return EXIT_OK


def cmd_cp(args: argparse.Namespace) -> int:
    tensor = build_tensor(load_dataset(args.input), args.time_mode, top_p=args.top_p, prune_h=args.prune_h)
    init = "singular_vector" if args.init == "svd" else args.init
    model = cp_als(tensor, args.k, tol=args.tol, max_iter=args.max_iter, init=init,
                   seed=args.seed, relative_tol=args.relative_tol)
    model.save(args.out)
    write_json(describe_tensor_components(model, args.top_n), Path(args.out) / "components.json")
    print(f"✅ CP k={model.k}: fit {model.fit:.4f} after {model.iterations} sweeps")
    return EXIT_OK


def cmd_lifestyles(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.input)
    analysis = AnalysisConfig(
        n_clusters=args.clusters,
        restarts=args.restarts,
        normalize_rows=args.normalize_rows,
        top_n=args.top_n,
        spatial_categories=args.categories,
        svg=args.svg,
    )
    streams = SeedStreams(args.seed)
    out = Path(args.out)

    if args.mode == "temporal":
        summary = analyze_temporal(dataset, args.day_class, analysis, streams, out, k=args.k)
    elif args.mode == "spatial":
        summary = analyze_spatial(dataset, analysis, streams, out, k=args.k)
    else:
        time_mode = "hour24" if args.mode == "tensor-hour" else "dow7"
        summary = analyze_tensor(dataset, time_mode, analysis, streams, out, k=args.k)

    write_json({"mode": args.mode, "seeds": streams.issued, **summary}, out / "summary.json")
    print(f"✅ Lifestyle report written to {out}")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    spec = load_spec(args.spec)
    if args.seed is not None:
        spec = spec.model_copy(update={"seed": args.seed})
    out = Path(args.out)

    if args.matrix:
        matrix, W, L = generate_matrix(spec, args.matrix)
        out.mkdir(parents=True, exist_ok=True)
        matrix.to_csv(out / "A.csv")
        names = temporal_names(spec) if args.matrix == "temporal" else [f"pattern_{r}" for r in range(W.shape[1])]
        write_csv(pd.DataFrame(W, index=matrix.row_keys, columns=names).rename_axis("user_id"),
                  out / "W_true.csv", index=True)
        write_csv(pd.DataFrame(L, index=names, columns=matrix.col_labels).rename_axis("component"),
                  out / "L_true.csv", index=True)
        print(f"✅ Planted {args.matrix} matrix {matrix.N}x{matrix.M} written to {out}")
        return EXIT_OK

    dataset = generate_dataset(spec)
    write_dataset(dataset, out)
    print(f"✅ Synthetic dataset written to {out}: {dataset.summary()}")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    overrides: Dict[str, Any] = {
        "output_dir": args.out,
        "seed": args.seed,
        "preprocess.radius_m": args.radius_m,
        "preprocess.min_span_days": args.min_span_days,
        "preprocess.min_checkins": args.min_checkins,
        "preprocess.extend_first": True if args.extend_first else None,
        "analysis.svg": True if args.svg else None,
    }
    cfg = load_pipeline_config(args.config, overrides)
    return run_pipeline(cfg)


def _add_seed(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="Random seed (default: LIFEMINE_DEFAULT_SEED)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lifemine",
        description="Mine temporal and spatial lifestyles from check-in data",
    )
    parser.add_argument("--version", action="version", version=f"lifemine {__version__}")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    parser.add_argument("--deterministic", action="store_true",
                        help="Serial execution; outputs depend only on inputs and seeds")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="Parse and validate raw check-in tables")
    p.add_argument("--checkins", required=True, type=Path)
    p.add_argument("--venues", type=Path)
    p.add_argument("--users", type=Path)
    p.add_argument("--format", choices=["csv", "jsonl"], default=None, help="Default: by file extension")
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(handler=cmd_ingest)

    p = sub.add_parser("preprocess", help="Filter users and extend venue-less check-ins")
    p.add_argument("--in", dest="input", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--radius-m", type=float, default=30.0)
    p.add_argument("--min-span-days", type=int, default=7)
    p.add_argument("--min-checkins", type=int, default=10)
    p.add_argument("--extend-first", action="store_true")
    p.set_defaults(handler=cmd_preprocess)

    p = sub.add_parser("stats", help="Descriptive statistics")
    p.add_argument("--in", dest="input", required=True, type=Path)
    p.add_argument("--metric", choices=["visitfreq", "ccdf", "shares", "boxstats"], required=True)
    p.add_argument("--bucket", choices=["hour24", "dow7", "month12"], default="hour24")
    p.add_argument("--top-n", type=int, default=10)
    p.add_argument("--days", choices=["all", "weekday", "weekend"], default="all")
    p.add_argument("--city", default=None)
    p.add_argument("--no-dedupe", action="store_true", help="Keep near-duplicate category names")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--svg", action="store_true", help="Also write a chart next to the CSV")
    p.set_defaults(handler=cmd_stats)

    p = sub.add_parser("nmf", help="Non-negative factorization of an activity matrix CSV")
    p.add_argument("--in", dest="input", required=True, type=Path)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--max-iter", type=int, default=500)
    _add_seed(p)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(handler=cmd_nmf)

    p = sub.add_parser("cp", help="CP decomposition of the user x time x category tensor")
    p.add_argument("--in", dest="input", required=True, type=Path)
    p.add_argument("--time-mode", choices=["hour24", "dow7"], default="hour24")
    p.add_argument("--top-p", type=int, default=100)
    p.add_argument("--prune-h", type=int, default=5)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--init", choices=["random", "svd", "singular_vector"], default="singular_vector")
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--relative-tol", action="store_true", help="Compare improvements relative to the tensor norm")
    p.add_argument("--top-n", type=int, default=10)
    _add_seed(p)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(handler=cmd_cp)

    p = sub.add_parser("lifestyles", help="Decompose, summarise and cluster one lifestyle view")
    p.add_argument("--in", dest="input", required=True, type=Path)
    p.add_argument("--mode", choices=["temporal", "spatial", "tensor-hour", "tensor-dow"], default="temporal")
    p.add_argument("--day-class", choices=["weekday", "weekend", "all"], default="weekday")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--categories", type=int, default=None, help="Spatial mode: keep the top N categories")
    p.add_argument("--clusters", type=int, default=5)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--normalize-rows", action="store_true")
    p.add_argument("--top-n", type=int, default=10)
    _add_seed(p)
    p.add_argument("--svg", action="store_true")
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(handler=cmd_lifestyles)

    p = sub.add_parser("synth", help="Generate a synthetic dataset with planted lifestyles")
    p.add_argument("--spec", required=True, type=Path)
    p.add_argument("--matrix", choices=["temporal", "spatial"], default=None,
                   help="Write the planted matrix and its factors instead of a dataset")
    _add_seed(p)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("run", help="Full pipeline from a JSON config (or a previous run's manifest)")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--out", default=None)
    _add_seed(p)
    p.add_argument("--radius-m", type=float, default=None)
    p.add_argument("--min-span-days", type=int, default=None)
    p.add_argument("--min-checkins", type=int, default=None)
    p.add_argument("--extend-first", action="store_true")
    p.add_argument("--svg", action="store_true")
    p.set_defaults(handler=cmd_run)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings = get_settings()
    if args.deterministic:
        settings.DETERMINISTIC = True
    configure_logging(args.log_level)

    if args.command not in ("run", "synth") and getattr(args, "seed", "absent") is None:
        args.seed = settings.DEFAULT_SEED

    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except (ConfigurationError, ValidationError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG_ERROR
    except (LifemineError, ParsingError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_STAGE_FAILED


if __name__ == "__main__":
    sys.exit(main())
