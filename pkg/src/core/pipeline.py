"""
End-to-end lifemine pipeline

Runs ingestion (or synthetic generation), preprocessing, statistics, the
temporal / spatial matrix factorizations and the two tensor decompositions,
and writes one report directory. Stage failures leave the partial outputs
in place next to a FAILED marker; a complete run ends with _SUCCESS.
"""

import json
import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from src import __version__
from src.analysis.stats import (
    box_stats_frame,
    category_box_stats,
    ccdf,
    share_series,
    visit_stats_frame,
    visiting_frequency,
)
from src.core.app import SeedStreams
from src.core.config import AnalysisConfig, PipelineConfig, get_settings
from src.core.exceptions import ConfigurationError, LifemineError
from src.core.models import Dataset, validate_dataset
from src.models.clustering import cluster_preferences
from src.models.cp_als import cp_als
from src.models.lifestyle import (
    build_spatial_matrix,
    build_temporal_matrix,
    build_tensor,
    describe_tensor_components,
    group_preferences,
    profiles_for,
    rank_categories,
    top_components,
)
from src.models.nmf import nmf
from src.models.tensor_ops import minmax_normalize
from src.models.time_ranges import CIRCADIAN_BANDS, band_activity_share, extract_time_ranges, label_circadian_components
from src.parsers.checkin_parser import ingest_dataset, write_dataset
from src.preprocess.extension import preprocess_dataset
from src.synth.generator import generate_dataset, load_spec

logger = logging.getLogger(__name__)

SUCCESS_MARKER = "_SUCCESS"
FAILED_MARKER = "FAILED"

EXIT_OK = 0
EXIT_STAGE_FAILED = 1
EXIT_CONFIG_ERROR = 2


def write_json(payload: Any, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")
    return path


def write_csv(frame: pd.DataFrame, path: Path, index: bool = False) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=index)
    return path


def _svg(enabled: bool, draw: Callable[[], Any]) -> None:
    if enabled:
        draw()


def _time_ranges_report(profiles: np.ndarray, labels: List[str]) -> Dict[str, Any]:
    report: Dict[str, Any] = {}
    for row, label in zip(profiles, labels):
        if not np.any(row > 0):
            report[label] = None
            continue
        ranges = extract_time_ranges(row)
        entry: Dict[str, Any] = ranges.to_dict()
        # intermediate_2 -> intermediate
        bands = CIRCADIAN_BANDS.get(label.rstrip("0123456789").rstrip("_"))
        if bands is not None:
            entry["band_share"] = {name: band_activity_share(row, band) for name, band in bands.items()}
        report[label] = entry
    return report


def analyze_temporal(ds: Dataset, day_class: str, analysis: AnalysisConfig, streams: SeedStreams,
                     out_dir: Path, k: Optional[int] = None) -> Dict[str, Any]:
    """Temporal NMF for one day class plus time ranges, group means and clusters."""
    name = f"temporal_{day_class}"
    k = k or analysis.temporal_k
    matrix = build_temporal_matrix(ds, day_class)
    write_csv(matrix.to_frame(), out_dir / "A.csv", index=True)

    model = nmf(matrix, k, tol=analysis.nmf_tol, max_iter=analysis.nmf_max_iter, seed=streams.seed(f"nmf/{name}"))
    model.save(out_dir / "model")

    labels = label_circadian_components(model.L)
    write_json(_time_ranges_report(model.L, labels), out_dir / "time_ranges.json")
    users = profiles_for(ds, matrix.row_keys)
    _group_outputs(model.W, users, labels, out_dir)
    _cluster_outputs(model.W, users, analysis, streams, name, out_dir)
    _svg(analysis.svg, lambda: _profile_svg(model.L, matrix.col_labels, labels, out_dir, name))
    return {"k": k, "iterations": model.iterations, "objective": model.objective, "labels": labels}


def analyze_spatial(ds: Dataset, analysis: AnalysisConfig, streams: SeedStreams,
                    out_dir: Path, k: Optional[int] = None) -> Dict[str, Any]:
    """Spatial NMF over the ranked categories plus pattern tables, group means and clusters."""
    k = k or analysis.spatial_k
    matrix = build_spatial_matrix(ds, rank_categories(ds, analysis.spatial_categories))
    write_csv(matrix.to_frame(), out_dir / "A.csv", index=True)

    model = nmf(matrix, k, tol=analysis.nmf_tol, max_iter=analysis.nmf_max_iter, seed=streams.seed("nmf/spatial"))
    model.save(out_dir / "model")

    patterns = top_components(model.L, matrix.col_labels, analysis.top_n)
    write_json(
        [{"component": r, "top_categories": [{"category": c, "weight": w} for c, w in rows]}
         for r, rows in enumerate(patterns)],
        out_dir / "patterns.json",
    )
    labels = [f"pattern_{r}" for r in range(k)]
    users = profiles_for(ds, matrix.row_keys)
    _group_outputs(model.W, users, labels, out_dir)
    _cluster_outputs(model.W, users, analysis, streams, "spatial", out_dir)
    return {"k": k, "iterations": model.iterations, "objective": model.objective, "categories": matrix.M}


def analyze_tensor(ds: Dataset, time_mode: str, analysis: AnalysisConfig, streams: SeedStreams,
                   out_dir: Path, k: Optional[int] = None) -> Dict[str, Any]:
    """CP decomposition of the user x time x category tensor."""
    name = f"tensor_{time_mode}"
    k = k or (analysis.hour_tensor_k if time_mode == "hour24" else analysis.dow_tensor_k)
    tensor = build_tensor(ds, time_mode, top_p=analysis.top_p, prune_h=analysis.prune_h)

    model = cp_als(
        tensor, k, tol=analysis.cp_tol, max_iter=analysis.cp_max_iter, init=analysis.cp_init,
        seed=streams.seed(f"cp/{name}"), relative_tol=analysis.relative_tol,
    )
    model.save(out_dir / "model")
    write_json(describe_tensor_components(model, analysis.top_n), out_dir / "components.json")

    labels = [f"component_{r}" for r in range(k)]
    if time_mode == "hour24":
        write_json(_time_ranges_report(minmax_normalize(model.L_M), labels), out_dir / "time_ranges.json")
    users = profiles_for(ds, tensor.user_keys)
    _group_outputs(model.W, users, labels, out_dir)
    _cluster_outputs(model.W, users, analysis, streams, name, out_dir)
    _svg(analysis.svg, lambda: _profile_svg(minmax_normalize(model.L_M), tensor.time_labels, labels, out_dir, name))
    return {"k": k, "iterations": model.iterations, "fit": model.fit, "shape": list(tensor.shape)}


def _group_outputs(W: np.ndarray, users, labels: List[str], out_dir: Path) -> None:
    write_csv(group_preferences(W, users, "city_gender", labels).to_frame(), out_dir / "group_means.csv")
    write_csv(group_preferences(W, users, "city", labels).to_frame(), out_dir / "group_means_city.csv")


def _cluster_outputs(W: np.ndarray, users, analysis: AnalysisConfig, streams: SeedStreams,
                     name: str, out_dir: Path) -> None:
    n_clusters = min(analysis.n_clusters, W.shape[0])
    if n_clusters < analysis.n_clusters:
        logger.warning(f"{name}: only {W.shape[0]} users; clustering into {n_clusters} clusters")
    clusters = cluster_preferences(
        W, users, n_clusters=n_clusters, seed=streams.seed(f"kmeans/{name}"),
        restarts=analysis.restarts, normalize_rows=analysis.normalize_rows,
    )
    write_json(clusters.to_dict(), out_dir / "clusters.json")


def _profile_svg(profiles, labels, names, out_dir: Path, title: str) -> None:
    from src.analysis.charts import profile_chart

    profile_chart(profiles, labels, names, out_dir / "profiles.svg", title=title)


class PipelineRunner:
    """Executes the stages of one `run` in order and records the manifest."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.out = Path(cfg.output_dir)
        self.streams = SeedStreams(cfg.seed)
        self.stages: Dict[str, Any] = {}
        self.raw: Optional[Dataset] = None
        self.dataset: Optional[Dataset] = None

    def run(self) -> int:
        try:
            self.cfg.require_inputs()
        except ConfigurationError as e:
            logger.error(f"Configuration error: {e}")
            return EXIT_CONFIG_ERROR

        self.out.mkdir(parents=True, exist_ok=True)
        for marker in (SUCCESS_MARKER, FAILED_MARKER):
            (self.out / marker).unlink(missing_ok=True)

        plan: List[Tuple[str, Callable[[], Any]]] = [
            ("load", self.load),
            ("preprocess", self.preprocess),
            ("stats", self.stats),
            ("temporal_weekday", lambda: analyze_temporal(
                self.dataset, "weekday", self.cfg.analysis, self.streams, self.out / "temporal_weekday")),
            ("temporal_weekend", lambda: analyze_temporal(
                self.dataset, "weekend", self.cfg.analysis, self.streams, self.out / "temporal_weekend")),
            ("spatial", lambda: analyze_spatial(
                self.dataset, self.cfg.analysis, self.streams, self.out / "spatial")),
            ("tensor_hour", lambda: analyze_tensor(
                self.dataset, "hour24", self.cfg.analysis, self.streams, self.out / "tensor_hour")),
            ("tensor_dow", lambda: analyze_tensor(
                self.dataset, "dow7", self.cfg.analysis, self.streams, self.out / "tensor_dow")),
        ]

        for name, stage in plan:
            logger.info(f"Stage {name} ...")
            try:
                self.stages[name] = stage()
            except ConfigurationError as e:
                logger.error(f"Stage {name}: configuration error: {e}")
                self._fail(name, e)
                return EXIT_CONFIG_ERROR
            except Exception as e:
                logger.error(f"Stage {name} failed: {e}", exc_info=not isinstance(e, LifemineError))
                self._fail(name, e)
                return EXIT_STAGE_FAILED

        self.write_manifest("success")
        (self.out / SUCCESS_MARKER).write_text("", encoding="utf-8")
        logger.info(f"✅ Pipeline finished; report in {self.out}")
        return EXIT_OK

    def _fail(self, stage: str, error: Exception) -> None:
        self.write_manifest("failed", failed_stage=stage)
        (self.out / FAILED_MARKER).write_text(
            f"stage: {stage}\nerror: {type(error).__name__}: {error}\n", encoding="utf-8"
        )

    def load(self) -> Dict[str, Any]:
        cfg = self.cfg
        if cfg.synth_spec is not None:
            spec = load_spec(cfg.synth_spec)
            self.raw = generate_dataset(spec)
        else:
            self.raw, _ = ingest_dataset(cfg.checkins, cfg.venues, cfg.users, cfg.input_format)
        report = validate_dataset(self.raw)
        write_json(report.to_dict(), self.out / "validation.json")
        return {"summary": self.raw.summary(), "validation": report.counts(),
                "ingest": self.raw.provenance.get("ingest", {})}

    def preprocess(self) -> Dict[str, Any]:
        self.dataset = preprocess_dataset(self.raw, self.cfg.preprocess)
        write_dataset(self.dataset, self.out / "dataset")
        return {"summary": self.dataset.summary(),
                "extension": self.dataset.provenance.get("extension", {})}

    def stats(self) -> Dict[str, Any]:
        analysis = self.cfg.analysis
        out = self.out / "stats"
        written = []
        boxes = None
        counts: List[int] = []
        for label, ds in (("raw", self.raw), ("extended", self.dataset)):
            visits = visiting_frequency(ds)
            write_csv(visit_stats_frame(visits), out / f"visitfreq_{label}.csv")
            boxes = category_box_stats(visits, ds.venue_index)
            write_csv(box_stats_frame(boxes), out / f"boxstats_{label}.csv")
            counts = [v.visits for v in visits]
            write_csv(pd.DataFrame(ccdf(counts), columns=["threshold", "probability"]), out / f"ccdf_{label}.csv")
            written += [f"visitfreq_{label}.csv", f"boxstats_{label}.csv", f"ccdf_{label}.csv"]

        series_plan = [("hour24", "weekday"), ("hour24", "weekend"), ("dow7", "all"), ("month12", "all")]
        for bucketing, days in series_plan:
            series = share_series(self.dataset, bucketing, analysis.top_n, days, analysis.dedupe_categories)
            filename = f"shares_{bucketing}_{days}.csv"
            write_csv(series.to_frame(), out / filename)
            written.append(filename)
            if analysis.svg:
                from src.analysis.charts import share_chart

                share_chart(series, out / filename.replace(".csv", ".svg"))

        if analysis.svg:
            from src.analysis.charts import box_chart, ccdf_chart

            box_chart(boxes or {}, out / "boxstats_extended.svg")
            ccdf_chart(ccdf(counts), out / "ccdf_extended.svg")
        return {"files": written}

    def write_manifest(self, status: str, failed_stage: Optional[str] = None) -> Path:
        import joblib
        import pydantic
        import sklearn

        settings = get_settings()
        manifest = {
            "lifemine_version": __version__,
            "status": status,
            "failed_stage": failed_stage,
            "versions": {
                "numpy": np.__version__,
                "pandas": pd.__version__,
                "scikit-learn": sklearn.__version__,
                "joblib": joblib.__version__,
                "pydantic": pydantic.VERSION,
            },
            "root_seed": self.cfg.seed,
            "seeds": self.streams.issued,
            "deterministic": settings.DETERMINISTIC,
            "threads": settings.effective_threads,
            "config": self.cfg.echo(),
            "stages": self.stages,
        }
        return write_json(manifest, self.out / "manifest.json")


def run_pipeline(cfg: PipelineConfig) -> int:
    """
    Run every stage and write the report directory.

    Returns:
        0 on success, 1 when a stage fails, 2 for configuration errors
    """
    return PipelineRunner(cfg).run()
