"""End-to-end analysis: metrics, single-factor KDE, factor clustering, graph statistics."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, graph, kernels, stats
from .metrics import METRIC_COLUMNS, UnsupportedConfigurationError, UserMetricVector, compute_all, spearman
from .model import InteractionDataset

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"

# factor sets: report key -> (feature columns, needs two communities)
FACTOR_SETS = {
    "rho_ld": (("rho", "ld"), False),
    "entropy": (("h_op", "h_so"), False),
    "oriented": (("h_op_oriented", "h_so_positive", "h_so_negative"), True),
}
KDE_FACTORS = ("rho", "ld", "h_op", "h_so")


class DegenerateAnalysisError(RuntimeError):
    pass


@dataclass
class AnalysisConfig:
    positive_community: str | None = None
    seed: int = 0
    k_min: int = 2
    k_max: int = 10
    restarts: int = 50
    max_iters: int = 300
    tol: float = 1e-6
    kde_grid_size: int = 512
    walks_per_side: int = 10_000
    k_authoritative: int | None = None
    max_steps: int = 100_000
    ld_mode: str = "share"
    graph_stats: bool = True


@dataclass
class AnalysisResult:
    report: dict
    metrics: list[UserMetricVector]
    communities: tuple[str, ...]
    clusterings: dict = field(default_factory=dict)  # key -> (features matrix, ClusteringResult)
    kde_profiles: dict = field(default_factory=dict)


def _summary(values) -> dict:
    arr = np.asarray(values, dtype=np.float64)
    return {"min": float(arr.min()), "mean": float(arr.mean()), "max": float(arr.max())}


def oriented_columns(ds: InteractionDataset, mv: list[UserMetricVector], positive: str) -> dict[str, np.ndarray]:
    """Tri-factor columns ``H±_op``, ``H'_so`` on the positive side and on the other side.

    A single-community dataset is treated as a two-community one whose
    second community received no interactions: every user is fully on the
    observed side and the split metric of the empty side is imputed as 1.
    """
    comms = ds.communities
    if len(comms) == 2:
        negative = next(c for c in comms if c != positive)
        return {
            "h_op_oriented": np.array([m.h_op_oriented for m in mv], dtype=np.float64),
            "h_so_positive": np.array([m.h_so_per_community[positive] for m in mv]),
            "h_so_negative": np.array([m.h_so_per_community[negative] for m in mv]),
        }
    if len(comms) == 1:
        only = comms[0]
        observed = np.array([m.h_so_per_community[only] for m in mv])
        ones = np.ones(len(mv))
        side = 1.0 if only == positive else 0.0
        return {
            "h_op_oriented": np.full(len(mv), side),
            "h_so_positive": observed if only == positive else ones,
            "h_so_negative": ones if only == positive else observed,
        }
    raise UnsupportedConfigurationError(f"oriented analysis needs at most 2 communities, got {len(comms)}")


def feature_matrix(mv: list[UserMetricVector], names, extra: dict | None = None) -> np.ndarray:
    extra = extra or {}
    cols = [extra[n] if n in extra else [getattr(m, n) for m in mv] for n in names]
    X = np.array(cols, dtype=np.float64).T
    if not np.all(np.isfinite(X)) or X.min() < 0.0 or X.max() > 1.0:
        raise DegenerateAnalysisError(f"features {names} are not within [0, 1]")
    return X


def _clustering_section(X: np.ndarray, res: stats.ClusteringResult, names) -> dict:
    return {
        "features": list(names),
        "n_points": len(X),
        "k": res.k,
        "silhouette": res.silhouette,
        "davies_bouldin": res.davies_bouldin,
        "sizes": res.sizes,
        "centroids": [[float(v) for v in row] for row in res.centroids],
        "per_k": [
            {"k": k, "silhouette": s, "davies_bouldin": d}
            for k, (s, d) in sorted(res.per_k_scores.items())
        ],
    }


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def analyze(ds: InteractionDataset, cfg: AnalysisConfig, input_echo: dict | None = None) -> AnalysisResult:
    """Run every analysis stage on ``ds``; degenerate stages become warnings."""
    warnings: list[str] = []
    comms = ds.communities
    positive = cfg.positive_community
    if positive is not None and positive not in comms and len(comms) != 1:
        raise KeyError(f"positive community {positive!r} not in dataset communities {list(comms)}")
    two_sided = len(comms) == 2 and positive is not None
    if len(comms) < 2:
        warnings.append(f"dataset has a single community ({comms[0]!r}); opinion metrics are constant")

    mv = compute_all(ds, positive if two_sided else None, ld_mode=cfg.ld_mode)
    cm = ds.community_matrix()

    report: dict = {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "polarscope", "version": __version__, "kernel_backend": kernels.BACKEND},
        "config": {
            "input": input_echo or {},
            "analysis": asdict(cfg),
        },
        "dataset": {
            "n_users": ds.n_users,
            "n_sources": len(ds.sources),
            "n_communities": len(comms),
            "communities": list(comms),
            "volume_by_community": ds.volume_by_community(),
            "cross_community_fraction": float(((cm > 0).sum(axis=1) > 1).mean()),
        },
    }

    metric_names = ["rho", "ld_raw", "ld", "h_op", "h_so"] + (["h_op_oriented"] if two_sided else [])
    summary = {name: _summary([getattr(m, name) for m in mv]) for name in metric_names}
    for c in comms:
        summary[f"h_so[{c}]"] = _summary([m.h_so_per_community[c] for m in mv])
    report["metrics"] = summary

    # single factors
    kde_section = {}
    profiles = {}
    for name in KDE_FACTORS:
        try:
            prof = stats.kde([getattr(m, name) for m in mv], grid_size=cfg.kde_grid_size)
        except stats.DegenerateInputError as exc:
            warnings.append(f"kde[{name}]: {exc}")
            kde_section[name] = None
            continue
        profiles[name] = prof
        kde_section[name] = prof.as_dict()
    report["kde"] = kde_section

    try:
        sp = spearman([m.ld for m in mv], [m.h_so for m in mv])
        report["spearman_ld_h_so"] = {
            "coefficient": sp.coefficient,
            "rank_displacement_fraction": sp.rank_displacement_fraction,
        }
    except ValueError as exc:
        warnings.append(f"spearman(ld, h_so): {exc}")
        report["spearman_ld_h_so"] = None

    # multi-factor clustering
    clusterings = {}
    kcfg = stats.KMeansConfig(restarts=cfg.restarts, max_iters=cfg.max_iters, tol=cfg.tol, seed=cfg.seed)
    k_hi = min(cfg.k_max, ds.n_users - 1)
    cl_section = {}
    for key, (names, needs_two) in FACTOR_SETS.items():
        extra = None
        if needs_two:
            if positive is None:
                warnings.append(f"clustering[{key}]: no positive community given")
                cl_section[key] = None
                continue
            try:
                extra = oriented_columns(ds, mv, positive)
            except UnsupportedConfigurationError as exc:
                warnings.append(f"clustering[{key}]: {exc}")
                cl_section[key] = None
                continue
        if k_hi < cfg.k_min:
            warnings.append(f"clustering[{key}]: too few users for k >= {cfg.k_min}")
            cl_section[key] = None
            continue
        X = feature_matrix(mv, names, extra)
        res = stats.select_k(X, range(cfg.k_min, k_hi + 1), kcfg)
        if res.silhouette == 0.0 and res.davies_bouldin is None:
            warnings.append(f"clustering[{key}]: features have no spread")
        res.ids = ds.users
        clusterings[key] = (X, res)
        cl_section[key] = _clustering_section(X, res, names)
        if needs_two:
            cl_section[key]["positive_community"] = positive
    report["clustering"] = cl_section

    if cfg.graph_stats:
        report["graph"] = graph_statistics(ds, cfg, warnings)
    report["warnings"] = warnings
    return AnalysisResult(report, mv, comms, clusterings, profiles)


def graph_statistics(ds: InteractionDataset, cfg: AnalysisConfig, warnings: list[str] | None = None,
                     strict: bool = False) -> dict:
    """Modularity peak, detected sides and random-walk controversy.

    An undefined RWC becomes a warning unless ``strict`` is set.
    """
    warnings = warnings if warnings is not None else []
    g = graph.build_graph(ds)
    out: dict = {
        "graph": "bipartite user-source, edge weight = interaction count",
        "n_nodes": g.n_nodes,
        "n_edges": g.n_edges,
        "side_detection_weighting": "unit",
    }
    peak = graph.max_modularity_partition(g)
    out["modularity"] = graph.modularity(g, peak)
    out["modularity_groups"] = len(set(peak.values()))
    if g.n_nodes < 2:
        raise DegenerateAnalysisError("graph statistics need at least 2 nodes")
    sides = graph.detect_communities(g, 2)
    out["modularity_sides"] = graph.modularity(g, sides)
    side_sizes = {"X": 0, "Y": 0}
    labels = {0: "X", 1: "Y"}
    for v, s in sides.items():
        side_sizes[labels[s]] += 1
    out["side_sizes"] = side_sizes
    try:
        res = graph.rwc(
            g, {v: labels[s] for v, s in sides.items()},
            k_authoritative=cfg.k_authoritative, walks_per_side=cfg.walks_per_side,
            max_steps=cfg.max_steps, seed=cfg.seed,
        )
    except graph.GraphError as exc:
        if strict:
            raise
        warnings.append(f"rwc: {exc}")
        out.update(rwc=None, rwc_probabilities=None, resampled_walks=0, stragglers=0)
        return out
    out["rwc"] = res.value
    out["rwc_probabilities"] = {f"{a}->{b}": p for (a, b), p in sorted(res.probabilities.items())}
    out["authoritative_per_side"] = {k: len(v) for k, v in sorted(res.authoritative.items())}
    out["walks_per_side"] = res.walks_per_side
    out["resampled_walks"] = res.resampled_walks
    out["stragglers"] = res.stragglers
    return out


# -- output files -----------------------------------------------------------------


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def metrics_csv(mv: list[UserMetricVector], communities) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(METRIC_COLUMNS) + [f"h_so_{c}" for c in communities])
    for m in mv:
        w.writerow([_fmt(v) for v in m.as_row(communities)])
    return buf.getvalue()


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def dump_report(report: dict) -> str:
    _check_finite(report)
    return json.dumps(report, indent=2, sort_keys=True, default=_json_default, allow_nan=False) + "\n"


def _check_finite(obj, path="report"):
    if isinstance(obj, float) and not math.isfinite(obj):
        raise DegenerateAnalysisError(f"non-finite value at {path}")
    if isinstance(obj, dict):
        for k, v in obj.items():
            _check_finite(v, f"{path}.{k}")
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            _check_finite(v, f"{path}[{i}]")


def write_outputs(result: AnalysisResult, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    paths["report"] = out / "report.json"
    paths["report"].write_text(dump_report(result.report), encoding="utf-8")
    paths["metrics"] = out / "metrics.csv"
    paths["metrics"].write_text(metrics_csv(result.metrics, result.communities), encoding="utf-8")
    for key, (X, res) in result.clusterings.items():
        names = FACTOR_SETS[key][0]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["user_id", *names, "cluster"])
        for uid, row, lab in zip(res.ids, X, res.labels):
            w.writerow([uid, *(repr(float(v)) for v in row), int(lab)])
        paths[f"clusters_{key}"] = out / f"clusters_{key}.csv"
        paths[f"clusters_{key}"].write_text(buf.getvalue(), encoding="utf-8")
    for name, prof in result.kde_profiles.items():
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "density"])
        for x, d in zip(prof.grid, prof.density):
            w.writerow([repr(float(x)), repr(float(d))])
        paths[f"kde_{name}"] = out / f"kde_{name}.csv"
        paths[f"kde_{name}"].write_text(buf.getvalue(), encoding="utf-8")
    return paths


def input_echo(path: Path, format: str) -> dict:
    return {"path": str(path), "format": format, "sha256": _sha256(path)}


def report_schema() -> dict:
    """The JSON schema that every ``report.json`` validates against."""
    from importlib.resources import files

    return json.loads(files("polarscope").joinpath("schema/report.schema.json").read_text(encoding="utf-8"))
