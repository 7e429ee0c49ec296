"""Synthetic user-source interaction data with ground-truth behavioral classes.

Each user belongs to a class that fixes

* the dominant community (or none, for balanced users),
* the minority share ``m``: fraction of interactions spent on the other
  community (0 for polarized classes),
* an activity distribution (bounded power law on the number of interactions),
* per-side source focus: interactions inside a community follow a Zipf law
  with exponent drawn from a class range over a user-specific ordering of
  that community's sources.

Minority shares are drawn by stratified sampling from a density
proportional to ``(0.5 - m) ** share_power`` truncated to the class range, so
the cross-community population has a smooth decreasing density in ``m``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .model import InteractionDataset, InteractionRecord, write_dataset


class SynthConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ClassSpec:
    fraction: float
    home: str | None
    minority_share: tuple[float, float] = (0.0, 0.0)
    share_power: float = 0.0
    activity: tuple[float, float, float] = (10, 2000, 2.0)  # (min, max, exponent)
    focus: Mapping[str, tuple[float, float]] = field(default_factory=dict)  # community -> Zipf exponent range


@dataclass(frozen=True)
class SynthConfig:
    n_users: int = 1000
    n_sources_per_community: int = 10
    communities: tuple[str, str] = ("anti", "pro")
    classes: Mapping[str, ClassSpec] = field(default_factory=dict)
    # relative popularity of the k-th source of a community: (k + 1) ** -popularity_skew
    popularity_skew: float = 0.5
    seed: int = 0

    @property
    def class_mix(self) -> dict[str, float]:
        return {name: spec.fraction for name, spec in self.classes.items()}

    @property
    def cross_community_fraction(self) -> float:
        return sum(s.fraction for s in self.classes.values() if s.minority_share[1] > 0)

    def validate(self) -> None:
        if self.n_users < 1:
            raise SynthConfigError("n_users must be >= 1")
        if self.n_sources_per_community < 1:
            raise SynthConfigError("each community needs at least one source")
        if len(self.communities) != 2 or len(set(self.communities)) != 2:
            raise SynthConfigError("exactly two distinct communities are required")
        if not self.classes:
            raise SynthConfigError("at least one behavioral class is required")
        total = sum(s.fraction for s in self.classes.values())
        if abs(total - 1.0) > 1e-9:
            raise SynthConfigError(f"class fractions sum to {total}, expected 1")
        for name, s in self.classes.items():
            if s.fraction < 0:
                raise SynthConfigError(f"class {name!r}: negative fraction")
            if s.home is not None and s.home not in self.communities:
                raise SynthConfigError(f"class {name!r}: unknown home community {s.home!r}")
            lo, hi = s.minority_share
            if not 0.0 <= lo <= hi <= 0.5:
                raise SynthConfigError(f"class {name!r}: minority share range must lie in [0, 0.5]")
            if s.home is None and hi == 0:
                raise SynthConfigError(f"class {name!r}: balanced class needs a positive minority share")
            amin, amax, expo = s.activity
            if not 1 <= amin <= amax:
                raise SynthConfigError(f"class {name!r}: activity bounds must satisfy 1 <= min <= max")
            if hi > 0 and amax < 2:
                raise SynthConfigError(f"class {name!r}: cross-community users need >= 2 interactions")
            for c, (flo, fhi) in s.focus.items():
                if c not in self.communities:
                    raise SynthConfigError(f"class {name!r}: focus on unknown community {c!r}")
                if not 0 <= flo <= fhi:
                    raise SynthConfigError(f"class {name!r}: invalid focus range for {c!r}")

    # -- (de)serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        d["communities"] = list(self.communities)
        d["classes"] = {
            name: {**asdict(spec), "focus": {c: list(r) for c, r in spec.focus.items()}}
            for name, spec in self.classes.items()
        }
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "SynthConfig":
        try:
            classes = {
                name: ClassSpec(
                    fraction=float(spec["fraction"]),
                    home=spec.get("home"),
                    minority_share=tuple(spec.get("minority_share", (0.0, 0.0))),
                    share_power=float(spec.get("share_power", 0.0)),
                    activity=tuple(spec.get("activity", (10, 2000, 2.0))),
                    focus={c: tuple(r) for c, r in spec.get("focus", {}).items()},
                )
                for name, spec in d["classes"].items()
            }
            cfg = cls(
                n_users=int(d.get("n_users", 1000)),
                n_sources_per_community=int(d.get("n_sources_per_community", 10)),
                communities=tuple(d.get("communities", ("anti", "pro"))),
                classes=classes,
                popularity_skew=float(d.get("popularity_skew", 0.5)),
                seed=int(d.get("seed", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SynthConfigError(f"invalid config: {exc}") from None
        cfg.validate()
        return cfg


def paper_profile(seed: int = 0) -> SynthConfig:
    """Configuration shaped after the vaccine-debate dataset.

    1000 users, 10 + 10 sources, 18.8% cross-community users split into a
    balanced class and an anti-leaning class, anti-side volume roughly 17x
    the pro side. Focus ranges and activity bounds are calibration values.
    """
    return SynthConfig(
        n_users=1000,
        n_sources_per_community=10,
        communities=("anti", "pro"),
        classes={
            "anti-polarized": ClassSpec(
                fraction=0.312, home="anti",
                activity=(400, 2000, 2.0),
                focus={"anti": (1.8, 2.6)},
            ),
            "pro-polarized": ClassSpec(
                fraction=0.5, home="pro",
                activity=(10, 60, 2.0),
                focus={"pro": (2.8, 4.0)},
            ),
            "balanced-intermediate": ClassSpec(
                fraction=0.045, home=None,
                minority_share=(0.3, 0.5), share_power=0.7,
                activity=(60, 400, 2.0),
                focus={"anti": (0.3, 0.8), "pro": (0.3, 0.8)},
            ),
            "anti-leaning-intermediate": ClassSpec(
                fraction=0.143, home="anti",
                minority_share=(0.03, 0.3), share_power=0.7,
                activity=(100, 1000, 2.0),
                focus={"anti": (0.5, 1.0), "pro": (4.0, 6.0)},
            ),
        },
        seed=seed,
    )


def _allocate(fractions: list[float], n: int) -> list[int]:
    raw = [f * n for f in fractions]
    base = [int(np.floor(r)) for r in raw]
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - base[i]), i))
    for i in order[: n - sum(base)]:
        base[i] += 1
    return base


def _bounded_power_law(u: np.ndarray, lo: float, hi: float, expo: float) -> np.ndarray:
    if lo == hi:
        return np.full_like(u, lo)
    if abs(expo - 1.0) < 1e-12:
        return lo * (hi / lo) ** u
    a, b = lo ** (1 - expo), hi ** (1 - expo)
    return (a + u * (b - a)) ** (1 / (1 - expo))


def _minority_shares(t: np.ndarray, lo: float, hi: float, power: float) -> np.ndarray:
    # inverse CDF of density ∝ (0.5 - m) ** power truncated to [lo, hi]
    g_lo, g_hi = (0.5 - lo) ** (power + 1), (0.5 - hi) ** (power + 1)
    return 0.5 - (g_lo - t * (g_lo - g_hi)) ** (1 / (power + 1))


def _source_weights(rng, n: int, popularity: np.ndarray, focus: float) -> np.ndarray:
    # user-specific source ranking, biased toward popular sources
    keys = rng.random(n) ** (1.0 / popularity)
    ranking = np.argsort(-keys, kind="stable")
    w = np.empty(n)
    w[ranking] = (np.arange(n) + 1.0) ** -focus
    return w / w.sum()


def generate(cfg: SynthConfig) -> tuple[InteractionDataset, dict[str, str]]:
    """Draw a dataset and its ground-truth ``user -> class`` map."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    comms = list(cfg.communities)
    k = cfg.n_sources_per_community
    sources = {c: [f"{c}_src{j:02d}" for j in range(k)] for c in comms}
    popularity = (np.arange(k) + 1.0) ** -cfg.popularity_skew

    names = list(cfg.classes)
    sizes = _allocate([cfg.classes[n].fraction for n in names], cfg.n_users)
    class_of = np.repeat(np.arange(len(names)), sizes)
    rng.shuffle(class_of)
    width = len(str(cfg.n_users - 1))
    user_ids = [f"user{i:0{width}d}" for i in range(cfg.n_users)]

    # stratified draws per class: activity and minority share
    activity = np.zeros(cfg.n_users, dtype=np.int64)
    share = np.zeros(cfg.n_users)
    for ci, name in enumerate(names):
        spec = cfg.classes[name]
        members = np.flatnonzero(class_of == ci)
        m = len(members)
        if m == 0:
            continue
        lo, hi, expo = spec.activity
        u = (rng.permutation(m) + rng.random(m)) / m
        activity[members] = np.rint(_bounded_power_law(u, lo, hi, expo)).astype(np.int64)
        slo, shi = spec.minority_share
        if shi > 0:
            t = (rng.permutation(m) + rng.random(m)) / m
            share[members] = _minority_shares(t, slo, shi, spec.share_power)

    records = []
    truth = {}
    balanced_flip = 0
    for i in range(cfg.n_users):
        spec = cfg.classes[names[class_of[i]]]
        truth[user_ids[i]] = names[class_of[i]]
        n_total = int(activity[i])
        if spec.home is None:
            home = comms[balanced_flip % 2]
            balanced_flip += 1
        else:
            home = spec.home
        other = comms[1 - comms.index(home)]
        if share[i] > 0:
            n_other = int(np.clip(np.rint(share[i] * n_total), 1, n_total - 1))
        else:
            n_other = 0
        for side, n_side in ((home, n_total - n_other), (other, n_other)):
            if n_side == 0:
                continue
            flo, fhi = spec.focus.get(side, (1.0, 1.0))
            focus = flo + (fhi - flo) * rng.random()
            p = _source_weights(rng, k, popularity, focus)
            draws = rng.multinomial(n_side, p)
            for j in np.flatnonzero(draws):
                records.append(InteractionRecord(user_ids[i], sources[side][j], side, int(draws[j])))
    ds = InteractionDataset.from_records(records, communities=comms)
    return ds, truth


def write_synthetic(ds: InteractionDataset, truth: Mapping[str, str], out_dir: str | Path,
                    format: str = "csv", config: SynthConfig | None = None) -> dict[str, Path]:
    """Write ``interactions.<format>``, ``ground_truth.csv`` and the config echo."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"interactions": out / f"interactions.{format}", "ground_truth": out / "ground_truth.csv"}
    write_dataset(ds, paths["interactions"], format)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("user_id", "class"))
    for u in ds.users:
        w.writerow((u, truth[u]))
    paths["ground_truth"].write_text(buf.getvalue(), encoding="utf-8")
    if config is not None:
        paths["config"] = out / "synth_config.json"
        # class order drives the draws, so keys keep insertion order
        paths["config"].write_text(json.dumps(config.to_dict(), indent=2) + "\n", encoding="utf-8")
    return paths
