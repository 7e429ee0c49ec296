"""Individual polarization metrics.

Single-factor metrics take a user's preferred community or source (the
maximum of a ratio). Entropy-based metrics use the whole interaction
distribution: ``H' = 1 - H_N`` where ``H_N`` is Shannon entropy divided by
``log(n)`` over a fixed entity universe of size ``n``, so concentrated
(polarized) behavior scores high.

All logarithms are natural. ``H_N`` does not depend on the base.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .model import InteractionDataset, community_counts

__all__ = [
    "MetricInputError",
    "UnsupportedConfigurationError",
    "UserMetricVector",
    "polarization_score",
    "lack_of_diversity_raw",
    "normalize_ld",
    "inverted_normalized_entropy",
    "opinion_entropy",
    "source_entropy",
    "oriented_opinion",
    "orient",
    "split_source_entropy",
    "spearman",
    "SpearmanResult",
    "compute_all",
    "METRIC_COLUMNS",
]

# metrics.csv column order; split-source columns are appended per community
METRIC_COLUMNS = ("user_id", "rho", "ld_raw", "ld", "h_op", "h_so", "h_op_oriented")


class MetricInputError(ValueError):
    """A metric is undefined for the given input (e.g. no interactions)."""


class UnsupportedConfigurationError(ValueError):
    pass


def _values(counts) -> list[int]:
    if isinstance(counts, Mapping):
        return [int(v) for v in counts.values()]
    return [int(v) for v in counts]


def polarization_score(counts_by_community) -> float:
    """Largest share of a user's interactions falling in one community.

    Ranges from ``1/|C|`` (evenly spread) to 1 (single community).
    """
    vals = _values(counts_by_community)
    if len(vals) < 2:
        raise UnsupportedConfigurationError("polarization score needs at least 2 communities")
    if any(v < 0 for v in vals):
        raise MetricInputError("negative count")
    total = sum(vals)
    if total <= 0:
        raise MetricInputError("polarization score undefined for a user without interactions")
    return max(vals) / total


def lack_of_diversity_raw(
    user_counts: Mapping[str, float],
    source_population: Mapping[str, int],
    total_users: int,
) -> float:
    """Unnormalized Lack of Diversity: ``max_m N_{u,m} * log(|U| / |U_m|)``.

    ``user_counts`` may hold raw counts or per-user shares; the kernel does
    not care. Sources shared by every user contribute 0.
    """
    if total_users < 1:
        raise MetricInputError("total_users must be >= 1")
    best = 0.0
    for source, n in user_counts.items():
        if n <= 0:
            continue
        reach = source_population.get(source, 0)
        if reach < 1 or reach > total_users:
            raise MetricInputError(
                f"source {source!r} has population {reach} outside [1, {total_users}]"
            )
        best = max(best, n * math.log(total_users / reach))
    return best


def normalize_ld(raw_values: Sequence[float]) -> list[float]:
    """Divide by the population maximum; all zeros if the maximum is 0."""
    vals = [float(v) for v in raw_values]
    if not vals:
        raise MetricInputError("cannot normalize an empty population")
    top = max(vals)
    if top <= 0.0:
        return [0.0] * len(vals)
    return [v / top for v in vals]


def inverted_normalized_entropy(counts, universe_size: int) -> float:
    """Return ``1 - H_N`` for a count distribution over ``universe_size`` entities.

    Zero counts contribute nothing (``0 log 0 = 0``). A one-entity universe
    admits no diversity and yields 1.
    """
    vals = _values(counts)
    n = int(universe_size)
    if n < 1:
        raise MetricInputError("universe size must be >= 1")
    if any(v < 0 for v in vals):
        raise MetricInputError("negative count")
    total = sum(vals)
    if total <= 0:
        raise MetricInputError("entropy undefined for a user without interactions")
    nonzero = [v for v in vals if v > 0]
    if len(nonzero) > n:
        raise MetricInputError(
            f"{len(nonzero)} active entities exceed universe size {n}"
        )
    if n == 1:
        return 1.0
    h = -math.fsum((v / total) * math.log(v / total) for v in nonzero)
    hn = h / math.log(n)
    return min(1.0, max(0.0, 1.0 - hn))


def opinion_entropy(ds: InteractionDataset, user: str) -> float:
    """Entropy-based opinion metric over all communities."""
    return inverted_normalized_entropy(community_counts(ds, user), len(ds.communities))


def source_entropy(ds: InteractionDataset, user: str) -> float:
    """Entropy-based source metric over the full source universe."""
    row = ds.counts[ds.user_index(user)]
    return inverted_normalized_entropy(row.tolist(), len(ds.sources))


def orient(h_op: float, toward_positive: bool) -> float:
    """Map ``H'_op`` to [0, 1]: 1 fully positive-side, 0 fully opposite, 0.5 balanced."""
    sign = 1.0 if toward_positive else -1.0
    return (sign * h_op + 1.0) / 2.0


def _predominant_is(cc: Mapping[str, int], positive_community: str) -> bool:
    other = [v for c, v in cc.items() if c != positive_community]
    # ties resolve toward the positive side; output is 0.5 either way
    return cc[positive_community] >= max(other)


def oriented_opinion(ds: InteractionDataset, user: str, positive_community: str) -> float:
    """Signed opinion metric for the two-community case."""
    if len(ds.communities) != 2:
        raise UnsupportedConfigurationError(
            f"oriented opinion needs exactly 2 communities, got {len(ds.communities)}"
        )
    if positive_community not in ds.communities:
        raise KeyError(f"unknown community {positive_community!r}")
    cc = community_counts(ds, user)
    h = inverted_normalized_entropy(cc, 2)
    return orient(h, _predominant_is(cc, positive_community))


def split_source_entropy(ds: InteractionDataset, user: str, community: str) -> float:
    """Source metric restricted to one community's sources.

    A user who never interacts with ``community`` gets 1.0: diversity over
    an unaccessed side is treated as fully lacking.
    """
    cols = ds.sources_in(community)
    row = ds.counts[ds.user_index(user), cols]
    if row.sum() == 0:
        return 1.0
    return inverted_normalized_entropy(row.tolist(), len(cols))


# -- rank correlation -----------------------------------------------------------


@dataclass(frozen=True)
class SpearmanResult:
    coefficient: float
    rank_displacement_fraction: float

    def __iter__(self):
        yield self.coefficient
        yield self.rank_displacement_fraction


def _average_ranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(len(x), dtype=np.float64)
    i = 0
    n = len(x)
    while i < n:
        j = i
        while j + 1 < n and xs[j + 1] == xs[i]:
            j += 1
        # 1-based ranks; ties share the mean of their positions
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(a: Sequence[float], b: Sequence[float], displacement_threshold: float = 0.05) -> SpearmanResult:
    """Spearman coefficient with tie-averaged ranks, plus rank displacement.

    The displacement fraction is the share of items whose rank moves by more
    than ``displacement_threshold * len(a)`` positions between ``a`` and ``b``.
    """
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    if len(x) < 2:
        raise ValueError("spearman needs at least 2 items")
    rx, ry = _average_ranks(x), _average_ranks(y)
    dx, dy = rx - rx.mean(), ry - ry.mean()
    sxx, syy = float(np.dot(dx, dx)), float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("spearman undefined for a constant sequence")
    rho = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    rho = min(1.0, max(-1.0, rho))
    moved = np.abs(rx - ry) > displacement_threshold * len(x)
    return SpearmanResult(rho, float(moved.mean()))


# -- batch ----------------------------------------------------------------------


@dataclass(frozen=True)
class UserMetricVector:
    user_id: str
    rho: float
    ld_raw: float
    ld: float
    h_op: float
    h_so: float
    h_op_oriented: float | None
    h_so_per_community: dict[str, float] = field(default_factory=dict)

    def as_row(self, communities: Sequence[str]) -> list:
        row = [self.user_id, self.rho, self.ld_raw, self.ld, self.h_op, self.h_so, self.h_op_oriented]
        row.extend(self.h_so_per_community[c] for c in communities)
        return row

    def to_dict(self) -> dict:
        return {
            "user_id": self.user_id, "rho": self.rho, "ld_raw": self.ld_raw, "ld": self.ld,
            "h_op": self.h_op, "h_so": self.h_so, "h_op_oriented": self.h_op_oriented,
            "h_so_per_community": dict(self.h_so_per_community),
        }


def compute_all(
    ds: InteractionDataset,
    positive_community: str | None = None,
    ld_mode: str = "share",
) -> list[UserMetricVector]:
    """Every metric for every user, in registry order.

    ``ld_mode="share"`` weights each source by the user's share of
    interactions ``N_{u,m}/N_u``; ``"count"`` uses raw counts. The oriented
    opinion is only computed for two-community datasets with a
    ``positive_community``.
    """
    if ld_mode not in ("share", "count"):
        raise ValueError(f"ld_mode must be 'share' or 'count', got {ld_mode!r}")
    two_sided = len(ds.communities) == 2 and positive_community is not None
    if positive_community is not None and positive_community not in ds.communities:
        raise KeyError(f"unknown community {positive_community!r}")

    reach = ds.source_reach()
    population = {s: int(reach[j]) for j, s in enumerate(ds.sources)}
    n_users = ds.n_users
    raw_ld = []
    partial = []
    for i, user in enumerate(ds.users):
        row = ds.counts[i]
        total = int(row.sum())
        weights = {
            s: (int(row[j]) / total if ld_mode == "share" else int(row[j]))
            for j, s in enumerate(ds.sources)
            if row[j] > 0
        }
        raw_ld.append(lack_of_diversity_raw(weights, population, n_users))

        cc = community_counts(ds, user)
        rho = polarization_score(cc) if len(ds.communities) >= 2 else 1.0
        h_op = inverted_normalized_entropy(cc, len(ds.communities))
        h_so = inverted_normalized_entropy(row.tolist(), len(ds.sources))
        oriented = orient(h_op, _predominant_is(cc, positive_community)) if two_sided else None
        split = {c: split_source_entropy(ds, user, c) for c in ds.communities}
        partial.append((user, rho, h_op, h_so, oriented, split))

    ld = normalize_ld(raw_ld)
    return [
        UserMetricVector(
            user_id=user, rho=rho, ld_raw=raw, ld=ld_val, h_op=h_op, h_so=h_so,
            h_op_oriented=oriented, h_so_per_community=split,
        )
        for (user, rho, h_op, h_so, oriented, split), raw, ld_val in zip(partial, raw_ld, ld)
    ]
