"""Interaction data model and file ingestion.

A dataset is a dense user x source count matrix. Every source (an elite
account acting as an information outlet) belongs to exactly one community.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

logger = logging.getLogger(__name__)

FIELDS = ("user_id", "source_id", "community_id", "count")


class DataError(ValueError):
    """Input data is malformed or inconsistent."""


class MalformedRowError(DataError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class CommunityConflictError(DataError):
    def __init__(self, source_id: str, first: str, second: str):
        super().__init__(
            f"source {source_id!r} mapped to two communities: {first!r} and {second!r}"
        )
        self.source_id = source_id


class EmptyDatasetError(DataError):
    pass


@dataclass(frozen=True)
class InteractionRecord:
    user_id: str
    source_id: str
    community_id: str
    count: int = 1

    def __post_init__(self):
        if not isinstance(self.count, (int, np.integer)) or isinstance(self.count, bool):
            raise DataError(f"count must be an integer, got {self.count!r}")
        if self.count < 0:
            raise DataError(f"count must be non-negative, got {self.count}")


@dataclass(frozen=True, eq=False)
class InteractionDataset:
    """Immutable aggregated interaction counts.

    Attributes
    ----------
    users, sources, communities : tuple of str
        Lexicographically sorted registries.
    community_of_source : dict
        Maps every source to its community.
    counts : np.ndarray
        ``(len(users), len(sources))`` int64 matrix, read-only.
    """

    users: tuple[str, ...]
    sources: tuple[str, ...]
    communities: tuple[str, ...]
    community_of_source: Mapping[str, str]
    counts: np.ndarray
    _user_index: dict = field(init=False, repr=False, compare=False)
    _source_community_idx: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64)
        if counts.shape != (len(self.users), len(self.sources)):
            raise DataError(
                f"counts shape {counts.shape} does not match "
                f"{len(self.users)} users x {len(self.sources)} sources"
            )
        if (counts < 0).any():
            raise DataError("negative counts")
        if len(self.users) == 0:
            raise EmptyDatasetError("dataset has no users")
        row_sums = counts.sum(axis=1)
        if (row_sums <= 0).any():
            bad = self.users[int(np.flatnonzero(row_sums <= 0)[0])]
            raise DataError(f"user {bad!r} has no interactions")
        comm_index = {c: i for i, c in enumerate(self.communities)}
        try:
            src_comm = np.array(
                [comm_index[self.community_of_source[s]] for s in self.sources],
                dtype=np.int64,
            )
        except KeyError as exc:
            raise DataError(f"source or community missing from registry: {exc}") from None
        counts.setflags(write=False)
        src_comm.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "community_of_source", dict(self.community_of_source))
        object.__setattr__(self, "_user_index", {u: i for i, u in enumerate(self.users)})
        object.__setattr__(self, "_source_community_idx", src_comm)

    @classmethod
    def from_records(
        cls,
        records: Iterable[InteractionRecord],
        communities: Iterable[str] | None = None,
    ) -> "InteractionDataset":
        """Aggregate records into a dataset.

        Duplicate ``(user, source)`` pairs are summed and zero counts are
        dropped. Users and sources left without any positive count do not
        enter the registries. ``communities`` may name extra communities
        that have no surviving source.
        """
        totals: dict[tuple[str, str], int] = defaultdict(int)
        community_of_source: dict[str, str] = {}
        all_users: set[str] = set()
        for rec in records:
            all_users.add(rec.user_id)
            prev = community_of_source.setdefault(rec.source_id, rec.community_id)
            if prev != rec.community_id:
                raise CommunityConflictError(rec.source_id, prev, rec.community_id)
            if rec.count > 0:
                totals[(rec.user_id, rec.source_id)] += int(rec.count)

        seen_users = {u for u, _ in totals}
        dropped = all_users - seen_users
        if not totals:
            raise EmptyDatasetError("no interactions with a positive count")

        users = tuple(sorted(seen_users))
        sources = tuple(sorted({s for _, s in totals}))
        comms = set(community_of_source[s] for s in sources)
        if communities is not None:
            comms.update(communities)
        communities_t = tuple(sorted(comms))
        uidx = {u: i for i, u in enumerate(users)}
        sidx = {s: i for i, s in enumerate(sources)}
        counts = np.zeros((len(users), len(sources)), dtype=np.int64)
        for (u, s), c in totals.items():
            counts[uidx[u], sidx[s]] = c
        if dropped:
            logger.warning("dropped %d user(s) without positive interactions", len(dropped))
        return cls(
            users=users,
            sources=sources,
            communities=communities_t,
            community_of_source={s: community_of_source[s] for s in sources},
            counts=counts,
        )

    # -- derived quantities -------------------------------------------------

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def source_community_index(self) -> np.ndarray:
        """Community index (into ``communities``) of each source column."""
        return self._source_community_idx

    def user_index(self, user: str) -> int:
        try:
            return self._user_index[user]
        except KeyError:
            raise KeyError(f"unknown user {user!r}") from None

    def user_totals(self) -> np.ndarray:
        """N_u for every user."""
        return self.counts.sum(axis=1)

    def source_reach(self) -> np.ndarray:
        """|U_m|: number of users with a positive count on each source."""
        return (self.counts > 0).sum(axis=0)

    def community_matrix(self) -> np.ndarray:
        """``(n_users, n_communities)`` matrix of N_{u,c}."""
        out = np.zeros((self.n_users, len(self.communities)), dtype=np.int64)
        for c in range(len(self.communities)):
            out[:, c] = self.counts[:, self._source_community_idx == c].sum(axis=1)
        return out

    def sources_in(self, community: str) -> np.ndarray:
        """Column indices of the sources belonging to ``community``."""
        if community not in self.communities:
            raise KeyError(f"unknown community {community!r}")
        c = self.communities.index(community)
        return np.flatnonzero(self._source_community_idx == c)

    def records(self) -> list[InteractionRecord]:
        """Positive cells as records, in registry order."""
        out = []
        for i, j in zip(*np.nonzero(self.counts)):
            s = self.sources[j]
            out.append(
                InteractionRecord(self.users[i], s, self.community_of_source[s], int(self.counts[i, j]))
            )
        return out

    def volume_by_community(self) -> dict[str, int]:
        cm = self.community_matrix()
        return {c: int(cm[:, i].sum()) for i, c in enumerate(self.communities)}


def community_counts(ds: InteractionDataset, user: str) -> dict[str, int]:
    """N_{u,c} for every community, zero entries included."""
    row = ds.counts[ds.user_index(user)]
    out = {c: 0 for c in ds.communities}
    for j, c in enumerate(ds.source_community_index):
        out[ds.communities[c]] += int(row[j])
    return out


def source_counts(ds: InteractionDataset, user: str) -> dict[str, int]:
    """N_{u,m} for every source, zero entries included."""
    row = ds.counts[ds.user_index(user)]
    return {s: int(row[j]) for j, s in enumerate(ds.sources)}


# -- ingestion ----------------------------------------------------------------


def _parse_count(raw, line: int) -> int:
    if raw is None or raw == "":
        return 1
    if isinstance(raw, bool):
        raise MalformedRowError(line, f"invalid count {raw!r}")
    if isinstance(raw, int):
        value = raw
    elif isinstance(raw, float) and raw.is_integer():
        value = int(raw)
    elif isinstance(raw, str):
        try:
            value = int(raw.strip())
        except ValueError:
            raise MalformedRowError(line, f"invalid count {raw!r}") from None
    else:
        raise MalformedRowError(line, f"invalid count {raw!r}")
    if value < 0:
        raise MalformedRowError(line, f"negative count {value}")
    return value


def _record_from_mapping(row: Mapping, line: int) -> InteractionRecord:
    values = {}
    for key in FIELDS[:3]:
        v = row.get(key)
        if v is None or (isinstance(v, str) and v.strip() == ""):
            raise MalformedRowError(line, f"missing {key}")
        if not isinstance(v, str):
            if isinstance(v, (int, float)) and not isinstance(v, bool):
                v = str(v)
            else:
                raise MalformedRowError(line, f"{key} must be a string")
        values[key] = v.strip()
    return InteractionRecord(count=_parse_count(row.get("count"), line), **values)


def read_records(path: str | Path, format: str = "csv") -> list[InteractionRecord]:
    """Parse raw records from a CSV or JSONL file without aggregating."""
    path = Path(path)
    if format not in ("csv", "jsonl"):
        raise ValueError(f"unsupported format {format!r}; expected csv or jsonl")
    if not path.exists():
        raise FileNotFoundError(path)
    text = path.read_text(encoding="utf-8")
    records = []
    if format == "csv":
        reader = csv.DictReader(io.StringIO(text, newline=""))
        header = reader.fieldnames or []
        missing = [k for k in FIELDS[:3] if k not in header]
        if missing:
            raise MalformedRowError(1, f"header missing columns {missing}")
        for row in reader:
            line = reader.line_num
            if None in row:
                raise MalformedRowError(line, "too many fields")
            if all((v or "").strip() == "" for v in row.values()):
                continue
            records.append(_record_from_mapping(row, line))
    else:
        for line, raw in enumerate(text.splitlines(), start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise MalformedRowError(line, f"invalid JSON: {exc.msg}") from None
            if not isinstance(obj, dict):
                raise MalformedRowError(line, "expected a JSON object")
            records.append(_record_from_mapping(obj, line))
    return records


def ingest(path: str | Path, format: str = "csv") -> InteractionDataset:
    """Load and validate an interaction file.

    Raises
    ------
    MalformedRowError
        A row is missing fields or carries an invalid count.
    CommunityConflictError
        A source appears under two communities.
    EmptyDatasetError
        No positive interaction survives.
    """
    return InteractionDataset.from_records(read_records(path, format))


def write_dataset(ds: InteractionDataset, path: str | Path, format: str = "csv") -> None:
    """Serialize ``ds`` in the ingestion format (one line per positive cell)."""
    path = Path(path)
    if format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(FIELDS)
        for r in ds.records():
            w.writerow((r.user_id, r.source_id, r.community_id, r.count))
        path.write_text(buf.getvalue(), encoding="utf-8")
    elif format == "jsonl":
        lines = [
            json.dumps(
                {"user_id": r.user_id, "source_id": r.source_id,
                 "community_id": r.community_id, "count": r.count},
                ensure_ascii=False,
            )
            for r in ds.records()
        ]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        raise ValueError(f"unsupported format {format!r}")
