import json

import numpy as np
import pytest

from polarscope.model import (
    CommunityConflictError,
    DataError,
    EmptyDatasetError,
    InteractionDataset,
    InteractionRecord,
    MalformedRowError,
    community_counts,
    ingest,
    read_records,
    source_counts,
    write_dataset,
)

from conftest import make_dataset


def test_registries_sorted_and_counts_aggregated():
    ds = make_dataset([
        ("u2", "s1", "x", 1),
        ("u1", "s2", "y", 2),
        ("u2", "s1", "x", 3),
    ])
    assert ds.users == ("u1", "u2")
    assert ds.sources == ("s1", "s2")
    assert ds.communities == ("x", "y")
    assert ds.counts.tolist() == [[0, 2], [4, 0]]


def test_counts_read_only(tiny_ds):
    with pytest.raises(ValueError):
        tiny_ds.counts[0, 0] = 99


def test_zero_count_record_dropped():
    base = [("u1", "s1", "x", 2), ("u2", "s2", "y", 1)]
    ds = make_dataset(base)
    ds0 = make_dataset(base + [("u1", "s2", "y", 0)])
    assert ds0.users == ds.users
    assert np.array_equal(ds0.counts, ds.counts)


def test_user_with_only_zero_counts_excluded(caplog):
    ds = make_dataset([("u1", "s1", "x", 2), ("ghost", "s1", "x", 0)])
    assert ds.users == ("u1",)
    assert "dropped 1 user" in caplog.text


def test_community_conflict():
    with pytest.raises(CommunityConflictError):
        make_dataset([("u1", "s1", "x", 1), ("u2", "s1", "y", 1)])


def test_empty_dataset():
    with pytest.raises(EmptyDatasetError):
        make_dataset([])
    with pytest.raises(EmptyDatasetError):
        make_dataset([("u", "s", "c", 0)])


def test_direct_construction_validates():
    with pytest.raises(DataError):
        InteractionDataset(("u",), ("s",), ("c",), {"s": "c"}, np.array([[0]]))
    with pytest.raises(DataError):
        InteractionDataset(("u",), ("s",), ("c",), {"s": "c"}, np.array([[1, 2]]))
    with pytest.raises(DataError):
        InteractionDataset(("u",), ("s",), ("c",), {"s": "other"}, np.array([[1]]))


def test_extra_declared_community_kept():
    ds = make_dataset([("u", "s", "x", 1)], communities=["x", "y"])
    assert ds.communities == ("x", "y")
    assert community_counts(ds, "u") == {"x": 1, "y": 0}


def test_helpers(tiny_ds):
    assert community_counts(tiny_ds, "bob") == {"anti": 2, "pro": 2}
    assert source_counts(tiny_ds, "alice") == {"a1": 4, "a2": 1, "p1": 0, "p2": 0}
    assert tiny_ds.user_totals().tolist() == [5, 4, 6]
    assert tiny_ds.source_reach().tolist() == [2, 1, 2, 1]
    assert tiny_ds.volume_by_community() == {"anti": 7, "pro": 8}
    assert tiny_ds.sources_in("pro").tolist() == [2, 3]
    with pytest.raises(KeyError):
        tiny_ds.user_index("nobody")


@pytest.mark.parametrize("fmt", ["csv", "jsonl"])
def test_roundtrip(tiny_ds, tmp_path, fmt):
    path = tmp_path / f"data.{fmt}"
    write_dataset(tiny_ds, path, fmt)
    back = ingest(path, fmt)
    assert back.users == tiny_ds.users
    assert back.sources == tiny_ds.sources
    assert np.array_equal(back.counts, tiny_ds.counts)


def test_csv_missing_count_defaults_to_one(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("user_id,source_id,community_id\nu,s,c\nu,s,c\n")
    assert ingest(p).counts.tolist() == [[2]]


@pytest.mark.parametrize(
    "body, line",
    [
        ("user_id,source_id,community_id,count\nu,s,c,1\nu,,c,1\n", 3),
        ("user_id,source_id,community_id,count\nu,s,c,-1\n", 2),
        ("user_id,source_id,community_id,count\nu,s,c,abc\n", 2),
        ("user_id,source_id,community_id,count\nu,s,c,1,extra\n", 2),
        ("user,source\nu,s\n", 1),
    ],
)
def test_malformed_csv_reports_line(tmp_path, body, line):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(MalformedRowError) as err:
        read_records(p)
    assert err.value.line == line


def test_malformed_jsonl(tmp_path):
    p = tmp_path / "bad.jsonl"
    p.write_text(json.dumps({"user_id": "u", "source_id": "s", "community_id": "c"}) + "\n{oops\n")
    with pytest.raises(MalformedRowError) as err:
        read_records(p, "jsonl")
    assert err.value.line == 2


def test_unknown_format(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("user_id,source_id,community_id\n")
    with pytest.raises(ValueError):
        read_records(p, "xml")


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        ingest(tmp_path / "nope.csv")


def test_records_roundtrip(tiny_ds):
    again = InteractionDataset.from_records(tiny_ds.records())
    assert np.array_equal(again.counts, tiny_ds.counts)
    assert all(isinstance(r, InteractionRecord) for r in tiny_ds.records())
