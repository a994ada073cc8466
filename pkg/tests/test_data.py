import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rmhng.data import (
    SYNTHETIC_MEANS,
    Dataset,
    generate_clustered_fixture,
    generate_synthetic,
    load_feature_file,
    save_feature_file,
)
from rmhng.errors import FeatureFileError, InconsistentCountError


def test_synthetic_shape_and_confound():
    ds = generate_synthetic(200, seed=0)
    assert (ds.n_agents, ds.n_objects, ds.dim, ds.n_classes) == (4, 1000, 1, 5)
    for n in range(4):
        means = [ds.features[n][ds.ground_truth == c, 0].mean() for c in range(5)]
        np.testing.assert_allclose(means, SYNTHETIC_MEANS[:, n], atol=3 / np.sqrt(200))
        # agent n sees clusters n and n+1 at the same mean
        assert SYNTHETIC_MEANS[n, n] == SYNTHETIC_MEANS[n + 1, n]
    np.testing.assert_allclose(
        [ds.features[0][ds.ground_truth == c, 0].mean() for c in range(5)], [0, 0, 8, 12, 16], atol=3 / np.sqrt(200)
    )


def test_synthetic_unit_variance():
    ds = generate_synthetic(200, seed=1)
    for n in range(4):
        for c in range(5):
            assert abs(ds.features[n][ds.ground_truth == c, 0].var(ddof=1) - 1.0) <= 0.2


def test_synthetic_deterministic_per_seed():
    a, b, c = generate_synthetic(20, seed=3), generate_synthetic(20, seed=3), generate_synthetic(20, seed=4)
    np.testing.assert_array_equal(np.hstack(a.features), np.hstack(b.features))
    assert not np.allclose(np.hstack(a.features), np.hstack(c.features))
    with pytest.raises(ValueError):
        generate_synthetic(0)


def test_fixture_layout():
    ds = generate_clustered_fixture()
    assert (ds.n_agents, ds.dim, ds.n_objects) == (4, 10, 6 * 30)
    for n in range(4):
        mean = lambda c: ds.features[n][ds.ground_truth == c].mean(axis=0)
        # the confounded pair is far closer than a distinct pair
        assert np.linalg.norm(mean(n) - mean(n + 1)) < 0.5 * np.linalg.norm(mean(n) - mean((n + 3) % 6))


def test_round_trip_is_exact(tmp_path):
    for ds in (generate_synthetic(10, seed=5), generate_clustered_fixture(n_per_class=5, seed=2)):
        path = save_feature_file(ds, tmp_path / f"{ds.name}.csv")
        back = load_feature_file(path)
        assert back.n_agents == ds.n_agents
        for a, b in zip(ds.features, back.features):
            np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(back.ground_truth, ds.ground_truth)
        assert path.read_bytes().count(b"\r") == 0


def test_row_order_is_free(tmp_path):
    ds = generate_clustered_fixture(n_per_class=3, seed=1)
    path = save_feature_file(ds, tmp_path / "f.csv")
    lines = path.read_text().splitlines()
    rng = np.random.default_rng(0)
    body = [lines[1 + i] for i in rng.permutation(len(lines) - 1)]
    shuffled = tmp_path / "g.csv"
    shuffled.write_text("\n".join([lines[0]] + body) + "\n")
    back = load_feature_file(shuffled)
    for a, b in zip(ds.features, back.features):
        np.testing.assert_array_equal(a, b)


def test_fixture_file_counts(tmp_path):
    # 4 agents, 10 dims, 30 rows per object class per agent
    ds = generate_clustered_fixture(n_classes=7, n_per_class=30)
    back = load_feature_file(save_feature_file(ds, tmp_path / "f.csv"), n_agents=4, dim=10)
    assert back.n_objects == 30 * 7


def _write(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    return path


@pytest.mark.parametrize(
    "text,line",
    [
        ("agent,object,dim_0\n0,0,1.0\n0,1\n", 3),
        ("agent,object,dim_0\n0,0,nan\n", 2),
        ("agent,object,dim_0\n0,0,inf\n", 2),
        ("agent,object,dim_0\nx,0,1.0\n", 2),
        ("agent,object,dim_0\n0,0,1.0\n0,0,2.0\n", 3),
        ("agent,object,dim_0\n0,-1,1.0\n", 2),
        ("agent,object,dim_0,label\n0,0,1.0,1\n1,0,1.0,2\n", 3),
        ("agent,obj,dim_0\n0,0,1.0\n", 1),
        ("agent,object,dim_1\n0,0,1.0\n", 1),
    ],
)
def test_malformed_rows_report_line(tmp_path, text, line):
    with pytest.raises(FeatureFileError) as info:
        load_feature_file(_write(tmp_path, text))
    assert info.value.line == line
    assert f":{line}:" in str(info.value)


def test_missing_row_is_inconsistent_count(tmp_path):
    ds = generate_clustered_fixture(n_per_class=2, seed=0)
    path = save_feature_file(ds, tmp_path / "f.csv")
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(InconsistentCountError):
        load_feature_file(path)


def test_unknown_and_missing_agents(tmp_path):
    with pytest.raises(FeatureFileError):
        load_feature_file(_write(tmp_path, "agent,object,dim_0\n0,0,1.0\n2,0,1.0\n"))
    with pytest.raises(FeatureFileError):
        load_feature_file(_write(tmp_path, "agent,object,dim_0\n0,0,1.0\n3,0,1.0\n"), n_agents=2)
    with pytest.raises(FeatureFileError):
        load_feature_file(_write(tmp_path, "agent,object,dim_0\n0,0,1.0\n"), dim=2)
    with pytest.raises(FeatureFileError):
        load_feature_file(tmp_path / "absent.csv")
    with pytest.raises(FeatureFileError):
        load_feature_file(_write(tmp_path, ""))


def test_unlabelled_file(tmp_path):
    back = load_feature_file(_write(tmp_path, "agent,object,dim_0\n0,0,1.5\n1,0,2.5\n"))
    assert back.ground_truth is None
    assert back.n_classes is None


def test_dataset_invariants():
    with pytest.raises(ValueError):
        Dataset([np.zeros((3, 1)), np.zeros((4, 1))])
    with pytest.raises(ValueError):
        Dataset([np.zeros((3, 1))], ground_truth=[0, 1])


@given(st.integers(1, 3), st.integers(1, 4), st.integers(1, 5), st.integers(0, 2**32))
@settings(max_examples=25, deadline=None)
def test_round_trip_property(n_agents, dim, n_objects, seed):
    import tempfile
    from pathlib import Path

    rng = np.random.default_rng(seed)
    ds = Dataset([rng.normal(size=(n_objects, dim)) * 10.0 ** rng.integers(-8, 8) for _ in range(n_agents)],
                 rng.integers(3, size=n_objects))
    with tempfile.TemporaryDirectory() as tmp:
        back = load_feature_file(save_feature_file(ds, Path(tmp) / "f.csv"))
    for a, b in zip(ds.features, back.features):
        np.testing.assert_array_equal(a, b)
