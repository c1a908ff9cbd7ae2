import numpy as np
import pytest

from conftest import write_csv
from tgcn import data
from tgcn.errors import ConfigError, DataError, ParseError


def make_dataset(values, **kw):
    return data.TimeSeriesDataset(values=np.asarray(values, dtype=float), **kw)


def test_load_features_basic(tmp_path):
    path = write_csv(tmp_path / "f.csv", [[1, 2], [3, 4], [5, 6]])
    ds = data.load_features(path)
    assert ds.n_timesteps == 3 and ds.n_nodes == 2


def test_load_features_transpose(tmp_path):
    path = write_csv(tmp_path / "f.csv", [[1, 2, 3], [4, 5, 6]])
    ds = data.load_features(path, transpose=True)
    assert ds.n_timesteps == 3 and ds.n_nodes == 2
    assert np.array_equal(ds.values[:, 0], [1, 2, 3])


def test_load_features_node_count_mismatch(tmp_path):
    path = write_csv(tmp_path / "f.csv", [[1, 2], [3, 4]])
    with pytest.raises(ParseError, match="expected 3"):
        data.load_features(path, expect_nodes=3)


def test_load_features_non_numeric(tmp_path):
    (tmp_path / "f.csv").write_text("1,2\n3,oops\n")
    with pytest.raises(ParseError, match="row 2, column 2"):
        data.load_features(tmp_path / "f.csv")


def test_interpolate_midpoint():
    ds = make_dataset([[2.0], [0.0], [4.0]])
    out = data.interpolate_missing(ds, missing_marker=0.0)
    assert np.array_equal(out.values[:, 0], [2.0, 3.0, 4.0])


def test_interpolate_no_missing_unchanged():
    ds = make_dataset([[2.0], [3.0], [4.0]])
    out = data.interpolate_missing(ds, missing_marker=0.0)
    assert np.array_equal(out.values, ds.values)


def test_interpolate_edge_fill():
    ds = make_dataset([[0.0], [5.0], [0.0]])
    out = data.interpolate_missing(ds, missing_marker=0.0)
    assert np.array_equal(out.values[:, 0], [5.0, 5.0, 5.0])


def test_interpolate_preserves_observed():
    rng = np.random.default_rng(0)
    vals = rng.uniform(1, 10, size=(20, 3))
    mask = rng.random((20, 3)) < 0.3
    vals[mask] = 0.0
    ds = make_dataset(vals)
    out = data.interpolate_missing(ds, missing_marker=0.0)
    assert np.array_equal(out.values[~mask], vals[~mask])


def test_interpolate_all_missing_node():
    ds = make_dataset([[0.0, 1.0], [0.0, 2.0]])
    with pytest.raises(DataError, match="node 0"):
        data.interpolate_missing(ds, missing_marker=0.0)


def test_normalize_endpoints_and_midpoint():
    ds = make_dataset(np.arange(11.0)[:, None])
    norm = data.normalize(ds)
    # train split is rows 0..7, so min 0 and max 7 set the scale
    assert norm.norm_min == 0.0 and norm.norm_max == 7.0
    assert norm.values[0, 0] == 0.0
    assert norm.values[7, 0] == 1.0
    assert norm.values[10, 0] > 1.0  # test rows may exceed 1, by design


def test_normalize_round_trip():
    rng = np.random.default_rng(1)
    ds = make_dataset(rng.uniform(3, 80, size=(40, 4)))
    norm = data.normalize(ds)
    back = norm.denormalize(norm.values)
    assert np.max(np.abs(back - ds.values)) < 1e-12
    train = norm.values[:norm.split_index]
    assert train.min() >= 0.0 and train.max() <= 1.0


def test_normalize_constant_raises():
    ds = make_dataset(np.full((20, 2), 5.0))
    with pytest.raises(DataError):
        data.normalize(ds)


def test_make_windows_counts_20_timesteps():
    # 20 timesteps, window 3, horizon 1, split at 16: 12 train, 4 test
    ds = data.normalize(make_dataset(np.arange(20.0)[:, None] + 1))
    train, test = data.make_windows(ds, seq_len=3, horizon=1)
    assert len(train) == 12
    assert len(test) == 4


def test_make_windows_adjacency():
    ds = data.normalize(make_dataset(np.arange(30.0)[:, None] + 1))
    train, test = data.make_windows(ds, seq_len=4, horizon=2)
    for ws in (train, test):
        for i, start in enumerate(ws.starts):
            assert np.array_equal(ws.inputs[i],
                                  ds.values[start:start + 4])
            assert np.array_equal(ws.targets[i],
                                  ds.values[start + 4:start + 6].T)


def test_make_windows_stride_one_overlap():
    ds = data.normalize(make_dataset(np.arange(30.0)[:, None] + 1))
    train, _ = data.make_windows(ds, seq_len=4, horizon=1)
    assert train.starts == list(range(len(train)))
    assert np.array_equal(train.inputs[0][1:], train.inputs[1][:-1])


def test_make_windows_no_test_leakage_into_train():
    rng = np.random.default_rng(2)
    vals = rng.uniform(1, 9, size=(50, 3))
    ds1 = data.normalize(make_dataset(vals))
    vals2 = vals.copy()
    vals2[ds1.split_index + 1:] += 100.0  # tamper strictly after the split
    ds2 = data.normalize(make_dataset(vals2))
    t1, _ = data.make_windows(ds1, seq_len=5, horizon=2)
    t2, _ = data.make_windows(ds2, seq_len=5, horizon=2)
    assert np.array_equal(t1.inputs, t2.inputs)
    assert np.array_equal(t1.targets, t2.targets)


def test_make_windows_too_short():
    ds = data.normalize(make_dataset(np.arange(6.0)[:, None] + 1))
    with pytest.raises(DataError):
        data.make_windows(ds, seq_len=5, horizon=2)


def test_make_windows_horizon_exhausts_test():
    ds = data.normalize(make_dataset(np.arange(20.0)[:, None] + 1))
    _, test = data.make_windows(ds, seq_len=3, horizon=10)
    assert len(test) == 0


def _norm_ds(seed=3, shape=(40, 4)):
    rng = np.random.default_rng(seed)
    return data.normalize(make_dataset(rng.uniform(1, 9, size=shape)))


def test_noise_matrix_rescaled_to_unit_range():
    for dist, param in (("gaussian", 0.4), ("poisson", 4.0)):
        noise = data.rescaled_noise_matrix((40, 4), dist, param, seed=7)
        assert noise.min() == 0.0
        assert noise.max() == 1.0


def test_add_noise_adds_that_matrix():
    ds = _norm_ds()
    noisy = data.add_noise(ds, "gaussian", 0.4, seed=7)
    noise = data.rescaled_noise_matrix(ds.values.shape, "gaussian", 0.4, seed=7)
    assert np.array_equal(noisy.values, ds.values + noise)


def test_add_noise_deterministic():
    ds = _norm_ds()
    a = data.add_noise(ds, "gaussian", 0.2, seed=11)
    b = data.add_noise(ds, "gaussian", 0.2, seed=11)
    assert np.array_equal(a.values, b.values)
    c = data.add_noise(ds, "gaussian", 0.2, seed=12)
    assert not np.array_equal(a.values, c.values)


def test_add_noise_rejects_nonpositive_param():
    ds = _norm_ds()
    with pytest.raises(ConfigError):
        data.add_noise(ds, "gaussian", 0.0, seed=1)
    with pytest.raises(ConfigError):
        data.add_noise(ds, "poisson", -1.0, seed=1)


def test_add_noise_unknown_dist():
    with pytest.raises(ConfigError):
        data.add_noise(_norm_ds(), "cauchy", 1.0, seed=1)


def test_add_noise_requires_normalized():
    ds = make_dataset(np.random.default_rng(4).uniform(1, 9, size=(40, 4)))
    with pytest.raises(DataError):
        data.add_noise(ds, "gaussian", 0.2, seed=1)
