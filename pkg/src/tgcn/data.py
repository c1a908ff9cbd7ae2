"""Feature-matrix ingestion and preparation: linear interpolation of missing
values, min-max normalization fit on the training split only, chronological
train/test windowing, and the rescaled-noise injection used for the
perturbation experiments."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DataError, ParseError


@dataclass
class TimeSeriesDataset:
    """Node speed series: rows are timesteps, columns are nodes."""
    values: np.ndarray
    interval_minutes: int = 15
    split_fraction: float = 0.8
    norm_min: float | None = None
    norm_max: float | None = None
    name: str = "dataset"

    @property
    def n_timesteps(self):
        return self.values.shape[0]

    @property
    def n_nodes(self):
        return self.values.shape[1]

    @property
    def split_index(self):
        return int(np.floor(self.split_fraction * self.n_timesteps))

    @property
    def is_normalized(self):
        return self.norm_min is not None

    def denormalize(self, matrix):
        return denormalize(self, matrix)


@dataclass
class WindowSet:
    """Sliding windows: inputs (count, seq_len, n), targets (count, n, horizon)."""
    inputs: np.ndarray
    targets: np.ndarray
    starts: list = field(default_factory=list)

    def __len__(self):
        return self.inputs.shape[0]


def load_features(path, expect_nodes=None, interval_minutes=15, transpose=False,
                  name=None):
    """Read a headerless CSV of floats; rows are timesteps unless transpose
    is set (for files stored as one row per road)."""
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                bad = next(i for i, c in enumerate(cells)
                           if not _is_float(c))
                raise ParseError(
                    f"{path}: non-numeric cell at row {lineno}, column {bad + 1}")
    if not rows:
        raise ParseError(f"{path}: empty feature file")
    width = len(rows[0])
    for i, r in enumerate(rows, start=1):
        if len(r) != width:
            raise ParseError(
                f"{path}: row {i} has {len(r)} columns, expected {width}")
    values = np.array(rows, dtype=np.float64)
    if transpose:
        values = values.T
    if expect_nodes is not None and values.shape[1] != expect_nodes:
        raise ParseError(
            f"{path}: {values.shape[1]} nodes, expected {expect_nodes}")
    if name is None:
        name = str(path)
    return TimeSeriesDataset(values=values, interval_minutes=interval_minutes,
                             name=name)


def _is_float(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def interpolate_missing(dataset, missing_marker=0.0):
    """Per node, linearly interpolate cells equal to missing_marker over time;
    leading/trailing gaps take the nearest valid value."""
    values = dataset.values.copy()
    t_idx = np.arange(values.shape[0], dtype=np.float64)
    for node in range(values.shape[1]):
        col = values[:, node]
        valid = col != missing_marker
        if not valid.any():
            raise DataError(f"node {node} has no valid observations")
        if valid.all():
            continue
        # np.interp clamps outside the valid range, giving the edge fill
        values[:, node] = np.interp(t_idx, t_idx[valid], col[valid])
    return replace(dataset, values=values)


def normalize(dataset):
    """Min-max scale into [0,1] with statistics from the training rows only.
    Test values above the training max may exceed 1; that is allowed."""
    if dataset.is_normalized:
        return dataset
    train = dataset.values[:dataset.split_index]
    lo = float(train.min())
    hi = float(train.max())
    if hi <= lo:
        raise DataError("training split is constant; cannot normalize")
    scaled = (dataset.values - lo) / (hi - lo)
    return replace(dataset, values=scaled, norm_min=lo, norm_max=hi)


def denormalize(dataset, matrix):
    if not dataset.is_normalized:
        raise DataError("dataset has no normalization statistics")
    return np.asarray(matrix) * (dataset.norm_max - dataset.norm_min) + dataset.norm_min


def make_windows(dataset, seq_len, horizon):
    """Chronological split into train/test window sets.

    With s the split index: a window whose whole span (inputs and targets)
    lies strictly before s is a training window; a window whose target block
    starts at or after s is a test window; windows touching the boundary are
    dropped so no training window ever sees post-split values.
    """
    values = dataset.values
    total = values.shape[0]
    if total < seq_len + horizon + 1:
        raise DataError(
            f"series of length {total} too short for seq_len={seq_len}, "
            f"horizon={horizon}")
    s = dataset.split_index
    train_in, train_tg, train_starts = [], [], []
    test_in, test_tg, test_starts = [], [], []
    for t in range(total - seq_len - horizon + 1):
        window = values[t:t + seq_len]
        target = values[t + seq_len:t + seq_len + horizon].T  # (n, horizon)
        if t + seq_len + horizon < s:
            train_in.append(window)
            train_tg.append(target)
            train_starts.append(t)
        elif t + seq_len >= s:
            test_in.append(window)
            test_tg.append(target)
            test_starts.append(t)
    n = values.shape[1]

    def pack(ins, tgs, starts):
        if ins:
            return WindowSet(np.stack(ins), np.stack(tgs), starts)
        return WindowSet(np.empty((0, seq_len, n)),
                         np.empty((0, n, horizon)), [])

    return (pack(train_in, train_tg, train_starts),
            pack(test_in, test_tg, test_starts))


def rescaled_noise_matrix(shape, dist, param, seed):
    """Draw a noise matrix and min-max rescale it so its own extrema are
    exactly 0 and 1."""
    if param is None or param <= 0:
        raise ConfigError(f"noise parameter must be positive, got {param}")
    rng = np.random.default_rng(seed)
    if dist == "gaussian":
        noise = rng.normal(0.0, param, size=shape)
    elif dist == "poisson":
        # centering by the mean is cosmetic; the rescale below fixes the range
        noise = rng.poisson(param, size=shape).astype(np.float64) - param
    else:
        raise ConfigError(f"unknown noise distribution {dist!r}")
    lo, hi = noise.min(), noise.max()
    if hi <= lo:
        raise ConfigError("degenerate noise matrix; cannot rescale to [0,1]")
    return (noise - lo) / (hi - lo)


def add_noise(dataset, dist, param, seed):
    """Add a rescaled noise matrix to the normalized features, no clipping."""
    if not dataset.is_normalized:
        raise DataError("add_noise expects a normalized dataset")
    noise = rescaled_noise_matrix(dataset.values.shape, dist, param, seed)
    return replace(dataset, values=dataset.values + noise)
