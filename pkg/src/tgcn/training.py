"""Loss, Adam optimizer, and the training loop with periodic test-set
evaluation and best-checkpoint tracking."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ShapeError, TrainingDiverged
from .metrics import MetricsReport, compute_metrics

HISTORY_COLUMNS = ("epoch", "train_loss", "rmse", "mae", "accuracy", "r2", "var")


@dataclass
class TrainConfig:
    lr: float = 0.001
    batch_size: int = 64
    epochs: int = 3000
    weight_decay: float = 1.5e-3  # lambda on the L2 term
    seed: int = 0
    eval_every: int = 10
    clip: float = 5.0  # global gradient-norm clip; <= 0 disables

    def __post_init__(self):
        if self.lr < 0 or self.batch_size < 1 or self.epochs < 1:
            raise ValueError("lr >= 0, batch_size >= 1, epochs >= 1 required")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")


class Adam:
    """Standard bias-corrected Adam over a name -> Tensor parameter dict."""

    def __init__(self, params, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self):
        self.t += 1
        for name, p in self.params.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            if not np.all(np.isfinite(g)):
                raise TrainingDiverged(f"non-finite gradient for {name}")
            self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g * g
            m_hat = self.m[name] / (1 - self.beta1 ** self.t)
            v_hat = self.v[name] / (1 - self.beta2 ** self.t)
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()


def loss(pred, truth, weights=None, lam=0.0):
    """Mean squared error plus lam * sum of squared weight entries."""
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ShapeError(f"pred shape {pred.shape} != truth shape {truth.shape}")
    total = ad.tensor_mean(ad.square(pred - Tensor(truth)))
    if lam > 0 and weights:
        reg = None
        for w in weights.values():
            term = ad.tensor_sum(ad.square(w))
            reg = term if reg is None else reg + term
        total = total + ad.scale(reg, lam)
    return total


def clip_gradients(params, max_norm):
    """Scale all gradients in place so their global L2 norm is <= max_norm."""
    if max_norm is None or max_norm <= 0:
        return
    total = 0.0
    for p in params.values():
        if p.grad is not None:
            total += float(np.sum(p.grad ** 2))
    norm = np.sqrt(total)
    if norm > max_norm:
        factor = max_norm / norm
        for p in params.values():
            if p.grad is not None:
                p.grad *= factor


def _eval_threads():
    try:
        return max(1, int(os.environ.get("TGCN_THREADS", "1")))
    except ValueError:
        return 1


def predict_windows(model, inputs):
    """Predictions (count, n, horizon) for a stack of windows; evaluation
    parallelism is capped by TGCN_THREADS (default 1, single-threaded)."""
    if len(inputs) == 0:
        return np.empty((0, model.n_nodes, model.horizon))
    workers = _eval_threads()
    if workers == 1 or len(inputs) < 2 * workers:
        return model.predict(inputs)
    chunks = np.array_split(np.arange(len(inputs)), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda idx: model.predict(inputs[idx]), chunks))
    return np.concatenate(parts, axis=0)


def evaluate(model, window_set, dataset):
    """Metrics on denormalized predictions over a whole window set."""
    preds = predict_windows(model, window_set.inputs)
    truth = dataset.denormalize(window_set.targets)
    pred = dataset.denormalize(preds)
    return compute_metrics(truth, pred)


@dataclass
class TrainResult:
    history: list
    best_params: dict
    best_rmse: float
    best_epoch: int
    final_metrics: MetricsReport | None = None


def _snapshot(params):
    return {k: p.data.copy() for k, p in params.items()}


def restore(model, snapshot):
    for name, p in model.parameters().items():
        p.data[:] = snapshot[name]


def train(model, train_windows, test_windows, dataset, config):
    """Minibatch Adam over shuffled sliding windows.

    Evaluates on the test windows every config.eval_every epochs (and at the
    final epoch), tracking the parameter snapshot with the best test RMSE.
    """
    params = model.parameters()
    weights = model.weight_parameters()
    opt = Adam(params, lr=config.lr)
    rng = np.random.default_rng(config.seed)
    n_windows = len(train_windows)
    if n_windows == 0:
        raise TrainingDiverged("no training windows")

    history = []
    best_rmse = np.inf
    best_params = _snapshot(params)
    best_epoch = 0
    final_metrics = None

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n_windows)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, n_windows, config.batch_size):
            idx = order[start:start + config.batch_size]
            batch_in = train_windows.inputs[idx]
            batch_tg = train_windows.targets[idx].reshape(-1, model.horizon)
            opt.zero_grad()
            pred = model.forward(batch_in)
            batch_loss = loss(pred, batch_tg, weights, config.weight_decay)
            lval = float(batch_loss.data)
            if not np.isfinite(lval):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}")
            batch_loss.backward()
            clip_gradients(params, config.clip)
            try:
                opt.step()
            except TrainingDiverged as exc:
                raise TrainingDiverged(f"epoch {epoch}: {exc}") from exc
            epoch_loss += lval
            n_batches += 1
        mean_loss = epoch_loss / n_batches

        if epoch % config.eval_every == 0 or epoch == config.epochs:
            report = evaluate(model, test_windows, dataset)
            history.append({
                "epoch": epoch, "train_loss": mean_loss,
                "rmse": report.rmse, "mae": report.mae,
                "accuracy": report.accuracy, "r2": report.r2,
                "var": report.var,
            })
            if report.rmse < best_rmse:
                best_rmse = report.rmse
                best_params = _snapshot(params)
                best_epoch = epoch
            if epoch == config.epochs:
                final_metrics = report
        else:
            history.append({"epoch": epoch, "train_loss": mean_loss,
                            "rmse": None, "mae": None, "accuracy": None,
                            "r2": None, "var": None})

    return TrainResult(history=history, best_params=best_params,
                       best_rmse=best_rmse, best_epoch=best_epoch,
                       final_metrics=final_metrics)


def write_history(path, history):
    """History CSV: epoch, train_loss, rmse, mae, accuracy, r2, var."""
    with open(path, "w") as fh:
        fh.write(",".join(HISTORY_COLUMNS) + "\n")
        for row in history:
            cells = []
            for col in HISTORY_COLUMNS:
                v = row[col]
                cells.append("" if v is None else repr(v))
            fh.write(",".join(cells) + "\n")
