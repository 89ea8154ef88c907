"""Seeded training loop with early stopping, plus evaluation metrics."""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from .data import AugmentPolicy, Dataset, augment
from .errors import ConfigError
from .model import (
    AdamHyper,
    ModelConfig,
    adam_step,
    forward,
    init_adam_state,
    init_buffers,
    init_params,
    loss_and_backward,
    make_batch,
)


@dataclass
class TrainConfig:
    lr: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 1e-4
    dropout: float = 0.10
    batch_size: int = 64
    max_epochs: int = 300
    patience: int = 25
    seed: int = 0
    representation: str = "dominant-points"
    rotation_deg: float = 30.0
    val_fraction: float = 0.10


@dataclass
class Metrics:
    accuracy: float
    macro_f1: float
    per_class: list[dict]
    confusion: np.ndarray  # (K, K), rows = true class, cols = predicted


def compute_metrics(y_true: np.ndarray, y_pred: np.ndarray, num_classes: int) -> Metrics:
    """Accuracy, per-class precision/recall/F1 and macro F1 (classes with
    zero support are excluded from the macro average)."""
    confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        confusion[int(t), int(p)] += 1
    total = confusion.sum()
    accuracy = float(np.trace(confusion) / total) if total else 0.0
    per_class = []
    f1s = []
    for k in range(num_classes):
        tp = int(confusion[k, k])
        support = int(confusion[k].sum())
        predicted = int(confusion[:, k].sum())
        precision = tp / predicted if predicted else 0.0
        recall = tp / support if support else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class.append(
            {"precision": precision, "recall": recall, "f1": f1, "support": support}
        )
        if support:
            f1s.append(f1)
    macro_f1 = float(np.mean(f1s)) if f1s else 0.0
    return Metrics(accuracy=accuracy, macro_f1=macro_f1, per_class=per_class, confusion=confusion)


def _batches(n: int, batch_size: int, order=None):
    idx = np.arange(n) if order is None else order
    for start in range(0, n, batch_size):
        yield idx[start : start + batch_size]


def evaluate(
    params: dict,
    buffers: dict,
    config: ModelConfig,
    dataset: Dataset,
    batch_size: int = 64,
) -> Metrics:
    """Eval-mode forward over the dataset, argmax predictions."""
    if len(dataset) == 0:
        raise ConfigError("cannot evaluate an empty dataset")
    preds = []
    labels = []
    for chunk in _batches(len(dataset), batch_size):
        seqs = [dataset.samples[i].points for i in chunk]
        labs = [dataset.samples[i].label for i in chunk]
        batch = make_batch(seqs, labs, dtype=params["proj_w"].dtype)
        logits = forward(batch, params, buffers, config, mode="eval")
        preds.extend(np.argmax(logits, axis=1).tolist())
        labels.extend(labs)
    return compute_metrics(np.asarray(labels), np.asarray(preds), config.num_classes)


def train(
    train_set: Dataset,
    val_set: Dataset,
    model_config: ModelConfig,
    train_config: TrainConfig,
    dtype=np.float32,
    log_fn=None,
):
    """Train with seeded shuffling/augmentation and early stopping.

    Returns (params, buffers, history): the parameters of the best
    validation epoch, and per-epoch train loss / val accuracy curves.
    """
    if len(train_set) == 0 or len(val_set) == 0:
        raise ConfigError("train and validation splits must be non-empty")
    rng = np.random.default_rng(train_config.seed)
    params = init_params(model_config, rng, dtype=dtype)
    buffers = init_buffers(model_config, dtype=dtype)
    state = init_adam_state(params)
    hyper = AdamHyper(
        lr=train_config.lr,
        beta1=train_config.beta1,
        beta2=train_config.beta2,
        weight_decay=train_config.weight_decay,
    )
    policy = AugmentPolicy(rotation_deg=train_config.rotation_deg)
    history = {"train_loss": [], "val_accuracy": [], "best_epoch": 0, "best_val_accuracy": -1.0}
    best = (copy.deepcopy(params), copy.deepcopy(buffers))
    since_best = 0

    for epoch in range(1, train_config.max_epochs + 1):
        order = rng.permutation(len(train_set))
        losses = []
        for chunk in _batches(len(train_set), train_config.batch_size, order):
            seqs = [augment(train_set.samples[i].points, rng, policy) for i in chunk]
            labs = [train_set.samples[i].label for i in chunk]
            batch = make_batch(seqs, labs, dtype=dtype)
            loss, grads = loss_and_backward(
                batch, params, buffers, model_config, dropout_rng=rng
            )
            adam_step(params, grads, state, hyper)
            losses.append(loss)
        val_metrics = evaluate(params, buffers, model_config, val_set, train_config.batch_size)
        history["train_loss"].append(float(np.mean(losses)))
        history["val_accuracy"].append(val_metrics.accuracy)
        if val_metrics.accuracy > history["best_val_accuracy"]:
            history["best_val_accuracy"] = val_metrics.accuracy
            history["best_epoch"] = epoch
            best = (copy.deepcopy(params), copy.deepcopy(buffers))
            since_best = 0
        else:
            since_best += 1
        if log_fn:
            log_fn(
                f"epoch {epoch:3d}  train_loss {history['train_loss'][-1]:.4f}  "
                f"val_acc {val_metrics.accuracy:.4f}  best {history['best_val_accuracy']:.4f}"
            )
        if since_best >= train_config.patience:
            break
    return best[0], best[1], history
