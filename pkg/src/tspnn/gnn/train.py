"""Full-batch training of the edge classifier and its evaluation report."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..core import make_rng
from ..errors import ConfigError, TrainingDiverged
from .graph import GraphBatch, split
from .model import GnnParams, backward, forward, init_params, supervised_loss

TASKS = ("shortest_path", "tsp_edges")


@dataclass(frozen=True)
class TrainConfig:
    d: int = 16
    rounds: int | None = 10  # None: largest node count in the dataset
    learning_rate: float = 0.005
    epochs: int = 1500
    loss: str = "mse"
    node_loss_weight: float = 0.0
    clip_norm: float = 5.0
    activation: str = "tanh"
    use_layer_norm: bool = False
    train_fraction: float = 0.8

    def __post_init__(self):
        if self.d < 1:
            raise ConfigError("d must be >= 1")
        if self.rounds is not None and self.rounds < 0:
            raise ConfigError("rounds must be >= 0")
        if self.learning_rate <= 0 or self.epochs < 0:
            raise ConfigError("learning_rate must be > 0 and epochs >= 0")
        if self.loss not in ("mse", "bce"):
            raise ConfigError(f"unknown loss {self.loss!r}")
        if not 0 < self.train_fraction < 1:
            raise ConfigError("train_fraction must be in (0, 1)")


@dataclass
class TrainReport:
    task: str
    epochs: int
    final_loss: float
    accuracy: float
    positive_precision: float
    positive_recall: float
    positive_f1: float
    exact_match_rate: float  # test graphs whose predicted positive edge set is exactly right
    train_samples: int
    test_samples: int
    loss_history: list = field(default_factory=list, repr=False)

    def to_dict(self, history=False):
        out = asdict(self)
        if not history:
            out.pop("loss_history")
        return out


def edge_metrics(logits, labels, edge_graph=None, num_graphs=0):
    pred = np.asarray(logits) > 0.0
    y = np.asarray(labels) > 0.5
    tp = int(np.sum(pred & y))
    fp = int(np.sum(pred & ~y))
    fn = int(np.sum(~pred & y))
    acc = float(np.mean(pred == y)) if len(y) else 0.0
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    exact = 0.0
    if edge_graph is not None and num_graphs:
        wrong = np.bincount(edge_graph, weights=(pred != y).astype(float), minlength=num_graphs)
        exact = float(np.mean(wrong == 0))
    return acc, prec, rec, f1, exact


class Adam:
    def __init__(self, arrays, lr, b1=0.9, b2=0.999, eps=1e-8):
        self.arrays = arrays
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = [np.zeros_like(a) for a in arrays]
        self.v = [np.zeros_like(a) for a in arrays]
        self.t = 0

    def step(self, grads, lr=None):
        lr = self.lr if lr is None else lr
        self.t += 1
        c1 = 1 - self.b1 ** self.t
        c2 = 1 - self.b2 ** self.t
        for a, g, m, v in zip(self.arrays, grads, self.m, self.v):
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            a -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def loss_and_grads(p: GnnParams, batch: GraphBatch, cfg: TrainConfig):
    caches = {}
    ze, zn = forward(batch, p, caches)
    loss, ge = supervised_loss(ze, batch.edge_labels, cfg.loss)
    if cfg.node_loss_weight:
        ln, gn = supervised_loss(zn, batch.node_labels, cfg.loss)
        loss += cfg.node_loss_weight * ln
        gn = cfg.node_loss_weight * gn
    else:
        gn = np.zeros_like(zn)
    return loss, backward(p, caches, ge, gn)


def evaluate(p: GnnParams, batch: GraphBatch):
    ze, _ = forward(batch, p)
    return edge_metrics(ze, batch.edge_labels, batch.edge_graph, batch.num_graphs)


def train_edge_classifier(dataset, config: TrainConfig | None = None, seed=0, log=None):
    """Train on the first 80% of ``dataset`` and report on the remaining 20%.

    Full-batch Adam with global-norm gradient clipping and a cosine learning
    rate schedule. Returns ``(params, report)``.
    """
    cfg = config or TrainConfig()
    dataset = list(dataset)
    if len(dataset) < 2:
        raise ConfigError("need at least two samples to split into train and test")
    task = dataset[0].task
    train, test = split(dataset, cfg.train_fraction)
    rounds = cfg.rounds if cfg.rounds is not None else max(s.n for s in dataset)
    rng = make_rng(seed)
    p = init_params(cfg.d, rounds, rng, cfg.activation, cfg.use_layer_norm)
    tr = GraphBatch.from_samples(train)
    te = GraphBatch.from_samples(test)
    arrays = p.arrays()
    opt = Adam(arrays, cfg.learning_rate)
    history = []
    loss = float("nan")
    for epoch in range(cfg.epochs):
        loss, grads = loss_and_grads(p, tr, cfg)
        if not math.isfinite(loss):
            raise TrainingDiverged(f"loss became {loss} at epoch {epoch}")
        history.append(loss)
        norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
        if norm > cfg.clip_norm:
            grads = [g * (cfg.clip_norm / norm) for g in grads]
        lr = cfg.learning_rate * 0.5 * (1.0 + math.cos(math.pi * epoch / cfg.epochs))
        opt.step(grads, lr)
        if log is not None and (epoch % 100 == 0 or epoch == cfg.epochs - 1):
            log(epoch, loss, evaluate(p, tr), evaluate(p, te))
    if cfg.epochs == 0:
        loss, _ = loss_and_grads(p, tr, cfg)
    acc, prec, rec, f1, exact = evaluate(p, te)
    report = TrainReport(task, cfg.epochs, float(loss), acc, prec, rec, f1, exact,
                         len(train), len(test), history)
    return p, report
