"""Gradient-boosted decision trees with a softmax objective, from scratch.

Second-order boosting on the multiclass cross-entropy: per round, with class
probabilities p from the current margins, each class k gets gradients
g = p_k - 1[y=k] and hessians h = max(2 p_k (1 - p_k), 1e-16), and a
regression tree is fit by exact greedy search maximizing

    gain = 1/2 [ GL^2/(HL+lambda) + GR^2/(HR+lambda) - G^2/(H+lambda) ] - gamma

over midpoints of consecutive distinct feature values. Leaves output
-eta * G / (H + lambda). Ties break to the smallest feature index, then the
smallest threshold, so models are a pure function of (data, config): thread
count never changes the result (per-class trees are grown in worker threads
from shared read-only inputs and merged by class index).

Trees are grown level-wise over presorted columns; the inner scans are
numba-compiled and release the GIL.
"""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from numba import njit

from .errors import ConfigError, DataError, NumericError
from .sigcore import RandomStream

_MIN_HESSIAN = 1e-16
NO_SPLIT: Tuple[float, float] = (math.nan, -math.inf)

MODEL_FORMAT = "modrec-gbt"
MODEL_VERSION = 1


@dataclass(frozen=True)
class GbtConfig:
    """Boosting hyperparameters.

    subsample is the per-round row keep probability; the same row mask is
    shared by that round's per-class trees. seed feeds the row-subsampling
    stream only (splits are deterministic).
    """

    n_rounds: int = 300
    max_depth: int = 6
    learning_rate: float = 0.1
    reg_lambda: float = 1.0
    gamma: float = 0.0
    min_child_weight: float = 1.0
    subsample: float = 0.8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_rounds < 1:
            raise ConfigError("n_rounds must be >= 1")
        if self.max_depth < 1:
            raise ConfigError("max_depth must be >= 1")
        if not (0.0 < self.learning_rate <= 1.0):
            raise ConfigError("learning_rate must be in (0, 1]")
        if self.reg_lambda < 0 or self.gamma < 0:
            raise ConfigError("reg_lambda and gamma must be >= 0")
        if self.min_child_weight < 0:
            raise ConfigError("min_child_weight must be >= 0")
        if not (0.0 < self.subsample <= 1.0):
            raise ConfigError("subsample must be in (0, 1]")


@dataclass
class Tree:
    """Flat array form; feature[i] < 0 marks node i as a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.size


@dataclass
class GbtModel:
    config: GbtConfig
    n_classes: int
    n_features: int
    trees: List[List[Tree]]  # [round][class]
    feature_names: Optional[Tuple[str, ...]] = None
    train_loss: List[float] = field(default_factory=list)
    valid_loss: Optional[List[float]] = None


# ---------------------------------------------------------------------------
# numba kernels


@njit(cache=True, nogil=True)
def _node_sums(node_of_row, slot_of_node, g, h, n_slots):
    node_g = np.zeros(n_slots, dtype=np.float64)
    node_h = np.zeros(n_slots, dtype=np.float64)
    node_n = np.zeros(n_slots, dtype=np.int64)
    for r in range(node_of_row.size):
        nd = node_of_row[r]
        if nd < 0:
            continue
        s = slot_of_node[nd]
        if s < 0:
            continue
        node_g[s] += g[r]
        node_h[s] += h[r]
        node_n[s] += 1
    return node_g, node_h, node_n


@njit(cache=True, nogil=True)
def _best_splits_level(xf, order, node_of_row, slot_of_node, g, h,
                       node_g, node_h, lam, gamma, min_cw,
                       out_gain, out_thr, out_feat):
    n, m = xf.shape
    n_slots = node_g.size
    gl = np.empty(n_slots, dtype=np.float64)
    hl = np.empty(n_slots, dtype=np.float64)
    cl = np.empty(n_slots, dtype=np.int64)
    last = np.empty(n_slots, dtype=np.float64)
    for j in range(m):
        for s in range(n_slots):
            gl[s] = 0.0
            hl[s] = 0.0
            cl[s] = 0
        for i in range(n):
            r = order[i, j]
            nd = node_of_row[r]
            if nd < 0:
                continue
            s = slot_of_node[nd]
            if s < 0:
                continue
            v = xf[r, j]
            if cl[s] > 0 and v != last[s]:
                hr = node_h[s] - hl[s]
                if hl[s] >= min_cw and hr >= min_cw:
                    gr = node_g[s] - gl[s]
                    gain = 0.5 * (gl[s] * gl[s] / (hl[s] + lam)
                                  + gr * gr / (hr + lam)
                                  - node_g[s] * node_g[s] / (node_h[s] + lam)
                                  ) - gamma
                    if gain > out_gain[s]:
                        out_gain[s] = gain
                        out_thr[s] = 0.5 * (last[s] + v)
                        out_feat[s] = j
            gl[s] += g[r]
            hl[s] += h[r]
            cl[s] += 1
            last[s] = v


@njit(cache=True, nogil=True)
def _partition_rows(xf, node_of_row, slot_of_node, split_feat, split_thr,
                    child_left, child_right):
    for r in range(node_of_row.size):
        nd = node_of_row[r]
        if nd < 0:
            continue
        s = slot_of_node[nd]
        if s < 0:
            continue
        f = split_feat[s]
        if f < 0:
            continue
        if xf[r, f] < split_thr[s]:
            node_of_row[r] = child_left[s]
        else:
            node_of_row[r] = child_right[s]


@njit(cache=True, nogil=True)
def _apply_tree(xf, feature, threshold, left, right, value, out):
    for r in range(xf.shape[0]):
        nd = 0
        while feature[nd] >= 0:
            if xf[r, feature[nd]] < threshold[nd]:
                nd = left[nd]
            else:
                nd = right[nd]
        out[r] += value[nd]


# ---------------------------------------------------------------------------
# split search (public single-node form)


def best_split(values: np.ndarray,
               gradients: np.ndarray,
               hessians: np.ndarray,
               reg_lambda: float = 1.0,
               gamma: float = 0.0,
               min_child_weight: float = 1.0) -> Tuple[float, float]:
    """Best (threshold, gain) for one node and one feature.

    Thresholds are midpoints of consecutive distinct sorted values; on tied
    gains the smallest threshold wins. Returns NO_SPLIT = (nan, -inf) when
    no candidate improves on the unsplit node (gain must be > 0) or all
    values are identical.
    """
    v = np.asarray(values, dtype=np.float64)
    g = np.asarray(gradients, dtype=np.float64)
    h = np.asarray(hessians, dtype=np.float64)
    if v.size == 0:
        return NO_SPLIT
    if not (v.size == g.size == h.size):
        raise DataError("values, gradients, hessians must be equal length")
    order = np.argsort(v, kind="stable")
    vs, gs, hs = v[order], g[order], h[order]
    gl = np.cumsum(gs)[:-1]
    hl = np.cumsum(hs)[:-1]
    gt, ht = gs.sum(), hs.sum()
    boundary = vs[1:] != vs[:-1]
    ok = boundary & (hl >= min_child_weight) & ((ht - hl) >= min_child_weight)
    if not np.any(ok):
        return NO_SPLIT
    gr = gt - gl
    hr = ht - hl
    gain = 0.5 * (gl ** 2 / (hl + reg_lambda) + gr ** 2 / (hr + reg_lambda)
                  - gt ** 2 / (ht + reg_lambda)) - gamma
    gain[~ok] = -math.inf
    best = int(np.argmax(gain))  # first max: smallest threshold on ties
    if gain[best] <= 0.0:
        return NO_SPLIT
    return 0.5 * (vs[best] + vs[best + 1]), float(gain[best])


# ---------------------------------------------------------------------------
# tree growth


def _grow_tree(xf: np.ndarray, order: np.ndarray, g: np.ndarray,
               h: np.ndarray, in_sample: np.ndarray, cfg: GbtConfig) -> Tree:
    node_of_row = np.where(in_sample, 0, -1).astype(np.int32)
    feature = [-1]
    threshold = [0.0]
    left = [-1]
    right = [-1]
    value = [0.0]
    frontier = [0]
    eta = cfg.learning_rate
    lam = cfg.reg_lambda

    for _level in range(cfg.max_depth + 1):
        n_slots = len(frontier)
        slot_of_node = np.full(len(feature), -1, dtype=np.int32)
        for s, nd in enumerate(frontier):
            slot_of_node[nd] = s
        node_g, node_h, node_n = _node_sums(node_of_row, slot_of_node,
                                            g, h, n_slots)
        at_depth_limit = _level == cfg.max_depth
        out_gain = np.zeros(n_slots, dtype=np.float64)
        out_thr = np.zeros(n_slots, dtype=np.float64)
        out_feat = np.full(n_slots, -1, dtype=np.int32)
        if not at_depth_limit:
            _best_splits_level(xf, order, node_of_row, slot_of_node, g, h,
                               node_g, node_h, lam, cfg.gamma,
                               cfg.min_child_weight, out_gain, out_thr,
                               out_feat)
        child_left = np.full(n_slots, -1, dtype=np.int32)
        child_right = np.full(n_slots, -1, dtype=np.int32)
        next_frontier = []
        for s, nd in enumerate(frontier):
            if out_feat[s] >= 0 and node_n[s] >= 2:
                lid = len(feature)
                rid = lid + 1
                feature[nd] = int(out_feat[s])
                threshold[nd] = float(out_thr[s])
                left[nd] = lid
                right[nd] = rid
                child_left[s] = lid
                child_right[s] = rid
                for _ in range(2):
                    feature.append(-1)
                    threshold.append(0.0)
                    left.append(-1)
                    right.append(-1)
                    value.append(0.0)
                next_frontier.extend((lid, rid))
            else:
                denom = node_h[s] + lam
                value[nd] = -eta * node_g[s] / denom if denom > 0 else 0.0
        if not next_frontier:
            break
        _partition_rows(xf, node_of_row, slot_of_node, out_feat, out_thr,
                        child_left, child_right)
        frontier = next_frontier

    return Tree(feature=np.asarray(feature, dtype=np.int32),
                threshold=np.asarray(threshold, dtype=np.float64),
                left=np.asarray(left, dtype=np.int32),
                right=np.asarray(right, dtype=np.int32),
                value=np.asarray(value, dtype=np.float64))


# ---------------------------------------------------------------------------
# boosting driver


def _softmax(margins: np.ndarray) -> np.ndarray:
    z = margins - margins.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _logloss(proba: np.ndarray, labels: np.ndarray) -> float:
    picked = proba[np.arange(labels.size), labels]
    return float(-np.mean(np.log(np.maximum(picked, 1e-300))))


def _validate_training_inputs(features, labels, n_classes):
    x = np.ascontiguousarray(np.asarray(features, dtype=np.float64))
    y = np.asarray(labels)
    if x.ndim != 2 or x.shape[0] == 0 or x.shape[1] == 0:
        raise DataError(f"features must be a non-empty 2-D array, got {x.shape}")
    if y.shape != (x.shape[0],):
        raise DataError("labels must be 1-D and aligned with features")
    if not np.all(np.isfinite(x)):
        raise NumericError("features contain non-finite values")
    if y.dtype.kind not in "iu":
        raise DataError("labels must be integers")
    y = y.astype(np.int32)
    if y.min() < 0:
        raise DataError("labels must be >= 0")
    distinct = int(np.unique(y).size)
    if n_classes is None:
        n_classes = int(y.max()) + 1
        if distinct < 2:
            raise DataError("need at least two classes to train")
    else:
        if n_classes < 2:
            raise ConfigError("n_classes must be >= 2")
        if int(y.max()) >= n_classes:
            raise DataError("label outside declared n_classes")
        if distinct < 2:
            raise DataError(
                f"single distinct label with n_classes={n_classes} declared")
    return x, y, n_classes


def train(features: np.ndarray,
          labels: np.ndarray,
          config: GbtConfig = GbtConfig(),
          n_classes: Optional[int] = None,
          eval_set: Optional[Tuple[np.ndarray, np.ndarray]] = None,
          feature_names: Optional[Sequence[str]] = None,
          n_jobs: int = 1) -> GbtModel:
    """Fit the boosted ensemble; deterministic for fixed (data, config).

    eval_set=(X, y) tracks validation log-loss per round. n_jobs grows the
    per-class trees of each round in that many threads; the result is
    bit-identical for any value.
    """
    x, y, k = _validate_training_inputs(features, labels, n_classes)
    n, m = x.shape
    xf = np.asfortranarray(x)
    order = np.asfortranarray(np.argsort(xf, axis=0, kind="stable")
                              .astype(np.int32))
    margins = np.zeros((n, k), dtype=np.float64)
    rng = RandomStream(config.seed, 0).generator()
    trees: List[List[Tree]] = []
    train_loss: List[float] = []

    if eval_set is not None:
        xv = np.ascontiguousarray(np.asarray(eval_set[0], dtype=np.float64))
        yv = np.asarray(eval_set[1]).astype(np.int32)
        if xv.ndim != 2 or xv.shape[1] != m or yv.shape != (xv.shape[0],):
            raise DataError("eval_set shapes do not match training data")
        margins_v = np.zeros((xv.shape[0], k), dtype=np.float64)
        valid_loss: Optional[List[float]] = []
    else:
        valid_loss = None

    pool = ThreadPoolExecutor(max_workers=n_jobs) if n_jobs > 1 else None
    try:
        for _round in range(config.n_rounds):
            proba = _softmax(margins)
            if config.subsample < 1.0:
                in_sample = rng.random(n) < config.subsample
            else:
                in_sample = np.ones(n, dtype=bool)
            grads = proba.copy()
            grads[np.arange(n), y] -= 1.0
            hess = np.maximum(2.0 * proba * (1.0 - proba), _MIN_HESSIAN)

            def grow(kk: int) -> Tree:
                return _grow_tree(xf, order,
                                  np.ascontiguousarray(grads[:, kk]),
                                  np.ascontiguousarray(hess[:, kk]),
                                  in_sample, config)

            if pool is not None:
                round_trees = list(pool.map(grow, range(k)))
            else:
                round_trees = [grow(kk) for kk in range(k)]
            for kk, tree in enumerate(round_trees):
                contrib = np.zeros(n, dtype=np.float64)
                _apply_tree(xf, tree.feature, tree.threshold, tree.left,
                            tree.right, tree.value, contrib)
                margins[:, kk] += contrib
                if valid_loss is not None:
                    contrib_v = np.zeros(xv.shape[0], dtype=np.float64)
                    _apply_tree(xv, tree.feature, tree.threshold, tree.left,
                                tree.right, tree.value, contrib_v)
                    margins_v[:, kk] += contrib_v
            trees.append(round_trees)
            train_loss.append(_logloss(_softmax(margins), y))
            if valid_loss is not None:
                valid_loss.append(_logloss(_softmax(margins_v), yv))
            if (len(train_loss) > 1 and config.learning_rate <= 0.3
                    and config.subsample == 1.0
                    and train_loss[-1] > train_loss[-2] + 1e-12):
                warnings.warn(
                    f"training log-loss increased at round {_round}: "
                    f"{train_loss[-2]:.6f} -> {train_loss[-1]:.6f}",
                    RuntimeWarning)
    finally:
        if pool is not None:
            pool.shutdown()

    return GbtModel(config=config, n_classes=k, n_features=m, trees=trees,
                    feature_names=tuple(feature_names) if feature_names else None,
                    train_loss=train_loss, valid_loss=valid_loss)


def predict_margin(model: GbtModel, features: np.ndarray) -> np.ndarray:
    x = np.ascontiguousarray(np.asarray(features, dtype=np.float64))
    if x.ndim != 2 or x.shape[1] != model.n_features:
        raise DataError(
            f"expected (n, {model.n_features}) features, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NumericError("features contain non-finite values")
    margins = np.zeros((x.shape[0], model.n_classes), dtype=np.float64)
    for round_trees in model.trees:
        for kk, tree in enumerate(round_trees):
            contrib = np.zeros(x.shape[0], dtype=np.float64)
            _apply_tree(x, tree.feature, tree.threshold, tree.left,
                        tree.right, tree.value, contrib)
            margins[:, kk] += contrib
    return margins


def predict_proba(model: GbtModel, features: np.ndarray) -> np.ndarray:
    return _softmax(predict_margin(model, features))


def predict(model: GbtModel, features: np.ndarray) -> np.ndarray:
    """Class indices; ties resolve to the smallest index."""
    return np.argmax(predict_margin(model, features), axis=1).astype(np.int32)


# ---------------------------------------------------------------------------
# serialization


def model_to_json(model: GbtModel, meta: Optional[dict] = None) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "config": asdict(model.config),
        "n_classes": model.n_classes,
        "n_features": model.n_features,
        "feature_names": list(model.feature_names) if model.feature_names else None,
        "train_loss": model.train_loss,
        "valid_loss": model.valid_loss,
        "meta": meta or {},
        "trees": [[{
            "feature": tree.feature.tolist(),
            "threshold": tree.threshold.tolist(),
            "left": tree.left.tolist(),
            "right": tree.right.tolist(),
            "value": tree.value.tolist(),
        } for tree in round_trees] for round_trees in model.trees],
    }


def model_from_json(doc: dict) -> GbtModel:
    if doc.get("format") != MODEL_FORMAT:
        raise DataError(f"not a {MODEL_FORMAT} document")
    if doc.get("version") != MODEL_VERSION:
        raise DataError(f"unsupported model version {doc.get('version')}")
    trees = [[Tree(feature=np.asarray(t["feature"], dtype=np.int32),
                   threshold=np.asarray(t["threshold"], dtype=np.float64),
                   left=np.asarray(t["left"], dtype=np.int32),
                   right=np.asarray(t["right"], dtype=np.int32),
                   value=np.asarray(t["value"], dtype=np.float64))
              for t in round_trees] for round_trees in doc["trees"]]
    names = doc.get("feature_names")
    return GbtModel(config=GbtConfig(**doc["config"]),
                    n_classes=int(doc["n_classes"]),
                    n_features=int(doc["n_features"]),
                    trees=trees,
                    feature_names=tuple(names) if names else None,
                    train_loss=list(doc.get("train_loss", [])),
                    valid_loss=doc.get("valid_loss"))


def save_model(path: Union[str, Path], model: GbtModel,
               meta: Optional[dict] = None) -> None:
    Path(path).write_text(json.dumps(model_to_json(model, meta)))


def load_model(path: Union[str, Path]) -> GbtModel:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"cannot read model file {path}: {e}") from e
    return model_from_json(doc)


def load_model_meta(path: Union[str, Path]) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"cannot read model file {path}: {e}") from e
    return doc.get("meta", {})
