"""Training, evaluation, transfer, and checkpoints.

Training minimizes categorical cross-entropy with Adam at default moments,
batch size 512, and early stopping: when validation loss has not improved
for `patience` consecutive epochs the loop stops and the best-epoch
weights are restored. On CPU the forward/backward pass optionally runs
under bfloat16 autocast (weights and optimizer state stay float32);
validation and all reported metrics always run in float32.

The transfer path freezes the trunk, which therefore runs in inference
mode, so trunk outputs are computed once per example and the dense head is
fine-tuned on those cached features. With zero epochs this reduces exactly
to frozen evaluation.
"""

import copy
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch

from .errors import ConfigError, DataError, TrainError
from .nets import IqClassifier, NetSpec, build

CHECKPOINT_FORMAT = "dlnet-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 512
    learning_rate: float = 1e-3
    max_epochs: int = 100
    patience: int = 10
    seed: int = 0
    amp: bool = True

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigError("learning_rate must be in (0, 1]")
        if self.max_epochs < 0:
            raise ConfigError("max_epochs must be >= 0")
        if self.patience < 1:
            raise ConfigError("patience must be >= 1")


@dataclass
class TrainState:
    history: List[dict] = field(default_factory=list)
    best_val_loss: float = math.inf
    best_epoch: int = -1
    epochs_run: int = 0


def cross_entropy(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Mean negative log-probability of the true class.

    Written out explicitly (log-sum-exp normalization, then a gather) so it
    evaluates exactly in whatever dtype the caller supplies.
    """
    if logits.ndim != 2 or labels.ndim != 1 or logits.shape[0] != labels.shape[0]:
        raise ConfigError(f"logits {tuple(logits.shape)} vs labels "
                          f"{tuple(labels.shape)}")
    logp = logits - torch.logsumexp(logits, dim=1, keepdim=True)
    picked = logp.gather(1, labels.view(-1, 1)).squeeze(1)
    return -picked.mean()


def _batches(n: int, batch_size: int,
             generator: Optional[torch.Generator] = None):
    if generator is None:
        order = torch.arange(n)
    else:
        order = torch.randperm(n, generator=generator)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def _eval_loss_acc(model: IqClassifier, x: np.ndarray, y: np.ndarray,
                   batch_size: int) -> Tuple[float, float]:
    model.eval()
    total, hits, loss_sum = 0, 0, 0.0
    with torch.no_grad():
        for idx in _batches(x.shape[0], batch_size):
            xb = torch.from_numpy(x[idx.numpy()])
            yb = torch.from_numpy(y[idx.numpy()])
            logits = model(xb)
            loss_sum += float(cross_entropy(logits, yb)) * yb.shape[0]
            hits += int((logits.argmax(dim=1) == yb).sum())
            total += yb.shape[0]
    return loss_sum / total, hits / total


def predict(model: IqClassifier, x: np.ndarray,
            batch_size: int = 1024) -> np.ndarray:
    model.eval()
    out = np.empty(x.shape[0], dtype=np.int64)
    with torch.no_grad():
        for start in range(0, x.shape[0], batch_size):
            xb = torch.from_numpy(x[start:start + batch_size])
            out[start:start + batch_size] = model(xb).argmax(dim=1).numpy()
    return out


def _check_finite(loss: float, epoch: int, batch: int) -> None:
    if not math.isfinite(loss):
        raise TrainError(f"training diverged: loss {loss} "
                         f"at epoch {epoch}, batch {batch}")


def fit(model: IqClassifier,
        x_train: np.ndarray, y_train: np.ndarray,
        x_val: np.ndarray, y_val: np.ndarray,
        config: TrainConfig = TrainConfig(),
        log: Optional[Callable[[str], None]] = None) -> TrainState:
    torch.manual_seed(config.seed)
    gen = torch.Generator().manual_seed(config.seed)
    trainable = [p for p in model.parameters() if p.requires_grad]
    if not trainable:
        raise ConfigError("model has no trainable parameters")
    opt = torch.optim.Adam(trainable, lr=config.learning_rate)
    state = TrainState()
    best_weights = None
    stale = 0
    for epoch in range(config.max_epochs):
        model.train()
        running, seen = 0.0, 0
        for bi, idx in enumerate(_batches(x_train.shape[0],
                                          config.batch_size, gen)):
            xb = torch.from_numpy(x_train[idx.numpy()])
            yb = torch.from_numpy(y_train[idx.numpy()])
            opt.zero_grad(set_to_none=True)
            if config.amp:
                with torch.autocast("cpu", dtype=torch.bfloat16):
                    loss = cross_entropy(model(xb), yb)
            else:
                loss = cross_entropy(model(xb), yb)
            loss_f = float(loss.detach())
            _check_finite(loss_f, epoch, bi)
            loss.backward()
            opt.step()
            running += loss_f * yb.shape[0]
            seen += yb.shape[0]
        val_loss, val_acc = _eval_loss_acc(model, x_val, y_val,
                                           config.batch_size)
        _check_finite(val_loss, epoch, -1)
        state.history.append({"epoch": epoch, "train_loss": running / seen,
                              "val_loss": val_loss, "val_acc": val_acc})
        state.epochs_run = epoch + 1
        if log is not None:
            log(f"epoch {epoch:3d}  train {running / seen:.4f}  "
                f"val {val_loss:.4f}  acc {val_acc:.4f}")
        if val_loss < state.best_val_loss:
            state.best_val_loss = val_loss
            state.best_epoch = epoch
            best_weights = copy.deepcopy(model.state_dict())
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    if best_weights is not None:
        model.load_state_dict(best_weights)
    model.eval()
    return state


# ---------------------------------------------------------------------------
# transfer


def freeze_trunk(model: IqClassifier) -> None:
    for p in model.trunk.parameters():
        p.requires_grad_(False)
    model.trunk.eval()


def parameter_checksums(model: IqClassifier,
                        frozen_only: bool = False) -> Dict[str, str]:
    out = {}
    for name, p in model.named_parameters():
        if frozen_only and p.requires_grad:
            continue
        blob = p.detach().cpu().contiguous().numpy().tobytes()
        out[name] = hashlib.sha256(blob).hexdigest()
    for name, b in model.named_buffers():
        blob = b.detach().cpu().contiguous().numpy().tobytes()
        out[name] = hashlib.sha256(blob).hexdigest()
    return out


def _head_linears(model: IqClassifier) -> List[torch.nn.Linear]:
    return [m for m in model.head if isinstance(m, torch.nn.Linear)]


def transfer_finetune(model: IqClassifier,
                      x_train: np.ndarray, y_train: np.ndarray,
                      x_val: np.ndarray, y_val: np.ndarray,
                      config: TrainConfig = TrainConfig(),
                      freeze_tail: int = 3,
                      log: Optional[Callable[[str], None]] = None
                      ) -> TrainState:
    """Fine-tune only the last `freeze_tail` dense layers on cached trunk
    features; every other parameter keeps its exact bits.
    """
    linears = _head_linears(model)
    if len(linears) != 3:
        raise ConfigError(f"head has {len(linears)} dense layers, "
                          f"the transfer protocol expects 3")
    if not 1 <= freeze_tail <= len(linears):
        raise ConfigError(f"freeze_tail must be in 1..{len(linears)}")
    freeze_trunk(model)
    for lin in linears[:len(linears) - freeze_tail]:
        for p in lin.parameters():
            p.requires_grad_(False)

    def cache(x: np.ndarray) -> np.ndarray:
        model.trunk.eval()
        out = []
        with torch.no_grad():
            for start in range(0, x.shape[0], 1024):
                xb = torch.from_numpy(x[start:start + 1024])
                out.append(model.features(xb).numpy())
        return np.concatenate(out, axis=0)

    z_train, z_val = cache(x_train), cache(x_val)

    torch.manual_seed(config.seed)
    gen = torch.Generator().manual_seed(config.seed)
    trainable = [p for p in model.head.parameters() if p.requires_grad]
    opt = torch.optim.Adam(trainable, lr=config.learning_rate)
    state = TrainState()
    best_weights = None
    stale = 0

    def val_pass() -> Tuple[float, float]:
        model.head.eval()
        with torch.no_grad():
            logits = model.head(torch.from_numpy(z_val))
            yb = torch.from_numpy(y_val)
            return (float(cross_entropy(logits, yb)),
                    float((logits.argmax(dim=1) == yb).float().mean()))

    for epoch in range(config.max_epochs):
        model.head.train()
        running, seen = 0.0, 0
        for bi, idx in enumerate(_batches(z_train.shape[0],
                                          config.batch_size, gen)):
            zb = torch.from_numpy(z_train[idx.numpy()])
            yb = torch.from_numpy(y_train[idx.numpy()])
            opt.zero_grad(set_to_none=True)
            loss = cross_entropy(model.head(zb), yb)
            loss_f = float(loss.detach())
            _check_finite(loss_f, epoch, bi)
            loss.backward()
            opt.step()
            running += loss_f * yb.shape[0]
            seen += yb.shape[0]
        val_loss, val_acc = val_pass()
        _check_finite(val_loss, epoch, -1)
        state.history.append({"epoch": epoch, "train_loss": running / seen,
                              "val_loss": val_loss, "val_acc": val_acc})
        state.epochs_run = epoch + 1
        if log is not None:
            log(f"tune {epoch:3d}  train {running / seen:.4f}  "
                f"val {val_loss:.4f}  acc {val_acc:.4f}")
        if val_loss < state.best_val_loss:
            state.best_val_loss = val_loss
            state.best_epoch = epoch
            best_weights = copy.deepcopy(model.head.state_dict())
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    if best_weights is not None:
        model.head.load_state_dict(best_weights)
    model.eval()
    return state


# ---------------------------------------------------------------------------
# metrics artifacts, format-compatible with the dataset forge's CSVs


def accuracy_by_snr(pred: np.ndarray, true: np.ndarray, snrs: np.ndarray,
                    bin_width: float = 2.0) -> List[Tuple[float, int, float]]:
    if not (pred.shape == true.shape == snrs.shape) or pred.ndim != 1:
        raise DataError("pred/true/snrs must be aligned 1-d arrays")
    if pred.size == 0:
        raise DataError("empty evaluation")
    centers = np.round(snrs / bin_width) * bin_width
    rows = []
    for c in np.unique(centers):
        mask = centers == c
        rows.append((float(c), int(mask.sum()),
                     float(np.mean(pred[mask] == true[mask]))))
    return rows


def write_curve_csv(path: Union[str, Path],
                    rows: Sequence[Tuple[float, int, float]]) -> None:
    lines = ["snr_db,n,accuracy"]
    lines += [f"{s:g},{n},{a:.6f}" for s, n, a in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def write_confusion_csv(path: Union[str, Path], pred: np.ndarray,
                        true: np.ndarray, classes: Sequence[str]) -> None:
    k = len(classes)
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (true, pred), 1)
    rowsum = counts.sum(axis=1, keepdims=True)
    rates = np.divide(counts, rowsum, out=np.zeros((k, k)), where=rowsum > 0)
    lines = ["," + ",".join(classes)]
    for name, row in zip(classes, rates):
        lines.append(name + "," + ",".join(f"{v:.6f}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path: Union[str, Path], model: IqClassifier,
                    classes: Sequence[str],
                    config_hash: Optional[str] = None,
                    train_config: Optional[TrainConfig] = None,
                    split: Optional[dict] = None,
                    history: Optional[List[dict]] = None) -> None:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "spec": model.spec.to_json(),
        "classes": list(classes),
        "config_hash": config_hash,
        "train_config": asdict(train_config) if train_config else None,
        "split": split,
        "history": history,
    }
    torch.save({**doc, "state_dict": model.state_dict()}, path)
    Path(str(path) + ".json").write_text(json.dumps(doc, indent=1))


def load_checkpoint(path: Union[str, Path]) -> Tuple[IqClassifier, dict]:
    try:
        blob = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise DataError(f"{path}: unreadable checkpoint ({exc})") from exc
    if blob.get("format") != CHECKPOINT_FORMAT:
        raise DataError(f"{path}: not a model checkpoint")
    if blob.get("version") != CHECKPOINT_VERSION:
        raise DataError(f"{path}: unsupported version {blob.get('version')}")
    model = build(NetSpec.from_json(blob["spec"]))
    model.load_state_dict(blob["state_dict"])
    model.eval()
    meta = {k: v for k, v in blob.items() if k != "state_dict"}
    return model, meta
