"""Convolutional classifiers over raw I/Q: a VGG-style stack and a residual
network, both ending in the same three-layer dense head.

The VGG variant is `n_pairs` repetitions of conv(width, k) + ReLU + batch
norm + maxpool(2). The residual variant is `n_stacks` stacks, each a 1x1
conv(width) followed by two residual units and a maxpool(2); a unit is two
conv(width, k) with an identity skip added before the final ReLU. Both
trunks flatten into FC(128) + SELU + alpha-dropout, twice, then a linear
class layer. Convolutions run as 2-d kernels of height 1 in channels-last
memory format, which is the fastest layout for CPU inference and training.

Kernel size is configurable because no single size reproduces the
reference parameter totals; `calibration_table` reports the count for each
candidate so the closest configuration is documented rather than silently
assumed.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import torch
from torch import nn

from .errors import ConfigError

REFERENCE_PARAM_TOTALS = {"vgg": 257_099, "resnet": 236_344}


@dataclass(frozen=True)
class NetSpec:
    """Architecture description; everything a build needs, JSON-friendly."""

    kind: str
    example_len: int
    n_classes: int
    kernel_size: int = 3
    conv_width: Optional[int] = None    # 64 for vgg, 32 for resnet
    n_stacks: int = 6                   # resnet only
    n_pairs: Optional[int] = None       # vgg only; derived when None
    fc_width: int = 128
    dropout: float = 0.1

    def __post_init__(self) -> None:
        if self.kind not in ("vgg", "resnet"):
            raise ConfigError(f"unknown architecture {self.kind!r}")
        if self.example_len < 2:
            raise ConfigError("example_len must be >= 2")
        if self.n_classes < 2:
            raise ConfigError("need at least two classes")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ConfigError("kernel_size must be odd and positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")
        depth = self.depth
        if depth < 1:
            raise ConfigError("network needs at least one pooling stage")
        if self.example_len % (2 ** depth) != 0:
            raise ConfigError(
                f"example_len {self.example_len} not divisible by "
                f"2^{depth} pooling stages")

    @property
    def width(self) -> int:
        if self.conv_width is not None:
            return self.conv_width
        return 64 if self.kind == "vgg" else 32

    @property
    def depth(self) -> int:
        """Number of halving stages."""
        if self.kind == "resnet":
            return self.n_stacks
        if self.n_pairs is not None:
            return self.n_pairs
        # default: pool down to length 8, as the reference layout does
        return max(1, int(math.log2(self.example_len)) - 3)

    @property
    def final_len(self) -> int:
        return self.example_len // (2 ** self.depth)

    @property
    def flat_features(self) -> int:
        return self.width * self.final_len

    def to_json(self) -> dict:
        return {"kind": self.kind, "example_len": self.example_len,
                "n_classes": self.n_classes,
                "kernel_size": self.kernel_size, "conv_width": self.width,
                "n_stacks": self.n_stacks if self.kind == "resnet" else None,
                "n_pairs": self.depth if self.kind == "vgg" else None,
                "fc_width": self.fc_width, "dropout": self.dropout}

    @classmethod
    def from_json(cls, doc: dict) -> "NetSpec":
        kind = doc["kind"]
        return cls(kind=kind, example_len=doc["example_len"],
                   n_classes=doc["n_classes"],
                   kernel_size=doc["kernel_size"],
                   conv_width=doc.get("conv_width"),
                   n_stacks=doc["n_stacks"] if kind == "resnet" else 6,
                   n_pairs=doc.get("n_pairs") if kind == "vgg" else None,
                   fc_width=doc["fc_width"], dropout=doc["dropout"])


def _conv(c_in: int, c_out: int, k: int) -> nn.Conv2d:
    conv = nn.Conv2d(c_in, c_out, (1, k), padding=(0, k // 2))
    nn.init.kaiming_normal_(conv.weight, nonlinearity="relu")
    nn.init.zeros_(conv.bias)
    return conv


class ConvPair(nn.Module):
    """conv + ReLU + batch norm + halving maxpool."""

    def __init__(self, c_in: int, width: int, k: int):
        super().__init__()
        self.conv = _conv(c_in, width, k)
        self.bn = nn.BatchNorm2d(width)
        self.pool = nn.MaxPool2d((1, 2))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.pool(self.bn(torch.relu(self.conv(x))))


class ResidualUnit(nn.Module):
    """Two convolutions with an identity skip added before the last ReLU."""

    def __init__(self, width: int, k: int):
        super().__init__()
        self.a = _conv(width, width, k)
        self.b = _conv(width, width, k)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        y = torch.relu(self.a(x))
        y = self.b(y)
        return torch.relu(x + y)


class ResidualStack(nn.Module):
    """1x1 conv into two residual units, then a halving maxpool."""

    def __init__(self, c_in: int, width: int, k: int):
        super().__init__()
        self.project = _conv(c_in, width, 1)
        self.unit1 = ResidualUnit(width, k)
        self.unit2 = ResidualUnit(width, k)
        self.pool = nn.MaxPool2d((1, 2))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.pool(self.unit2(self.unit1(self.project(x))))


def _lecun_linear(n_in: int, n_out: int) -> nn.Linear:
    lin = nn.Linear(n_in, n_out)
    nn.init.normal_(lin.weight, std=1.0 / math.sqrt(n_in))
    nn.init.zeros_(lin.bias)
    return lin


class IqClassifier(nn.Module):
    """Trunk over (batch, 2, example_len) I/Q plus a three-layer dense head.

    forward returns logits; predict_proba applies the softmax. The head is
    exactly the final three fully connected layers, so transfer protocols
    can freeze the trunk and retrain the head alone.
    """

    def __init__(self, spec: NetSpec, trunk: nn.Sequential,
                 head: nn.Sequential):
        super().__init__()
        self.spec = spec
        self.trunk = trunk
        self.head = head
        self.to(memory_format=torch.channels_last)

    def train(self, mode: bool = True) -> "IqClassifier":
        super().train(mode)
        if mode and not any(p.requires_grad for p in self.trunk.parameters()):
            # a fully frozen trunk stays in inference mode so its batch-norm
            # statistics cannot drift under a blanket .train() call
            self.trunk.eval()
        return self

    def features(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 3 or x.shape[1] != 2 or x.shape[2] != self.spec.example_len:
            raise ConfigError(
                f"expected input (batch, 2, {self.spec.example_len}), "
                f"got {tuple(x.shape)}")
        z = x.unsqueeze(2).to(memory_format=torch.channels_last)
        z = self.trunk(z)
        return z.flatten(1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.features(x))

    def predict_proba(self, x: torch.Tensor) -> torch.Tensor:
        return torch.softmax(self.forward(x), dim=1)

    def stage_shapes(self, batch: int = 2) -> List[Tuple[int, int]]:
        """Actual (channels, length) after every trunk stage."""
        self.eval()
        with torch.no_grad():
            z = torch.zeros(batch, 2, 1, self.spec.example_len)
            out = []
            for stage in self.trunk:
                z = stage(z)
                out.append((z.shape[1], z.shape[3]))
        return out


def shape_chain(spec: NetSpec) -> List[Tuple[int, int]]:
    """Designed (channels, length) after each stage, without building."""
    return [(spec.width, spec.example_len // (2 ** (i + 1)))
            for i in range(spec.depth)]


def build(spec: NetSpec) -> IqClassifier:
    stages: List[nn.Module] = []
    c_in = 2
    for _ in range(spec.depth):
        if spec.kind == "vgg":
            stages.append(ConvPair(c_in, spec.width, spec.kernel_size))
        else:
            stages.append(ResidualStack(c_in, spec.width, spec.kernel_size))
        c_in = spec.width
    head = nn.Sequential(
        _lecun_linear(spec.flat_features, spec.fc_width),
        nn.SELU(),
        nn.AlphaDropout(spec.dropout),
        _lecun_linear(spec.fc_width, spec.fc_width),
        nn.SELU(),
        nn.AlphaDropout(spec.dropout),
        _lecun_linear(spec.fc_width, spec.n_classes),
    )
    return IqClassifier(spec, nn.Sequential(*stages), head)


def param_count(model: nn.Module, trainable_only: bool = True) -> int:
    return sum(p.numel() for p in model.parameters()
               if p.requires_grad or not trainable_only)


def calibration_table(example_len: int = 1024, n_classes: int = 24) -> List[dict]:
    """Parameter counts across candidate kernel sizes and stack counts.

    No single configuration reproduces the reference totals exactly, so
    the table reports every candidate with its distance from the reference
    and marks the closest one per architecture.
    """
    rows: List[dict] = []
    for k in (3, 5, 7):
        spec = NetSpec(kind="vgg", example_len=example_len,
                       n_classes=n_classes, kernel_size=k)
        rows.append({"kind": "vgg", "kernel_size": k, "n_stacks": None,
                     "params": param_count(build(spec))})
    for n_stacks in (5, 6):
        for k in (3, 5, 7):
            spec = NetSpec(kind="resnet", example_len=example_len,
                           n_classes=n_classes, kernel_size=k,
                           n_stacks=n_stacks)
            rows.append({"kind": "resnet", "kernel_size": k,
                         "n_stacks": n_stacks,
                         "params": param_count(build(spec))})
    for row in rows:
        row["reference"] = REFERENCE_PARAM_TOTALS[row["kind"]]
        row["delta"] = row["params"] - row["reference"]
    for kind in ("vgg", "resnet"):
        group = [r for r in rows if r["kind"] == kind]
        best = min(group, key=lambda r: abs(r["delta"]))
        for r in group:
            r["closest"] = r is best
    return rows
