"""Architecture tests: shape chains, parameter counts against a closed-form
oracle, calibration table, and head structure."""

import math

import numpy as np
import pytest
import torch

from dlnet.errors import ConfigError
from dlnet.nets import (
    REFERENCE_PARAM_TOTALS,
    IqClassifier,
    NetSpec,
    build,
    calibration_table,
    param_count,
    shape_chain,
)


def formula_params(spec):
    """Closed-form trainable-parameter count, written independently of the
    module code: convolution weights plus biases, batch-norm affine pairs,
    and the three dense layers."""
    w, k = spec.width, spec.kernel_size
    total = 0
    c_in = 2
    for _ in range(spec.depth):
        if spec.kind == "vgg":
            total += c_in * w * k + w      # conv weight + bias
            total += 2 * w                 # batch-norm gamma + beta
        else:
            total += c_in * w * 1 + w      # 1x1 projection
            total += 4 * (w * w * k + w)   # two units of two convs each
        c_in = w
    flat = w * spec.example_len // (2 ** spec.depth)
    total += flat * spec.fc_width + spec.fc_width
    total += spec.fc_width * spec.fc_width + spec.fc_width
    total += spec.fc_width * spec.n_classes + spec.n_classes
    return total


def test_spec_validation():
    with pytest.raises(ConfigError, match="architecture"):
        NetSpec(kind="mlp", example_len=64, n_classes=3)
    with pytest.raises(ConfigError, match="kernel"):
        NetSpec(kind="vgg", example_len=64, n_classes=3, kernel_size=4)
    with pytest.raises(ConfigError, match="dropout"):
        NetSpec(kind="vgg", example_len=64, n_classes=3, dropout=1.0)
    with pytest.raises(ConfigError, match="classes"):
        NetSpec(kind="vgg", example_len=64, n_classes=1)


def test_length_must_survive_all_pooling_stages():
    with pytest.raises(ConfigError, match="divisible"):
        NetSpec(kind="resnet", example_len=96, n_classes=3, n_stacks=6)
    with pytest.raises(ConfigError, match="divisible"):
        NetSpec(kind="vgg", example_len=72, n_classes=3, n_pairs=4)
    # 64 = 2^6 survives exactly six halvings
    NetSpec(kind="resnet", example_len=64, n_classes=3, n_stacks=6)


def test_default_depths():
    vgg = NetSpec(kind="vgg", example_len=1024, n_classes=24)
    assert vgg.depth == 7
    assert vgg.final_len == 8
    assert vgg.width == 64
    res = NetSpec(kind="resnet", example_len=1024, n_classes=24)
    assert res.depth == 6
    assert res.final_len == 16
    assert res.width == 32


@pytest.mark.parametrize("spec", [
    NetSpec(kind="vgg", example_len=256, n_classes=5, conv_width=16,
            n_pairs=5),
    NetSpec(kind="resnet", example_len=256, n_classes=5, conv_width=8,
            n_stacks=4),
])
def test_stage_shapes_match_designed_chain(spec):
    model = build(spec)
    designed = shape_chain(spec)
    assert model.stage_shapes() == designed
    assert designed[-1] == (spec.width, spec.final_len)
    lengths = [l for _, l in designed]
    assert lengths == [spec.example_len // 2 ** (i + 1)
                       for i in range(spec.depth)]


@pytest.mark.parametrize("spec", [
    NetSpec(kind="vgg", example_len=1024, n_classes=24),
    NetSpec(kind="vgg", example_len=1024, n_classes=24, kernel_size=7),
    NetSpec(kind="vgg", example_len=256, n_classes=11, conv_width=32,
            n_pairs=4),
    NetSpec(kind="resnet", example_len=1024, n_classes=24),
    NetSpec(kind="resnet", example_len=1024, n_classes=24, kernel_size=5,
            n_stacks=5),
    NetSpec(kind="resnet", example_len=128, n_classes=7, conv_width=16,
            n_stacks=3),
])
def test_param_count_matches_formula(spec):
    assert param_count(build(spec)) == formula_params(spec)


def test_param_count_trainable_only_flag():
    model = build(NetSpec(kind="vgg", example_len=64, n_classes=3,
                          conv_width=8, n_pairs=2))
    full = param_count(model, trainable_only=False)
    for p in model.trunk.parameters():
        p.requires_grad_(False)
    assert param_count(model) < full
    assert param_count(model, trainable_only=False) == full


def test_calibration_table_documents_best_matches():
    rows = calibration_table()
    assert len(rows) == 9
    for row in rows:
        assert row["reference"] == REFERENCE_PARAM_TOTALS[row["kind"]]
        assert row["delta"] == row["params"] - row["reference"]
    for kind in ("vgg", "resnet"):
        group = [r for r in rows if r["kind"] == kind]
        best = [r for r in group if r["closest"]]
        assert len(best) == 1
        assert abs(best[0]["delta"]) == min(abs(r["delta"]) for r in group)
    vgg_best = next(r for r in rows if r["kind"] == "vgg" and r["closest"])
    res_best = next(r for r in rows if r["kind"] == "resnet" and r["closest"])
    assert vgg_best["kernel_size"] == 7
    assert (res_best["n_stacks"], res_best["kernel_size"]) == (5, 3)


def test_forward_and_softmax():
    spec = NetSpec(kind="resnet", example_len=64, n_classes=5, conv_width=8,
                   n_stacks=3)
    model = build(spec)
    model.eval()
    x = torch.randn(6, 2, 64)
    logits = model(x)
    assert logits.shape == (6, 5)
    proba = model.predict_proba(x)
    assert proba.min() >= 0.0
    np.testing.assert_allclose(proba.sum(dim=1).detach().numpy(), 1.0,
                               atol=1e-6)
    feats = model.features(x)
    assert feats.shape == (6, spec.flat_features)


def test_head_is_three_dense_layers():
    model = build(NetSpec(kind="vgg", example_len=64, n_classes=3,
                          conv_width=8, n_pairs=2))
    linears = [m for m in model.head if isinstance(m, torch.nn.Linear)]
    assert len(linears) == 3
    assert linears[0].in_features == model.spec.flat_features
    assert linears[-1].out_features == 3


def test_input_shape_validation():
    model = build(NetSpec(kind="vgg", example_len=64, n_classes=3,
                          conv_width=8, n_pairs=2))
    with pytest.raises(ConfigError, match="expected input"):
        model(torch.randn(4, 2, 32))
    with pytest.raises(ConfigError, match="expected input"):
        model(torch.randn(4, 3, 64))


def test_spec_json_roundtrip():
    for spec in (NetSpec(kind="vgg", example_len=512, n_classes=11,
                         kernel_size=5),
                 NetSpec(kind="resnet", example_len=256, n_classes=24,
                         n_stacks=4, dropout=0.2)):
        again = NetSpec.from_json(spec.to_json())
        assert again.to_json() == spec.to_json()
        assert param_count(build(again)) == param_count(build(spec))


def test_dense_init_scales_with_fan_in():
    # weights drawn at std 1/sqrt(n_in); check the realized spread
    torch.manual_seed(0)
    model = build(NetSpec(kind="vgg", example_len=1024, n_classes=24))
    first = [m for m in model.head if isinstance(m, torch.nn.Linear)][0]
    want = 1.0 / math.sqrt(first.in_features)
    got = float(first.weight.detach().std())
    assert abs(got - want) / want < 0.15
    assert float(first.bias.detach().abs().max()) == 0.0
