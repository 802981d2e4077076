import numpy as np
import pytest
import torch
from torch import nn

from shiftadapt.errors import ConfigError, DataError
from shiftadapt.nets import (
    Checkpoint,
    NetworkSpec,
    build_autoencoder,
    build_classifier,
    build_classifier_head,
    build_discriminator,
    build_encoder,
    build_latent_critic,
    parameter_count,
    params_digest,
)

DESK = dict(input_shape=(8, 64, 64), latent_dim=32, base_width=8)


def spec_for(family, **kw):
    return NetworkSpec(family=family, **{**DESK, **kw})


@pytest.mark.parametrize(
    "family", ["residual18", "grouped_residual50", "residual18_3d", "compound_b3"]
)
def test_encoder_families_forward(family):
    kw = {"cardinality": 4} if family == "grouped_residual50" else {}
    enc = build_encoder(spec_for(family, **kw))
    x = torch.randn(3, 8, 64, 64, generator=torch.Generator().manual_seed(0))
    with torch.no_grad():
        z = enc(x)
    assert z.shape == (3, 32)
    assert torch.isfinite(z).all()


@pytest.mark.parametrize(
    "family", ["residual18", "grouped_residual50", "residual18_3d", "compound_b3"]
)
def test_seeded_build_is_deterministic(family):
    kw = {"cardinality": 4} if family == "grouped_residual50" else {}
    a = build_encoder(spec_for(family, param_seed=11, **kw))
    b = build_encoder(spec_for(family, param_seed=11, **kw))
    for pa, pb in zip(a.parameters(), b.parameters()):
        assert torch.equal(pa, pb)
    c = build_encoder(spec_for(family, param_seed=12, **kw))
    flat_a = torch.cat([p.flatten() for p in a.parameters()])
    flat_c = torch.cat([p.flatten() for p in c.parameters()])
    assert not torch.equal(flat_a, flat_c)


def test_grouped_cardinality_divisibility():
    with pytest.raises(ConfigError, match="cardinality"):
        spec_for("grouped_residual50", cardinality=5).validate()


def test_receptive_minimum_enforced():
    with pytest.raises(ConfigError, match=">= 32"):
        build_encoder(NetworkSpec("residual18", input_shape=(4, 16, 16), base_width=8))


def test_3d_needs_slices():
    with pytest.raises(ConfigError, match="slices"):
        build_encoder(NetworkSpec("residual18_3d", input_shape=(2, 64, 64), base_width=8))


def test_head_affine_identity():
    head = build_classifier_head(16, param_seed=0)
    z = torch.zeros(1, 16)
    logits = head(z)
    assert torch.equal(logits[0], head.fc.bias)


def test_head_shape_mismatch():
    head = build_classifier_head(16)
    with pytest.raises(RuntimeError):
        head(torch.zeros(1, 8))


def test_head_parameter_arithmetic():
    head = build_classifier_head(4)
    assert sum(p.numel() for p in head.parameters()) == 4 * 2 + 2


def test_discriminator_contract():
    critic = build_discriminator(32, param_seed=3)
    z = torch.randn(5, 32, generator=torch.Generator().manual_seed(1))
    out = critic(z)
    assert out.shape == (5,)
    assert torch.isfinite(out).all()
    again = build_discriminator(32, param_seed=3)
    assert torch.equal(again(z), out)


def test_discriminator_invalid_latent():
    with pytest.raises(ConfigError):
        build_discriminator(0)
    with pytest.raises(ConfigError):
        build_latent_critic(-1)


def test_parameter_count_grouping_reduces_params():
    grouped = parameter_count(spec_for("grouped_residual50", cardinality=8))
    ungrouped = parameter_count(spec_for("grouped_residual50", cardinality=1))
    assert grouped < ungrouped


def test_parameter_count_discriminator_spec():
    spec = NetworkSpec("discriminator", latent_dim=16, critic_widths=(8, 4))
    assert parameter_count(spec) == 16 * 8 + 8 + 8 * 4 + 4 + 4 * 1 + 1
    with pytest.raises(ConfigError):
        parameter_count(NetworkSpec("discriminator", latent_dim=0))


# ---------------------------------------------------------------------------
# Grouped-convolution independence


def grouped_conv_layers(module):
    return [
        m for m in module.modules()
        if isinstance(m, nn.Conv2d) and m.groups > 1
    ]


def test_group_independence_exact():
    enc = build_encoder(spec_for("grouped_residual50", cardinality=4))
    layers = grouped_conv_layers(enc)
    assert layers, "expected grouped convolutions in the grouped family"
    gen = torch.Generator().manual_seed(0)
    for conv in layers[:3]:
        cin = conv.in_channels
        groups = conv.groups
        group_size = cin // groups
        x = torch.randn(2, cin, 8, 8, generator=gen)
        with torch.no_grad():
            base = conv(x)
            perturbed = x.clone()
            perturbed[:, :group_size] += torch.randn(
                2, group_size, 8, 8, generator=gen
            )
            out = conv(perturbed)
        out_group = conv.out_channels // groups
        # group 0's outputs change, all other groups bit-identical
        assert not torch.equal(out[:, :out_group], base[:, :out_group])
        assert torch.equal(out[:, out_group:], base[:, out_group:])


# ---------------------------------------------------------------------------
# Autoencoder


def test_autoencoder_tanh_bound():
    ae = build_autoencoder(spec_for("autoencoder", base_width=8))
    x = torch.randn(4, 8, 64, 64, generator=torch.Generator().manual_seed(2)) * 50
    with torch.no_grad():
        out = ae(x)
    assert out.shape == x.shape
    assert float(out.min()) >= -1.0
    assert float(out.max()) <= 1.0


def test_autoencoder_bottleneck_at_256():
    spec = NetworkSpec("autoencoder", input_shape=(10, 256, 256), latent_dim=128)
    assert spec.resolved_ae_stages() == 5
    ae = build_autoencoder(spec)
    x = torch.randn(1, 10, 256, 256)
    with torch.no_grad():
        feat = ae.encoder.conv(x)
    assert feat.shape[-2:] == (8, 8)


def test_autoencoder_variational_outputs():
    ae = build_autoencoder(spec_for("autoencoder", base_width=8, variational=True))
    x = torch.randn(3, 8, 64, 64)
    with torch.no_grad():
        mean, logvar = ae.encoder.encode_params(x)
    assert mean.shape == (3, 32) and logvar.shape == (3, 32)
    with torch.no_grad():
        assert torch.equal(ae.encoder(x), mean)  # deterministic inference


def test_autoencoder_rejects_non_power_of_two():
    with pytest.raises(ConfigError, match="power-of-two"):
        NetworkSpec("autoencoder", input_shape=(8, 48, 48)).validate()


def test_autoencoder_rejects_rectangular():
    with pytest.raises(ConfigError, match="square"):
        NetworkSpec("autoencoder", input_shape=(8, 64, 32)).validate()


# ---------------------------------------------------------------------------
# Checkpoints


def test_checkpoint_roundtrip_bit_exact(tmp_path):
    clf = build_classifier(spec_for("residual18"))
    clf.eval()
    spec = spec_for("residual18")
    ck = Checkpoint.capture(clf, spec, "classifier", {"dataset_id": "probe"})
    path = tmp_path / "clf.ckpt"
    ck.save(path)
    again = Checkpoint.load(path)
    assert again.training_meta["dataset_id"] == "probe"
    model = again.materialize()
    x = torch.randn(2, 8, 64, 64, generator=torch.Generator().manual_seed(5))
    with torch.no_grad():
        a = clf(x)
        b = model(x)
    assert torch.equal(a, b)
    assert params_digest(ck.state) == params_digest(again.state)


def test_checkpoint_refuses_shape_mismatch(tmp_path):
    ae = build_autoencoder(spec_for("autoencoder", base_width=8))
    ck = Checkpoint.capture(ae, spec_for("autoencoder", base_width=8), "autoencoder")
    ck.state["encoder.fc.weight"] = ck.state["encoder.fc.weight"][:, :-1]
    with pytest.raises(DataError, match="shape"):
        ck.materialize()


def test_checkpoint_bad_file(tmp_path):
    p = tmp_path / "junk.ckpt"
    p.write_bytes(b"garbage")
    with pytest.raises(DataError):
        Checkpoint.load(p)


# ---------------------------------------------------------------------------
# Slice-axis semantics


def test_3d_family_sensitive_to_slice_permutation():
    enc = build_encoder(spec_for("residual18_3d"))
    enc.eval()
    x = torch.randn(1, 8, 64, 64, generator=torch.Generator().manual_seed(4))
    perm = x[:, [1, 0, 2, 3, 4, 5, 6, 7]]
    with torch.no_grad():
        assert not torch.allclose(enc(x), enc(perm))


def test_channel_family_permutation_equivariance():
    enc = build_encoder(spec_for("residual18"))
    enc.eval()
    x = torch.randn(1, 8, 64, 64, generator=torch.Generator().manual_seed(4))
    order = [3, 1, 0, 2, 7, 6, 5, 4]
    with torch.no_grad():
        base = enc(x)
        stem = enc.trunk.stem[0]
        original = stem.weight.data.clone()
        stem.weight.data = original[:, order]
        permuted = enc(x[:, order])
        stem.weight.data = original
    assert torch.allclose(base, permuted, atol=1e-5)
