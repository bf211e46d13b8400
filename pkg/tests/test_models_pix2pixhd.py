import pytest
import torch
import torch.nn.functional as F

from heliogen.errors import InvalidSpec, ShapeMismatch
from heliogen.losses import LossWeights, pix2pixhd_objective
from heliogen.models import (
    DiscriminatorSpec,
    HDGeneratorSpec,
    MultiScaleDiscriminatorSpec,
    build_hd_generator,
    build_multiscale_discriminator,
    build_patch_discriminator,
    hd_generator_forward,
    multiscale_forward,
)
from heliogen.models.pix2pixhd import ResidualBlock

from oracles import patch_map_side


def toy_spec():
    return HDGeneratorSpec(global_downsamples=2, global_residual_blocks=2,
                           enhancer_residual_blocks=1, base_filters=8)


def toy_disc_spec(num_scales=2):
    return MultiScaleDiscriminatorSpec(
        num_scales=num_scales,
        base=DiscriminatorSpec(strided_layers=2, base_filters=4))


def test_global_branch_works_at_half_resolution():
    g = build_hd_generator(toy_spec(), seed=0)
    g.eval()
    x = torch.rand(1, 3, 64, 64) * 2 - 1
    with torch.no_grad():
        feats = g.global_features(x)
        out = g(x)
    assert feats.shape[-2:] == (32, 32)
    assert out.shape == (1, 3, 64, 64)
    assert out.abs().max() <= 1.0


def test_same_seed_same_parameters():
    g1 = build_hd_generator(toy_spec(), seed=5)
    g2 = build_hd_generator(toy_spec(), seed=5)
    for p1, p2 in zip(g1.state_dict().values(), g2.state_dict().values()):
        assert torch.equal(p1, p2)


def test_eval_forward_bitwise_deterministic():
    g = build_hd_generator(toy_spec(), seed=3)
    x = torch.rand(2, 3, 64, 64) * 2 - 1
    out1 = hd_generator_forward(g, x, mode="eval")
    out2 = hd_generator_forward(g, x, mode="eval")
    assert torch.equal(out1, out2)


def test_zeroed_enhancer_front_collapses_to_global_path():
    g = build_hd_generator(toy_spec(), seed=9)
    g.eval()
    with torch.no_grad():
        for param in g.enhancer_front.parameters():
            param.zero_()
        x = torch.rand(1, 3, 64, 64) * 2 - 1
        full = g(x)
        global_only = g.global_path(x)
    assert torch.equal(full, global_only)


def test_residual_block_is_identity_when_zeroed():
    block = ResidualBlock(8)
    with torch.no_grad():
        for param in block.parameters():
            param.zero_()
        x = torch.randn(2, 8, 16, 16)
        assert torch.equal(block(x), x)


def test_zeroed_residual_trunk_passes_features_through():
    g = build_hd_generator(toy_spec(), seed=2)
    g.eval()
    with torch.no_grad():
        for param in g.enhancer_res.parameters():
            param.zero_()
        feats = torch.randn(1, 8, 32, 32)
        assert torch.equal(g.enhancer_res(feats), feats)


def test_scale_inputs_are_progressively_pooled():
    ens = build_multiscale_discriminator(toy_disc_spec(), seed=4)
    ens.eval()
    x = torch.rand(1, 3, 64, 64)
    y = torch.rand(1, 3, 64, 64)
    with torch.no_grad():
        outs = multiscale_forward(ens, x, y)
    assert len(outs) == 2
    side1 = patch_map_side(64, strided_layers=2)
    side2 = patch_map_side(32, strided_layers=2)
    assert outs[0].patch_map.shape[-2:] == (side1, side1)
    assert outs[1].patch_map.shape[-2:] == (side2, side2)
    # first conv features confirm what each scale consumed
    assert outs[0].features[0].shape[-1] == 32  # stride-2 over 64
    assert outs[1].features[0].shape[-1] == 16  # stride-2 over pooled 32


def test_scale2_equals_single_discriminator_on_pooled_input():
    ens = build_multiscale_discriminator(toy_disc_spec(), seed=8)
    ens.eval()
    x = torch.rand(1, 3, 64, 64)
    y = torch.rand(1, 3, 64, 64)
    with torch.no_grad():
        outs = multiscale_forward(ens, x, y)
        pooled = F.avg_pool2d(torch.cat([x, y], dim=1), 2)
        pm, feats = ens.scales[1].forward_features(pooled)
    assert torch.equal(outs[1].patch_map, pm)
    for a, b in zip(outs[1].features, feats):
        assert torch.equal(a, b)


def test_single_scale_matches_plain_patchgan():
    ens = build_multiscale_discriminator(toy_disc_spec(num_scales=1), seed=6)
    solo = build_patch_discriminator(toy_disc_spec().base, seed=0)
    solo.load_state_dict(ens.scales[0].state_dict())
    ens.eval()
    solo.eval()
    xy = torch.rand(1, 6, 64, 64)
    with torch.no_grad():
        outs = ens(xy)
        pm, _ = solo.forward_features(xy)
    assert len(outs) == 1
    assert torch.equal(outs[0].patch_map, pm)


def test_feature_list_lengths_match_layer_count():
    spec = toy_disc_spec()
    ens = build_multiscale_discriminator(spec, seed=1)
    outs = multiscale_forward(ens, torch.rand(1, 3, 64, 64), torch.rand(1, 3, 64, 64))
    for out in outs:
        assert len(out.features) == spec.base.layer_count


def test_identical_inputs_identical_outputs():
    ens = build_multiscale_discriminator(toy_disc_spec(), seed=2)
    ens.eval()
    x = torch.rand(1, 3, 64, 64)
    y = torch.rand(1, 3, 64, 64)
    with torch.no_grad():
        a = multiscale_forward(ens, x, y)
        b = multiscale_forward(ens, x, y)
    for oa, ob in zip(a, b):
        assert torch.equal(oa.patch_map, ob.patch_map)


def test_both_scales_receive_gradients():
    g = build_hd_generator(toy_spec(), seed=0)
    ens = build_multiscale_discriminator(toy_disc_spec(), seed=1)
    x = torch.rand(2, 3, 64, 64) * 2 - 1
    y = torch.rand(2, 3, 64, 64) * 2 - 1
    fake = g(x)
    real_outs = ens(torch.cat([x, y], dim=1))
    fake_outs = ens(torch.cat([x, fake.detach()], dim=1))
    bundle = pix2pixhd_objective(real_outs, fake_outs, LossWeights())
    bundle.d_loss.backward()
    for k, disc in enumerate(ens.scales):
        grads = [p.grad for p in disc.parameters()]
        assert all(g_ is not None for g_ in grads), k
        assert any(g_.abs().sum() > 0 for g_ in grads), k


def test_generator_receives_gradients_through_composite():
    g = build_hd_generator(toy_spec(), seed=0)
    ens = build_multiscale_discriminator(toy_disc_spec(), seed=1)
    x = torch.rand(1, 3, 64, 64) * 2 - 1
    y = torch.rand(1, 3, 64, 64) * 2 - 1
    fake = g(x)
    with torch.no_grad():
        real_outs = ens(torch.cat([x, y], dim=1))
    fake_outs = ens(torch.cat([x, fake], dim=1))
    bundle = pix2pixhd_objective(real_outs, fake_outs, LossWeights())
    bundle.g_total.backward()
    for name, param in g.named_parameters():
        assert param.grad is not None, name
        assert param.grad.abs().sum() > 0, name


def test_invalid_specs_rejected():
    with pytest.raises(InvalidSpec):
        HDGeneratorSpec(global_downsamples=0)
    with pytest.raises(InvalidSpec):
        HDGeneratorSpec(global_residual_blocks=0)
    with pytest.raises(InvalidSpec):
        HDGeneratorSpec(base_filters=7)
    with pytest.raises(InvalidSpec):
        MultiScaleDiscriminatorSpec(num_scales=0)


def test_indivisible_input_side_rejected():
    g = build_hd_generator(toy_spec(), seed=0)  # needs side % 8 == 0
    with pytest.raises(ShapeMismatch):
        hd_generator_forward(g, torch.zeros(1, 3, 4, 4), mode="eval")


def test_multiscale_shape_mismatch_rejected():
    ens = build_multiscale_discriminator(toy_disc_spec(), seed=0)
    with pytest.raises(ShapeMismatch):
        multiscale_forward(ens, torch.zeros(1, 3, 64, 64), torch.zeros(1, 3, 32, 32))
