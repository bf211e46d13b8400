import math

import pytest
import torch

from heliogen.errors import DomainError, ShapeMismatch
from heliogen.losses import (
    LossBundle,
    LossWeights,
    adversarial_d_loss,
    adversarial_g_loss,
    feature_matching_loss,
    l1_pixel_loss,
    pix2pix_generator_objective,
    pix2pixhd_objective,
)
from heliogen.models.pix2pixhd import ScaleOutput

from oracles import brute_d_loss, brute_feature_matching, brute_g_loss, brute_l1


def const_map(value, shape=(1, 1, 3, 3)):
    return torch.full(shape, float(value), dtype=torch.float64)


def test_perfect_discriminator_loss_vanishes():
    eps = 1e-6
    loss = adversarial_d_loss(const_map(1 - eps), const_map(eps))
    assert float(loss) == pytest.approx(0.0, abs=1e-5)


def test_undecided_discriminator_is_two_log_two():
    loss = adversarial_d_loss(const_map(0.5), const_map(0.5))
    assert float(loss) == pytest.approx(2 * math.log(2), rel=1e-9)


def test_d_loss_matches_brute_force(rng):
    for _ in range(20):
        real = rng.uniform(0.02, 0.98, size=(2, 3, 3))
        fake = rng.uniform(0.02, 0.98, size=(2, 3, 3))
        got = adversarial_d_loss(torch.from_numpy(real), torch.from_numpy(fake))
        assert float(got) == pytest.approx(brute_d_loss([real], [fake]), rel=1e-10)


def test_d_loss_multiscale_is_mean_over_scales(rng):
    reals = [rng.uniform(0.1, 0.9, size=(1, 4, 4)) for _ in range(2)]
    fakes = [rng.uniform(0.1, 0.9, size=(1, 4, 4)) for _ in range(2)]
    got = adversarial_d_loss([torch.from_numpy(r) for r in reals],
                             [torch.from_numpy(f) for f in fakes])
    assert float(got) == pytest.approx(brute_d_loss(reals, fakes), rel=1e-10)


def test_perfect_fool_generator_loss_vanishes():
    assert float(adversarial_g_loss(const_map(1 - 1e-6))) == pytest.approx(0.0, abs=1e-5)


def test_undecided_generator_loss_is_log_two():
    assert float(adversarial_g_loss(const_map(0.5))) == pytest.approx(
        math.log(2), rel=1e-9)


def test_g_loss_matches_brute_force(rng):
    for _ in range(20):
        fake = rng.uniform(0.02, 0.98, size=(2, 3, 3))
        got = adversarial_g_loss(torch.from_numpy(fake))
        assert float(got) == pytest.approx(brute_g_loss([fake]), rel=1e-10)


def test_saturating_form_agrees_at_half():
    # at d = 0.5 both generator forms give +-log 2; the saturating one is negative
    fake = const_map(0.5)
    assert float(adversarial_g_loss(fake, saturating=True)) == pytest.approx(
        -math.log(2), rel=1e-9)


def test_map_domain_enforced():
    with pytest.raises(DomainError):
        adversarial_g_loss(const_map(1.5))
    with pytest.raises(DomainError):
        adversarial_d_loss(const_map(-0.1), const_map(0.5))
    # exactly 0 and 1 are tolerated via clamping
    assert math.isfinite(float(adversarial_g_loss(const_map(1.0))))
    assert math.isfinite(float(adversarial_d_loss(const_map(1.0), const_map(0.0))))


def test_scale_count_mismatch_rejected():
    with pytest.raises(ShapeMismatch):
        adversarial_d_loss([const_map(0.5)], [const_map(0.5), const_map(0.5)])


def test_l1_identical_is_zero():
    x = torch.rand(2, 3, 8, 8)
    assert float(l1_pixel_loss(x, x)) == 0.0


def test_l1_constant_offset():
    x = torch.rand(2, 3, 8, 8, dtype=torch.float64)
    assert float(l1_pixel_loss(x + 0.5, x)) == pytest.approx(0.5, rel=1e-12)


def test_l1_matches_brute_force(rng):
    a = rng.standard_normal((2, 4, 4))
    b = rng.standard_normal((2, 4, 4))
    got = l1_pixel_loss(torch.from_numpy(a), torch.from_numpy(b))
    assert float(got) == pytest.approx(brute_l1(a, b), rel=1e-12)


def test_l1_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        l1_pixel_loss(torch.zeros(2, 3), torch.zeros(3, 2))


def test_pix2pix_objective_arithmetic():
    maps = const_map(0.5)
    target = torch.zeros(1, 3, 4, 4, dtype=torch.float64)
    generated = target + 0.01
    bundle = pix2pix_generator_objective(maps, generated, target,
                                         LossWeights(lambda_l1=100.0))
    assert float(bundle.g_adv) == pytest.approx(math.log(2), rel=1e-9)
    assert float(bundle.g_match) == pytest.approx(0.01, rel=1e-9)
    assert float(bundle.g_total) == pytest.approx(math.log(2) + 1.0, rel=1e-9)
    assert bundle.match_kind == "l1"
    assert bundle.d_loss is None


def test_pix2pix_objective_perfect_inputs_vanish():
    target = torch.rand(1, 3, 4, 4, dtype=torch.float64)
    bundle = pix2pix_generator_objective(const_map(1 - 1e-7), target.clone(), target,
                                         LossWeights())
    assert float(bundle.g_total) == pytest.approx(0.0, abs=1e-5)


def test_lambda_zero_reduces_to_adversarial(rng):
    maps = torch.from_numpy(rng.uniform(0.1, 0.9, size=(1, 1, 3, 3)))
    generated = torch.from_numpy(rng.standard_normal((1, 3, 4, 4)))
    target = torch.from_numpy(rng.standard_normal((1, 3, 4, 4)))
    bundle = pix2pix_generator_objective(maps, generated, target,
                                         LossWeights(lambda_l1=0.0))
    assert torch.equal(bundle.g_total, bundle.g_adv)


@pytest.mark.parametrize("lam", [0.0, 1.0, 10.0, 100.0])
def test_composite_affine_in_lambda(rng, lam):
    maps = torch.from_numpy(rng.uniform(0.1, 0.9, size=(1, 1, 3, 3)))
    generated = torch.from_numpy(rng.standard_normal((1, 3, 4, 4)))
    target = torch.from_numpy(rng.standard_normal((1, 3, 4, 4)))
    base = pix2pix_generator_objective(maps, generated, target,
                                       LossWeights(lambda_l1=0.0))
    bundle = pix2pix_generator_objective(maps, generated, target,
                                         LossWeights(lambda_l1=lam))
    assert float(bundle.g_total) == pytest.approx(
        float(base.g_adv) + lam * float(bundle.g_match), rel=1e-12)


def test_feature_matching_identical_is_zero(rng):
    feats = [torch.from_numpy(rng.standard_normal((1, 2, 3, 3))) for _ in range(3)]
    assert float(feature_matching_loss(feats, [f.clone() for f in feats])) == 0.0


def test_feature_matching_unit_offset_single_layer(rng):
    real = [torch.from_numpy(rng.standard_normal((1, 4, 4)))]
    fake = [real[0] + 1.0]
    assert float(feature_matching_loss(real, fake)) == pytest.approx(1.0, rel=1e-12)


def test_feature_matching_matches_brute_force(rng):
    reals = [rng.standard_normal((1, 2, s, s)) for s in (5, 3, 2)]
    fakes = [rng.standard_normal((1, 2, s, s)) for s in (5, 3, 2)]
    got = feature_matching_loss([torch.from_numpy(r) for r in reals],
                                [torch.from_numpy(f) for f in fakes])
    assert float(got) == pytest.approx(
        brute_feature_matching([reals], [fakes]), rel=1e-10)
    got_raw = feature_matching_loss([torch.from_numpy(r) for r in reals],
                                    [torch.from_numpy(f) for f in fakes],
                                    normalized=False)
    assert float(got_raw) == pytest.approx(
        brute_feature_matching([reals], [fakes], normalized=False), rel=1e-10)


def test_feature_matching_zero_iff_equal(rng):
    feats = [torch.from_numpy(rng.standard_normal((2, 3, 3))) for _ in range(2)]
    assert float(feature_matching_loss(feats, [f.clone() for f in feats])) == 0.0
    bumped = [feats[0].clone(), feats[1].clone()]
    bumped[1][0, 1, 1] += 1e-3
    assert float(feature_matching_loss(feats, bumped)) > 0.0


def test_feature_matching_detaches_real_branch(rng):
    real = [torch.from_numpy(rng.standard_normal((1, 3, 3))).requires_grad_(True)]
    fake = [torch.from_numpy(rng.standard_normal((1, 3, 3))).requires_grad_(True)]
    feature_matching_loss(real, fake).backward()
    assert real[0].grad is None
    assert fake[0].grad is not None


def scale_outputs_from(rng, n_scales=2, n_layers=3):
    outs_real, outs_fake = [], []
    for _ in range(n_scales):
        real_feats = [torch.from_numpy(rng.standard_normal((1, 2, 4, 4)))
                      for _ in range(n_layers)]
        fake_feats = [torch.from_numpy(rng.standard_normal((1, 2, 4, 4)))
                      for _ in range(n_layers)]
        real_map = torch.from_numpy(rng.uniform(0.1, 0.9, size=(1, 1, 3, 3)))
        fake_map = torch.from_numpy(rng.uniform(0.1, 0.9, size=(1, 1, 3, 3)))
        outs_real.append(ScaleOutput(patch_map=real_map, features=real_feats))
        outs_fake.append(ScaleOutput(patch_map=fake_map, features=fake_feats))
    return outs_real, outs_fake


def test_hd_objective_composes_component_losses(rng):
    outs_real, outs_fake = scale_outputs_from(rng)
    w = LossWeights(lambda_fm=10.0)
    bundle = pix2pixhd_objective(outs_real, outs_fake, w)
    g_adv = sum(float(adversarial_g_loss(f.patch_map)) for f in outs_fake)
    g_fm = sum(float(feature_matching_loss(r.features, f.features))
               for r, f in zip(outs_real, outs_fake))
    d_loss = sum(float(adversarial_d_loss(r.patch_map, f.patch_map))
                 for r, f in zip(outs_real, outs_fake))
    assert float(bundle.g_adv) == pytest.approx(g_adv, rel=1e-12)
    assert float(bundle.g_match) == pytest.approx(g_fm, rel=1e-12)
    assert float(bundle.g_total) == pytest.approx(g_adv + 10.0 * g_fm, rel=1e-12)
    assert float(bundle.d_loss) == pytest.approx(d_loss, rel=1e-12)
    assert bundle.match_kind == "fm"


def test_hd_objective_perfect_inputs_vanish(rng):
    outs_real, _ = scale_outputs_from(rng)
    outs_fake = [ScaleOutput(patch_map=torch.full_like(r.patch_map, 1 - 1e-7),
                             features=[f.clone() for f in r.features])
                 for r in outs_real]
    bundle = pix2pixhd_objective(outs_real, outs_fake, LossWeights())
    assert float(bundle.g_total) == pytest.approx(0.0, abs=1e-5)


def test_hd_objective_lambda_zero_is_pure_adversarial(rng):
    outs_real, outs_fake = scale_outputs_from(rng)
    bundle = pix2pixhd_objective(outs_real, outs_fake, LossWeights(lambda_fm=0.0))
    g_adv = sum(float(adversarial_g_loss(f.patch_map)) for f in outs_fake)
    assert float(bundle.g_total) == pytest.approx(g_adv, rel=1e-12)


def test_default_losses_nonnegative_on_random_inputs(rng):
    for _ in range(50):
        real = torch.from_numpy(rng.uniform(0.0, 1.0, size=(2, 3, 3)))
        fake = torch.from_numpy(rng.uniform(0.0, 1.0, size=(2, 3, 3)))
        assert float(adversarial_d_loss(real, fake)) >= 0.0
        assert float(adversarial_g_loss(fake)) >= 0.0
        a = torch.from_numpy(rng.standard_normal((3, 3)))
        b = torch.from_numpy(rng.standard_normal((3, 3)))
        assert float(l1_pixel_loss(a, b)) >= 0.0
        assert float(feature_matching_loss([a], [b])) >= 0.0


def test_bundle_total_identity_property(rng):
    for _ in range(20):
        outs_real, outs_fake = scale_outputs_from(rng)
        lam = float(rng.uniform(0, 50))
        bundle = pix2pixhd_objective(outs_real, outs_fake,
                                     LossWeights(lambda_fm=lam))
        assert float(bundle.g_total) == pytest.approx(
            float(bundle.g_adv) + lam * float(bundle.g_match), abs=1e-6)


def test_loss_weights_reject_negative():
    with pytest.raises(ValueError):
        LossWeights(lambda_l1=-1.0)
