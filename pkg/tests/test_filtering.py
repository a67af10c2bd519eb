"""Inverse filter design, convolution application, and the 3-sigma rule."""

import numpy as np
import pytest

from resofilt import (
    HarmonicModel,
    IRFilter,
    apply_filter,
    design_filter,
    detect,
    estimate_model_ls,
    noise_dispersion,
    synth_texture,
)
from resofilt.filtering import within_band_fraction

from conftest import FOUR_PAIRS, unit_roots


def exact_model(pairs, mean, nx, ny):
    """Model whose span contains mean + sum of the given harmonic pairs."""
    zx = unit_roots([0.0] + [f for p in pairs for f in (p[0], -p[0])])
    zy = unit_roots([0.0] + [f for p in pairs for f in (p[1], -p[1])])
    region = synth_texture(pairs, nx, ny, mean=mean)
    return region, HarmonicModel.fit(region, zx, zy)


class TestDesignFilter:
    def test_exact_annihilation(self):
        base, model = exact_model(FOUR_PAIRS[:2], 100.0, 64, 64)
        irf = design_filter(base, model)
        out = apply_filter(base, irf)
        assert np.abs(out - irf.flat_level).max() < 1e-8 * np.abs(base).max()
        assert irf.sigma2 < 1e-16 * irf.flat_level**2

    def test_constant_base_dc_model(self):
        base = np.full((8, 8), 42.0)
        model = HarmonicModel.fit(base, unit_roots([0.0]), unit_roots([0.0]))
        irf = design_filter(base, model)
        assert irf.kernel.shape == (1, 1)
        assert irf.kernel[0, 0] == pytest.approx(1.0)
        assert irf.flat_level == pytest.approx(42.0)
        assert irf.sigma2 == pytest.approx(0.0, abs=1e-20)

    def test_sigma2_matches_noise_propagation_oracle(self):
        # Oracle: push an independent noise field of the injected sigma
        # through the designed kernel and compare dispersions.  The base
        # region residual must be noise-dominated, not mismatch-dominated.
        lo, hi = [], []
        for seed in range(5):
            rng = np.random.default_rng(seed)
            pairs = [(fx, fy, a, float(rng.uniform(0, 2 * np.pi)))
                     for fx, fy, a, _ in FOUR_PAIRS]
            base = synth_texture(pairs, 64, 64, noise_sigma=0.01, seed=seed + 1000, mean=128.0)
            model, _ = estimate_model_ls(base, 16, 16)
            irf = design_filter(base, model)
            fresh = np.random.default_rng(seed + 5000).normal(0, 0.01, (64, 64))
            propagated = apply_filter(fresh, IRFilter(irf.kernel, 0.0, 0.0))
            predicted = float(np.mean(propagated**2))
            lo.append(irf.sigma2 / predicted)
        assert min(lo) > 1 / 4 and max(lo) < 4

    def test_e_policy_zero(self):
        base, model = exact_model(FOUR_PAIRS[:1], 10.0, 32, 32)
        irf = design_filter(base, model, e_policy="zero")
        out = apply_filter(base, irf)
        assert np.abs(out).max() < 1e-8 * np.abs(base).max()

    def test_e_policy_explicit(self):
        base, model = exact_model(FOUR_PAIRS[:1], 10.0, 32, 32)
        irf = design_filter(base, model, e_policy=55.0)
        out = apply_filter(base, irf)
        assert np.abs(out - 55.0).max() < 1e-7 * max(np.abs(base).max(), 55.0)

    def test_vanishing_component_warns(self):
        # model carries a pair the texture does not contain while the flat
        # target needs the unit root: the empty pair is dropped silently,
        # but an empty unit-root component would have to warn
        base = synth_texture(FOUR_PAIRS[:1], 32, 32)  # zero mean, no DC content
        zx = unit_roots([0.0, 0.11, -0.11])
        zy = unit_roots([0.0, 0.23, -0.23])
        model = HarmonicModel.fit(base, zx, zy)
        with pytest.warns(UserWarning):
            design_filter(base, model, e_policy=7.0)

    def test_small_region_rejected(self):
        base, model = exact_model(FOUR_PAIRS[:2], 0.0, 32, 32)
        with pytest.raises(ValueError):
            design_filter(base[:4, :4], model)


class TestApplyFilter:
    def test_identity_kernel(self, rng):
        image = rng.normal(0, 1, (12, 9))
        irf = IRFilter(np.array([[1.0]]), flat_level=3.3, sigma2=0.1)
        assert np.array_equal(apply_filter(image, irf), image)

    def test_definitional_double_sum_bit_for_bit(self, rng):
        image = rng.normal(0, 1, (20, 18))
        kernel = rng.normal(0, 1, (5, 4))
        out = apply_filter(image, IRFilter(kernel, 0.0, 0.0))
        # same accumulation order as the implementation's shifted adds:
        # m-major, n-minor, one fused multiply-add per tap
        acc = 0.0
        for m in range(5):
            for n in range(4):
                acc += kernel[m, n] * image[m, n]
        assert out[0, 0] == acc

    def test_replicated_texture_stays_in_band(self):
        base, model = exact_model(FOUR_PAIRS[:2], 50.0, 64, 64)
        noisy = base + np.random.default_rng(3).normal(0, 0.05, base.shape)
        irf = design_filter(noisy, model)
        big = synth_texture(FOUR_PAIRS[:2], 128, 128, mean=50.0)
        big += np.random.default_rng(4).normal(0, 0.05, big.shape)
        out = apply_filter(big, irf)
        assert within_band_fraction(out, irf) > 0.99

    def test_inserted_patch_leaves_band(self):
        base, model = exact_model(FOUR_PAIRS[:2], 50.0, 64, 64)
        irf = design_filter(base, model)
        scene = synth_texture(FOUR_PAIRS[:2], 128, 128, mean=50.0)
        scene[60:71, 60:71] = 80.0
        out = apply_filter(scene, irf)
        band = 3 * np.sqrt(max(irf.sigma2, 1e-30))
        inner = np.abs(out[60:71, 60:71] - irf.flat_level)
        assert (inner > band).mean() > 0.9

    def test_image_smaller_than_kernel(self):
        irf = IRFilter(np.ones((4, 4)), 0.0, 0.0)
        with pytest.raises(ValueError):
            apply_filter(np.ones((3, 8)), irf)


class TestNoiseDispersion:
    def test_exact_flat(self):
        assert noise_dispersion(np.full((5, 5), 2.0), 2.0) == 0.0

    def test_alternating_unit(self):
        field = np.fromfunction(lambda i, k: (-1.0) ** (i + k), (6, 6))
        assert noise_dispersion(field + 4.0, 4.0) == pytest.approx(1.0)

    def test_gaussian_large_sample(self):
        noise = np.random.default_rng(0).normal(0, 0.5, (100, 100))
        assert noise_dispersion(noise + 1.0, 1.0) == pytest.approx(0.25, rel=0.05)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            noise_dispersion(np.zeros((0, 3)), 0.0)


class TestDetect:
    def test_all_in_band_empty_mask(self):
        filt = np.full((10, 10), 5.0)
        irf = IRFilter(np.ones((3, 3)), flat_level=5.0, sigma2=1.0)
        mask = detect([filt], [irf], [np.ones((12, 12))])
        assert not mask.positive().any()

    def test_grayscale_single_channel_rule(self):
        filt = np.full((10, 10), 5.0)
        filt[4, 4] = 11.0  # 6 sigma away
        irf = IRFilter(np.ones((3, 3)), flat_level=5.0, sigma2=1.0)
        original = np.arange(144.0).reshape(12, 12)
        mask = detect([filt], [irf], [original])
        pos = mask.positive()
        assert pos.sum() == 1 and pos[4, 4]
        assert mask.values[0, 4, 4] == original[4, 4]

    def test_union_over_channels(self):
        base = np.full((8, 8), 1.0)
        f1 = base.copy()
        f2 = base.copy()
        f2[2, 3] = 10.0
        irf = IRFilter(np.ones((2, 2)), flat_level=1.0, sigma2=0.01)
        orig = [np.full((9, 9), 7.0), np.full((9, 9), 9.0)]
        mask = detect([f1, f2], [irf, irf], orig)
        assert mask.positive()[2, 3]
        assert mask.values[0, 2, 3] == 7.0 and mask.values[1, 2, 3] == 9.0

    def test_zero_valued_flagged_pixel_stays_positive(self):
        filt = np.zeros((4, 4))
        filt[1, 1] = 9.0
        irf = IRFilter(np.ones((2, 2)), flat_level=0.0, sigma2=0.01)
        original = np.zeros((5, 5))
        mask = detect([filt], [irf], [original])
        assert mask.values[0, 1, 1] > 0.0

    def test_channel_count_mismatch(self):
        irf = IRFilter(np.ones((2, 2)), 0.0, 1.0)
        with pytest.raises(ValueError):
            detect([np.zeros((4, 4))], [irf, irf], [np.zeros((5, 5))])

    def test_patch_detection_rates(self):
        # anomaly-injection harness with generator ground truth
        covs, fps = [], []
        for seed in range(5):
            rng = np.random.default_rng(seed)
            pairs = [(fx, fy, a, float(rng.uniform(0, 2 * np.pi)))
                     for fx, fy, a, _ in FOUR_PAIRS]
            scene = synth_texture(pairs, 128, 128, noise_sigma=0.01,
                                  seed=seed + 2000, mean=128.0)
            sub = synth_texture([(0.18, 0.15, 1.2, 0.4)], 11, 11, mean=128.0)
            scene[80:91, 80:91] = sub
            base = scene[:64, :64]
            model, _ = estimate_model_ls(base, 16, 16)
            irf = design_filter(base, model)
            out = apply_filter(scene, irf)
            mask = detect([out], [irf], [scene])
            pos = mask.positive()
            p, q = irf.kernel.shape
            zone = np.zeros_like(pos)
            zone[80 - p + 1 : 91, 80 - q + 1 : 91] = True
            valid = np.zeros_like(pos)
            valid[: mask.valid_shape[0], : mask.valid_shape[1]] = True
            covs.append(pos[80:91, 80:91].mean())
            fps.append(pos[valid & ~zone].mean())
        assert min(covs) >= 0.9
        assert max(fps) <= 0.01

    def test_detection_monotone_in_contrast(self):
        base, model = exact_model(FOUR_PAIRS[:2], 50.0, 64, 64)
        noisy_base = base + np.random.default_rng(9).normal(0, 0.02, base.shape)
        irf = design_filter(noisy_base, model)
        scene0 = synth_texture(FOUR_PAIRS[:2], 128, 128, mean=50.0)
        scene0 += np.random.default_rng(10).normal(0, 0.02, scene0.shape)
        bump = np.zeros_like(scene0)
        bump[60:71, 60:71] = 1.0
        counts = []
        for contrast in (2.0, 4.0, 8.0, 16.0):
            scene = scene0 + contrast * bump
            mask = detect([apply_filter(scene, irf)], [irf], [scene])
            counts.append(int(mask.positive().sum()))
        assert all(b >= a for a, b in zip(counts, counts[1:]))


class TestShiftRobustness:
    def test_shifted_copy_same_dispersion_scale(self):
        # periodic texture: integer shifts are covered by the model span,
        # so the filter flattens shifted copies equally well
        pairs = [(0.25, 0.125, 1.0, 0.4), (0.125, 0.25, 0.7, 1.2)]
        big = synth_texture(pairs, 96, 96, mean=20.0)
        base = big[:64, :64]
        model, _ = estimate_model_ls(base, 4, 4)
        irf = design_filter(base, model)
        s0 = noise_dispersion(apply_filter(base, irf), irf.flat_level)
        shifted = big[5 : 5 + 64, 9 : 9 + 64]
        s1 = noise_dispersion(apply_filter(shifted, irf), irf.flat_level)
        assert s1 <= 2 * max(s0, 1e-18) or s1 < 1e-16
