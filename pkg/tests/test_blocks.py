"""Modality-specific blocks: differencing semantics, the two-stem fusion
formula, mask normalization, channel attention, and temporal alignment."""

import pytest
import torch

from numdiff import assert_param_grads_match
from pulsefusion.errors import InvalidInputError
from pulsefusion.temporal import (AttentionMaskPool, ChannelAttention, DiffConvStem,
                                  RFAlignBlock, TemporalDiffEncoder, temporal_diff)

torch.manual_seed(0)


class TestTemporalDiff:
    def test_constant_sequence_gives_zero(self):
        x = torch.ones(2, 3, 9)
        assert torch.all(temporal_diff(x) == 0)

    def test_linear_ramp_signs(self):
        t = torch.arange(10.0)
        x = t.reshape(1, 1, 10).repeat(1, 1, 1)
        d = temporal_diff(x)        # order: d_-2, d_-1, d_1, d_2
        interior = slice(2, 8)
        assert torch.all(d[0, 0, interior] == 2.0)
        assert torch.all(d[0, 1, interior] == 1.0)
        assert torch.all(d[0, 2, interior] == -1.0)
        assert torch.all(d[0, 3, interior] == -2.0)

    def test_boundaries_decay_to_zero(self):
        t = torch.arange(10.0).reshape(1, 1, 10)
        d = temporal_diff(t)
        assert d[0, 1, 0] == 0.0        # d_-1 at the first frame
        assert d[0, 2, -1] == 0.0       # d_1 at the last frame

    def test_impulse_locality(self):
        x = torch.zeros(1, 1, 15)
        x[0, 0, 7] = 1.0
        d = temporal_diff(x)
        nonzero = d.abs().sum(dim=(0, 1)).nonzero().flatten()
        assert nonzero.min() >= 5 and nonzero.max() <= 9

    def test_locality_by_perturbation(self):
        torch.manual_seed(1)
        x = torch.randn(1, 2, 20)
        d0 = temporal_diff(x)
        x2 = x.clone()
        x2[:, :, 15] += 3.0
        d1 = temporal_diff(x2)
        changed = (d0 - d1).abs().sum(dim=(0, 1)).nonzero().flatten()
        assert changed.min() >= 13 and changed.max() <= 17

    def test_short_sequence_rejected(self):
        with pytest.raises(InvalidInputError):
            temporal_diff(torch.zeros(1, 1, 4))

    def test_video_shape(self):
        x = torch.randn(2, 3, 6, 8, 8)
        assert temporal_diff(x).shape == (2, 12, 6, 8, 8)


class TestTemporalDiffEncoder:
    def test_output_shape_contract(self):
        enc = TemporalDiffEncoder(in_channels=6, width=8, state_size=4)
        out = enc(torch.randn(2, 6, 20))
        assert out.shape == (2, 8, 20)

    def test_static_input_is_deterministic_bias_response(self):
        torch.manual_seed(2)
        enc = TemporalDiffEncoder(in_channels=3, width=4, state_size=4).eval()
        x = torch.ones(1, 3, 12) * 0.7
        out1, out2 = enc(x), enc(0.3 * torch.ones(1, 3, 12))
        # Differences vanish for any static input, so the response only sees zeros.
        assert torch.allclose(out1, out2, atol=1e-6)

    def test_bitwise_reproducible_given_seed(self):
        def run():
            torch.manual_seed(9)
            enc = TemporalDiffEncoder(in_channels=4, width=8, state_size=4)
            torch.manual_seed(10)
            return enc(torch.randn(1, 4, 16))
        assert torch.equal(run(), run())

    def test_multi_block_stacking(self):
        enc = TemporalDiffEncoder(in_channels=4, width=8, state_size=4, n_blocks=2)
        assert enc(torch.randn(1, 4, 16)).shape == (1, 8, 16)

    def test_raw_stem_variant_skips_diffs(self):
        enc = TemporalDiffEncoder(in_channels=4, width=8, use_diffs=False)
        assert enc.convs[0].in_channels == 4
        assert enc(torch.randn(1, 4, 16)).shape == (1, 8, 16)

    def test_width_mismatch_rejected(self):
        enc = TemporalDiffEncoder(in_channels=4, width=8)
        with pytest.raises(InvalidInputError):
            enc(torch.randn(1, 3, 16))

    def test_gradients_match_finite_differences(self):
        torch.manual_seed(3)
        enc = TemporalDiffEncoder(in_channels=2, width=3, state_size=2).double()
        with torch.no_grad():
            for p in enc.parameters():
                p.add_(0.05 * torch.randn_like(p))
        x = torch.randn(2, 2, 8, dtype=torch.float64)
        readout = torch.randn(2, 3, 8, dtype=torch.float64)
        assert_param_grads_match(enc, lambda: (enc(x) * readout).sum(), rtol=2e-4)


class TestDiffConvStem:
    def test_static_video_reduces_fusion_formula(self):
        torch.manual_seed(4)
        stem = DiffConvStem(width=4).eval()
        video = torch.rand(1, 3, 1, 1, 1).repeat(1, 1, 8, 16, 16)
        got = stem(video)
        x_origin = stem._per_frame(stem.stem_raw, video)
        want = 0.5 * stem._per_frame(stem.stem_fuse, x_origin) \
            + 0.5 * stem._per_frame(stem.stem_fuse, 0.5 * x_origin)
        assert torch.allclose(got, want, atol=1e-6)

    def test_alpha_one_beta_zero_bypasses_diff_path(self):
        torch.manual_seed(5)
        stem = DiffConvStem(width=4, alpha=1.0, beta=0.0).eval()
        video = torch.rand(1, 3, 6, 16, 16)
        got = stem(video)
        want = stem._per_frame(stem.stem_fuse, stem._per_frame(stem.stem_raw, video))
        assert torch.allclose(got, want, atol=1e-6)

    def test_matches_formula_transcription(self):
        torch.manual_seed(6)
        stem = DiffConvStem(width=4).eval()
        video = torch.rand(1, 3, 6, 16, 16)
        got = stem(video)
        diffs = temporal_diff(video)
        x_origin = stem._per_frame(stem.stem_raw, video)
        x_diff = stem._per_frame(stem.stem_diff, diffs)
        want = 0.5 * stem._per_frame(stem.stem_fuse, x_origin) \
            + 0.5 * stem._per_frame(stem.stem_fuse, 0.5 * x_origin + 0.5 * x_diff)
        assert torch.allclose(got, want, atol=1e-6)

    def test_output_is_half_resolution(self):
        stem = DiffConvStem(width=4)
        out = stem(torch.rand(2, 3, 6, 16, 16))
        assert out.shape == (2, 4, 6, 8, 8)

    def test_odd_spatial_size_rejected(self):
        stem = DiffConvStem(width=4)
        with pytest.raises(InvalidInputError):
            stem(torch.rand(1, 3, 6, 15, 16))

    def test_short_clip_rejected(self):
        stem = DiffConvStem(width=4)
        with pytest.raises(InvalidInputError):
            stem(torch.rand(1, 3, 4, 16, 16))


class TestAttentionMaskPool:
    def test_mask_sums_to_half_cell_count(self):
        torch.manual_seed(7)
        pool = AttentionMaskPool(width=4, out_width=6)
        frames = torch.randn(5, 4, 32, 32)     # from 64x64 input after the stem
        mask = pool.compute_mask(frames)
        sums = mask.sum(dim=(2, 3))
        assert mask.shape[2:] == (8, 8)
        assert torch.allclose(sums, torch.full_like(sums, 32.0), rtol=1e-6)

    def test_uniform_stem_response_gives_half_everywhere(self):
        pool = AttentionMaskPool(width=3, out_width=3)
        with torch.no_grad():
            for conv in pool.mask_stem:
                conv.weight.zero_()
                conv.bias.fill_(0.7)
        mask = pool.compute_mask(torch.randn(2, 3, 16, 16))
        assert torch.allclose(mask, torch.full_like(mask, 0.5), atol=1e-7)

    def test_token_shape_halves_time(self):
        pool = AttentionMaskPool(width=4, out_width=6)
        out = pool(torch.randn(2, 4, 10, 16, 16))
        assert out.shape == (2, 6, 5)

    def test_indivisible_grid_rejected(self):
        pool = AttentionMaskPool(width=4, out_width=4)
        with pytest.raises(InvalidInputError):
            pool(torch.randn(1, 4, 6, 18, 16))

    def test_odd_time_rejected(self):
        pool = AttentionMaskPool(width=4, out_width=4)
        with pytest.raises(InvalidInputError):
            pool(torch.randn(1, 4, 7, 16, 16))

    def test_gradients_match_finite_differences(self):
        torch.manual_seed(8)
        pool = AttentionMaskPool(width=2, out_width=2).double()
        with torch.no_grad():
            for p in pool.parameters():
                p.add_(0.05 * torch.randn_like(p))
        x = torch.randn(1, 2, 4, 8, 8, dtype=torch.float64)
        readout = torch.randn(1, 2, 2, dtype=torch.float64)
        assert_param_grads_match(pool, lambda: (pool(x) * readout).sum(), rtol=2e-4)


class TestChannelAttention:
    def test_zero_projections_give_half(self):
        attn = ChannelAttention(4)
        with torch.no_grad():
            for p in attn.parameters():
                p.zero_()
        w = attn(torch.randn(2, 4, 10))
        assert torch.allclose(w, torch.full_like(w, 0.5))

    def test_weights_strictly_inside_unit_interval(self):
        attn = ChannelAttention(6)
        w = attn(torch.randn(3, 6, 12) * 10)
        assert torch.all(w > 0) and torch.all(w < 1)

    def test_channel_permutation_equivariance(self):
        torch.manual_seed(9)
        attn = ChannelAttention(4, reduction=4)
        x = torch.randn(1, 4, 8)
        perm = torch.tensor([2, 0, 3, 1])
        permuted = ChannelAttention(4, reduction=4)
        with torch.no_grad():
            permuted.proj[0].weight.copy_(attn.proj[0].weight[:, perm])
            permuted.proj[0].bias.copy_(attn.proj[0].bias)
            permuted.proj[2].weight.copy_(attn.proj[2].weight[perm])
            permuted.proj[2].bias.copy_(attn.proj[2].bias[perm])
        assert torch.allclose(permuted(x[:, perm]), attn(x)[:, perm], atol=1e-6)


class TestRFAlignBlock:
    def test_halves_temporal_length(self):
        block = RFAlignBlock(6, 8)
        assert block(torch.randn(2, 6, 20)).shape == (2, 8, 10)

    def test_two_blocks_quarter_the_length(self):
        b1, b2 = RFAlignBlock(6, 8), RFAlignBlock(8, 8)
        out = b2(b1(torch.randn(1, 6, 40)))
        assert out.shape[2] == 10

    def test_output_nonnegative(self):
        block = RFAlignBlock(4, 4)
        assert torch.all(block(torch.randn(2, 4, 16)) >= 0)

    def test_odd_length_rejected(self):
        block = RFAlignBlock(4, 4)
        with pytest.raises(InvalidInputError):
            block(torch.randn(1, 4, 15))

    def test_zero_input_zero_biases_gives_zero(self):
        block = RFAlignBlock(4, 4).eval()
        with torch.no_grad():
            block.conv.bias.zero_()
            block.norm.bias.zero_()
        assert torch.all(block(torch.zeros(1, 4, 16)) == 0)

    def test_gradients_match_finite_differences(self):
        torch.manual_seed(10)
        block = RFAlignBlock(3, 3).double()
        with torch.no_grad():
            for p in block.parameters():
                p.add_(0.05 * torch.randn_like(p))
        x = torch.randn(2, 3, 8, dtype=torch.float64)
        readout = torch.randn(2, 3, 4, dtype=torch.float64)
        assert_param_grads_match(block, lambda: (block(x) * readout).sum(), rtol=2e-4)
