"""Gated selective blocks: zero propagation, an independent straight-line
transcription oracle, bidirectional symmetry, and gradient correctness."""

import pytest
import torch
import torch.nn.functional as F
from hypothesis import given, settings, strategies as st

from numdiff import assert_param_grads_match
from pulsefusion.errors import InvalidInputError
from pulsefusion.ssm_blocks import BidirectionalScan, SelectiveBlock, SelectiveSSM

torch.manual_seed(0)


def straight_line_reference(block: SelectiveBlock, x: torch.Tensor) -> torch.Tensor:
    """Independent re-evaluation of the block with explicit per-step loops."""
    b, c, t = x.shape
    w_in, b_in = block.in_proj.weight, block.in_proj.bias
    w_g, b_g = block.gate_proj.weight, block.gate_proj.bias
    w_out, b_out = block.out_proj.weight, block.out_proj.bias
    conv_w, conv_b = block.conv.weight, block.conv.bias     # (C, 1, K)
    k = conv_w.shape[2]
    ssm = block.ssm
    a = -torch.exp(ssm.shared.a_log)                        # (C, N)
    n = a.shape[1]

    out = torch.zeros_like(x)
    for bi in range(b):
        u = torch.stack([w_in @ x[bi, :, ti] + b_in for ti in range(t)], dim=1)
        u_c = torch.zeros(c, t, dtype=x.dtype)
        for d in range(c):
            for ti in range(t):
                acc = conv_b[d]
                for j in range(k):
                    src = ti + j - (k - 1)
                    if src >= 0:
                        acc = acc + conv_w[d, 0, j] * u[d, src]
                u_c[d, ti] = acc
        gate = torch.stack([torch.sigmoid(w_g @ x[bi, :, ti] + b_g) for ti in range(t)], dim=1)
        s = gate * u_c

        h = torch.zeros(c, n, dtype=x.dtype)
        y = torch.zeros(c, t, dtype=x.dtype)
        for ti in range(t):
            st_ = s[:, ti]
            dt = F.softplus(ssm.dt_proj.weight @ st_ + ssm.dt_proj.bias)
            b_t = ssm.shared.b_proj.weight @ st_
            c_t = ssm.c_proj.weight @ st_
            decay = torch.exp(dt.unsqueeze(1) * a)
            inject = torch.expm1(dt.unsqueeze(1) * a) / a
            h = decay * h + inject * b_t.unsqueeze(0) * st_.unsqueeze(1)
            y[:, ti] = h @ c_t + ssm.skip * st_
        out[bi] = torch.stack([torch.relu(w_out @ y[:, ti] + b_out) for ti in range(t)], dim=1)
    return out


class TestSelectiveBlock:
    def test_all_zero_parameters_give_zero_output(self):
        block = SelectiveBlock(4, state_size=3)
        with torch.no_grad():
            for p in block.parameters():
                p.zero_()
        out = block(torch.randn(2, 4, 10))
        assert torch.all(out == 0)

    def test_saturated_gate_annihilates(self):
        block = SelectiveBlock(4, state_size=3)
        with torch.no_grad():
            block.gate_proj.bias.fill_(-60.0)
            block.gate_proj.weight.zero_()
        out = block(torch.randn(1, 4, 8))
        assert out.abs().max() < 1e-12

    def test_zero_input_gives_zero_output(self):
        # Biases start at zero, so the multiplicative path kills everything.
        block = SelectiveBlock(6, state_size=4)
        out = block(torch.zeros(2, 6, 12))
        assert torch.all(out == 0)

    def test_matches_straight_line_reference(self):
        torch.manual_seed(3)
        block = SelectiveBlock(4, state_size=3, conv_width=3).double()
        x = torch.randn(2, 4, 7, dtype=torch.float64)
        got = block(x)
        want = straight_line_reference(block, x)
        rel = (got - want).abs().max() / want.abs().max().clamp_min(1e-12)
        assert rel < 1e-6

    def test_output_shape_matches_input(self):
        block = SelectiveBlock(5, state_size=2)
        assert block(torch.randn(3, 5, 11)).shape == (3, 5, 11)

    def test_width_mismatch_rejected(self):
        block = SelectiveBlock(4)
        with pytest.raises(InvalidInputError):
            block(torch.randn(1, 5, 8))

    @settings(max_examples=12, deadline=None)
    @given(batch=st.integers(1, 3), width=st.integers(2, 6), length=st.integers(1, 12))
    def test_shape_preservation_property(self, batch, width, length):
        torch.manual_seed(width)
        block = SelectiveBlock(width, state_size=3)
        assert block(torch.randn(batch, width, length)).shape == (batch, width, length)

    def test_gradients_match_finite_differences(self):
        # Zero-initialized biases put the final ReLU exactly at its kink, so
        # check at a generic parameter point instead.
        torch.manual_seed(5)
        block = SelectiveBlock(4, state_size=3).double()
        with torch.no_grad():
            for p in block.parameters():
                p.add_(0.05 * torch.randn_like(p))
            block.out_proj.bias.add_(0.3)
        x = torch.randn(1, 4, 16, dtype=torch.float64)
        readout = torch.randn(1, 4, 16, dtype=torch.float64)
        assert_param_grads_match(block, lambda: (block(x) * readout).sum())


class TestSelectiveSSM:
    def test_sigmoid_vs_silu_gate_config(self):
        torch.manual_seed(4)
        x = torch.randn(1, 4, 6)
        b_sig = SelectiveBlock(4, gate="sigmoid")
        b_silu = SelectiveBlock(4, gate="silu")
        b_silu.load_state_dict(b_sig.state_dict())
        assert not torch.allclose(b_sig(x), b_silu(x))

    def test_unknown_gate_rejected(self):
        with pytest.raises(InvalidInputError):
            SelectiveBlock(4, gate="tanh")

    def test_scan_is_causal(self):
        torch.manual_seed(6)
        ssm = SelectiveSSM(4, state_size=3)
        x = torch.randn(1, 4, 12)
        y1 = ssm(x)
        x2 = x.clone()
        x2[:, :, 8:] += 5.0
        y2 = ssm(x2)
        assert torch.allclose(y1[:, :, :8], y2[:, :, :8])
        assert not torch.allclose(y1[:, :, 8:], y2[:, :, 8:])


class TestBidirectionalScan:
    def _tied(self, width=4, state=3):
        torch.manual_seed(7)
        scan = BidirectionalScan(width, state_size=state)
        scan.bwd.load_state_dict(scan.fwd.state_dict())
        return scan

    def test_length_one_doubles_single_block(self):
        scan = self._tied()
        x = torch.randn(2, 4, 1)
        assert torch.allclose(scan(x), 2.0 * scan.fwd(x), atol=1e-6)

    def test_palindromic_input_gives_palindromic_output(self):
        scan = self._tied()
        half = torch.randn(1, 4, 5, dtype=torch.float64)
        x = torch.cat([half, torch.flip(half, dims=(2,))], dim=2)
        scan = scan.double()
        out = scan(x)
        assert torch.allclose(out, torch.flip(out, dims=(2,)), atol=1e-9)

    def test_zero_input_zero_output(self):
        scan = BidirectionalScan(4, state_size=3)
        assert torch.all(scan(torch.zeros(1, 4, 9)) == 0)

    def test_shape_mismatch_rejected(self):
        scan = BidirectionalScan(4)
        with pytest.raises(InvalidInputError):
            scan(torch.randn(1, 3, 9))
