"""Acceptance suite.

One test per acceptance criterion, each printing a [PASS] line with its
measured numbers (run with ``pytest -s tests/test_acceptance.py`` to see them
inline). The expensive end-to-end fixtures (dataset generation and desk-scale
training) are shared across criteria.
"""

import json
import os
import shutil
import time

import numpy as np
import pytest
import torch

from pulsefusion.config import RunConfig
from pulsefusion.errors import ConfigError
from pulsefusion.evaluate import ablate, evaluate
from pulsefusion.fusion import ChannelFFTInteraction, SharedInteraction
from pulsefusion.losses import LossConfig, neg_pearson_loss, snr_loss
from pulsefusion.model import ABLATION_TOGGLES, FusionNet, ModelConfig
from pulsefusion.report import write_reports
from pulsefusion.session_io import save_dataset
from pulsefusion.ssm_blocks import SelectiveBlock
from pulsefusion.ssm_linear import (DiscreteSSM, SSMParams, apply_conv,
                                    build_conv_kernel, scan_recurrent, zoh_discretize)
from pulsefusion.synth import SynthConfig, synth_dataset
from pulsefusion.temporal import AttentionMaskPool, RFAlignBlock
from pulsefusion.train import train
from numdiff import assert_param_grads_match, numerical_grad

FS = 30.0


def _report(criterion, detail):
    print(f"\n[PASS] criterion {criterion}: {detail}")


# ---------------------------------------------------------------- fixtures

@pytest.fixture(scope="session")
def accept_dataset():
    """12 subjects x 2 sessions, 10 s, 64x64, noiseless."""
    base = SynthConfig(duration_s=10.0, height=64, width=64)
    return synth_dataset(12, 2, base=base, seed=11)


@pytest.fixture(scope="session")
def desk_run(accept_dataset, tmp_path_factory):
    """Desk-scale training on the acceptance dataset, wall-clock timed."""
    out = tmp_path_factory.mktemp("desk_run")
    cfg = RunConfig({"run.out_dir": str(out)})
    start = time.time()
    result = train(cfg, sessions=accept_dataset)
    report_both = evaluate(cfg, result.model, result.folds.test, mode="both")
    elapsed = time.time() - start
    return cfg, result, report_both, elapsed


# ---------------------------------------------------------------- criteria

def test_criterion_1_scan_convolution_duality():
    rng = np.random.default_rng(101)
    start = time.time()
    worst = 0.0
    systems = 0
    while systems < 200:
        n = int(rng.integers(1, 9))
        a = rng.standard_normal((n, n))
        radius = max(np.abs(np.linalg.eigvals(a)))
        a *= rng.uniform(0.2, 0.97) / max(radius, 1e-12)
        d = DiscreteSSM(a_bar=a, b_bar=rng.standard_normal(n),
                        c=rng.standard_normal(n), d=float(rng.standard_normal()))
        length = int(rng.integers(1, 65))
        x = rng.standard_normal(length)
        y_scan, _ = scan_recurrent(d, x)
        y_conv = apply_conv(x, build_conv_kernel(d, length))
        scale = max(float(np.max(np.abs(y_scan))), 1e-12)
        worst = max(worst, float(np.max(np.abs(y_scan - y_conv))) / scale)
        systems += 1
    elapsed = time.time() - start
    assert worst <= 1e-6, f"max relative deviation {worst:.3e}"
    assert elapsed < 10.0, f"duality sweep took {elapsed:.1f}s"
    _report(1, f"duality over {systems} systems, max rel dev {worst:.2e}, "
               f"{elapsed:.1f}s")


def test_criterion_2_zoh_correctness():
    # Scalar closed form.
    d = zoh_discretize(SSMParams(a=[[-1.0]], b=[1.0], c=[1.0], delta=0.1))
    assert abs(d.a_bar[0, 0] - np.exp(-0.1)) < 1e-10
    assert abs(d.b_bar[0] - (1.0 - np.exp(-0.1))) < 1e-10
    # Diagonal closed form, per eigenvalue.
    eigs = np.array([-0.5, -1.0, -2.0, -4.0])
    delta = 0.2
    dd = zoh_discretize(SSMParams(a=np.diag(eigs), b=np.ones(4), c=np.ones(4),
                                  delta=delta))
    assert np.max(np.abs(np.diag(dd.a_bar) - np.exp(delta * eigs))) < 1e-10
    assert np.max(np.abs(dd.b_bar - (np.exp(delta * eigs) - 1.0) / eigs)) < 1e-10
    # Limit behavior at delta -> 0.
    rng = np.random.default_rng(7)
    a = rng.standard_normal((5, 5))
    b = rng.standard_normal(5)
    tiny = zoh_discretize(SSMParams(a=a, b=b, c=np.ones(5), delta=1e-6))
    drift_a = float(np.linalg.norm(tiny.a_bar - np.eye(5)))
    drift_b = float(np.linalg.norm(tiny.b_bar - 1e-6 * b) / 1e-6)
    assert drift_a < 1e-5 and drift_b < 1e-5
    _report(2, f"closed forms at 1e-10; limit drift a {drift_a:.2e}, b {drift_b:.2e}")


def test_criterion_3_gradient_suite():
    start = time.time()
    torch.manual_seed(5)
    block = SelectiveBlock(4, state_size=3).double()
    with torch.no_grad():
        for p in block.parameters():
            p.add_(0.05 * torch.randn_like(p))
        block.out_proj.bias.add_(0.3)
    x = torch.randn(1, 4, 16, dtype=torch.float64)
    readout = torch.randn(1, 4, 16, dtype=torch.float64)
    assert_param_grads_match(block, lambda: (block(x) * readout).sum(), rtol=1e-4)

    cfft = ChannelFFTInteraction(channels=6).double()
    with torch.no_grad():
        cfft.r_bias.fill_(1.0)
        cfft.i_bias.fill_(1.0)
    xf = 0.1 * torch.randn(1, 6, 4, dtype=torch.float64)
    rf = torch.randn(1, 6, 4, dtype=torch.float64)
    assert_param_grads_match(cfft, lambda: (cfft(xf) * rf).sum(), rtol=1e-4)

    t = torch.arange(120, dtype=torch.float64) / FS
    y = torch.sin(2 * np.pi * 1.2 * t)
    for fn, eps in ((lambda p: neg_pearson_loss(y, p), 1e-5),
                    (lambda p: snr_loss(y, p, FS, LossConfig(epsilon=1e-6)), 1e-6)):
        p = (y + 0.3 * torch.randn(120, dtype=torch.float64, generator=torch.Generator().manual_seed(3)))
        p.requires_grad_(True)
        fn(p).backward()
        with torch.no_grad():
            pd = p.detach().clone()
            num = numerical_grad(lambda: fn(pd), pd, eps=eps)
        rel = float((p.grad - num).abs().max() / num.abs().max())
        assert rel < 1e-4, f"loss gradient rel err {rel:.2e}"
    elapsed = time.time() - start
    assert elapsed < 60.0, f"gradient suite took {elapsed:.1f}s"
    _report(3, f"block, channel-fft, and loss gradients at 1e-4; {elapsed:.1f}s")


def test_criterion_4_structural_invariants():
    torch.manual_seed(4)
    # Mask normalization on a 64x64-derived grid.
    pool = AttentionMaskPool(width=4, out_width=8)
    with torch.no_grad():
        mask = pool.compute_mask(torch.randn(6, 4, 32, 32))
    sums = mask.sum(dim=(2, 3))
    mask_err = float((sums - 32.0).abs().max())
    assert mask_err < 32.0 * 1e-6

    # Channel-frequency bypass identity.
    cfft = ChannelFFTInteraction(channels=16, bypass=True)
    x = torch.randn(2, 16, 9)
    ident_err = float((cfft(x) - x).abs().max() / x.abs().max())
    assert ident_err < 1e-6

    # Shared-state symmetry at double precision.
    inter = SharedInteraction(width=4, state_size=3).double()
    inter.encoder_rf.load_state_dict(inter.encoder_rgb.state_dict())
    inter.linear_rf.load_state_dict(inter.linear_rgb.state_dict())
    z = torch.randn(1, 4, 8, dtype=torch.float64)
    with torch.no_grad():
        hc4, hf4 = inter(z, z.clone())
    sym_err = float((hc4 - hf4).abs().max())
    assert sym_err < 1e-12

    # Temporal halving and construction-time alignment.
    block = RFAlignBlock(4, 4)
    assert block(torch.randn(1, 4, 20)).shape[2] == 10
    with pytest.raises(ConfigError):
        FusionNet(ModelConfig(rf_channels=4, fps=30.0, rf_rate=90.0))
    _report(4, f"mask sum err {mask_err:.2e}, bypass err {ident_err:.2e}, "
               f"shared symmetry err {sym_err:.2e}, halving and alignment enforced")


def test_criterion_5_loss_semantics():
    t = torch.arange(300, dtype=torch.float64) / FS
    y = torch.sin(2 * np.pi * 1.2 * t)
    assert abs(float(neg_pearson_loss(y, y.clone()))) < 1e-12
    assert abs(float(neg_pearson_loss(y, -y)) - 2.0) < 1e-12
    assert abs(float(neg_pearson_loss(y, 3.0 * y + 7.0))) < 1e-10
    rng = np.random.default_rng(55)
    for _ in range(200):
        a = torch.from_numpy(rng.standard_normal(64))
        b = torch.from_numpy(rng.standard_normal(64))
        v = float(neg_pearson_loss(a, b))
        assert -1e-9 <= v <= 2.0 + 1e-9

    cfg = LossConfig()
    n = int(30 * FS)
    freqs = np.fft.rfftfreq(n, d=1.0 / FS)
    band = (freqs >= cfg.hr_band[0]) & (freqs <= cfg.hr_band[1])
    peak = np.zeros_like(freqs)
    peak[np.argmin(np.abs(freqs - 1.2))] = np.sum(band)
    flat = band.astype(float)
    phases = np.exp(1j * rng.uniform(0, 2 * np.pi, freqs.shape[0]))
    ref = torch.sin(2 * np.pi * 1.2 * torch.arange(n, dtype=torch.float64) / FS)
    values = []
    for alpha in np.linspace(0.0, 1.0, 12):
        x = np.fft.irfft(((1 - alpha) * flat + alpha * peak) * phases, n=n)
        values.append(float(snr_loss(ref, torch.from_numpy(x), FS, cfg)))
    steps = np.diff(values)
    assert np.all(steps < 0), f"not strictly decreasing: {values}"
    _report(5, f"bounds and exact examples hold; spectral term strictly decreasing "
               f"over {len(values)} concentration steps")


def test_criterion_6_synthetic_end_to_end(desk_run, tmp_path):
    cfg, result, report_both, elapsed = desk_run
    assert elapsed < 15 * 60, f"train+eval took {elapsed:.0f}s"
    mae = report_both.metrics.mae
    assert mae <= 5.0, f"held-out MAE {mae:.2f} bpm"
    # Training meaningfully improved the correlation term on validation data.
    pearson_trace = [row["val_neg_pearson"] for row in result.history]
    assert min(pearson_trace) < 0.5, f"val correlation loss never below 0.5: {pearson_trace}"

    reports = [report_both]
    for mode in ("rgb_only", "rf_only"):
        rep = evaluate(cfg, result.model, result.folds.test, mode=mode)
        assert np.isfinite(rep.metrics.mae) and np.isfinite(rep.metrics.rmse)
        assert all(np.isfinite(r["pred_bpm"]) for r in rep.records)
        reports.append(rep)
    out = tmp_path / "modes"
    write_reports(reports, str(out))
    table = (out / "missing_modality.txt").read_text().splitlines()
    rows = [line.split() for line in table[1:]]
    assert [r[0] for r in rows] == ["RGB&RF"] * 3
    assert {r[1] for r in rows} == {"RGB", "RF", "RGB&RF"}
    _report(6, f"held-out MAE {mae:.2f} bpm in {elapsed:.0f}s; "
               f"rgb_only MAE {reports[1].metrics.mae:.2f}, "
               f"rf_only MAE {reports[2].metrics.mae:.2f}; modality table emitted")


def test_criterion_7_fairness_protocol(desk_run):
    cfg, result, _, _ = desk_run
    knobs = (0.0, 0.6, 0.9)
    deltas = {}
    for knob in knobs:
        base = SynthConfig(duration_s=6.0, height=64, width=64,
                           video_gain_noise=0.01, video_pixel_noise=0.005,
                           illum_drift_amp=0.01, tone_bias=knob)
        sessions = synth_dataset(12, 1, base=base, seed=33)
        rep = evaluate(cfg, result.model, sessions, mode="rgb_only")
        deltas[knob] = rep.metrics.delta_mae
    assert abs(deltas[0.0]) <= 1.0, f"unbiased delta {deltas[0.0]:.2f} bpm"
    assert deltas[knobs[0]] < deltas[knobs[1]] < deltas[knobs[2]], f"not monotone: {deltas}"
    _report(7, "delta MAE (dark - light) at bias 0/0.6/0.9: "
               + ", ".join(f"{v:.2f}" for v in deltas.values()))


def _determinism_run(workdir: str):
    base = SynthConfig(duration_s=4.0, height=32, width=32, skin_region=(8, 8, 24, 24))
    sessions = synth_dataset(3, 1, base=base, seed=5)
    data_dir = os.path.join(workdir, "data")
    save_dataset(sessions, data_dir)
    cfg = RunConfig({
        "run.out_dir": os.path.join(workdir, "run"),
        "data.root": data_dir,
        "model.stem_width": 4, "model.token_width": 8, "model.state_size": 4,
        "train.epochs": 2, "train.batch_size": 2, "train.window_s": 2.0,
    })
    result = train(cfg, sessions=sessions)
    rep = evaluate(cfg, result.model, sessions, mode="both")
    rep.save(os.path.join(workdir, "run", "both.report.json"))
    write_reports([rep], os.path.join(workdir, "report"))
    return result.history


def test_criterion_8_determinism(tmp_path):
    workdir = tmp_path / "work"

    def run_and_collect():
        workdir.mkdir()
        history = _determinism_run(str(workdir))
        files = {}
        for sub in ("run", "report"):
            for root, _, names in os.walk(workdir / sub):
                for name in sorted(names):
                    if name.endswith(".png") or name.endswith(".ckpt"):
                        continue
                    path = os.path.join(root, name)
                    files[os.path.relpath(path, workdir)] = open(path, "rb").read()
        shutil.rmtree(workdir)
        return history, files

    history1, files1 = run_and_collect()
    history2, files2 = run_and_collect()
    assert history1 == history2, "loss traces differ between reruns"
    assert sorted(files1) == sorted(files2)
    diffs = [name for name in files1 if files1[name] != files2[name]]
    assert not diffs, f"files differ between reruns: {diffs}"
    _report(8, f"{len(files1)} data files byte-identical across two full runs; "
               f"loss traces identical")


def test_criterion_9_ablation_harness(tmp_path, micro_dataset_dir):
    from pulsefusion.session_io import load_dataset
    sessions = load_dataset(micro_dataset_dir)
    cfg = RunConfig({
        "run.out_dir": str(tmp_path / "ablate"),
        "model.stem_width": 4, "model.token_width": 8, "model.state_size": 4,
        "train.epochs": 1, "train.batch_size": 2, "train.window_s": 2.0,
    })
    reports = ablate(cfg, sessions=sessions)
    assert set(reports) == {"full"} | {f"no_{t}" for t in ABLATION_TOGGLES}
    for label, rep in reports.items():
        assert np.isfinite(rep.metrics.mae), f"{label} metrics not finite"
        off = [t for t, on in rep.toggles.items() if not on]
        assert off == ([] if label == "full" else [label[3:]])
    files = write_reports(list(reports.values()), str(tmp_path / "grid"))
    grid_path = [f for f in files if f.endswith("ablation_grid.txt")]
    assert grid_path, "comparison grid not emitted"
    grid = open(grid_path[0]).read()
    assert all(f"no_{t}" in grid for t in ABLATION_TOGGLES)
    _report(9, "all five single-toggle variants trained and evaluated; grid emitted")
