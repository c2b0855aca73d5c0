"""Report emission: metrics tables in text and structured form, Bland-Altman
data and figures, signal/heart-rate trace overlays, missing-modality and
ablation grids. Data files are byte-deterministic for identical inputs;
figures may differ only in rendering metadata."""

from __future__ import annotations

import json
import os
from typing import Dict, List, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .errors import DataError
from .evaluate import EvalReport, load_report
from .model import ABLATION_TOGGLES

_MODE_NAMES = {"both": "RGB&RF", "rgb_only": "RGB", "rf_only": "RF"}


def _fmt(v, digits=3) -> str:
    if v is None:
        return "undef"
    return f"{v:.{digits}f}"


def _write(path: str, text: str):
    with open(path, "w") as f:
        f.write(text)


def write_reports(reports: Sequence[EvalReport], out_dir: str) -> List[str]:
    """Render every table, data file, and figure for a set of eval reports."""
    if not reports:
        raise DataError("no evaluation reports to render")
    os.makedirs(out_dir, exist_ok=True)
    written: List[str] = []

    payload = {r.label: r.to_dict() for r in reports}
    path = os.path.join(out_dir, "metrics.json")
    with open(path, "w") as f:
        json.dump(payload, f, sort_keys=True, indent=1)
        f.write("\n")
    written.append(path)

    lines = [f"{'label':<16} {'mode':<10} {'MAE':>8} {'RMSE':>8} {'rho':>7}"]
    for r in reports:
        m = r.metrics
        lines.append(f"{r.label:<16} {r.mode:<10} {m.mae:>8.3f} {m.rmse:>8.3f} "
                     f"{_fmt(m.rho):>7}")
    path = os.path.join(out_dir, "metrics_table.txt")
    _write(path, "\n".join(lines) + "\n")
    written.append(path)

    fairness = []
    for r in reports:
        if not r.metrics.per_group:
            continue
        fairness.append(f"[{r.label}]")
        fairness.append(r.metrics.to_text().rstrip())
        fairness.append("")
    if fairness:
        path = os.path.join(out_dir, "fairness.txt")
        _write(path, "\n".join(fairness) + "\n")
        written.append(path)

    rows = ["label,mode,session_id,subject_id,group,gt_bpm,pred_bpm,degenerate"]
    for r in reports:
        for rec in r.records:
            rows.append(f"{r.label},{r.mode},{rec['session_id']},{rec['subject_id']},"
                        f"{rec['group']},{rec['gt_bpm']!r},{rec['pred_bpm']!r},"
                        f"{int(rec['degenerate'])}")
    path = os.path.join(out_dir, "sessions.csv")
    _write(path, "\n".join(rows) + "\n")
    written.append(path)

    for r in reports:
        written.extend(_bland_altman_files(r, out_dir))
        written.extend(_trace_files(r, out_dir))

    written.extend(_missing_modality_table(reports, out_dir))
    written.extend(_mode_comparison_figure(reports, out_dir))
    written.extend(_ablation_grid(reports, out_dir))
    return written


def _bland_altman_files(r: EvalReport, out_dir: str) -> List[str]:
    ba = r.bland
    if ba is None:
        return []
    rows = ["mean_bpm,diff_bpm"]
    rows += [f"{m!r},{d!r}" for m, d in zip(ba.means, ba.diffs)]
    rows.append(f"# bias = {ba.bias!r}")
    rows.append(f"# loa_low = {ba.loa_low!r}")
    rows.append(f"# loa_high = {ba.loa_high!r}")
    csv_path = os.path.join(out_dir, f"bland_altman_{r.label}.csv")
    _write(csv_path, "\n".join(rows) + "\n")

    fig, ax = plt.subplots(figsize=(5, 4))
    ax.scatter(ba.means, ba.diffs, s=18, alpha=0.8)
    for y, style in ((ba.bias, "-"), (ba.loa_low, "--"), (ba.loa_high, "--")):
        ax.axhline(y, linestyle=style, color="tab:red", linewidth=1)
    ax.set_xlabel("mean of estimate and reference (bpm)")
    ax.set_ylabel("difference (bpm)")
    ax.set_title(f"Bland-Altman: {r.label}")
    fig.tight_layout()
    png_path = os.path.join(out_dir, f"bland_altman_{r.label}.png")
    fig.savefig(png_path, dpi=110)
    plt.close(fig)
    return [csv_path, png_path]


def _trace_files(r: EvalReport, out_dir: str) -> List[str]:
    written = []
    for key, trace in sorted(r.traces.items()):
        tag = key.replace("/", "_")
        rows = ["t_s,gt_bvp,pred_bvp"]
        fps = trace["fps"]
        for i, (g, p) in enumerate(zip(trace["gt_bvp"], trace["pred_bvp"])):
            rows.append(f"{i / fps!r},{g!r},{p!r}")
        csv_path = os.path.join(out_dir, f"bvp_trace_{r.label}_{tag}.csv")
        _write(csv_path, "\n".join(rows) + "\n")
        written.append(csv_path)

        hr_rows = ["t_s,gt_bpm,pred_bpm"]
        for pg, pp in zip(trace["hr_gt"], trace["hr_pred"]):
            hr_rows.append(f"{pg['t']!r},{pg['bpm']!r},{pp['bpm']!r}")
        hr_path = os.path.join(out_dir, f"hr_trace_{r.label}_{tag}.csv")
        _write(hr_path, "\n".join(hr_rows) + "\n")
        written.append(hr_path)

        fig, axes = plt.subplots(2, 1, figsize=(7, 5))
        t = [i / fps for i in range(len(trace["gt_bvp"]))]
        axes[0].plot(t, trace["gt_bvp"], color="tab:red", label="reference")
        axes[0].plot(t, trace["pred_bvp"], color="tab:blue", label="predicted", alpha=0.8)
        axes[0].set_ylabel("pulse (a.u.)")
        axes[0].legend(loc="upper right", fontsize=8)
        axes[1].plot([p["t"] for p in trace["hr_gt"]], [p["bpm"] for p in trace["hr_gt"]],
                     color="tab:red", label="reference")
        axes[1].plot([p["t"] for p in trace["hr_pred"]], [p["bpm"] for p in trace["hr_pred"]],
                     color="tab:blue", label="predicted", alpha=0.8)
        axes[1].set_xlabel("time (s)")
        axes[1].set_ylabel("heart rate (bpm)")
        axes[1].legend(loc="upper right", fontsize=8)
        fig.suptitle(f"{r.label}: {key}")
        fig.tight_layout()
        png_path = os.path.join(out_dir, f"trace_{r.label}_{tag}.png")
        fig.savefig(png_path, dpi=110)
        plt.close(fig)
        written.append(png_path)
    return written


def _missing_modality_table(reports: Sequence[EvalReport], out_dir: str) -> List[str]:
    by_mode: Dict[str, EvalReport] = {}
    for r in reports:
        if all(r.toggles.values()):
            by_mode.setdefault(r.mode, r)
    if len(by_mode) < 2:
        return []
    lines = [f"{'Train':<10} {'Test':<10} {'MAE':>8} {'RMSE':>8} {'rho':>7}"]
    for mode in ("rgb_only", "rf_only", "both"):
        if mode in by_mode:
            m = by_mode[mode].metrics
            lines.append(f"{'RGB&RF':<10} {_MODE_NAMES[mode]:<10} {m.mae:>8.3f} "
                         f"{m.rmse:>8.3f} {_fmt(m.rho):>7}")
    path = os.path.join(out_dir, "missing_modality.txt")
    _write(path, "\n".join(lines) + "\n")
    return [path]


def _mode_comparison_figure(reports: Sequence[EvalReport], out_dir: str) -> List[str]:
    traced = [r for r in reports if r.traces]
    if len(traced) < 2:
        return []
    shared = set(traced[0].traces)
    for r in traced[1:]:
        shared &= set(r.traces)
    if not shared:
        return []
    key = sorted(shared)[0]
    ref = traced[0].traces[key]
    rows = ["t_s,gt_bpm" + "".join(f",{r.label}_bpm" for r in traced)]
    for i, point in enumerate(ref["hr_gt"]):
        cells = [f"{point['t']!r}", f"{point['bpm']!r}"]
        for r in traced:
            series = r.traces[key]["hr_pred"]
            cells.append(f"{series[i]['bpm']!r}" if i < len(series) else "")
        rows.append(",".join(cells))
    csv_path = os.path.join(out_dir, "comparison_hr.csv")
    _write(csv_path, "\n".join(rows) + "\n")

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot([p["t"] for p in ref["hr_gt"]], [p["bpm"] for p in ref["hr_gt"]],
            color="tab:red", linewidth=2, label="reference")
    for r in traced:
        series = r.traces[key]["hr_pred"]
        ax.plot([p["t"] for p in series], [p["bpm"] for p in series],
                alpha=0.8, label=r.label)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("heart rate (bpm)")
    ax.set_title(f"continuous HR: {key}")
    ax.legend(fontsize=8)
    fig.tight_layout()
    png_path = os.path.join(out_dir, "comparison_hr.png")
    fig.savefig(png_path, dpi=110)
    plt.close(fig)
    return [csv_path, png_path]


def _ablation_grid(reports: Sequence[EvalReport], out_dir: str) -> List[str]:
    togglesets = {tuple(sorted(r.toggles.items())) for r in reports}
    if len(togglesets) < 2:
        return []
    header = "".join(f"{t:<12}" for t in ABLATION_TOGGLES)
    lines = [f"{'label':<12} {header}{'MAE':>8} {'RMSE':>8} {'rho':>7}"]
    for r in reports:
        marks = "".join(f"{'yes' if r.toggles[t] else 'OFF':<12}" for t in ABLATION_TOGGLES)
        m = r.metrics
        lines.append(f"{r.label:<12} {marks}{m.mae:>8.3f} {m.rmse:>8.3f} {_fmt(m.rho):>7}")
    path = os.path.join(out_dir, "ablation_grid.txt")
    _write(path, "\n".join(lines) + "\n")
    return [path]


def render_report_dir(in_dir: str, out_dir: str) -> List[str]:
    """Load every ``*.report.json`` under ``in_dir`` and render the full set."""
    if not os.path.isdir(in_dir):
        raise DataError(f"report input directory {in_dir} does not exist")
    paths = sorted(p for p in os.listdir(in_dir) if p.endswith(".report.json"))
    if not paths:
        raise DataError(f"no *.report.json files under {in_dir}")
    reports = [load_report(os.path.join(in_dir, p)) for p in paths]
    return write_reports(reports, out_dir)
