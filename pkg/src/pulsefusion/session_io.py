"""Session serialization.

Layout: ``<root>/<subject>/<session>/{video.f32, rf.f32, ppg.f32, meta.txt}``.
Float arrays are raw little-endian 32-bit values in row-major order; meta.txt
is flat ``key = value`` text declaring shapes, rates, and labels.

The same walker doubles as the adapter for externally recorded corpora that
follow a subject/session directory shape (several fixed-length sessions per
subject). Assumptions the adapter makes about such corpora are confined to
this module: one video, one RF series, and one reference pulse trace per
session directory, with rates declared in meta.txt.
"""

from __future__ import annotations

import os
from typing import Dict, List

import numpy as np

from .errors import DataError, InvalidInputError, SchemaError
from .metrics import BVPSignal, SKIN_TONES
from .synth import RFSeries, Session, VideoClip

_FILES = ("video.f32", "rf.f32", "ppg.f32", "meta.txt")


def _write_f32(path: str, arr: np.ndarray):
    with open(path, "wb") as f:
        f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def _read_f32(path: str, shape, what: str) -> np.ndarray:
    with open(path, "rb") as f:
        raw = f.read()
    arr = np.frombuffer(raw, dtype="<f4")
    expected = int(np.prod(shape))
    if arr.size != expected:
        raise SchemaError(
            f"{what}: payload holds {arr.size} floats but meta declares shape {tuple(shape)}")
    return arr.reshape(shape).astype(np.float32)


def _parse_meta(path: str) -> Dict[str, str]:
    meta: Dict[str, str] = {}
    with open(path, "r") as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise SchemaError(f"malformed meta line in {path}: {line!r}")
            key, value = line.split("=", 1)
            meta[key.strip()] = value.strip()
    return meta


def _meta_shape(meta: Dict[str, str], key: str, path: str) -> List[int]:
    try:
        return [int(v) for v in meta[key].split(",")]
    except (KeyError, ValueError) as exc:
        raise SchemaError(f"meta field {key!r} missing or malformed in {path}") from exc


def save_session(session: Session, root: str) -> str:
    """Write one session under root/<subject>/<session_id>/ and return the path."""
    out = os.path.join(root, session.subject_id, session.session_id)
    os.makedirs(out, exist_ok=True)
    _write_f32(os.path.join(out, "video.f32"), session.video.data)
    _write_f32(os.path.join(out, "rf.f32"), session.rf.data)
    _write_f32(os.path.join(out, "ppg.f32"), session.ppg_gt.samples)
    v, r = session.video.data.shape, session.rf.data.shape
    lines = [
        f"session_id = {session.session_id}",
        f"subject_id = {session.subject_id}",
        f"skin_tone = {session.skin_tone}",
        f"fps = {session.video.fps!r}",
        f"rf_rate = {session.rf.sample_rate!r}",
        f"ppg_rate = {session.ppg_gt.sample_rate!r}",
        f"duration_s = {session.duration!r}",
        f"video_shape = {','.join(str(d) for d in v)}",
        f"rf_shape = {','.join(str(d) for d in r)}",
        f"ppg_len = {session.ppg_gt.samples.shape[0]}",
    ]
    with open(os.path.join(out, "meta.txt"), "w") as f:
        f.write("\n".join(lines) + "\n")
    return out


def load_session(path: str) -> Session:
    """Load one session directory, validating shapes and labels."""
    for name in _FILES:
        if not os.path.isfile(os.path.join(path, name)):
            raise DataError(f"missing file {name} in session directory {path}")
    meta_path = os.path.join(path, "meta.txt")
    meta = _parse_meta(meta_path)
    tone = meta.get("skin_tone", "")
    if tone not in SKIN_TONES:
        raise SchemaError(f"skin_tone {tone!r} in {meta_path} not one of {SKIN_TONES}")
    try:
        fps = float(meta["fps"])
        rf_rate = float(meta["rf_rate"])
        ppg_rate = float(meta.get("ppg_rate", meta["fps"]))
    except (KeyError, ValueError) as exc:
        raise SchemaError(f"rate fields missing or malformed in {meta_path}") from exc
    video_shape = _meta_shape(meta, "video_shape", meta_path)
    rf_shape = _meta_shape(meta, "rf_shape", meta_path)
    ppg_len = _meta_shape(meta, "ppg_len", meta_path)[0]
    video = _read_f32(os.path.join(path, "video.f32"), video_shape, "video.f32")
    rf = _read_f32(os.path.join(path, "rf.f32"), rf_shape, "rf.f32")
    ppg = _read_f32(os.path.join(path, "ppg.f32"), [ppg_len], "ppg.f32")
    try:
        return Session(
            video=VideoClip(data=video, fps=fps),
            rf=RFSeries(data=rf, sample_rate=rf_rate),
            ppg_gt=BVPSignal(samples=ppg.astype(np.float64), sample_rate=ppg_rate),
            skin_tone=tone,
            session_id=meta.get("session_id", os.path.basename(path)),
            subject_id=meta.get("subject_id", os.path.basename(os.path.dirname(path))),
        )
    except InvalidInputError as exc:
        raise SchemaError(f"session {path} violates invariants: {exc}") from exc


def save_dataset(sessions: List[Session], root: str) -> str:
    os.makedirs(root, exist_ok=True)
    for session in sessions:
        save_session(session, root)
    return root


def load_dataset(root: str) -> List[Session]:
    """Load every session under root, sorted by (subject, session) for
    deterministic ordering."""
    if not os.path.isdir(root):
        raise DataError(f"dataset root {root} does not exist")
    sessions = []
    for subject in sorted(os.listdir(root)):
        sdir = os.path.join(root, subject)
        if not os.path.isdir(sdir):
            continue
        for name in sorted(os.listdir(sdir)):
            sess_dir = os.path.join(sdir, name)
            if os.path.isdir(sess_dir):
                sessions.append(load_session(sess_dir))
    if not sessions:
        raise DataError(f"no sessions found under {root}")
    return sessions
