"""Shared fixtures: a micro dataset and matching configuration, small enough
for quick end-to-end pipeline runs."""

import pytest

from pulsefusion.config import RunConfig
from pulsefusion.session_io import save_dataset
from pulsefusion.synth import SynthConfig, synth_dataset

MICRO_OVERRIDES = {
    "model.stem_width": 4,
    "model.token_width": 8,
    "model.state_size": 4,
    "train.epochs": 2,
    "train.batch_size": 2,
    "train.window_s": 2.0,
    "train.lr": 1e-3,
    "synth.n_subjects": 4,
    "synth.sessions_per_subject": 1,
    "synth.duration_s": 4.0,
    "synth.height": 32,
    "synth.width": 32,
}


def micro_base() -> SynthConfig:
    return SynthConfig(duration_s=4.0, height=32, width=32,
                       skin_region=(8, 8, 24, 24))


@pytest.fixture(scope="session")
def micro_sessions():
    return synth_dataset(4, 1, base=micro_base(), seed=21)


@pytest.fixture(scope="session")
def micro_dataset_dir(tmp_path_factory, micro_sessions):
    root = tmp_path_factory.mktemp("micro_data")
    save_dataset(micro_sessions, str(root))
    return str(root)


@pytest.fixture()
def micro_cfg(tmp_path, micro_dataset_dir):
    overrides = dict(MICRO_OVERRIDES)
    overrides["data.root"] = micro_dataset_dir
    overrides["run.out_dir"] = str(tmp_path / "run")
    return RunConfig(overrides)
