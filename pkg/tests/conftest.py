"""Shared fixtures: bundled maps, planner defaults, mock fixture corpus, one synth run."""

from __future__ import annotations

import numpy as np
import pytest

from shoptraj.cli import bundled_map_path
from shoptraj.config import config_from_dict
from shoptraj.gateway import BackendConfig, Gateway
from shoptraj.mockdata import build_mock_corpus
from shoptraj.planner import PlannerParams, build_roadmap
from shoptraj.storemap import load_map_file

CORPUS_SEED = 7
SYNTH_SEED = 20240817


@pytest.fixture(scope="session")
def seen_store():
    return load_map_file(bundled_map_path("seen"))


@pytest.fixture(scope="session")
def unseen_store():
    return load_map_file(bundled_map_path("unseen"))


@pytest.fixture(scope="session")
def params():
    return PlannerParams()


@pytest.fixture(scope="session")
def seen_roadmap(seen_store, params):
    return build_roadmap(seen_store, params, np.random.default_rng([42, 0]))


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory, seen_store):
    out = tmp_path_factory.mktemp("fixtures")
    build_mock_corpus(seen_store, out, n=80, paraphrase_ks=(2, 4, 8), seed=CORPUS_SEED)
    return out


@pytest.fixture(scope="session")
def corpus_summary(tmp_path_factory, seen_store):
    out = tmp_path_factory.mktemp("fixtures-meta")
    return build_mock_corpus(seen_store, out, n=80, paraphrase_ks=(2, 4, 8), seed=CORPUS_SEED)


@pytest.fixture(scope="session")
def mock_gateway(corpus_dir):
    return Gateway(BackendConfig(kind="mock", fixture_dir=str(corpus_dir)))


def make_synth_config(corpus_dir, out_dir, paraphrases=8, n=80, train=64, val=16):
    return config_from_dict(
        {
            "map_path": bundled_map_path("seen"),
            "backend": {"kind": "mock", "fixture_dir": str(corpus_dir)},
            "n_samples": n,
            "split": {"train": train, "val": val},
            "paraphrases": paraphrases,
            "seed": SYNTH_SEED,
            "out_dir": str(out_dir),
        }
    )


@pytest.fixture(scope="session")
def synth_run(corpus_dir, tmp_path_factory):
    from shoptraj.pipeline import synth

    out = tmp_path_factory.mktemp("synth-k8")
    result = synth(make_synth_config(corpus_dir, out))
    return result, out
