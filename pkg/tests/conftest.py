from __future__ import annotations

import os
import sys
from pathlib import Path

import pytest

from conextract.corpus import load_split

DATA = Path(__file__).parent / "data"
MINI_TEST = DATA / "mini_test.jsonl"
MINI_TRAIN = DATA / "mini_train.jsonl"
MINI_MIDAS = DATA / "mini_midas.jsonl"

# Inspec test split in the midas JSONL shape; not shipped, see README
INSPEC_TEST = Path(os.environ.get("CONEXTRACT_INSPEC_TEST", DATA / "inspec" / "test.jsonl"))


@pytest.fixture(scope="session")
def mini_test():
    return load_split(MINI_TEST)


@pytest.fixture(scope="session")
def mini_train():
    return load_split(MINI_TRAIN)


@pytest.fixture
def llm_config(tmp_path):
    """Factory for echo-gold experiment configs writing under tmp_path."""
    from conextract.harness import ExperimentConfig

    def _make(**llm) -> ExperimentConfig:
        cfg = ExperimentConfig.from_dict(
            {
                "dataset": {"test_path": str(MINI_TEST), "train_path": str(MINI_TRAIN)},
                "method": "llm",
                "llm": {"model_id": "mock-model", "backend": "echo-gold", **llm},
                "io": {"cache_path": str(tmp_path / "cache.jsonl"), "output_dir": str(tmp_path / "run")},
                "concurrency": 3,
            }
        )
        return cfg

    return _make


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("tests.test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in module.summary_lines():
        terminalreporter.write_line(line)
