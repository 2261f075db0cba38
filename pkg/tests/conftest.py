"""Shared fixtures: the bundled transcript corpus, deterministic audio for
it, and a fully built work directory reused by the CLI and acceptance tests."""

from pathlib import Path

import numpy as np
import pytest

from iuseg import cli, dsp

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS_DIR = FIXTURES / "corpus"

# Seconds of audio per conversation; must cover the last bullet end time.
AUDIO_SECONDS = {
    "conv01": 11.0,
    "conv02": 7.5,
    "conv03": 9.5,
    "conv04": 39.0,
    "conv05": 35.0,
    "conv06": 6.0,
}


def pytest_runtest_logreport(report):
    # One visible pass/fail line per acceptance criterion.
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    print(f"\n[{'PASS' if report.passed else 'FAIL'}] {name}")


@pytest.fixture(scope="session")
def audio_dir(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("audio")
    rng = np.random.default_rng(20260814)
    for conv, seconds in sorted(AUDIO_SECONDS.items()):
        n = int(seconds * dsp.SOURCE_SAMPLE_RATE)
        t = np.arange(n) / dsp.SOURCE_SAMPLE_RATE
        samples = 0.25 * np.sin(2 * np.pi * 220.0 * t) + 0.02 * rng.standard_normal(n)
        dsp.save_wav(root / f"{conv}.wav", dsp.AudioBuffer(samples, dsp.SOURCE_SAMPLE_RATE))
    return root


@pytest.fixture(scope="session")
def built_work_dir(tmp_path_factory, audio_dir) -> Path:
    """parse + build + targets over the bundled corpus, shared read-only."""
    work = tmp_path_factory.mktemp("work")
    assert cli.main(["parse", "--corpus-dir", str(CORPUS_DIR), "--out", str(work / "transcripts")]) == 0
    assert (
        cli.main(
            [
                "build",
                "--transcripts", str(work / "transcripts"),
                "--audio-dir", str(audio_dir),
                "--out", str(work / "manifest.jsonl"),
            ]
        )
        == 0
    )
    assert (
        cli.main(
            [
                "targets",
                "--manifest", str(work / "manifest.jsonl"),
                "--transcripts", str(work / "transcripts"),
            ]
        )
        == 0
    )
    return work
