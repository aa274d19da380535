import numpy as np
import pytest

from airgap.audio import AudioBuffer
from airgap.manifest import ARCHITECTURES, BONA_FIDE, LANGUAGES, SPOOF, AudioPool


def make_pools(per_cell=12):
    """Pools with ``per_cell`` distinct names in every language / architecture cell."""
    bona = {lang: [f"bona/{lang}/{i:04d}.wav" for i in range(per_cell)] for lang in LANGUAGES}
    spoof = {
        (lang, arch): [f"spoof/{arch}/{lang}/{i:04d}.wav" for i in range(per_cell)]
        for lang in LANGUAGES
        for arch in ARCHITECTURES
    }
    return AudioPool(BONA_FIDE, bona), AudioPool(SPOOF, spoof)


def setup_uids(count):
    return [f"id_{i}" for i in range(count)]


@pytest.fixture
def pools():
    return make_pools()


@pytest.fixture
def sine():
    sr = 16000
    t = np.arange(sr) / sr
    return AudioBuffer(0.5 * np.sin(2 * np.pi * 440.0 * t), sr)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("]")[1].split(".")[0])):
            terminalreporter.write_line(line)
