import sys

import pytest

from trax.synth import generate_sequence

DUMMY = [sys.executable, "-m", "trax", "dummy"]


def dummy_cmd(*flags):
    return DUMMY + list(flags)


@pytest.fixture(scope="session")
def sequence20(tmp_path_factory):
    """20-frame synthetic sequence with the moving-square groundtruth."""
    root = tmp_path_factory.mktemp("seq20")
    return generate_sequence(str(root), 20)


@pytest.fixture(scope="session")
def sequence5(tmp_path_factory):
    root = tmp_path_factory.mktemp("seq5")
    return generate_sequence(str(root), 5)


@pytest.fixture
def null_sink():
    return lambda _line: None
