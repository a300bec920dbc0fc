import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bachkit.synthetic import toy_taxonomy, write_synthetic_bank  # noqa: E402
from bachkit.bank import ingest  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tiny_taxonomy():
    return toy_taxonomy(3, 3)


@pytest.fixture(scope="session")
def small_bank(tmp_path_factory, tiny_taxonomy):
    """12 ingested entries with real segmap files on a 24x32 canvas."""
    directory = tmp_path_factory.mktemp("smallbank")
    manifest = write_synthetic_bank(directory, seed=5, n_entries=12,
                                    taxonomy=tiny_taxonomy, canvas=(24, 32))
    return ingest(manifest)
