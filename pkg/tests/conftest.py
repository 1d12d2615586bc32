import dataclasses

import pytest

from pantomime import synthdata as S
from pantomime.kinematics import default_skeleton


@pytest.fixture(scope="session")
def skel():
    return default_skeleton()


@pytest.fixture(scope="session")
def small_corpus(skel):
    """4 identities x 5 actions x 2 reps: big enough to train on (>= 1000
    prior samples), small enough for per-module tests."""
    cfg = dataclasses.replace(
        S.desk_ceti_config(master_seed=21),
        name="small",
        num_identities=4,
        sequences_per_cell=2,
    )
    return S.generate_corpus(cfg, skel)
