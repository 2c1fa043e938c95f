import numpy as np
import pytest

from dha.groups import group_from_descriptor


#: Every abelian group of order <= 16, one descriptor per isomorphism class
#: (invariant-factor decompositions built from cyclic factors).
ABELIAN_GROUPS_LE_16 = [
    "C1", "C2", "C3", "C4", "C2xC2", "C5", "C6", "C7",
    "C8", "C2xC4", "C2xC2xC2", "C9", "C3xC3", "C10", "C11",
    "C12", "C2xC6", "C13", "C14", "C15",
    "C16", "C2xC8", "C4xC4", "C2xC2xC4", "C2xC2xC2xC2",
]


@pytest.fixture(scope="session")
def groups_le_16():
    return [group_from_descriptor(d) for d in ABELIAN_GROUPS_LE_16]


def random_orthogonal(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))
