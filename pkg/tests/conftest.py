import numpy as np
import pytest

from lossy_diffusion.combiners import CombiningRule
from lossy_diffusion.theory import SpatialCorrelation, TrueParameter, make_profiles
from lossy_diffusion.topology import random_geometric


def five_node_fixture():
    """Seeded 5-node geometric network with heterogeneous profiles (M=16, mu=0.01)."""
    topo = random_geometric(5, 100.0, 50.0, seed=3)
    rng = np.random.default_rng(7)
    sv2 = 10.0 ** rng.uniform(-4, -2, 5)
    su2 = rng.uniform(0.5, 1.5, 5)
    profiles = make_profiles(0.01, su2, sv2)
    return dict(
        topo=topo,
        profiles=profiles,
        corr=SpatialCorrelation.index(0.5, 5),
        w_o=TrueParameter.normalized_ones(16),
        rule=CombiningRule("relative_variance"),
        sv2=sv2,
    )


@pytest.fixture
def five_node():
    return five_node_fixture()
