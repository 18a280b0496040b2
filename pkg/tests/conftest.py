import numpy as np
import pytest

from pacbayes_da.core import FiniteDomain, Posterior, VoterMatrix


def tiny_source():
    return FiniteDomain.from_triples([("x1", 1, 0.5), ("x2", -1, 0.5)], points=["x1", "x2"])


def tiny_positive_target():
    return FiniteDomain.from_triples([("x1", 1, 0.5), ("x2", 1, 0.5)], points=["x1", "x2"])


def tiny_voters():
    return VoterMatrix(np.array([[1, 1], [-1, -1]]), ("x1", "x2"))


@pytest.fixture
def tiny():
    """Two points, P_S uniform on (x1,+1), (x2,-1); voters always+1 and always-1; uniform rho."""
    return tiny_source(), tiny_voters(), Posterior.uniform(2)


@pytest.fixture
def tiny_target():
    return tiny_positive_target()


def random_instance(rng, max_points=6, max_voters=5):
    npts = int(rng.integers(1, max_points + 1))
    n = int(rng.integers(1, max_voters + 1))
    points = tuple(f"p{k}" for k in range(npts))
    src = FiniteDomain(points, rng.dirichlet(np.ones(2 * npts)).reshape(npts, 2))
    tgt = FiniteDomain(points, rng.dirichlet(np.ones(2 * npts)).reshape(npts, 2))
    voters = VoterMatrix(rng.choice([-1, 1], size=(n, npts)), points)
    rho = Posterior(rng.dirichlet(np.ones(n)))
    return src, tgt, voters, rho
