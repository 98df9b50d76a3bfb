import pytest

from stochpp import validate

# reference coefficient set used throughout the suite (lambda ~ 0.8844)
THETA = dict(
    a1=2.0, b1=1.0, c1=1.0, a2=0.1, b2=1.0, c2=2.0,
    m1=1.0, m2=1.0, m3=0.0, alpha=1.0, beta=0.5,
)


@pytest.fixture(scope="session")
def theta():
    return validate(THETA)


@pytest.fixture(scope="session")
def theta_extinct(theta):
    # c2 = 0.2 flips the threshold negative (lambda ~ -0.1141)
    return theta.with_(c2=0.2)


@pytest.fixture(scope="session")
def theta_degenerate(theta):
    # beta < 0: half-plane invariant control set in the shared-noise case
    return theta.with_(beta=-0.5)


def random_valid_params(rng):
    """A random coefficient set satisfying all constraints and a1 > alpha^2/2."""
    alpha = rng.uniform(0.1, 1.5)
    return validate(
        dict(
            a1=0.5 * alpha**2 + rng.uniform(0.1, 4.0),
            b1=rng.uniform(0.1, 5.0),
            c1=rng.uniform(0.1, 5.0),
            a2=rng.uniform(0.01, 2.0),
            b2=rng.uniform(0.1, 5.0),
            c2=rng.uniform(0.1, 5.0),
            m1=rng.uniform(0.2, 5.0),
            m2=rng.uniform(0.2, 5.0),
            m3=rng.uniform(0.0, 2.0) if rng.random() < 0.7 else 0.0,
            alpha=alpha,
            beta=rng.uniform(0.1, 1.5) * (1 if rng.random() < 0.5 else -1),
        )
    )
