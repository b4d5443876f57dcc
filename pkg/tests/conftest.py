import pytest

from semprop.conjugate import DirichletParams, NIGParams, ProductPrior
from semprop.property_model import PropertyTable, init_product_prior


@pytest.fixture(scope="session")
def friction_table():
    return PropertyTable.bundled()


@pytest.fixture(scope="session")
def snow_ice_table(friction_table):
    return friction_table.subset(["Snow", "Ice"])


@pytest.fixture(scope="session")
def door_table():
    return PropertyTable.bundled("door_affordance")


@pytest.fixture
def k1_prior():
    """Standard single-component fixture."""
    return ProductPrior(DirichletParams([2.0]), (NIGParams(0.5, 1.0, 3.0, 1.0),))


@pytest.fixture
def snow_ice_prior(snow_ice_table):
    """Table 1 snow/ice fixture with a uniform class prior."""
    return init_product_prior(DirichletParams([1.0, 1.0]), snow_ice_table)


def random_prior(rng, k=2, beta_lo=3.0, beta_hi=8.0):
    """Random well-posed product prior for sweep tests."""
    nig = tuple(
        NIGParams(
            tau=rng.uniform(0.2, 1.2),
            kappa=rng.uniform(0.5, 4.0),
            beta=rng.uniform(beta_lo, beta_hi),
            gamma=rng.uniform(0.5, 3.0),
        )
        for _ in range(k)
    )
    a = DirichletParams(rng.uniform(0.5, 5.0, size=k))
    return ProductPrior(a, nig)
