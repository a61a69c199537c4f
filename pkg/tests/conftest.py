"""Shared fixtures. Equilibria are expensive, so every solve used by more than
one test is computed once per session."""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mfg_lambda.equilibrium import solve_mfg_finite_horizon
from mfg_lambda.fokker_planck import solve_limit_mckean_vlasov
from mfg_lambda.model import reference_spec
from mfg_lambda.verify import solve_sweep, uniqueness_probe

settings.register_profile(
    "mfg", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("mfg")

SWEEP_LAMBDAS = (10.0, 20.0, 40.0, 80.0, 160.0)
SWEEP_TAU = 1.0


@pytest.fixture(scope="session")
def ref_spec():
    return reference_spec(40.0)


@pytest.fixture(scope="session")
def ref_solution(ref_spec):
    return solve_mfg_finite_horizon(ref_spec)


@pytest.fixture(scope="session")
def refined_spec(ref_spec):
    return ref_spec.refined()


@pytest.fixture(scope="session")
def refined_solution(refined_spec):
    return solve_mfg_finite_horizon(refined_spec)


@pytest.fixture(scope="session")
def sweep():
    return solve_sweep(reference_spec(40.0), SWEEP_LAMBDAS, SWEEP_TAU)


@pytest.fixture(scope="session")
def limit_traj():
    return solve_limit_mckean_vlasov(reference_spec(40.0), SWEEP_TAU)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def probe80():
    return uniqueness_probe(reference_spec(40.0), 80.0, n_inits=3, seed=0)


@pytest.fixture
def report(capsys):
    """Print one pass/fail line per acceptance criterion, bypassing capture."""

    def emit(criterion, passed, detail):
        with capsys.disabled():
            print(f"\n[criterion {criterion:>2}] {'PASS' if passed else 'FAIL'}: {detail}")

    return emit
