import numpy as np
import pytest

from su11 import engine, montecarlo, states
from su11.engine import MeasurementScheme, Port
from su11.montecarlo import NotGaussianRepresentableError, SampleSpec
from su11.optics import InterferometerConfig, LossBudget, PAGain, Topology, full_config

from conftest import random_state

SP = MeasurementScheme("signal")
BIG = SampleSpec(1_000_000, seed=7)


def test_vacuum_sample_variance():
    _, var = montecarlo.sample_observable(states.vacuum(), full_config(2.0), SP, np.pi, BIG)
    assert var == pytest.approx(1.0, abs=0.005)


def test_coherent_dark_mean():
    mean, _ = montecarlo.sample_observable(states.coherent(3.0), full_config(2.0), SP, np.pi, BIG)
    assert abs(mean) < 0.004


def test_seed_determinism():
    spec = SampleSpec(5000, seed=2 ** 63 + 11)
    cfg = full_config(2.0, 3.0)
    a = montecarlo.sample_records(states.coherent(1.0), cfg, SP, 2.0, spec)
    b = montecarlo.sample_records(states.coherent(1.0), cfg, SP, 2.0, spec)
    assert np.array_equal(a, b)
    c = montecarlo.sample_records(states.coherent(1.0), cfg, SP, 2.0, spec, batch=1)
    assert not np.array_equal(a, c)
    e1 = montecarlo.estimate_sensitivity(states.coherent(1.0), cfg, SP, 2.0, spec)
    e2 = montecarlo.estimate_sensitivity(states.coherent(1.0), cfg, SP, 2.0, spec)
    assert e1 == e2


def test_sensitivity_estimates():
    est = montecarlo.estimate_sensitivity(states.coherent(3.0), full_config(2.0), SP, np.pi, BIG)
    assert not est.degenerate
    assert est.delta_phi == pytest.approx(1 / 24, rel=0.02)
    est = montecarlo.estimate_sensitivity(states.coherent(3.0), full_config(2.0),
                                          MeasurementScheme("joint-minus"), np.pi, BIG)
    assert est.delta_phi * 3 == pytest.approx(0.0947, rel=0.02)


def test_vacuum_slope_is_degenerate():
    est = montecarlo.estimate_sensitivity(states.vacuum(), full_config(2.0), SP, np.pi, BIG)
    assert est.degenerate and est.delta_phi == np.inf
    assert abs(est.slope) < 5 * est.slope_stderr


def test_random_states_variance_bound(rng):
    n = 100_000
    bound = montecarlo.variance_bound(n)
    for k in range(20):
        state = random_state(rng, ["correlated", "squeezed", "coherent"][k % 3])
        topo = Topology.FULL if k % 4 else Topology.TRUNCATED
        cfg = InterferometerConfig(topo, PAGain(rng.uniform(0, 1.2)), PAGain(rng.uniform(0, 1.2)),
                                   rng.uniform(0, 2 * np.pi), LossBudget(*rng.uniform(0, 0.5, 4)))
        scheme = MeasurementScheme(list(Port)[k % 4], rng.uniform(-1, 1))
        _, var = engine.observable_stats(state, cfg, scheme)
        _, svar = montecarlo.sample_observable(state, cfg, scheme, cfg.phi0, SampleSpec(n, seed=k))
        assert abs(svar / var - 1) <= bound


def test_rejects_untagged_states():
    raw = states.from_moments(np.zeros(4), np.eye(4))
    with pytest.raises(NotGaussianRepresentableError):
        montecarlo.sample_observable(raw, full_config(2.0), SP, np.pi, SampleSpec(1000))


def test_sample_spec_validation():
    with pytest.raises(ValueError):
        SampleSpec(999)
    with pytest.raises(ValueError):
        SampleSpec(1000, seed=-1)
    with pytest.raises(ValueError):
        SampleSpec(1000, seed=2 ** 64)
    with pytest.raises(ValueError):
        SampleSpec(1000, fd_step=0.0)
