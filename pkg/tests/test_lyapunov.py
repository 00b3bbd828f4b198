import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import biased_level, dot_pair
from mesoleads.lyapunov import (IntegrationError, SolverError, default_dt, evolve, rhs,
                                steady_state, step)
from mesoleads.model import ExtendedGenerator, Harmonic, initial_state
from mesoleads.thermo import external_currents, particle_current


def bare_generator(upsilon, injection, h=None):
    n = len(upsilon)
    h = np.zeros((n, n), dtype=complex) if h is None else np.asarray(h, dtype=complex)
    return ExtendedGenerator(1, (), h, np.zeros(n), np.asarray(upsilon, float),
                             np.asarray(injection, float), 0.0, Harmonic.SIN)


def test_zero_generator_leaves_state():
    gen = bare_generator([0.0, 0.0], [0.0, 0.0])
    c = np.array([[0.3, 0.1j], [-0.1j, 0.6]])
    assert np.array_equal(step(gen, c, 0.0, 0.1), c)


def test_single_damped_mode_closed_form():
    gamma, f = 0.7, 0.8
    gen = bare_generator([0.0, gamma], [0.0, gamma * f])
    dt = 1 / gamma / 100
    c, _ = evolve(gen, np.zeros((2, 2)), 1 / gamma, dt, stride=100)
    assert c[1, 1].real == pytest.approx(f * (1 - math.exp(-1)), abs=1e-9)
    assert c[0, 0] == 0


def test_step_is_hermitian():
    gen = biased_level(n_modes=20)
    c = initial_state(gen, [[0.5]])
    for i in range(20):
        c = step(gen, c, 0.05 * i, 0.05)
        assert np.max(np.abs(c - c.conj().T)) == 0


def test_step_rejects_nonpositive_dt():
    gen = biased_level(n_modes=10)
    with pytest.raises(ValueError):
        step(gen, initial_state(gen, [[0.5]]), 0.0, 0.0)


def test_default_dt():
    assert default_dt(biased_level(n_modes=10, amplitude=0.0)) == 0.01
    assert default_dt(biased_level(n_modes=10, frequency=25.0)) == pytest.approx(0.02 * 2 * math.pi / 25)


def test_equilibrium_run_settles():
    gen = biased_level(n_modes=10, amplitude=0.0, mu=0.0)
    c, snaps = evolve(gen, initial_state(gen, [[1.0]]), 100.0, 0.05, stride=100, keep=True)
    assert np.abs(snaps[-1].dC).max() < 1e-8


def test_richardson_fourth_order():
    gen = biased_level(n_modes=16, frequency=1.0)
    c0 = initial_state(gen, [[0.5]])
    values = []
    for dt in (0.08, 0.04, 0.02):
        c, _ = evolve(gen, c0, 2.0, dt, stride=1000)
        values.append(particle_current(gen, c, 0))
    ratio = (values[0] - values[1]) / (values[1] - values[2])
    assert ratio == pytest.approx(16, rel=0.25)


def test_bounds_violation_aborts():
    gen = biased_level(n_modes=10)
    c0 = initial_state(gen, [[0.5]])
    c0[0, 0] = 1.5
    with pytest.raises(IntegrationError):
        evolve(gen, c0, 1.0, 0.1)


def test_evolve_grid_checks():
    gen = biased_level(n_modes=10)
    c0 = initial_state(gen, [[0.5]])
    with pytest.raises(ValueError):
        evolve(gen, c0, 1.05, 0.1)
    with pytest.raises(ValueError):
        evolve(gen, c0, 0.0, 0.1)


def test_observer_stride_and_rate():
    gen = biased_level(n_modes=10)
    seen = []
    evolve(gen, initial_state(gen, [[0.5]]), 1.05, 0.05, stride=4,
           observer=lambda t, c, dc: seen.append((t, c, dc)))
    times = [t for t, _, _ in seen]
    assert times[:3] == pytest.approx([0.0, 0.2, 0.4])
    assert times[-1] == pytest.approx(1.05)
    t, c, dc = seen[2]
    assert np.allclose(dc, rhs(gen, c, t))


def test_steady_state_decoupled_leads():
    gen = bare_generator([0.0, 0.5, 1.0], [0.0, 0.5 * 0.2, 1.0 * 0.9],
                         h=np.diag([0.0, 1.0, -1.0]))
    # system site is isolated and undamped: no unique steady state
    with pytest.raises(SolverError):
        steady_state(gen)
    gen = bare_generator([0.3, 0.5, 1.0], [0.3 * 0.4, 0.5 * 0.2, 1.0 * 0.9],
                         h=np.diag([0.0, 1.0, -1.0]))
    assert np.allclose(steady_state(gen), np.diag([0.4, 0.2, 0.9]))


def test_steady_state_equilibrium_currents():
    gen = biased_level(n_modes=40, amplitude=0.0, mu=0.0)
    c = steady_state(gen)
    assert abs(particle_current(gen, c, 0)) < 1e-8
    assert abs(particle_current(gen, c, 1)) < 1e-8


def test_steady_state_is_fixed_point():
    gen = biased_level(n_modes=40, amplitude=0.0)
    c = steady_state(gen)
    assert np.abs(gen.W0 @ c + c @ gen.W0.conj().T - gen.F).max() < 1e-10
    assert np.abs(step(gen, c, 0.0, 0.01) - c).max() < 1e-10


def test_static_evolution_approaches_steady_state():
    gen = biased_level(n_modes=16, amplitude=0.0)
    c_ss = steady_state(gen)
    dist = []
    evolve(gen, initial_state(gen, [[0.0]]), 60.0, 0.02, stride=250,
           observer=lambda t, c, dc: dist.append(np.abs(c - c_ss).max()))
    tail = dist[len(dist) // 2:]
    assert all(b <= a for a, b in zip(tail, tail[1:]))
    assert tail[-1] < 1e-6


def test_total_number_balance():
    """d<N_tot>/dt equals the summed external particle currents."""
    gen = biased_level(n_modes=20)
    checks = []

    def observer(t, c, dc):
        inflow = sum(external_currents(gen, c, a)[0] for a in range(len(gen.leads)))
        checks.append(abs(np.trace(dc).real - inflow))

    evolve(gen, initial_state(gen, [[0.5]]), 5.0, 0.01, observer=observer)
    assert max(checks) < 1e-12


@settings(max_examples=10, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.5, 6.0), st.floats(0.0, 2.0))
def test_bounds_preserved_along_trajectory(p1, p2, omega, amplitude):
    gen = dot_pair(n_modes=12, frequency=omega, amplitude=amplitude)
    c0 = initial_state(gen, np.diag([p1, p2]))
    worst = []

    def observer(t, c, dc):
        nu = np.linalg.eigvalsh(c)
        worst.append((nu[0], nu[-1], np.abs(c - c.conj().T).max()))

    evolve(gen, c0, 4.0, 0.02, observer=observer, stride=10)
    lo = min(w[0] for w in worst)
    hi = max(w[1] for w in worst)
    assert lo > -1e-6 and hi < 1 + 1e-6
    assert max(w[2] for w in worst) == 0
