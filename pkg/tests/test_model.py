import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import dot_pair, flat
from mesoleads.model import (DriveProtocol, Harmonic, SystemModel, assemble_generator,
                             generator_at, initial_state, resonant_level)
from mesoleads.spectral import BathSpec, DiscretizationScheme


def three_mode_bath(mu=0.0, temperature=1.0):
    return BathSpec(temperature, mu, flat(), DiscretizationScheme(8.0, 3, 0))


def test_resonant_level_structure():
    gen = assemble_generator(resonant_level([three_mode_bath(), three_mode_bath()]))
    assert gen.dim == 7
    assert np.count_nonzero(np.diag(gen.Upsilon)) == 6
    assert np.all(np.diag(gen.Upsilon)[:1] == 0) and np.all(np.diag(gen.F)[:1] == 0)


def test_lead_blocks_follow_modes():
    gen = assemble_generator(resonant_level([three_mode_bath(0.5), three_mode_bath(-0.5)]))
    for lead in gen.leads:
        i = np.arange(lead.index.start, lead.index.stop)
        assert np.allclose(gen.h_static[i, i], lead.energies)
        assert np.allclose(gen.h_static[lead.site, i], lead.couplings)
        assert np.allclose(np.diag(gen.F)[i], lead.dampings * lead.occupations)
        assert np.allclose(np.diag(gen.Upsilon)[i], lead.dampings)


def test_no_baths_gives_unitary_flow():
    h = np.array([[0.0, 1.0], [1.0, 0.5]])
    gen = assemble_generator(SystemModel(h, DriveProtocol((0.3, 0.0), 2.0)))
    assert gen.dim == 2
    assert not np.any(gen.upsilon) and not np.any(gen.injection)
    w = generator_at(gen, 0.4)
    assert np.allclose(w + w.conj().T, 0)


def test_two_dot_structure():
    gen = dot_pair(n_modes=10, hopping=3.0)
    assert gen.h_static[0, 1] == 3.0 and gen.h_static[1, 0] == 3.0
    assert np.flatnonzero(np.diag(gen.W1)).tolist() == [0]
    assert [lead.site for lead in gen.leads] == [0, 1]


def test_non_hermitian_system_rejected():
    with pytest.raises(ValueError):
        SystemModel(np.array([[0.0, 1.0], [0.0, 0.0]]), DriveProtocol((0.0, 0.0)))


def test_coupling_site_range_checked():
    with pytest.raises(ValueError):
        SystemModel(np.zeros((1, 1)), DriveProtocol((0.0,)), ((1, three_mode_bath()),))


def test_negative_frequency_rejected():
    with pytest.raises(ValueError):
        DriveProtocol((1.0,), -1.0)


def test_empty_lead_rejected(monkeypatch):
    import mesoleads.model as model

    empty = tuple(np.zeros(0) for _ in range(5))
    monkeypatch.setattr(model, "lead_arrays", lambda bath: empty)
    with pytest.raises(ValueError, match="empty lead"):
        assemble_generator(resonant_level([three_mode_bath()]))


def test_initial_state_blocks():
    gen = assemble_generator(resonant_level([three_mode_bath(0.5), three_mode_bath(-0.5)]))
    c = initial_state(gen, [[0.5]])
    assert c[0, 0] == 0.5
    for lead in gen.leads:
        i = np.arange(lead.index.start, lead.index.stop)
        assert np.allclose(c[i, i], lead.occupations)
    off = c - np.diag(np.diag(c))
    assert not np.any(off)


def test_initial_state_hot_leads_and_empty_dot():
    hot = BathSpec(1e9, 0.0, flat(), DiscretizationScheme.from_total(20, 4.0))
    gen = assemble_generator(resonant_level([hot, hot]))
    c = initial_state(gen, [[0.0]])
    assert np.allclose(np.diag(c)[1:], 0.5, atol=1e-8)
    assert c[0, 0] == 0


@pytest.mark.parametrize("occ", [[[1.2]], [[-0.1]]])
def test_initial_state_rejects_bad_occupations(occ):
    gen = assemble_generator(resonant_level([three_mode_bath()]))
    with pytest.raises(ValueError):
        initial_state(gen, occ)


def test_generator_at_sin_and_cos():
    sf = flat()
    sch = DiscretizationScheme(8.0, 3, 0)
    bath = BathSpec(1.0, 0.0, sf, sch)
    g_sin = assemble_generator(resonant_level([bath], 0.0, 1.5, 2.0, Harmonic.SIN))
    g_cos = assemble_generator(resonant_level([bath], 0.0, 1.5, 2.0, Harmonic.COS))
    assert np.allclose(generator_at(g_sin, 0.0), g_sin.W0)
    assert np.allclose(generator_at(g_sin, math.pi / 4), g_sin.W0 + g_sin.W1)
    assert np.allclose(generator_at(g_cos, 0.0), g_cos.W0 + g_cos.W1)


def test_zero_frequency_is_static():
    gen = assemble_generator(resonant_level([three_mode_bath()], 0.0, 1.0, 0.0))
    assert gen.is_static
    assert np.allclose(generator_at(gen, 0.0), generator_at(gen, 3.7))


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 100), st.floats(0, 3), st.floats(0.1, 10), st.sampled_from(list(Harmonic)))
def test_generator_decomposition(t, amplitude, omega, kind):
    gen = dot_pair(n_modes=8, frequency=omega, amplitude=amplitude, kind=kind)
    w = generator_at(gen, t)
    assert np.allclose(w + w.conj().T, gen.Upsilon, atol=1e-12)
    anti = w - gen.Upsilon / 2
    assert np.allclose(anti, -anti.conj().T, atol=1e-12)
    # leads never couple to each other
    a, b = gen.leads
    assert not np.any(w[a.index, b.index])


@settings(max_examples=20, deadline=None)
@given(st.floats(0, 50), st.floats(0, 50))
def test_static_generator_time_independent(t1, t2):
    gen = dot_pair(n_modes=8, amplitude=0.0)
    assert np.array_equal(generator_at(gen, t1), generator_at(gen, t2))
