import numpy as np
import pytest

from mesoleads.model import assemble_generator, resonant_level, two_dot
from mesoleads.spectral import BathSpec, DiscretizationScheme, SpectralFunction

ACCEPTANCE = {}


def flat(coupling=1.0, cutoff=8.0):
    return SpectralFunction(coupling, cutoff)


def lin_log(n_modes, inner=4.0):
    return DiscretizationScheme.from_total(n_modes, inner, 0.1)


def biased_level(n_modes=40, amplitude=1.0, frequency=0.25, mu=0.5, temperature=1.0, kind=None):
    """Driven resonant level with symmetric bias, as used for the transient studies."""
    sf, sch = flat(), lin_log(n_modes)
    baths = [BathSpec(temperature, mu, sf, sch), BathSpec(temperature, -mu, sf, sch)]
    kwargs = {} if kind is None else {"kind": kind}
    return assemble_generator(resonant_level(baths, 0.0, amplitude, frequency, **kwargs))


def dot_pair(n_modes=40, hopping=3.0, frequency=4.0, hot=2.0, cold=1.0, amplitude=1.0, **kw):
    sf, sch = flat(), lin_log(n_modes)
    return assemble_generator(two_dot(BathSpec(hot, 0.0, sf, sch), BathSpec(cold, 0.0, sf, sch),
                                      hopping, amplitude, frequency, **kw))


def record(number, passed, detail):
    """Store one acceptance outcome; printed in the terminal summary."""
    ACCEPTANCE[number] = (bool(passed), detail)
    print(f"ACCEPTANCE {number}: {'PASS' if passed else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
