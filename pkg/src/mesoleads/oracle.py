"""Independent reference solutions.

* chain mapping: the bath is unitarily mapped onto a nearest-neighbour chain and
  the whole system + chains is evolved without any dissipator; exact until
  reflections from the chain end come back.
* Pauli rate equation for a single dot (high temperature limit).
* Landauer integrals for a static resonant level.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .lyapunov import evolve
from .model import ExtendedGenerator, Harmonic, SystemModel
from .spectral import SpectralFunction, fermi

logger = logging.getLogger(__name__)

ORTHOGONALITY_TOL = 1e-8
BOUNDARY_TOL = 1e-4


class OrthogonalityError(RuntimeError):
    pass


@dataclass(frozen=True)
class ChainBath:
    """Tridiagonal chain: ``energies[p]`` on site p, ``hoppings[0]`` couples the
    system to site 0 and ``hoppings[p]`` (p >= 1) couples sites p-1 and p."""

    energies: np.ndarray
    hoppings: np.ndarray
    star_energies: np.ndarray
    basis: np.ndarray
    tail_energy: float
    tail_hopping: float
    tail_deviation: float

    @property
    def length(self) -> int:
        return self.energies.size

    def initial_correlation(self, temperature, chemical_potential) -> np.ndarray:
        """Thermal star occupations expressed in the chain basis."""
        f = fermi(self.star_energies, temperature, chemical_potential)
        return self.basis.T @ (f[:, None] * self.basis)


def star_discretization(spectral: SpectralFunction, n_star: int):
    lo, hi = spectral.support
    edges = np.linspace(lo, hi, n_star + 1)
    omega = 0.5 * (edges[1:] + edges[:-1])
    weights = spectral(omega) * np.diff(edges) / (2 * math.pi)
    return omega, np.sqrt(weights)


def chain_map(spectral: SpectralFunction, length: int, n_star: int = 20_000) -> ChainBath:
    """Lanczos tridiagonalization (full re-orthogonalization) of a star bath."""
    if length < 2:
        raise ValueError("chain length must be >= 2")
    if n_star < 10 * length:
        raise ValueError("star grid too coarse for the requested chain length")
    omega, lam = star_discretization(spectral, n_star)
    g0 = float(np.linalg.norm(lam))
    V = np.zeros((n_star, length))
    alpha = np.zeros(length)
    beta = np.zeros(length)
    beta[0] = g0
    v = lam / g0
    for p in range(length):
        V[:, p] = v
        w = omega * v
        alpha[p] = v @ w
        if p == length - 1:
            break
        w -= alpha[p] * v
        if p > 0:
            w -= beta[p] * V[:, p - 1]
        for _ in range(2):
            w -= V[:, : p + 1] @ (V[:, : p + 1].T @ w)
        beta[p + 1] = np.linalg.norm(w)
        if beta[p + 1] < 1e-12:
            raise OrthogonalityError(f"Krylov space exhausted at site {p}; refine the star grid")
        v = w / beta[p + 1]
    loss = np.abs(V.T @ V - np.eye(length)).max()
    if loss > ORTHOGONALITY_TOL:
        raise OrthogonalityError(f"Lanczos basis lost orthogonality ({loss:.2e}); refine the star grid")
    tail = slice(length - max(length // 4, 1), length)
    e_b = float(np.mean(alpha[tail]))
    g_b = float(np.mean(beta[tail]))
    dev = float(max(np.abs(alpha[tail] - e_b).max(), np.abs(beta[tail] - g_b).max()))
    return ChainBath(alpha, beta, omega, V, e_b, g_b, dev)


def validity_horizon(chain: ChainBath) -> float:
    """Conservative light-cone time ``L_B / (4 g_B)``."""
    return chain.length / (4.0 * chain.tail_hopping)


@dataclass
class ChainSample:
    t: float
    particle: np.ndarray
    energy: np.ndarray
    system: np.ndarray
    system_rate: np.ndarray
    system_energy: float


@dataclass
class ChainRun:
    samples: list[ChainSample]
    horizon: float
    boundary_time: float
    generator: ExtendedGenerator
    sites: list[int]
    offsets: list[int]

    @property
    def valid_until(self) -> float:
        return min(self.horizon, self.boundary_time)

    @property
    def beyond_horizon(self) -> bool:
        return self.samples[-1].t > self.valid_until


class _EdgeMonitor:
    """Compares the far end of a chain with the same chain evolved without the system.

    A truncated chain is not stationary on its own, so the reference is the
    isolated chain rather than the initial occupations.
    """

    def __init__(self, chain: ChainBath, C0_chain, n_edge, offset):
        h = np.diag(chain.energies) + np.diag(chain.hoppings[1:], 1) + np.diag(chain.hoppings[1:], -1)
        self.E, V = np.linalg.eigh(h)
        self.V_edge = V[-n_edge:, :]
        self.B = V.T @ C0_chain @ V
        self.idx = np.arange(offset + chain.length - n_edge, offset + chain.length)

    def deviation(self, t, C) -> float:
        A = self.V_edge * np.exp(-1j * self.E * t)
        ref = np.einsum("ei,ij,ej->e", A, self.B, A.conj()).real
        return float(np.abs(C[self.idx, self.idx].real - ref).max())


def chain_generator(model: SystemModel, chains) -> tuple[ExtendedGenerator, list[int]]:
    """Closed (purely Hamiltonian) generator for the system plus its chains."""
    n = model.n_sites
    dim = n + sum(c.length for c in chains)
    h = np.zeros((dim, dim), dtype=complex)
    h[:n, :n] = model.hamiltonian
    offsets = []
    off = n
    for (site, _), chain in zip(model.couplings, chains):
        idx = np.arange(off, off + chain.length)
        h[idx, idx] = chain.energies
        h[site, off] = h[off, site] = chain.hoppings[0]
        h[idx[:-1], idx[1:]] = chain.hoppings[1:]
        h[idx[1:], idx[:-1]] = chain.hoppings[1:]
        offsets.append(off)
        off += chain.length
    drive = np.zeros(dim)
    drive[:n] = model.drive.amplitudes
    freq = float(model.drive.frequency)
    if freq == 0:
        drive[:] = 0
    gen = ExtendedGenerator(n, (), h, drive, np.zeros(dim), np.zeros(dim), freq, model.drive.kind, model)
    return gen, offsets


def chain_currents(C, site, offset, chain: ChainBath):
    """Particle and energy current out of a chain bath at the system bond."""
    g0 = chain.hoppings[0]
    c_first = C[site, offset].imag
    jp = -2.0 * g0 * c_first
    je = -2.0 * g0 * (chain.energies[0] * c_first + chain.hoppings[1] * C[site, offset + 1].imag)
    return jp, je


def chain_evolve(model: SystemModel, chains, system_init, t_final, dt=0.01, stride=10,
                 boundary_fraction=0.05) -> ChainRun:
    """Unitary evolution of the system plus chain baths from a product state."""
    chains = list(chains)
    if len(chains) != len(model.couplings):
        raise ValueError("need one chain per bath coupling")
    gen, offsets = chain_generator(model, chains)
    n = model.n_sites
    C0 = np.zeros((gen.dim, gen.dim), dtype=complex)
    C0[:n, :n] = np.atleast_2d(system_init)
    monitors = []
    for (site, bath), chain, off in zip(model.couplings, chains, offsets):
        block = slice(off, off + chain.length)
        C0[block, block] = chain.initial_correlation(bath.temperature, bath.chemical_potential)
        n_edge = max(1, int(round(boundary_fraction * chain.length)))
        monitors.append(_EdgeMonitor(chain, C0[block, block], n_edge, off))
    horizon = min((validity_horizon(c) for c in chains), default=math.inf)
    sites = [site for site, _ in model.couplings]
    samples = []
    boundary_time = math.inf

    def observer(t, C, dC):
        nonlocal boundary_time
        bonds = [chain_currents(C, s, off, ch) for s, off, ch in zip(sites, offsets, chains)]
        jp = [b[0] for b in bonds]
        je = [b[1] for b in bonds]
        h_s = gen.system_hamiltonian(t)
        samples.append(ChainSample(t, np.array(jp), np.array(je), C[:n, :n].copy(),
                                   dC[:n, :n].copy(), float(np.trace(h_s @ C[:n, :n]).real)))
        if math.isinf(boundary_time) and any(m.deviation(t, C) > BOUNDARY_TOL for m in monitors):
            boundary_time = t

    evolve(gen, C0, t_final, dt, observer=observer, stride=stride, check_every=0)
    run = ChainRun(samples, horizon, boundary_time, gen, sites, offsets)
    if run.beyond_horizon:
        logger.warning("chain run extends to t=%.3g beyond its validity horizon %.3g",
                       samples[-1].t, run.valid_until)
    return run


def chain_entropy_production_rate(run: ChainRun, sample: ChainSample, baths) -> float:
    from .thermo import system_entropy_rate

    flux = sum(b.beta * (je - b.chemical_potential * jp)
               for b, jp, je in zip(baths, sample.particle, sample.energy))
    return system_entropy_rate(sample.system, sample.system_rate) - flux


def pauli_rate(p, t, coupling, baths, energy):
    """Right-hand side of the classical rate equation for the dot population."""
    eps = energy(t)
    total = 0.0
    for temperature, mu in baths:
        f = fermi(eps, temperature, mu)
        total += -coupling * (1 - f) * p + coupling * f * (1 - p)
    return total


def pauli_evolve(coupling, baths, amplitude, frequency, p0, t_final, dt=0.005,
                 kind=Harmonic.SIN, offset=0.0):
    """RK4 for the dot population; returns ``(t, p, S)`` arrays.

    ``baths`` is a sequence of ``(temperature, chemical_potential)``.
    """
    if not 0 <= p0 <= 1:
        raise ValueError(f"initial population must be in [0, 1], got {p0}")
    trig = np.sin if kind is Harmonic.SIN else np.cos

    def energy(t):
        return offset + amplitude * trig(frequency * t)

    n = int(round(t_final / dt))
    t = np.arange(n + 1) * dt
    p = np.empty(n + 1)
    p[0] = p0
    for i in range(n):
        ti, pi = t[i], p[i]
        k1 = pauli_rate(pi, ti, coupling, baths, energy)
        k2 = pauli_rate(pi + 0.5 * dt * k1, ti + 0.5 * dt, coupling, baths, energy)
        k3 = pauli_rate(pi + 0.5 * dt * k2, ti + 0.5 * dt, coupling, baths, energy)
        k4 = pauli_rate(pi + dt * k3, ti + dt, coupling, baths, energy)
        p[i + 1] = pi + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    q = np.clip(p, 1e-300, 1.0)
    r = np.clip(1 - p, 1e-300, 1.0)
    entropy = -(p * np.log(q) + (1 - p) * np.log(r))
    return t, p, entropy


def lamb_shift(omega, spectral: SpectralFunction):
    """Principal-value level shift of a flat band, ``(G/2pi) ln|(w+W)/(w-W)|``."""
    w = spectral.cutoff
    return spectral.coupling / (2 * math.pi) * np.log(np.abs((omega + w) / (omega - w)))


def transmission(omega, level, left: SpectralFunction, right: SpectralFunction,
                 include_shift=True):
    gl, gr = left(omega), right(omega)
    shift = lamb_shift(omega, left) + lamb_shift(omega, right) if include_shift else 0.0
    return gl * gr / ((omega - level - shift) ** 2 + ((gl + gr) / 2) ** 2)


def landauer_currents(level, left, right, temp_left, mu_left, temp_right, mu_right,
                      include_shift=True):
    """Static particle and energy current out of the left bath."""
    lo = max(left.support[0], right.support[0])
    hi = min(left.support[1], right.support[1])

    def window(w):
        return fermi(w, temp_left, mu_left) - fermi(w, temp_right, mu_right)

    def tr(w):
        return transmission(w, level, left, right, include_shift)

    pts = sorted({level, mu_left, mu_right})
    pts = [p for p in pts if lo < p < hi]
    opts = dict(points=pts, limit=400, epsabs=1e-13, epsrel=1e-11)
    jp = quad(lambda w: tr(w) * window(w), lo, hi, **opts)[0] / (2 * math.pi)
    je = quad(lambda w: w * tr(w) * window(w), lo, hi, **opts)[0] / (2 * math.pi)
    return jp, je
