"""Currents, heat, work and entropy production from correlation matrices.

Sign convention: ``J`` currents are counted out of the bath (positive when
particles or energy enter the system). Heat ``Q_a`` is the heat dissipated
into bath ``a``, so ``Q_a = -int J^Q_a dt``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .floquet import FloquetSolution, cycle_average, harmonic_weights
from .model import ExtendedGenerator

ENTROPY_CLIP = 1e-12


def _cross(C, lead):
    """``C[s, k]`` for the lead modes ``k`` of ``lead``."""
    return C[lead.site, lead.index]


def particle_current(gen: ExtendedGenerator, C: np.ndarray, alpha: int) -> float:
    lead = gen.leads[alpha]
    return float(-2.0 * np.sum(lead.couplings * _cross(C, lead).imag))


def coupling_energy(gen: ExtendedGenerator, C: np.ndarray, alpha: int) -> float:
    """``<H_SL>`` for lead ``alpha``."""
    lead = gen.leads[alpha]
    return float(2.0 * np.sum(lead.couplings * _cross(C, lead).real))


def energy_current(gen: ExtendedGenerator, C: np.ndarray, alpha: int) -> float:
    """Energy current out of bath ``alpha``.

    Commutator with the lead Hamiltonian plus the dissipator contribution
    ``Tr[H_SL D(rho)] = -1/2 Tr[h_SL (Y C + C Y)]``.
    """
    lead = gen.leads[alpha]
    c = _cross(C, lead)
    coherent = -2.0 * np.sum(lead.energies * lead.couplings * c.imag)
    dissipative = -np.sum(lead.dampings * lead.couplings * c.real)
    return float(coherent + dissipative)


def heat_current(gen: ExtendedGenerator, C: np.ndarray, alpha: int) -> float:
    mu = gen.leads[alpha].bath.chemical_potential
    return energy_current(gen, C, alpha) - mu * particle_current(gen, C, alpha)


def external_currents(gen: ExtendedGenerator, C: np.ndarray, alpha: int):
    """Particle and energy currents from the residual baths into lead ``alpha``."""
    lead = gen.leads[alpha]
    idx = np.arange(lead.index.start, lead.index.stop)
    inflow = lead.dampings * (lead.occupations - C[idx, idx].real)
    return float(np.sum(inflow)), float(np.sum(lead.energies * inflow))


def _sparse_coupling(gen: ExtendedGenerator, alpha: int) -> sp.csr_matrix:
    lead = gen.leads[alpha]
    k = np.arange(lead.index.start, lead.index.stop)
    s = np.full(k.size, lead.site)
    rows = np.concatenate([s, k])
    cols = np.concatenate([k, s])
    vals = np.concatenate([lead.couplings, lead.couplings]).astype(complex)
    return sp.csr_matrix((vals, (rows, cols)), shape=(gen.dim, gen.dim))


def _commutator_expectation(A, B, C) -> float:
    """``i <[A, B]>`` for quadratic operators with single-particle matrices A, B."""
    K = sp.csr_matrix(A @ B - B @ A)
    return float((1j * K.multiply(C.T).sum()).real)


def energy_current_from_rate(gen: ExtendedGenerator, C: np.ndarray, dC: np.ndarray,
                             alpha: int, t: float) -> float:
    """Energy current from ``d<H_SL>/dt + i<[H_SL, H_S(t)]>``.

    ``dC`` is the instantaneous right-hand side of the flow. When several baths
    share a site their couplings do not commute; those are folded into the
    system part so the result stays equal to :func:`energy_current`.
    """
    lead = gen.leads[alpha]
    rate = 2.0 * np.sum(lead.couplings * dC[lead.site, lead.index].real)
    h_sl = _sparse_coupling(gen, alpha)
    n = gen.n_sys
    h_s = sp.lil_matrix((gen.dim, gen.dim), dtype=complex)
    h_s[:n, :n] = gen.system_hamiltonian(t)
    h_s = h_s.tocsr()
    for beta, other in enumerate(gen.leads):
        if beta != alpha and other.site == lead.site:
            h_s = h_s + _sparse_coupling(gen, beta)
    return float(rate + _commutator_expectation(h_sl, h_s, C))


def system_energy(gen: ExtendedGenerator, C: np.ndarray, t: float) -> float:
    n = gen.n_sys
    return float(np.trace(gen.system_hamiltonian(t) @ C[:n, :n]).real)


def drive_power(gen: ExtendedGenerator, C: np.ndarray, t: float) -> float:
    """``<dH_S/dt>``, the instantaneous power delivered by the drive."""
    n = gen.n_sys
    return float(np.sum(gen.drive_diag[:n] * gen.profile_rate(t) * np.diag(C[:n, :n]).real))


def _clipped_eigen(C_S, clip=ENTROPY_CLIP):
    nu, v = np.linalg.eigh(0.5 * (C_S + C_S.conj().T))
    return np.clip(nu, clip, 1.0 - clip), v


def system_entropy(C_S, clip: float = ENTROPY_CLIP) -> float:
    """Von Neumann entropy (nats) of the Gaussian state with correlation ``C_S``."""
    nu, _ = _clipped_eigen(np.atleast_2d(np.asarray(C_S, dtype=complex)), clip)
    return float(-np.sum(nu * np.log(nu) + (1 - nu) * np.log(1 - nu)))


def system_entropy_rate(C_S, dC_S, clip: float = ENTROPY_CLIP) -> float:
    """``dS_S/dt = Tr[dC_S log((1 - C_S)/C_S)]``."""
    nu, v = _clipped_eigen(np.atleast_2d(C_S), clip)
    proj = np.einsum("ia,ij,ja->a", v.conj(), np.atleast_2d(dC_S), v).real
    return float(np.sum(proj * np.log((1 - nu) / nu)))


@dataclass
class BathRecord:
    particle: float
    energy: float
    heat: float
    external_particle: float
    external_energy: float
    coupling_energy: float
    heat_dissipated: float = 0.0


@dataclass
class ThermoRecord:
    t: float
    baths: list[BathRecord]
    system_energy: float
    system_entropy: float
    entropy_rate_system: float
    power: float
    entropy_production_rate: float
    work_chem: float = 0.0
    work_ext: float = 0.0
    work_ext_direct: float = 0.0
    internal_energy: float = 0.0
    entropy_production: float = 0.0

    @property
    def work(self) -> float:
        return self.work_chem + self.work_ext

    @property
    def first_law_residual(self) -> float:
        return self.internal_energy - self.work + sum(b.heat_dissipated for b in self.baths)


def instantaneous(gen: ExtendedGenerator, t: float, C: np.ndarray, dC: np.ndarray) -> ThermoRecord:
    baths = []
    sigma_flux = 0.0
    for alpha, lead in enumerate(gen.leads):
        jp = particle_current(gen, C, alpha)
        je = energy_current(gen, C, alpha)
        jq = je - lead.bath.chemical_potential * jp
        ip, ie = external_currents(gen, C, alpha)
        baths.append(BathRecord(jp, je, jq, ip, ie, coupling_energy(gen, C, alpha)))
        sigma_flux += lead.bath.beta * jq
    n = gen.n_sys
    s_rate = system_entropy_rate(C[:n, :n], dC[:n, :n])
    return ThermoRecord(
        t=t,
        baths=baths,
        system_energy=system_energy(gen, C, t),
        system_entropy=system_entropy(C[:n, :n]),
        entropy_rate_system=s_rate,
        power=drive_power(gen, C, t),
        entropy_production_rate=s_rate - sigma_flux,
    )


@dataclass
class ThermoAccumulator:
    """Observer turning a uniformly sampled trajectory into cumulative records.

    Integrals use the trapezoid rule between consecutive samples.
    """

    gen: ExtendedGenerator
    records: list[ThermoRecord] = field(default_factory=list)

    def __call__(self, t, C, dC):
        rec = instantaneous(self.gen, t, C, dC)
        if self.records:
            prev = self.records[-1]
            h = 0.5 * (t - prev.t)
            for b, pb in zip(rec.baths, prev.baths):
                b.heat_dissipated = pb.heat_dissipated - h * (b.heat + pb.heat)
            rec.work_chem = prev.work_chem + sum(
                h * lead.bath.chemical_potential * (b.particle + pb.particle)
                for lead, b, pb in zip(self.gen.leads, rec.baths, prev.baths))
            energy_in = sum(h * (b.energy + pb.energy) for b, pb in zip(rec.baths, prev.baths))
            self._energy_in += energy_in
            rec.work_ext_direct = prev.work_ext_direct + h * (rec.power + prev.power)
        else:
            self._origin = rec
            self._energy_in = 0.0
        first = self._origin
        u = rec.system_energy + sum(b.coupling_energy for b in rec.baths)
        u0 = first.system_energy + sum(b.coupling_energy for b in first.baths)
        rec.internal_energy = u - u0
        rec.work_ext = rec.internal_energy - self._energy_in
        rec.entropy_production = (rec.system_entropy - first.system_entropy) + sum(
            lead.bath.beta * b.heat_dissipated for lead, b in zip(self.gen.leads, rec.baths))
        self.records.append(rec)


def accumulate(trajectory, gen: ExtendedGenerator) -> list[ThermoRecord]:
    """Cumulative thermodynamics along ``(t, C, dC/dt)`` samples."""
    acc = ThermoAccumulator(gen)
    for t, C, dC in trajectory:
        acc(t, C, dC)
    return acc.records


def bath_columns(n_baths: int) -> list[str]:
    cols = ["t"]
    for a in range(n_baths):
        cols += [f"{name}_{a}" for name in
                 ("JP", "JE", "JQ", "IP", "IE", "E_SL", "Q")]
    cols += ["E_S", "S_S", "dS_S", "power", "sigma_dot",
             "W_chem", "W_ext", "W_ext_direct", "dU", "Sigma"]
    return cols


def record_row(rec: ThermoRecord) -> list[float]:
    row = [rec.t]
    for b in rec.baths:
        row += [b.particle, b.energy, b.heat, b.external_particle, b.external_energy,
                b.coupling_energy, b.heat_dissipated]
    row += [rec.system_energy, rec.system_entropy, rec.entropy_rate_system, rec.power,
            rec.entropy_production_rate, rec.work_chem, rec.work_ext, rec.work_ext_direct,
            rec.internal_energy, rec.entropy_production]
    return row


@dataclass(frozen=True)
class CycleAverages:
    particle: tuple[float, ...]
    energy: tuple[float, ...]
    heat: tuple[float, ...]
    external_particle: tuple[float, ...]
    external_energy: tuple[float, ...]
    power: float
    entropy_production_rate: float


def _averages_from(gen, values, power):
    nb = len(gen.leads)
    jp = tuple(float(values[4 * a]) for a in range(nb))
    je = tuple(float(values[4 * a + 1]) for a in range(nb))
    ip = tuple(float(values[4 * a + 2]) for a in range(nb))
    ie = tuple(float(values[4 * a + 3]) for a in range(nb))
    jq = tuple(e - lead.bath.chemical_potential * p for e, p, lead in zip(je, jp, gen.leads))
    sigma = -sum(lead.bath.beta * q for lead, q in zip(gen.leads, jq))
    return CycleAverages(jp, je, jq, ip, ie, float(power), sigma)


def _linear_observables(gen, C):
    vals = []
    for a in range(len(gen.leads)):
        vals += [particle_current(gen, C, a), energy_current(gen, C, a),
                 *external_currents(gen, C, a)]
    return vals


def cycle_averages(gen: ExtendedGenerator, sol: FloquetSolution, n_samples=None,
                   method: str = "harmonic") -> CycleAverages:
    """Period averages of all currents; ``entropy_production_rate = -sum_a beta_a <J^Q_a>``.

    Currents are linear in ``C``, so their averages are the currents of ``C_0``.
    The power couples the drive rate to ``C_{+-1}``. ``method="sampled"`` instead
    averages the reconstructed trajectory on a uniform grid.
    """
    if method == "sampled":
        def obs(t, C, dC):
            return np.array(_linear_observables(gen, C) + [drive_power(gen, C, t)])

        avg = cycle_average(sol, obs, n_samples)
        return _averages_from(gen, avg[:-1], avg[-1])
    if method != "harmonic":
        raise ValueError(f"unknown averaging method {method!r}")
    values = _linear_observables(gen, sol.harmonics[0])
    power = 0.0
    if 1 in sol.harmonics:
        n = gen.n_sys
        w_plus, w_minus = harmonic_weights(gen.kind)
        mix = 1j * sol.frequency * (w_plus * sol.harmonics[-1] - w_minus * sol.harmonics[1])
        power = float(np.sum(gen.drive_diag[:n] * np.diag(mix[:n, :n])).real)
    return _averages_from(gen, values, power)


@dataclass(frozen=True)
class RectificationResult:
    forward_current: float
    backward_current: float
    coefficient: float
    sigma_forward: float
    sigma_backward: float


def rectification_coefficient(forward: float, backward: float) -> float:
    denom = abs(forward - backward)
    if denom < 1e-12:
        raise ValueError("rectification coefficient undefined: forward == backward current")
    return abs(forward + backward) / denom


def rectification(forward: FloquetSolution, backward: FloquetSolution,
                  gen_f: ExtendedGenerator, gen_b: ExtendedGenerator,
                  bath: int = 0) -> RectificationResult:
    """Energy-current rectification of bath ``bath`` between two configurations."""
    avg_f = cycle_averages(gen_f, forward)
    avg_b = cycle_averages(gen_b, backward)
    jf, jb = avg_f.energy[bath], avg_b.energy[bath]
    return RectificationResult(jf, jb, rectification_coefficient(jf, jb),
                               avg_f.entropy_production_rate, avg_b.entropy_production_rate)


def particle_rectification(avg_f: CycleAverages, avg_b: CycleAverages, bath: int = 0):
    """Same coefficient for particle currents; ``nan`` when both vanish."""
    jf, jb = avg_f.particle[bath], avg_b.particle[bath]
    if abs(jf - jb) < 1e-12:
        return math.nan
    return abs(jf + jb) / abs(jf - jb)
