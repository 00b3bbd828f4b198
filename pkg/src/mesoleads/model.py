"""System models, the extended (system + leads) generator and initial states."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .spectral import BathSpec, lead_arrays

HERMITIAN_TOL = 1e-12


class Harmonic(enum.Enum):
    SIN = "sin"
    COS = "cos"


@dataclass(frozen=True)
class DriveProtocol:
    """On-site modulation ``amplitudes[i] * h(frequency * t)`` with ``h`` sin or cos."""

    amplitudes: tuple[float, ...]
    frequency: float = 0.0
    kind: Harmonic = Harmonic.SIN

    def __post_init__(self):
        if self.frequency < 0:
            raise ValueError(f"drive frequency must be >= 0, got {self.frequency}")

    @property
    def is_static(self) -> bool:
        return self.frequency == 0 or not np.any(self.amplitudes)

    def profile(self, t):
        phase = self.frequency * np.asarray(t, dtype=float)
        return np.sin(phase) if self.kind is Harmonic.SIN else np.cos(phase)

    def profile_rate(self, t):
        """Time derivative of :meth:`profile`."""
        phase = self.frequency * np.asarray(t, dtype=float)
        if self.kind is Harmonic.SIN:
            return self.frequency * np.cos(phase)
        return -self.frequency * np.sin(phase)


@dataclass(frozen=True)
class SystemModel:
    hamiltonian: np.ndarray
    drive: DriveProtocol
    couplings: tuple[tuple[int, BathSpec], ...] = ()

    def __post_init__(self):
        h = np.asarray(self.hamiltonian, dtype=complex)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValueError("system Hamiltonian must be a square matrix")
        if not np.allclose(h, h.conj().T, atol=HERMITIAN_TOL):
            raise ValueError("system Hamiltonian is not Hermitian")
        object.__setattr__(self, "hamiltonian", h)
        if len(self.drive.amplitudes) != h.shape[0]:
            raise ValueError("drive needs one amplitude per site")
        sites = [site for site, _ in self.couplings]
        if any(not 0 <= s < h.shape[0] for s in sites):
            raise ValueError(f"coupling site out of range: {sites}")

    @property
    def n_sites(self) -> int:
        return self.hamiltonian.shape[0]

    def system_hamiltonian(self, t) -> np.ndarray:
        amps = np.asarray(self.drive.amplitudes, dtype=float)
        return self.hamiltonian + np.diag(amps * self.drive.profile(t))


def resonant_level(baths, energy=0.0, amplitude=0.0, frequency=0.0, kind=Harmonic.SIN):
    """Single dot coupled to every bath in ``baths``."""
    drive = DriveProtocol((float(amplitude),), float(frequency), kind)
    return SystemModel(np.array([[energy]], dtype=complex), drive,
                       tuple((0, b) for b in baths))


def two_dot(left: BathSpec, right: BathSpec, hopping, amplitude=0.0, frequency=0.0,
            energies=(0.0, 0.0), kind=Harmonic.SIN):
    """Two tunnel-coupled dots; only the first (left) one is driven."""
    h = np.array([[energies[0], hopping], [hopping, energies[1]]], dtype=complex)
    drive = DriveProtocol((float(amplitude), 0.0), float(frequency), kind)
    return SystemModel(h, drive, ((0, left), (1, right)))


@dataclass(frozen=True)
class LeadBlock:
    site: int
    bath: BathSpec
    index: slice
    energies: np.ndarray
    couplings: np.ndarray
    dampings: np.ndarray
    occupations: np.ndarray

    @property
    def size(self) -> int:
        return self.energies.size


@dataclass(frozen=True)
class ExtendedGenerator:
    """Block data of ``dC/dt = -(W C + C W^dag) + F`` with ``W(t) = W0 + W1 h(wt)``.

    ``upsilon`` and ``injection`` hold the diagonals of the rate and source
    matrices. The drive part ``W1`` is diagonal and stored as ``drive_diag``.
    """

    n_sys: int
    leads: tuple[LeadBlock, ...]
    h_static: np.ndarray
    drive_diag: np.ndarray
    upsilon: np.ndarray
    injection: np.ndarray
    frequency: float
    kind: Harmonic
    model: SystemModel | None = None
    _sparse_w0: sp.csr_matrix | None = field(default=None, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.h_static.shape[0]

    @property
    def W0(self) -> np.ndarray:
        return 1j * self.h_static + np.diag(self.upsilon / 2)

    @property
    def W1(self) -> np.ndarray:
        return np.diag(1j * self.drive_diag)

    @property
    def F(self) -> np.ndarray:
        return np.diag(self.injection).astype(complex)

    @property
    def Upsilon(self) -> np.ndarray:
        return np.diag(self.upsilon)

    @property
    def is_static(self) -> bool:
        return self.frequency == 0 or not np.any(self.drive_diag)

    @property
    def w0_sparse(self) -> sp.csr_matrix:
        if self._sparse_w0 is None:
            object.__setattr__(self, "_sparse_w0", sp.csr_matrix(self.W0))
        return self._sparse_w0

    def profile(self, t):
        phase = self.frequency * np.asarray(t, dtype=float)
        return np.sin(phase) if self.kind is Harmonic.SIN else np.cos(phase)

    def profile_rate(self, t):
        phase = self.frequency * np.asarray(t, dtype=float)
        if self.kind is Harmonic.SIN:
            return self.frequency * np.cos(phase)
        return -self.frequency * np.sin(phase)

    def hamiltonian_at(self, t) -> np.ndarray:
        """Single-particle ``H_ext(t)`` of system plus leads."""
        h = self.h_static.copy()
        idx = np.arange(self.n_sys)
        h[idx, idx] += self.drive_diag[: self.n_sys] * self.profile(t)
        return h

    def system_hamiltonian(self, t) -> np.ndarray:
        return self.hamiltonian_at(t)[: self.n_sys, : self.n_sys]

    def system_hamiltonian_rate(self, t) -> np.ndarray:
        return np.diag(self.drive_diag[: self.n_sys] * self.profile_rate(t))

    def coupling_matrix(self, alpha: int) -> np.ndarray:
        """Single-particle matrix of the system-lead coupling ``H_SL`` for lead ``alpha``."""
        lead = self.leads[alpha]
        h = np.zeros((self.dim, self.dim), dtype=complex)
        h[lead.site, lead.index] = lead.couplings
        h[lead.index, lead.site] = lead.couplings
        return h

    def lead_projector(self, alpha: int) -> np.ndarray:
        n = np.zeros(self.dim)
        n[self.leads[alpha].index] = 1.0
        return np.diag(n)

    def lead_hamiltonian(self, alpha: int) -> np.ndarray:
        lead = self.leads[alpha]
        e = np.zeros(self.dim)
        e[lead.index] = lead.energies
        return np.diag(e)


def generator_at(gen: ExtendedGenerator, t) -> np.ndarray:
    """Dense ``W(t) = W0 + W1 h(wt)``."""
    w = gen.W0
    idx = np.arange(gen.n_sys)
    w[idx, idx] += 1j * gen.drive_diag[: gen.n_sys] * gen.profile(t)
    return w


def assemble_generator(model: SystemModel) -> ExtendedGenerator:
    n_sys = model.n_sites
    blocks = []
    offset = n_sys
    for site, bath in model.couplings:
        eps, kappa, gamma, _, occ = lead_arrays(bath)
        if eps.size == 0:
            raise ValueError(f"bath on site {site} produced an empty lead")
        blocks.append(LeadBlock(site, bath, slice(offset, offset + eps.size),
                                eps, kappa, gamma, occ))
        offset += eps.size
    dim = offset

    h = np.zeros((dim, dim), dtype=complex)
    h[:n_sys, :n_sys] = model.hamiltonian
    upsilon = np.zeros(dim)
    injection = np.zeros(dim)
    for b in blocks:
        i = np.arange(b.index.start, b.index.stop)
        h[i, i] = b.energies
        h[b.site, i] = b.couplings
        h[i, b.site] = b.couplings
        upsilon[i] = b.dampings
        injection[i] = b.dampings * b.occupations

    drive = np.zeros(dim)
    drive[:n_sys] = model.drive.amplitudes
    freq = float(model.drive.frequency)
    if freq == 0:
        drive[:] = 0.0
    return ExtendedGenerator(n_sys, tuple(blocks), h, drive, upsilon, injection,
                             freq, model.drive.kind, model)


def initial_state(gen: ExtendedGenerator, system_init) -> np.ndarray:
    """Product state: given system block, thermal leads, no cross correlations."""
    c_s = np.atleast_2d(np.asarray(system_init, dtype=complex))
    if c_s.shape != (gen.n_sys, gen.n_sys):
        raise ValueError(f"system occupation must be {gen.n_sys}x{gen.n_sys}")
    if not np.allclose(c_s, c_s.conj().T, atol=HERMITIAN_TOL):
        raise ValueError("system occupation matrix is not Hermitian")
    nu = np.linalg.eigvalsh(c_s)
    if nu.min() < -HERMITIAN_TOL or nu.max() > 1 + HERMITIAN_TOL:
        raise ValueError(f"occupations must lie in [0, 1], got eigenvalues {nu}")
    c = np.zeros((gen.dim, gen.dim), dtype=complex)
    c[: gen.n_sys, : gen.n_sys] = c_s
    for b in gen.leads:
        i = np.arange(b.index.start, b.index.stop)
        c[i, i] = b.occupations
    return c
