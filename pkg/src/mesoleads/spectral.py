"""Bath spectral functions and their discretization into damped lead modes."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class SpectralKind(enum.Enum):
    FLAT_HARD_CUTOFF = "flat"


@dataclass(frozen=True)
class SpectralFunction:
    """Flat band of height ``coupling`` on ``[-cutoff, cutoff]``, zero outside."""

    coupling: float
    cutoff: float
    kind: SpectralKind = SpectralKind.FLAT_HARD_CUTOFF

    def __post_init__(self):
        if not self.coupling > 0:
            raise ValueError(f"coupling must be positive, got {self.coupling}")
        if not self.cutoff > 0:
            raise ValueError(f"cutoff must be positive, got {self.cutoff}")

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        return np.where(np.abs(omega) <= self.cutoff, self.coupling, 0.0)

    evaluate = __call__

    @property
    def support(self) -> tuple[float, float]:
        return -self.cutoff, self.cutoff


@dataclass(frozen=True)
class DiscretizationScheme:
    """Linear core on ``[-inner_window, inner_window]`` plus log-spaced tails.

    ``n_log_per_side`` points go to each tail, so the lead has
    ``n_linear + 2 * n_log_per_side`` modes.
    """

    inner_window: float
    n_linear: int
    n_log_per_side: int = 0

    def __post_init__(self):
        if not self.inner_window > 0:
            raise ValueError(f"inner_window must be positive, got {self.inner_window}")
        if self.n_linear < 1:
            raise ValueError(f"n_linear must be >= 1, got {self.n_linear}")
        if self.n_log_per_side < 0:
            raise ValueError(f"n_log_per_side must be >= 0, got {self.n_log_per_side}")

    @property
    def n_modes(self) -> int:
        return self.n_linear + 2 * self.n_log_per_side

    @classmethod
    def from_total(cls, n_modes: int, inner_window: float, log_ratio: float = 0.1):
        """Split ``n_modes`` so that ``n_log_per_side / n_linear ~ log_ratio``."""
        if n_modes < 1:
            raise ValueError(f"n_modes must be >= 1, got {n_modes}")
        n_log = int(round(log_ratio * n_modes / (1.0 + 2.0 * log_ratio)))
        n_lin = n_modes - 2 * n_log
        if n_log > 0 and n_lin < 2:
            n_log, n_lin = 0, n_modes
        return cls(inner_window=inner_window, n_linear=n_lin, n_log_per_side=n_log)


@dataclass(frozen=True)
class LeadMode:
    energy: float
    coupling: float
    damping: float
    spacing: float
    occupation: float


@dataclass(frozen=True)
class BathSpec:
    temperature: float
    chemical_potential: float
    spectral: SpectralFunction
    scheme: DiscretizationScheme

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")

    @property
    def beta(self) -> float:
        return 1.0 / self.temperature


def fermi(energy, temperature: float, chemical_potential: float = 0.0):
    """Fermi-Dirac occupation, overflow-safe."""
    x = (np.asarray(energy, dtype=float) - chemical_potential) / temperature
    # 1/(e^x + 1) == (1 - tanh(x/2)) / 2
    return 0.5 * (1.0 - np.tanh(0.5 * x))


def build_grid(scheme: DiscretizationScheme, spectral: SpectralFunction):
    """Return ``(energies, spacings)`` of the lin-log grid, ascending."""
    w_star = scheme.inner_window
    w = spectral.cutoff
    n_lin, n_log = scheme.n_linear, scheme.n_log_per_side
    if w_star > w or (n_log > 0 and w_star >= w):
        raise ValueError(f"inner window {w_star} must lie inside the cutoff {w}")
    if n_log > 0 and n_lin < 2:
        raise ValueError("need at least 2 linear points when log tails are present")

    if n_lin == 1:
        linear = np.array([0.0])
    else:
        linear = np.linspace(-w_star, w_star, n_lin)
    if n_log > 0:
        # geometric in |energy|: excludes w_star (owned by the linear core), ends at w
        tail = w_star * (w / w_star) ** (np.arange(1, n_log + 1) / n_log)
        tail[-1] = w  # pin the band edge; rounding can push it past the cutoff
        energies = np.concatenate([-tail[::-1], linear, tail])
    else:
        energies = linear

    steps = np.diff(energies)
    if np.any(steps <= 0):
        raise ValueError("discretization produced duplicate or unordered energies")
    if energies.size == 1:
        spacings = np.array([2.0 * w_star])
    else:
        spacings = np.append(steps, steps[-1])
    return energies, spacings


def lead_arrays(bath: BathSpec):
    """Vectorized lead parameters: ``(energy, coupling, damping, spacing, occupation)``."""
    energies, spacings = build_grid(bath.scheme, bath.spectral)
    density = bath.spectral(energies)
    keep = density > 0
    energies, spacings, density = energies[keep], spacings[keep], density[keep]
    couplings = np.sqrt(density * spacings / (2.0 * np.pi))
    occupations = fermi(energies, bath.temperature, bath.chemical_potential)
    return energies, couplings, spacings.copy(), spacings, occupations


def build_lead(bath: BathSpec) -> list[LeadMode]:
    return [LeadMode(*map(float, row)) for row in zip(*lead_arrays(bath))]


def effective_spectral(lead, omega):
    """Lorentzian-sum approximation of the spectral function carried by ``lead``."""
    if len(lead) == 0:
        raise ValueError("lead has no modes")
    eps = np.array([m.energy for m in lead])
    kappa = np.array([m.coupling for m in lead])
    gamma = np.array([m.damping for m in lead])
    omega = np.asarray(omega, dtype=float)
    diff = omega[..., None] - eps
    return np.sum(kappa**2 * gamma / (diff**2 + (gamma / 2) ** 2), axis=-1)
