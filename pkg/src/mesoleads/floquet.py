"""Limit cycles of the periodically driven Lyapunov equation.

The periodic solution is expanded as ``C(t) = sum_n C_n exp(i n w t)``. In the
eigenbasis of ``W0`` each harmonic obeys an element-wise update that couples it
to its two neighbours only, which is swept Gauss-Seidel style until it settles.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .lyapunov import SolverError, eigendecompose, from_eigenbasis, steady_state, to_eigenbasis
from .model import ExtendedGenerator, Harmonic

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
MAX_SWEEPS = 10_000
MAX_HARMONICS = 256
DIVERGENCE_LIMIT = 1e6


class ConvergenceError(SolverError):
    pass


@dataclass
class FloquetSolution:
    harmonics: dict[int, np.ndarray]
    frequency: float
    n_max: int
    residual: float
    sweeps: int = 0
    harmonic_norms: dict[int, float] = field(default_factory=dict)

    def __getitem__(self, n: int) -> np.ndarray:
        return self.harmonics[n]

    @property
    def period(self) -> float:
        return 2 * math.pi / self.frequency if self.frequency > 0 else math.inf

    @property
    def orders(self):
        return sorted(self.harmonics)


def harmonic_weights(kind: Harmonic) -> tuple[complex, complex]:
    """Coefficients of ``exp(+iwt)`` and ``exp(-iwt)`` in the drive profile."""
    if kind is Harmonic.COS:
        return 0.5, 0.5
    return 1 / 2j, -1 / 2j


def solve_limit_cycle(gen: ExtendedGenerator, n_max: int = 8, tol: float = DEFAULT_TOL,
                      max_sweeps: int = MAX_SWEEPS, auto_extend: bool = True,
                      max_harmonics: int = MAX_HARMONICS) -> FloquetSolution:
    """Fourier harmonics of the limit cycle of ``gen``.

    With ``auto_extend`` the truncation doubles until the outermost harmonic
    drops below ``tol``.
    """
    decomposition = eigendecompose(gen.W0)
    if gen.is_static:
        C0 = steady_state(gen, decomposition)
        return FloquetSolution({0: C0}, gen.frequency, 0, 0.0, 1, {0: float(np.abs(C0).max())})

    lam, S, S_inv = decomposition
    omega = gen.frequency
    w_plus, w_minus = harmonic_weights(gen.kind)
    W1t = S_inv @ (1j * gen.drive_diag[:, None] * S)
    W1t_dag = W1t.conj().T
    Ft = to_eigenbasis(gen.F, S_inv)
    base = lam[:, None] + lam.conj()[None, :]
    if np.min(np.abs(base)) < 1e-12:
        raise SolverError("undamped mode: W0 has an eigenvalue pair with zero real part")

    Ct = {0: Ft / base}
    total_sweeps = 0
    while True:
        for n in range(1, n_max + 1):
            Ct.setdefault(n, np.zeros_like(Ft))
        denom = {n: 1j * n * omega + base for n in range(0, n_max + 1)}
        zero = np.zeros_like(Ft)

        def neighbours(n):
            lower = Ct[n - 1] if n >= 1 else Ct[1].conj().T
            upper = Ct.get(n + 1, zero)
            return w_plus * lower + w_minus * upper

        change = math.inf
        sweep = 0
        while sweep < max_sweeps:
            sweep += 1
            active = min(sweep, n_max)
            change = 0.0
            for n in range(0, active + 1):
                b = neighbours(n) if n_max > 0 else zero
                rhs = -(W1t @ b) - b @ W1t_dag
                if n == 0:
                    rhs = rhs + Ft
                new = rhs / denom[n]
                change = max(change, float(np.abs(new - Ct[n]).max()))
                Ct[n] = new
            if not math.isfinite(change) or change > DIVERGENCE_LIMIT:
                raise ConvergenceError(
                    f"Gauss-Seidel sweep diverged at sweep {sweep} (change {change:.3e}); "
                    "the drive is too strong for the harmonic iteration", change)
            if active == n_max and change < tol:
                break
        total_sweeps += sweep
        if change >= tol:
            raise ConvergenceError(
                f"Gauss-Seidel sweep did not converge after {max_sweeps} sweeps "
                f"(last change {change:.3e})", change)
        C_full = {n: from_eigenbasis(Ct[n], S) for n in range(0, n_max + 1)}
        tail = float(np.abs(C_full[n_max]).max())
        if tail < tol or not auto_extend:
            break
        if 2 * n_max > max_harmonics:
            raise ConvergenceError(
                f"harmonic tail {tail:.3e} still above tol at n_max={n_max}", tail)
        logger.debug("tail harmonic %.3e at n_max=%d, doubling", tail, n_max)
        n_max *= 2

    harmonics = {}
    for n in range(0, n_max + 1):
        harmonics[n] = C_full[n]
        if n > 0:
            harmonics[-n] = C_full[n].conj().T
    harmonics[0] = 0.5 * (harmonics[0] + harmonics[0].conj().T)
    residual = limit_cycle_residual(gen, harmonics)
    norms = {n: float(np.abs(harmonics[n]).max()) for n in range(0, n_max + 1)}
    return FloquetSolution(harmonics, omega, n_max, residual, total_sweeps, norms)


def limit_cycle_residual(gen: ExtendedGenerator, harmonics) -> float:
    """Max-norm residual of the harmonic balance equations over all orders."""
    W0 = gen.W0
    W1 = gen.W1
    w_plus, w_minus = harmonic_weights(gen.kind)
    n_max = max(harmonics)
    zero = np.zeros_like(W0)
    worst = 0.0
    for n in range(-n_max, n_max + 1):
        Cn = harmonics[n]
        b = w_plus * harmonics.get(n - 1, zero) + w_minus * harmonics.get(n + 1, zero)
        lhs = 1j * n * gen.frequency * Cn + W0 @ Cn + Cn @ W0.conj().T
        rhs = -(W1 @ b) - b @ W1.conj().T
        if n == 0:
            rhs = rhs + gen.F
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    return worst


def reconstruct(sol: FloquetSolution, t: float) -> np.ndarray:
    C = sum(Cn * np.exp(1j * n * sol.frequency * t) for n, Cn in sol.harmonics.items())
    return 0.5 * (C + C.conj().T)


def reconstruct_rate(sol: FloquetSolution, t: float) -> np.ndarray:
    """Analytic ``dC/dt`` of the limit cycle."""
    d = sum(1j * n * sol.frequency * Cn * np.exp(1j * n * sol.frequency * t)
            for n, Cn in sol.harmonics.items() if n != 0)
    if isinstance(d, int):
        return np.zeros_like(sol.harmonics[0])
    return 0.5 * (d + d.conj().T)


def sample_times(sol: FloquetSolution, n_samples: int | None = None):
    """Uniform samples over one period, endpoint excluded."""
    if n_samples is None:
        n_samples = max(64 * max(sol.n_max, 1), 64)
    if sol.frequency == 0:
        return np.zeros(1)
    return np.arange(n_samples) * (sol.period / n_samples)


def cycle_average(sol: FloquetSolution, observable, n_samples: int | None = None):
    """Period average of ``observable(t, C, dCdt)``.

    The trapezoid rule on a periodic grid reduces to the plain sample mean,
    which is exact for trigonometric polynomials of degree below ``n_samples``.
    """
    times = sample_times(sol, n_samples)
    values = [observable(t, reconstruct(sol, t), reconstruct_rate(sol, t)) for t in times]
    return sum(values[1:], values[0]) / len(values)
