"""Time integration and static solution of the differential Lyapunov equation

    dC/dt = -(W(t) C + C W(t)^dag) + F.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .model import ExtendedGenerator

logger = logging.getLogger(__name__)

EIGENVALUE_TOL = 1e-6
CONDITION_LIMIT = 1e10


class IntegrationError(RuntimeError):
    """The correlation matrix left the physical region during integration."""


class SolverError(RuntimeError):
    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


def default_dt(gen: ExtendedGenerator, coupling: float = 1.0) -> float:
    dt = 0.01 / coupling
    if not gen.is_static:
        dt = min(dt, 0.02 * 2 * math.pi / gen.frequency)
    return dt


def rhs(gen: ExtendedGenerator, C: np.ndarray, t: float) -> np.ndarray:
    """Right-hand side of the Lyapunov flow at time ``t``."""
    x = gen.w0_sparse @ C
    if not gen.is_static:
        n = gen.n_sys
        x[:n] += (1j * gen.drive_diag[:n] * gen.profile(t))[:, None] * C[:n]
    out = -(x + x.conj().T)
    out[np.diag_indices_from(out)] += gen.injection
    return out


def _hermitize(C):
    return 0.5 * (C + C.conj().T)


def step(gen: ExtendedGenerator, C: np.ndarray, t: float, dt: float) -> np.ndarray:
    """One classical RK4 step, re-Hermitized."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    k1 = rhs(gen, C, t)
    k2 = rhs(gen, C + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = rhs(gen, C + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = rhs(gen, C + dt * k3, t + dt)
    return _hermitize(C + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4))


def check_bounds(C: np.ndarray, t: float, tol: float = EIGENVALUE_TOL):
    nu = np.linalg.eigvalsh(C)
    if nu[0] < -tol or nu[-1] > 1 + tol:
        raise IntegrationError(
            f"correlation matrix eigenvalues left [0, 1] at t={t:.6g}: "
            f"min={nu[0]:.3e}, max={nu[-1]:.6f}"
        )
    return nu


@dataclass
class Snapshot:
    t: float
    C: np.ndarray
    dC: np.ndarray


def evolve(gen, C0, t_final, dt=None, observer=None, stride=10, t0=0.0,
           check_every=1, keep=False):
    """Integrate from ``t0`` to ``t_final`` with fixed-step RK4.

    ``observer(t, C, dCdt)`` is called at ``t0`` and then every ``stride`` steps.
    Eigenvalue bounds are checked on every ``check_every``-th observed sample.
    With ``keep=True`` the observed snapshots are also returned as a list.
    Returns ``(C_final, snapshots)``.
    """
    if not t_final > t0:
        raise ValueError("t_final must exceed the start time")
    if dt is None:
        dt = default_dt(gen)
    n_steps = int(round((t_final - t0) / dt))
    if n_steps < 1 or not math.isclose(n_steps * dt, t_final - t0, rel_tol=1e-9):
        raise ValueError(f"t_final - t0 = {t_final - t0} is not a multiple of dt = {dt}")
    C = _hermitize(np.array(C0, dtype=complex))
    snapshots = []
    n_seen = 0

    def observe(i, C):
        nonlocal n_seen
        t = t0 + i * dt
        if check_every and n_seen % check_every == 0:
            check_bounds(C, t)
        n_seen += 1
        if observer is None and not keep:
            return
        d = rhs(gen, C, t)
        if observer is not None:
            observer(t, C, d)
        if keep:
            snapshots.append(Snapshot(t, C.copy(), d))

    observe(0, C)
    for i in range(1, n_steps + 1):
        C = step(gen, C, t0 + (i - 1) * dt, dt)
        if i % stride == 0 or i == n_steps:
            observe(i, C)
    return C, snapshots


def eigendecompose(W0: np.ndarray, condition_limit: float = CONDITION_LIMIT):
    """Return ``(lam, S, S_inv)`` with ``W0 = S diag(lam) S_inv``."""
    lam, S = np.linalg.eig(W0)
    cond = np.linalg.cond(S)
    if not np.isfinite(cond) or cond > condition_limit:
        raise SolverError(f"W0 is not safely diagonalizable (cond(S) = {cond:.3e})")
    return lam, S, np.linalg.inv(S)


def to_eigenbasis(M, S_inv):
    return S_inv @ M @ S_inv.conj().T


def from_eigenbasis(Mt, S):
    return S @ Mt @ S.conj().T


def steady_state(gen: ExtendedGenerator, decomposition=None,
                 residual_tol: float = 1e-10) -> np.ndarray:
    """Solve ``W0 C + C W0^dag = F`` by diagonalizing ``W0``."""
    W0 = gen.W0
    lam, S, S_inv = decomposition or eigendecompose(W0)
    denom = lam[:, None] + lam.conj()[None, :]
    if np.min(np.abs(denom)) < 1e-12:
        raise SolverError("undamped mode: W0 has an eigenvalue pair with zero real part")
    Ct = to_eigenbasis(gen.F, S_inv) / denom
    C = _hermitize(from_eigenbasis(Ct, S))
    residual = np.max(np.abs(W0 @ C + C @ W0.conj().T - gen.F))
    if residual > residual_tol:
        raise SolverError(f"steady-state residual {residual:.3e} exceeds {residual_tol:.1e}",
                          residual)
    return C
