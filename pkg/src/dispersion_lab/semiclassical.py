"""Pseudo-spectral time stepping of the small-dispersion KdV and defocusing
NLS flows on a periodic interval, plus the weak-limit machinery built on
their trajectories.

KdV:  u_t - 6 u u_x + eps**2 u_xxx = 0, integrating-factor RK4 with the
dispersive term integrated exactly and a 2/3 dealiasing mask.

NLS:  i eps u_t + (eps**2/2) u_xx + (1 - |u|**2) u = 0, Strang splitting.
Both half-steps are exact, so the scheme is unitary (mass conserved to
roundoff) and time reversible.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from dispersion_lab.errors import (
    ConservationError,
    DomainError,
    InstabilityError,
    ShapeError,
    ValidationError,
)
from dispersion_lab.fields import FieldGrid, mollify, spectral_derivative, wavenumbers
from dispersion_lab.reports import DiagnosticsReport

log = logging.getLogger(__name__)

BLOWUP_NORM = 1e6
KDV_COURANT = 0.5
# relative drift allowed over a run, per logged invariant
DRIFT_TOLERANCES = {
    "kdv": {"mass": 1e-6, "momentum": 1e-6},
    "nls": {"mass": 1e-8, "energy": 1e-6},
}


@dataclass(frozen=True)
class Grid1D:
    """Periodic grid of ``n`` points on ``[origin, origin + length)``."""

    length: float
    n: int
    origin: Optional[float] = None

    def __post_init__(self):
        if not self.length > 0:
            raise DomainError(f"length must be positive, got {self.length}")
        n = int(self.n)
        if n != self.n or n < 16 or n & (n - 1):
            raise DomainError(f"n must be a power of two >= 16, got {self.n}")
        if self.origin is None:
            object.__setattr__(self, "origin", -0.5 * self.length)

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def x(self) -> np.ndarray:
        return self.origin + self.dx * np.arange(self.n)

    @property
    def k(self) -> np.ndarray:
        return wavenumbers(self.n, self.dx)

    def field(self, values) -> FieldGrid:
        return FieldGrid(values, (self.dx,), (self.origin,))


@dataclass
class Trajectory:
    """Snapshots of one run. ``frames[i]`` is the state at ``times[i]``.

    Times are strictly monotone: increasing for forward runs, decreasing for
    runs with a negative step.
    """

    grid: Grid1D
    times: np.ndarray
    frames: np.ndarray
    epsilon: float
    conserved_log: dict = field(default_factory=dict)
    dt: float = float("nan")
    kind: str = ""

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.frames = np.asarray(self.frames)
        if self.frames.ndim == 1:
            self.frames = self.frames[None, :]
        if self.frames.shape != (self.times.size, self.grid.n):
            raise ShapeError(f"frames shape {self.frames.shape} != ({self.times.size}, {self.grid.n})")
        if self.times.size > 1:
            steps = np.diff(self.times)
            if not (np.all(steps > 0) or np.all(steps < 0)):
                raise ValidationError("times must be strictly monotone")
        if not self.epsilon > 0:
            raise DomainError("epsilon must be positive")
        if not self.kind:
            self.kind = "nls" if np.iscomplexobj(self.frames) else "kdv"

    @property
    def final(self) -> np.ndarray:
        return self.frames[-1]

    def frame_field(self, i: int = -1) -> FieldGrid:
        return self.grid.field(self.frames[i])

    def max_drift(self, name: str) -> float:
        """Largest relative change of a logged invariant from its initial value."""
        vals = np.asarray(self.conserved_log[name], dtype=float)
        scale = max(abs(vals[0]), 1e-300)
        return float(np.max(np.abs(vals - vals[0])) / scale)

    def conservation_report(self, tolerances: Optional[dict] = None) -> DiagnosticsReport:
        tolerances = tolerances or DRIFT_TOLERANCES.get(self.kind, {})
        report = DiagnosticsReport(f"{self.kind}_conservation")
        for name, tol in tolerances.items():
            if name in self.conserved_log:
                drift = self.max_drift(name)
                report.add(f"{name}_drift", drift, tol, drift < tol)
        return report


def _finish(traj: Trajectory, strict: bool) -> Trajectory:
    if strict:
        report = traj.conservation_report()
        if not report.passed:
            worst = ", ".join(f"{c.name}={c.value:.2e}" for c in report.failures())
            raise ConservationError(f"conservation violated ({worst}); reduce dt", report)
    return traj


def l2_norm(values, dx: float) -> float:
    return float(np.sqrt(np.sum(np.abs(values) ** 2) * dx))


def _initial_samples(u0, grid: Grid1D, periodic_tol: float) -> np.ndarray:
    if callable(u0):
        end_gap = abs(u0(np.array([grid.origin]))[0] - u0(np.array([grid.origin + grid.length]))[0])
        if end_gap >= periodic_tol:
            raise DomainError(f"initial data not periodic: |u0(a) - u0(a + L)| = {end_gap:.3e}")
        return np.asarray(u0(grid.x))
    values = np.asarray(u0)
    if values.shape != (grid.n,):
        raise ShapeError(f"initial data have shape {values.shape}, grid has {grid.n} points")
    # a sampled array has no value at a + L; compare the wrap-around jump with interior jumps
    jumps = np.abs(np.diff(values))
    wrap = abs(values[0] - values[-1])
    if wrap > periodic_tol + 10.0 * (jumps.max() if jumps.size else 0.0):
        raise DomainError(f"initial data not periodic: wrap-around jump {wrap:.3e}")
    return values


def _check_step(dt, t_final):
    if dt == 0 or not math.isfinite(dt):
        raise DomainError("dt must be finite and nonzero")
    if not t_final > 0:
        raise DomainError("t_final is the run duration and must be positive")
    n_steps = int(round(t_final / abs(dt)))
    if n_steps < 1 or abs(n_steps * abs(dt) - t_final) > 1e-9 * t_final:
        raise DomainError(f"t_final={t_final} is not a whole number of steps of {abs(dt)}")
    return n_steps


def _blown_up(u) -> bool:
    return not np.all(np.isfinite(u)) or float(np.max(np.abs(u))) > BLOWUP_NORM


# ---------------------------------------------------------------------------
# KdV


def kdv_invariants(u, dx: float) -> dict:
    return {"mass": float(np.sum(u) * dx), "momentum": float(np.sum(u * u) * dx)}


def kdv_max_dt(u, grid: Grid1D, courant: float = KDV_COURANT) -> float:
    """Largest step with ``6 max|u| dt / dx <= courant``."""
    amp = float(np.max(np.abs(u)))
    return math.inf if amp == 0 else courant * grid.dx / (6.0 * amp)


def solve_kdv(u0: Union[np.ndarray, Callable], epsilon: float, grid: Grid1D, dt: float, t_final: float,
              snap_every: int = 0, t0: float = 0.0, courant: float = KDV_COURANT,
              dealias: bool = True, periodic_tol: float = 1e-10, strict: bool = False) -> Trajectory:
    """Integrate ``u_t = 6 u u_x - eps**2 u_xxx`` for a duration ``t_final``.

    A negative ``dt`` integrates backwards in time. ``snap_every`` is the
    number of steps between stored frames (0 stores only the start and end).
    With ``strict`` a drift of the mass or momentum beyond
    :data:`DRIFT_TOLERANCES` raises :class:`ConservationError`.
    """
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    n_steps = _check_step(dt, t_final)
    u = np.asarray(_initial_samples(u0, grid, periodic_tol), dtype=float)
    limit = kdv_max_dt(u, grid, courant)
    if abs(dt) > limit:
        raise DomainError(f"|dt|={abs(dt):.3e} exceeds the stability limit {limit:.3e}")

    k = grid.k
    mask = np.abs(k) < (2.0 / 3.0) * np.abs(k).max() if dealias else np.ones_like(k, bool)
    nonlin_factor = 3j * k * mask
    lin = 1j * epsilon**2 * k**3
    half = np.exp(0.5 * dt * lin)
    full = half * half

    def rhs(v_hat):
        w = np.fft.ifft(v_hat).real
        return nonlin_factor * np.fft.fft(w * w)

    # project the data onto the retained modes so that the truncated system
    # conserves int u^2 exactly; otherwise masked modes leak momentum
    v = np.fft.fft(u) * mask
    u = np.fft.ifft(v).real
    times, frames = [t0], [u.copy()]
    logs = {key: [val] for key, val in kdv_invariants(u, grid.dx).items()}
    t = t0
    for step in range(1, n_steps + 1):
        a = dt * rhs(v)
        b = dt * rhs(half * (v + 0.5 * a))
        c = dt * rhs(half * v + 0.5 * b)
        d = dt * rhs(full * v + half * c)
        v = full * v + (full * a + 2.0 * half * (b + c) + d) / 6.0
        t = t0 + step * dt
        if step == n_steps or (snap_every and step % snap_every == 0):
            u = np.fft.ifft(v).real
            if _blown_up(u):
                raise InstabilityError(f"KdV solution blew up near t={t:.6g}", frames[-1], times[-1])
            times.append(t)
            frames.append(u)
            for key, val in kdv_invariants(u, grid.dx).items():
                logs[key].append(val)
        elif step % 64 == 0 and not np.all(np.isfinite(v)):
            raise InstabilityError(f"KdV solution blew up near t={t:.6g}", frames[-1], times[-1])
    traj = Trajectory(grid, np.array(times), np.array(frames), epsilon, logs, dt, "kdv")
    log.debug("kdv run: %d steps, momentum drift %.2e", n_steps, traj.max_drift("momentum"))
    return _finish(traj, strict)


# ---------------------------------------------------------------------------
# NLS


def nls_invariants(u, grid: Grid1D, epsilon: float) -> dict:
    ux = spectral_derivative(u, grid.dx)
    rho = np.abs(u) ** 2
    energy = np.sum(0.5 * epsilon**2 * np.abs(ux) ** 2 + 0.5 * (rho - 1.0) ** 2) * grid.dx
    return {"mass": float(np.sum(rho) * grid.dx), "energy": float(energy)}


def nls_max_dt(grid: Grid1D, epsilon: float) -> float:
    """Phase-accuracy guard ``dx**2 / (pi eps)``."""
    return grid.dx**2 / (math.pi * epsilon)


def solve_nls(A, S, epsilon: float, grid: Grid1D, dt: float, t_final: float, snap_every: int = 0,
              t0: float = 0.0, check_step: bool = True, periodic_tol: float = 1e-10,
              strict: bool = False) -> Trajectory:
    """Integrate the defocusing NLS from ``u = A exp(i S / eps)``.

    ``A`` and ``S`` are arrays or callables. Passing a complex array as
    ``A`` with ``S=None`` starts from that state directly.
    """
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    n_steps = _check_step(dt, t_final)
    amp = _initial_samples(A, grid, periodic_tol)
    if S is None:
        u = np.asarray(amp, dtype=complex)
    else:
        phase = np.asarray(_initial_samples(S, grid, periodic_tol), dtype=float)
        u = np.asarray(amp, dtype=float) * np.exp(1j * phase / epsilon)
    if check_step and abs(dt) > nls_max_dt(grid, epsilon):
        raise DomainError(f"|dt|={abs(dt):.3e} exceeds the guard {nls_max_dt(grid, epsilon):.3e}")
    # linear flow u_t = (i eps / 2) u_xx over half a step
    half_linear = np.exp(-0.25j * epsilon * grid.k**2 * dt)

    times, frames = [t0], [u.copy()]
    logs = {key: [val] for key, val in nls_invariants(u, grid, epsilon).items()}
    t = t0
    for step in range(1, n_steps + 1):
        u = np.fft.ifft(half_linear * np.fft.fft(u))
        u = u * np.exp(1j * (1.0 - np.abs(u) ** 2) * dt / epsilon)
        u = np.fft.ifft(half_linear * np.fft.fft(u))
        t = t0 + step * dt
        if step == n_steps or (snap_every and step % snap_every == 0):
            if _blown_up(u):
                raise InstabilityError(f"NLS solution blew up near t={t:.6g}", frames[-1], times[-1])
            times.append(t)
            frames.append(u.copy())
            for key, val in nls_invariants(u, grid, epsilon).items():
                logs[key].append(val)
    return _finish(Trajectory(grid, np.array(times), np.array(frames), epsilon, logs, dt, "nls"), strict)


def madelung(frame, epsilon: float, grid: Grid1D):
    """``rho = |u|**2`` and ``mu = eps Im(conj(u) u_x)`` (spectral derivative).

    With this sign ``rho_t + mu_x = 0`` along NLS trajectories.
    """
    u = np.asarray(frame)
    if u.shape[-1] != grid.n:
        raise ShapeError("frame does not match the grid")
    if not np.iscomplexobj(u):
        u = u.astype(float)
        return u * u, np.zeros_like(u)
    ux = spectral_derivative(u, grid.dx, axis=-1)
    return np.abs(u) ** 2, epsilon * np.imag(np.conj(u) * ux)


def continuity_residual(traj: Trajectory) -> float:
    """``max |rho_t + mu_x|`` from centred differences of stored frames."""
    if traj.kind != "nls" or traj.times.size < 3:
        raise ValidationError("need an NLS trajectory with at least three frames")
    rho, mu = madelung(traj.frames, traj.epsilon, traj.grid)
    dt = np.diff(traj.times)
    if not np.allclose(dt, dt[0], rtol=1e-9):
        raise ValidationError("frames must be equally spaced in time")
    rho_t = (rho[2:] - rho[:-2]) / (2.0 * dt[0])
    mu_x = spectral_derivative(mu[1:-1], traj.grid.dx, axis=-1)
    return float(np.max(np.abs(rho_t + mu_x)))


# ---------------------------------------------------------------------------
# weak limits


def q_flux(rho, mu):
    """``mu**2/rho + rho**2/2``, zero where ``rho`` vanishes."""
    rho = np.asarray(rho, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        kinetic = np.where(rho > 0, np.asarray(mu) ** 2 / np.where(rho > 0, rho, 1.0), 0.0)
    return kinetic + 0.5 * rho**2


@dataclass
class WeakLimits:
    """Mollified fields at the smallest epsilon.

    ``fields`` maps names to arrays of shape ``(n_times, n)``.
    ``indicator`` gives, per field, the relative L2 difference between the
    two smallest epsilons (small when the family has settled).
    """

    kind: str
    grid: Grid1D
    times: np.ndarray
    epsilon: float
    mollifier: float
    fields: dict
    indicator: dict

    def __getitem__(self, name):
        return self.fields[name]

    def field(self, name: str, i: int = -1) -> FieldGrid:
        return self.grid.field(self.fields[name][i])

    def convexity_gap(self) -> np.ndarray:
        """``u2bar - ubar**2`` (KdV) or ``Qbar - Q(rhobar, mubar)`` (NLS)."""
        if self.kind == "kdv":
            return self.fields["u2bar"] - self.fields["ubar"] ** 2
        return self.fields["Qbar"] - q_flux(self.fields["rhobar"], self.fields["mubar"])


def _raw_fields(traj: Trajectory) -> dict:
    if traj.kind == "kdv":
        u = np.asarray(traj.frames, dtype=float)
        return {"ubar": u, "u2bar": u * u}
    rho, mu = madelung(traj.frames, traj.epsilon, traj.grid)
    return {"rhobar": rho, "mubar": mu, "Qbar": q_flux(rho, mu)}


def _common_runs(runs: Sequence[Trajectory]):
    if len(runs) < 2:
        raise ValidationError("need at least two runs")
    runs = sorted(runs, key=lambda r: r.epsilon)
    first = runs[0]
    for r in runs[1:]:
        if r.grid != first.grid:
            raise ShapeError("runs are on different grids")
        if r.times.shape != first.times.shape or not np.allclose(r.times, first.times):
            raise ShapeError("runs have different output times")
        if r.kind != first.kind:
            raise ShapeError("runs mix KdV and NLS trajectories")
    return runs


def ensemble_weak_limits(runs: Sequence[Trajectory], mollifier: float) -> WeakLimits:
    """Moving averages of ``u, u**2`` or ``rho, mu, Q`` at the smallest epsilon."""
    runs = _common_runs(runs)
    dx = runs[0].grid.dx
    smooth = lambda a: mollify(a, (dx,), mollifier, mode="wrap", axes=(1,))  # noqa: E731
    best = {k: smooth(v) for k, v in _raw_fields(runs[0]).items()}
    other = {k: smooth(v) for k, v in _raw_fields(runs[1]).items()}
    indicator = {}
    for key in best:
        scale = max(float(np.sqrt(np.sum(best[key] ** 2))), 1e-300)
        indicator[key] = float(np.sqrt(np.sum((best[key] - other[key]) ** 2)) / scale)
    return WeakLimits(runs[0].kind, runs[0].grid, runs[0].times, runs[0].epsilon, mollifier, best,
                      indicator)


def defect_tensor(runs, limit_field, mollifier: float, frame: int = -1) -> FieldGrid:
    """Mollified ``(u_eps - ubar) (x) (u_eps - ubar)`` at the smallest epsilon.

    ``runs`` is a sequence of :class:`Trajectory` (the frame ``frame`` is
    used) or of ``(epsilon, FieldGrid)`` pairs; vector fields give a
    ``d x d`` tensor per point, scalar fields a scalar. Complex scalars use
    ``|u - ubar|**2``.
    """
    if not runs:
        raise ValidationError("no runs given")
    pairs = []
    for r in runs:
        if isinstance(r, Trajectory):
            pairs.append((r.epsilon, r.frame_field(frame)))
        else:
            eps, fg = r
            pairs.append((float(eps), fg))
    eps, member = min(pairs, key=lambda p: p[0])
    ubar = limit_field.values if isinstance(limit_field, FieldGrid) else np.asarray(limit_field)
    if isinstance(limit_field, FieldGrid) and not limit_field.same_grid(member):
        raise ShapeError("limit field is on a different grid")
    if np.shape(ubar) != member.values.shape:
        raise ShapeError(f"limit shape {np.shape(ubar)} != member shape {member.values.shape}")
    diff = member.values - ubar
    if member.rank == 0:
        outer = np.abs(diff) ** 2
    elif member.rank == 1:
        outer = np.einsum("...i,...j->...ij", diff, np.conj(diff)).real
    else:
        raise ShapeError("defect tensor needs scalar or vector fields")
    smoothed = mollify(outer, member.spacing, mollifier, mode="wrap", axes=range(member.ndim))
    return member.with_values(smoothed)
