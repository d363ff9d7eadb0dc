"""Lax-Levermore density for KdV single wells, its large-time weak limit and
the sign of the resulting turbulent viscosity.

For a well ``u0`` with minimum ``-1`` the Whitham density is

    phi(eta) = int_{x_-(eta)}^{x_+(eta)} eta / sqrt(-u0(x) - eta**2) dx,

and for large ``t`` the weak limit is ``ubar = -phi(sqrt(x/4t)) / (4 pi t)``
inside ``0 < x/t < 4``. Since ``d ubar/dx`` has the sign of ``-phi'``, the
turbulent viscosity ``(bar(u^2) - ubar^2) / ubar_x`` is nonnegative exactly
when ``phi`` decreases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from dispersion_lab.errors import DomainError, ValidationError
from dispersion_lab.fields import FieldGrid, gradient, require_same_grid
from dispersion_lab.profiles import kdv_turning_points
from dispersion_lab.quadrature import (
    DEFAULT_ABS_FLOOR,
    DEFAULT_REL_TOL,
    QuadResult,
    SingularitySpec,
    integrate_endpoint_singular,
)
from dispersion_lab.reports import SignReport

PHI_KINDS = ("kdv_eta", "nls_lambda")
TABLE1_BETAS = (1.0, 1.5, 2.0, 4.0)
TABLE1_ETAS = tuple(k / 10 for k in range(1, 10))


@dataclass
class PhiTable:
    """Sampled Whitham density (or derived quantity) for one profile."""

    kind: str
    grid: np.ndarray
    values: np.ndarray
    error_estimates: np.ndarray
    beta: float = float("nan")
    quantity: str = "phi"
    lower_edge: float = 0.0

    def __post_init__(self):
        if self.kind not in PHI_KINDS:
            raise ValueError(f"kind must be one of {PHI_KINDS}")
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.error_estimates = np.asarray(self.error_estimates, dtype=float)
        if not (self.grid.shape == self.values.shape == self.error_estimates.shape):
            raise ValueError("grid, values and error estimates must have equal shapes")
        if self.grid.size > 1 and np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        interior = self.grid > self.lower_edge
        if np.any(self.values[interior] <= 0):
            raise ValueError("values must be positive at interior grid points")
        if np.any(self.error_estimates < 0):
            raise ValueError("error estimates must be nonnegative")

    def __len__(self) -> int:
        return self.grid.size


def table_matrix(tables: Sequence[PhiTable]) -> np.ndarray:
    """Stack tables column-wise (rows follow the common grid)."""
    if not tables:
        return np.zeros((0, 0))
    return np.column_stack([t.values for t in tables])


# ---------------------------------------------------------------------------
# phi(eta)


def _half_integrals(profile, eta, tol, scheme, abs_floor):
    x_minus, x_plus = kdv_turning_points(profile, eta)
    x0 = profile.x0

    def left(x, xa, xb):
        gap = profile.gap(x, eta, d=xa, side=-1)
        return eta / np.sqrt(gap)

    def right(x, xa, xb):
        gap = profile.gap(x, eta, d=xb, side=1)
        return eta / np.sqrt(gap)

    kw = dict(rel_tol=tol, abs_floor=abs_floor, scheme=scheme, offsets=True)
    res_left = integrate_endpoint_singular(left, x_minus, x0, SingularitySpec.inverse_sqrt(True, False), **kw)
    res_right = integrate_endpoint_singular(right, x0, x_plus, SingularitySpec.inverse_sqrt(False, True), **kw)
    return res_left + res_right


def phi_kdv_quad(profile, eta: float, tol: float = DEFAULT_REL_TOL, scheme: str = "de",
                 abs_floor: float = DEFAULT_ABS_FLOOR) -> QuadResult:
    """``phi(eta)`` with its quadrature error estimate."""
    if not (0.0 < eta < 1.0):
        raise DomainError(f"eta must lie in (0, 1), got {eta}")
    return _half_integrals(profile, eta, tol, scheme, abs_floor)


def phi_kdv(profile, eta: float, tol: float = DEFAULT_REL_TOL, scheme: str = "de") -> float:
    """Whitham density ``phi(eta)`` of a KdV single well, ``0 < eta < 1``.

    The integral runs between the two turning points, split at the minimum,
    each half carrying an inverse-square-root singularity at its outer end.

    >>> from dispersion_lab.profiles import KdvBetaWell
    >>> round(phi_kdv(KdvBetaWell(2.0), 0.9), 5)
    3.05941
    """
    return phi_kdv_quad(profile, eta, tol, scheme).value


# ---------------------------------------------------------------------------
# large-time weak limit


@dataclass(frozen=True)
class AsymptoticValue:
    """Value of a large-time formula with its regime tag.

    ``regime`` is ``"whitham"`` (formula valid), ``"transition"`` (inside a
    band of width ``delta`` around a branch edge, formula value returned but
    unreliable) or ``"outside"`` (the limit is the background value up to
    the quoted ``order``).
    """

    value: float
    regime: str
    order: str = "o(1/t)"

    @property
    def reliable(self) -> bool:
        return self.regime == "whitham"


def ubar_asymptotic(profile, x: float, t: float, delta: float = 1e-3,
                    tol: float = DEFAULT_REL_TOL) -> AsymptoticValue:
    """Large-time weak limit ``ubar(x, t)`` of the KdV flow."""
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    if not delta > 0:
        raise DomainError(f"delta must be positive, got {delta}")
    ratio = x / t
    if ratio <= 0.0 or ratio >= 4.0:
        return AsymptoticValue(0.0, "outside", "O(t^-2)")
    eta = math.sqrt(x / (4.0 * t))
    value = -phi_kdv(profile, eta, tol) / (4.0 * math.pi * t)
    regime = "whitham" if delta < ratio < 4.0 - delta else "transition"
    return AsymptoticValue(value, regime)


# ---------------------------------------------------------------------------
# derivative and sign


@dataclass(frozen=True)
class DerivativeEstimate:
    """Richardson-refined central difference and its h vs h/2 consistency."""

    value: float
    coarse: float
    fine: float
    h: float
    consistent: bool

    @property
    def relative_gap(self) -> float:
        return abs(self.coarse - self.fine) / max(abs(self.fine), 1e-300)


def richardson_central(func, point: float, h: float, rel_gap: float = 1e-4) -> DerivativeEstimate:
    d_h = (func(point + h) - func(point - h)) / (2 * h)
    h2 = 0.5 * h
    d_h2 = (func(point + h2) - func(point - h2)) / (2 * h2)
    value = (4.0 * d_h2 - d_h) / 3.0
    consistent = abs(d_h - d_h2) <= rel_gap * abs(d_h2)
    return DerivativeEstimate(value, d_h, d_h2, h, consistent)


def dphi_deta(profile, eta: float, h: float = 1e-4, tol: float = DEFAULT_REL_TOL) -> DerivativeEstimate:
    """``phi'(eta)`` by central differences with one Richardson step."""
    if not (0.0 < eta - h and eta + h < 1.0):
        raise DomainError(f"stencil eta +- h = {eta} +- {h} leaves (0, 1)")
    return richardson_central(lambda e: phi_kdv(profile, e, tol), eta, h)


def _sign(value: float, tolerance: float) -> int:
    if value > tolerance:
        return 1
    if value < -tolerance:
        return -1
    return 0


def classify_kdv_sign(profile, eta_grid: Iterable[float], h: float = 1e-4,
                      tolerance: float = 1e-8, tol: float = DEFAULT_REL_TOL) -> SignReport:
    """Diffusive iff ``phi' < 0`` at every grid point (nonnegative turbulent viscosity)."""
    etas = [float(e) for e in eta_grid]
    for e in etas:
        if not (0.0 < e < 1.0):
            raise DomainError(f"eta grid must lie in (0, 1), got {e}")
    witnesses = []
    derivs = {}
    inconsistent = []
    for e in etas:
        step = min(h, 0.5 * e, 0.5 * (1.0 - e))
        d = dphi_deta(profile, e, step, tol)
        witnesses.append((e, _sign(d.value, tolerance)))
        derivs[repr(e)] = d.value
        if not d.consistent:
            inconsistent.append(e)
    values = {"dphi_deta": derivs}
    if inconsistent:
        values["inconsistent_at"] = inconsistent
    return SignReport.from_signs(witnesses, tolerance, diffusive_sign=-1, quantity="dphi/deta",
                                 values=values)


def emit_table1(betas: Iterable[float] = TABLE1_BETAS, etas: Iterable[float] = TABLE1_ETAS,
                tol: float = DEFAULT_REL_TOL, scheme: str = "de") -> list:
    """One :class:`PhiTable` per beta of ``phi`` for ``u0 = -exp(-|x|**beta)``."""
    from dispersion_lab.profiles import KdvBetaWell

    etas = [float(e) for e in etas]
    tables = []
    for beta in betas:
        profile = KdvBetaWell(float(beta))
        results = [phi_kdv_quad(profile, e, tol, scheme) for e in etas]
        tables.append(PhiTable("kdv_eta", etas, [r.value for r in results],
                               [r.error_estimate for r in results], beta=float(beta)))
    return tables


# ---------------------------------------------------------------------------
# turbulent viscosity from weak-limit fields


def nu_turb_field(ubar: FieldGrid, u2bar: FieldGrid, eps_grad: float = 1e-8,
                  convexity_tol: float = 1e-10, method: str = "fd") -> FieldGrid:
    """``(bar(u^2) - ubar**2) / d_x ubar`` where ``|d_x ubar| > eps_grad``.

    Raises if the convexity inequality ``bar(u^2) >= ubar**2`` is violated
    by more than ``convexity_tol``.
    """
    require_same_grid(ubar, u2bar)
    if ubar.ndim != 1 or ubar.rank != 0:
        raise ValidationError("nu_turb_field expects 1-D scalar fields")
    defect = np.asarray(u2bar.values, float) - np.asarray(ubar.values, float) ** 2
    worst = float(defect.min()) if defect.size else 0.0
    if worst < -convexity_tol:
        raise ValidationError(f"convexity violated: bar(u^2) - ubar^2 reaches {worst:.3e}")
    dudx = gradient(np.asarray(ubar.values, float), ubar.spacing[0], method=method)
    mask = np.abs(dudx) <= eps_grad
    with np.errstate(divide="ignore", invalid="ignore"):
        nu = np.where(mask, np.nan, defect / np.where(mask, 1.0, dudx))
    return ubar.with_values(nu, mask=mask)
