"""Whitham density of the semiclassical defocusing NLS flow, the large-time
weak limit of ``|u|**2`` and the sign condition for a diffusive limit.

For single-well data with Riemann invariants ``r_plus``, ``r_minus``

    phi(lam) = int_{x_-}^{x_+} (lam - (r_plus + r_minus)/2)
                               / sqrt((lam - r_plus)(lam - r_minus)) dx

and inside the Whitham branches ``rhobar = 1 - 4/(pi t) phi(x/t)
sqrt(1 - (x/t)**2)``. The limit is diffusive (``d_x mubar >= 0``) when
``g(lam) = lam phi(lam) sqrt(1 - lam**2)`` is nondecreasing.

For the symmetric family ``r_plus = 1 - exp(-|x|**beta)/2 = -r_minus``
``g`` reduces to a half-line integral (:func:`g_symmetric`), which is
evaluated independently of :func:`phi_nls` and serves as its cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import PchipInterpolator
from scipy.ndimage import gaussian_filter1d

from dispersion_lab.errors import DomainError, ValidationError
from dispersion_lab.fields import FieldGrid, gradient, mollify, require_same_grid
from dispersion_lab.kdv_limit import AsymptoticValue, PhiTable, _sign
from dispersion_lab.profiles import NlsBetaWell, nls_turning_points
from dispersion_lab.quadrature import (
    DEFAULT_ABS_FLOOR,
    DEFAULT_REL_TOL,
    QuadResult,
    SingularitySpec,
    integrate_endpoint_singular,
)
from dispersion_lab.reports import DiagnosticsReport, SignReport
from dispersion_lab.semiclassical import q_flux

TABLE2_BETAS = (1.5, 2.0, 3.0, 3.5)
TABLE2_LAMBDAS = (0.5, 0.6, 0.7, 0.8, 0.9)


class LatticeTooCoarseError(DomainError):
    """Fewer than two soliton wavenumbers fit in the Whitham branch."""


def _zero():
    return QuadResult(0.0, 0.0, 1)


def _on_branch_edge(profile, lam) -> bool:
    return lam == profile.lambda_min or lam == profile.lambda_max


# ---------------------------------------------------------------------------
# phi(lambda) and g(lambda)


def phi_nls_quad(profile, lam: float, tol: float = DEFAULT_REL_TOL, scheme: str = "de",
                 abs_floor: float = DEFAULT_ABS_FLOOR) -> QuadResult:
    """``phi(lam)`` with its error estimate; zero on a branch edge."""
    x_minus, x_plus = nls_turning_points(profile, lam)
    if _on_branch_edge(profile, lam) or x_minus == x_plus:
        return _zero()
    x0 = profile.x0

    def left(x, xa, xb):
        gap = profile.gap(x, lam, d=xa, side=-1)
        return profile.numerator(x, lam) / np.sqrt(gap)

    def right(x, xa, xb):
        gap = profile.gap(x, lam, d=xb, side=1)
        return profile.numerator(x, lam) / np.sqrt(gap)

    kw = dict(rel_tol=tol, abs_floor=abs_floor, scheme=scheme, offsets=True)
    res = integrate_endpoint_singular(left, x_minus, x0, SingularitySpec.inverse_sqrt(True, False), **kw)
    res = res + integrate_endpoint_singular(right, x0, x_plus, SingularitySpec.inverse_sqrt(False, True), **kw)
    return res


def phi_nls(profile, lam: float, tol: float = DEFAULT_REL_TOL, scheme: str = "de") -> float:
    """Whitham density ``phi(lam)`` on either branch; raises in the solitonless gap."""
    return phi_nls_quad(profile, lam, tol, scheme).value


def g_symmetric_quad(profile: NlsBetaWell, lam: float, tol: float = DEFAULT_REL_TOL,
                     scheme: str = "de", abs_floor: float = DEFAULT_ABS_FLOOR) -> QuadResult:
    """``lam phi(lam) sqrt(1 - lam**2)`` for zero-momentum symmetric data.

    Evaluated as ``2 int_0^X lam**2 sqrt(1 - lam**2) / sqrt(lam**2 - r_plus**2) dx``
    with ``X = width * (-ln 2(1 - lam))**(1/beta)``.
    """
    if not isinstance(profile, NlsBetaWell):
        raise TypeError("the half-line formula needs a symmetric zero-momentum beta family")
    if not (profile.lambda_min <= lam < 1.0):
        raise DomainError(f"lambda must lie in [{profile.lambda_min}, 1), got {lam}")
    if lam == profile.lambda_min:
        return _zero()
    x_end = profile.width * (-math.log(2.0 * (1.0 - lam))) ** (1.0 / profile.beta)
    c = lam * lam * math.sqrt(1.0 - lam * lam)

    def integrand(s, sa, sb):
        # lam^2 - r_plus^2 = (lam - r_plus)(lam + r_plus); the gap method forms it from sb
        return c / np.sqrt(profile.gap(profile.shift + s, lam, d=sb, side=1))

    res = integrate_endpoint_singular(integrand, 0.0, x_end, SingularitySpec.inverse_sqrt(False, True),
                                      rel_tol=tol, abs_floor=abs_floor, scheme=scheme, offsets=True)
    return res.scaled(2.0)


def g_symmetric(profile: NlsBetaWell, lam: float, tol: float = DEFAULT_REL_TOL, scheme: str = "de") -> float:
    """See :func:`g_symmetric_quad`.

    >>> round(g_symmetric(NlsBetaWell(2.0), 0.9), 4)
    2.2162
    """
    return g_symmetric_quad(profile, lam, tol, scheme).value


def g_lambda(profile, lam: float, tol: float = DEFAULT_REL_TOL, scheme: str = "de") -> float:
    """``lam phi(lam) sqrt(1 - lam**2)`` for any profile (half-line formula when symmetric)."""
    if isinstance(profile, NlsBetaWell):
        return g_symmetric(profile, lam, tol, scheme)
    return lam * phi_nls(profile, lam, tol, scheme) * math.sqrt(1.0 - lam * lam)


# ---------------------------------------------------------------------------
# large-time weak limit


def _branch(profile, lam):
    if profile.lambda_min < lam < 1.0:
        return profile.lambda_min, 1.0
    if -1.0 < lam < profile.lambda_max:
        return -1.0, profile.lambda_max
    return None


def rhobar_asymptotic(profile, x: float, t: float, delta: float = 1e-3,
                      tol: float = DEFAULT_REL_TOL) -> AsymptoticValue:
    """Large-time weak limit of ``|u|**2``: ``1 - 4/(pi t) |phi| sqrt(1 - lam**2)``.

    The magnitude of ``phi`` is used so that the negative branch (where the
    integrand of ``phi`` is negative) also yields a density deficit.
    """
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    lam = x / t
    branch = _branch(profile, lam)
    if branch is None:
        return AsymptoticValue(1.0, "outside", "background")
    deficit = 4.0 / (math.pi * t) * abs(phi_nls(profile, lam, tol)) * math.sqrt(1.0 - lam * lam)
    lo, hi = branch
    regime = "whitham" if lo + delta < lam < hi - delta else "transition"
    return AsymptoticValue(1.0 - deficit, regime)


# ---------------------------------------------------------------------------
# diffusive-limit condition and tables


def check_nls_condition(profile, lambda_grid: Iterable[float], h: float = 1e-4,
                        tolerance: float = 0.0, tol: float = DEFAULT_REL_TOL) -> SignReport:
    """Is ``g(lam) = lam phi sqrt(1 - lam**2)`` nondecreasing on the grid?

    The check is made on finite differences between neighbouring grid
    values, so a violation is reported as the pair ``(lam_i, lam_{i+1})``
    over which ``g`` decreases. A single-point grid uses a forward
    difference of step ``h``.
    """
    lams = sorted(float(v) for v in lambda_grid)
    for lam in lams:
        if not (profile.lambda_min <= lam < 1.0):
            raise DomainError(f"lambda grid must lie in [{profile.lambda_min}, 1), got {lam}")
    values = [g_lambda(profile, lam, tol) for lam in lams]
    witnesses = []
    if len(lams) == 1:
        lam = lams[0]
        if lam + h >= 1.0:
            raise DomainError("forward step leaves the branch")
        slope = (g_lambda(profile, lam + h, tol) - values[0]) / h
        witnesses.append(((lam, lam + h), _sign(slope, tolerance)))
    else:
        for (l0, g0), (l1, g1) in zip(zip(lams, values), zip(lams[1:], values[1:])):
            witnesses.append(((l0, l1), _sign(g1 - g0, tolerance)))
    return SignReport.from_signs(witnesses, tolerance, diffusive_sign=1,
                                 quantity="d/dlambda[lambda*phi*sqrt(1-lambda^2)]",
                                 values={"lambda": lams, "g": values}, allow_zero=True)


def emit_table2(betas: Iterable[float] = TABLE2_BETAS, lambdas: Iterable[float] = TABLE2_LAMBDAS,
                tol: float = DEFAULT_REL_TOL, scheme: str = "de") -> list:
    """One :class:`PhiTable` of ``g(lam)`` per beta for the symmetric NLS family."""
    lams = [float(v) for v in lambdas]
    tables = []
    for beta in betas:
        profile = NlsBetaWell(float(beta))
        results = [g_symmetric_quad(profile, lam, tol, scheme) for lam in lams]
        tables.append(PhiTable("nls_lambda", lams, [r.value for r in results],
                               [r.error_estimate for r in results], beta=float(beta),
                               quantity="g", lower_edge=profile.lambda_min))
    return tables


# ---------------------------------------------------------------------------
# multisoliton lattice


def dark_soliton_dip(x, eta: float, epsilon: float):
    """``(1 - eta**2) / cosh**2(sqrt(1 - eta**2) x / (2 epsilon))``."""
    a = 1.0 - eta * eta
    q = np.exp(-np.abs(np.sqrt(a) * np.asarray(x, dtype=float) / epsilon))
    return a * 4.0 * q / (1.0 + q) ** 2


@dataclass
class SolitonLattice:
    """Superposition of well-separated dark solitons at large time.

    ``field`` holds ``|u|**2`` samples. ``counting`` is the Weyl counting
    function ``N(lam) = (1/(pi eps)) int_{lambda_min}^{lam} phi`` used to
    place the wavenumbers at ``N(eta_n) = n - 1/2``.
    """

    epsilon: float
    time: float
    wavenumbers: np.ndarray
    phases: np.ndarray
    field: FieldGrid
    phi: Callable
    lambda_min: float

    @property
    def peaks(self) -> np.ndarray:
        return self.wavenumbers * self.time + self.phases

    @property
    def dip(self) -> FieldGrid:
        """``1 - |u|**2``."""
        return self.field.with_values(1.0 - self.field.values)

    def predicted_deficit(self, lam):
        """Large-time area density ``4/(pi t) phi(lam) sqrt(1 - lam**2)``."""
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        vals = np.array([self.phi(v) for v in lam])
        return 4.0 / (math.pi * self.time) * vals * np.sqrt(1.0 - lam**2)

    def check_invariants(self, separation: float = 1e-3) -> DiagnosticsReport:
        """Peak depths ``1 - eta_n**2`` and Weyl spacing ``pi eps / phi(bar eta)``.

        Depths are checked on peaks whose neighbours contribute less than
        ``separation`` times their own depth; close to ``lam = 1`` the
        shallow solitons overlap and the isolated-peak depth does not apply.
        """
        report = DiagnosticsReport("soliton_lattice")
        x = self.field.axis(0)
        dx = self.field.spacing[0]
        eta = self.wavenumbers
        peaks = self.peaks
        depth_err = []
        bound = 0.0
        for n, (e, p) in enumerate(zip(eta, peaks)):
            if not x[0] <= p <= x[-1]:
                continue
            depth = 1.0 - e * e
            others = sum(float(dark_soliton_dip(p - q, f, self.epsilon))
                         for m, (f, q) in enumerate(zip(eta, peaks)) if m != n)
            if others > separation * depth:
                continue
            i = int(round((p - x[0]) / dx))
            offset = x[i] - p
            # sech^2(z) >= 1 - z^2 bounds the loss from sampling off the peak
            z = math.sqrt(depth) * offset / (2.0 * self.epsilon)
            bound = max(bound, depth * z * z + others)
            depth_err.append(abs((1.0 - self.field.values[i]) - depth))
        worst = max(depth_err) if depth_err else 0.0
        report.add("peak_depth", worst, bound + 1e-12, worst <= bound + 1e-12,
                   note=f"{len(depth_err)} isolated peaks")
        implied = math.pi * self.epsilon / np.diff(eta)
        ok = []
        for e0, e1, value in zip(eta[:-1], eta[1:], implied):
            vals = np.array([self.phi(v) for v in np.linspace(e0, e1, 9)])
            ok.append(vals.min() * (1 - 1e-6) <= value <= vals.max() * (1 + 1e-6))
        report.add("weyl_spacing", int(np.sum(ok)), len(ok), all(ok),
                   note="pi*eps/gap attained by phi between neighbours")
        report.data["count"] = int(eta.size)
        return report


@lru_cache(maxsize=32)
def _weyl_table(profile, n_nodes: int, tol: float):
    """Counting integral ``int_{lambda_min}^{lam} phi`` on a smoothstep grid."""
    lmin = profile.lambda_min
    w = np.linspace(0.0, 1.0, n_nodes)
    s = w * w * (3.0 - 2.0 * w)
    lam = lmin + (1.0 - lmin) * s
    dlam_dw = (1.0 - lmin) * 6.0 * w * (1.0 - w)
    phi = np.zeros_like(w)
    for i in range(1, n_nodes - 1):
        phi[i] = phi_nls(profile, float(lam[i]), tol)
    integrand = phi * dlam_dw
    cum = cumulative_trapezoid(integrand, w, initial=0.0)
    return lam, cum


def soliton_lattice(profile, epsilon: float, t: float, x_range=None, n_samples: Optional[int] = None,
                    phi: Optional[Callable] = None, method: str = "counting",
                    n_nodes: int = 801, tol: float = 1e-9) -> SolitonLattice:
    """Dark-soliton lattice on the positive Whitham branch at time ``t``.

    ``method="counting"`` places ``eta_n`` where the Weyl counting function
    equals ``n - 1/2``; consecutive gaps then equal ``pi eps / phi(bar eta)``
    for some ``bar eta`` between neighbours. ``method="recursion"`` starts
    from the first counting wavenumber and steps ``eta_{n+1} = eta_n + pi
    eps / phi(eta_n)``. Phases are zero. ``phi`` may be overridden by any
    positive callable.
    """
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    if not t > 0:
        raise DomainError("t must be positive")
    lmin = profile.lambda_min
    if phi is None:
        phi_fn = lambda v: abs(phi_nls(profile, v, tol))  # noqa: E731
        lam_nodes, cum = _weyl_table(profile, n_nodes, tol)
    else:
        phi_fn = phi
        w = np.linspace(0.0, 1.0, n_nodes)
        lam_nodes = lmin + (1.0 - lmin) * w * w * (3.0 - 2.0 * w)
        vals = np.array([phi(v) if 0 < i < n_nodes - 1 else 0.0 for i, v in enumerate(lam_nodes)])
        vals[0] = phi(lmin)
        cum = cumulative_trapezoid(vals, lam_nodes, initial=0.0)
    counts = cum / (math.pi * epsilon)
    total = counts[-1]
    n_max = int(math.floor(total + 0.5))
    if n_max < 2:
        raise LatticeTooCoarseError(
            f"epsilon={epsilon} leaves only {n_max} wavenumber(s) in the branch")
    keep = np.concatenate([[True], np.diff(counts) > 0])
    inverse = PchipInterpolator(counts[keep], lam_nodes[keep])
    targets = np.arange(1, n_max + 1) - 0.5
    if method == "counting":
        eta = np.asarray(inverse(targets), dtype=float)
    elif method == "recursion":
        eta = [float(inverse(0.5))]
        while True:
            nxt = eta[-1] + math.pi * epsilon / phi_fn(eta[-1])
            if nxt >= 1.0:
                break
            eta.append(nxt)
        eta = np.asarray(eta)
    else:
        raise ValueError(f"unknown method {method!r}")
    eta = np.clip(eta, lmin, 1.0 - 1e-15)

    if x_range is None:
        x_range = (lmin * t - 0.1 * t, t + 0.05 * t)
    x0, x1 = float(x_range[0]), float(x_range[1])
    if not x1 > x0:
        raise DomainError("x_range must be increasing")
    if n_samples is None:
        n_samples = int(math.ceil((x1 - x0) / (0.25 * epsilon))) + 1
    dx = (x1 - x0) / (n_samples - 1)
    x = x0 + dx * np.arange(n_samples)
    phases = np.zeros_like(eta)
    dip = np.zeros_like(x)
    reach = 40.0 * epsilon / np.sqrt(np.maximum(1.0 - eta**2, 1e-30))
    for e, c, r in zip(eta, eta * t + phases, reach):
        lo = np.searchsorted(x, c - r)
        hi = np.searchsorted(x, c + r)
        if hi > lo:
            dip[lo:hi] += dark_soliton_dip(x[lo:hi] - c, e, epsilon)
    grid = FieldGrid(1.0 - dip, (dx,), (x0,))
    return SolitonLattice(epsilon, t, eta, phases, grid, phi_fn, lmin)


def local_average(field: FieldGrid, window: float, kernel: str = "boxcar",
                  mode: str = "nearest") -> FieldGrid:
    """Moving average of ``field`` over ``window`` on the same grid.

    ``kernel="boxcar"`` averages uniformly over ``window``; ``"gaussian"``
    uses a Gaussian of standard deviation ``window / 2``, whose response to
    a periodic train of bumps is exponentially flat once ``window`` exceeds
    the train spacing. ``mode`` follows :mod:`scipy.ndimage`.
    """
    if field.ndim != 1:
        raise ValidationError("local_average expects a 1-D field")
    if kernel == "boxcar":
        return field.with_values(mollify(field.values, field.spacing, window, mode=mode))
    if kernel == "gaussian":
        dx = field.spacing[0]
        if not window >= dx:
            raise DomainError(f"window {window} is smaller than the grid spacing {dx}")
        sigma = 0.5 * window / dx
        return field.with_values(gaussian_filter1d(np.asarray(field.values, dtype=float), sigma,
                                                   mode=mode, truncate=6.0))
    raise ValueError(f"unknown kernel {kernel!r}")


# ---------------------------------------------------------------------------
# turbulent viscosity from weak-limit fields


def nu_turb_nls_field(mubar: FieldGrid, Qbar: FieldGrid, rhobar: FieldGrid, eps_grad: float = 1e-8,
                      convexity_tol: float = 1e-10, method: str = "fd") -> FieldGrid:
    """``(Qbar - Q(rhobar, mubar)) / d_x mubar`` where ``|d_x mubar| > eps_grad``."""
    require_same_grid(mubar, Qbar, rhobar)
    rho = np.asarray(rhobar.values, dtype=float)
    if np.any(rho <= 0):
        raise DomainError("rhobar must be positive everywhere")
    defect = np.asarray(Qbar.values, dtype=float) - q_flux(rho, mubar.values)
    worst = float(defect.min()) if defect.size else 0.0
    if worst < -convexity_tol:
        raise ValidationError(f"convexity violated: Qbar - Q(rhobar, mubar) reaches {worst:.3e}")
    dmu = gradient(np.asarray(mubar.values, dtype=float), mubar.spacing[0], method=method)
    mask = np.abs(dmu) <= eps_grad
    with np.errstate(divide="ignore", invalid="ignore"):
        nu = np.where(mask, np.nan, defect / np.where(mask, 1.0, dmu))
    return mubar.with_values(nu, mask=mask)
