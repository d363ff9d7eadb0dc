"""Single-well initial data and their turning points.

KdV data are negative wells ``u0`` with one minimum ``u0(x0) = -1``; the
turning points at level ``eta`` solve ``u0(x) = -eta**2``. NLS data are
described by the Riemann invariants ``r_plus`` (one minimum, ``lambda_min``)
and ``r_minus`` (one maximum, ``lambda_max``); turning points at ``lambda``
solve ``r_plus(x) = lambda`` on the positive branch and ``r_minus(x) =
lambda`` on the negative one.

Each profile exposes a ``gap`` method that returns the positive quantity
under the square root of the Whitham integrands, evaluated from the exact
distance to the nearest turning point when the family allows it. That keeps
the integrands accurate right up to the inverse-square-root singularity.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import bisect

from dispersion_lab.errors import DataError, DomainError
from dispersion_lab.reports import DiagnosticsReport

ROOT_XTOL = 1e-13


class NonSmoothProfileWarning(UserWarning):
    """beta <= 1 wells have a kink at the minimum (not Schwartz class)."""


def _check_beta(beta: float, width: float) -> None:
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")
    if not width > 0:
        raise DomainError(f"width must be positive, got {width}")
    if beta <= 1:
        warnings.warn(
            f"beta={beta} <= 1: the well is not smooth at its minimum; accepted anyway",
            NonSmoothProfileWarning,
            stacklevel=3,
        )


def _level_offset(level_power: float, s: np.ndarray, beta: float, d=None, side_root=None):
    """``level_power - s**beta`` with ``s = side_root - d`` evaluated stably.

    ``level_power`` equals ``side_root**beta``. When the distance ``d`` to the
    root is known the difference is formed as ``-R**beta * expm1(beta *
    log1p(-d/R))`` which has no cancellation.
    """
    if d is None or side_root is None or side_root == 0:
        return level_power - s**beta
    d = np.minimum(np.asarray(d, dtype=float), side_root)
    with np.errstate(divide="ignore"):
        # d == side_root (the well centre) gives log1p(-1) = -inf and expm1(-inf) = -1
        return -level_power * np.expm1(beta * np.log1p(-d / side_root))


# ---------------------------------------------------------------------------
# analytic beta families


@dataclass(frozen=True)
class KdvBetaWell:
    """``u0(x) = -exp(-|(x - shift)/width|**beta)``."""

    beta: float
    shift: float = 0.0
    width: float = 1.0

    def __post_init__(self):
        _check_beta(self.beta, self.width)

    kind = "kdv"
    symmetric = True

    @property
    def x0(self) -> float:
        return self.shift

    @property
    def min_value(self) -> float:
        return -1.0

    def u0(self, x):
        s = np.abs((np.asarray(x, dtype=float) - self.shift) / self.width)
        return -np.exp(-(s**self.beta))

    def turning_points(self, eta: float):
        """Closed form ``|x - shift| = width * (2 ln(1/eta))**(1/beta)``."""
        _check_eta(eta)
        r = self.width * (2.0 * math.log(1.0 / eta)) ** (1.0 / self.beta)
        return self.shift - r, self.shift + r

    def gap(self, x, eta, d=None, side=None):
        """``-u0(x) - eta**2``; ``d`` is the distance to the turning point on ``side``."""
        level = 2.0 * math.log(1.0 / eta)
        s = np.abs((np.asarray(x, dtype=float) - self.shift) / self.width)
        root = level ** (1.0 / self.beta)
        dd = None if d is None else np.asarray(d, dtype=float) / self.width
        # exp(-s^b) - eta^2 = eta^2 * expm1(level - s^b)
        return eta**2 * np.expm1(_level_offset(level, s, self.beta, dd, root))


@dataclass(frozen=True)
class NlsBetaWell:
    """Zero-momentum symmetric data ``r_plus = 1 - exp(-|x|**beta)/2 = -r_minus``.

    ``A = r_plus`` is the amplitude (density ``A**2``) and ``S = 0``.
    """

    beta: float
    shift: float = 0.0
    width: float = 1.0

    def __post_init__(self):
        _check_beta(self.beta, self.width)

    kind = "nls"
    symmetric = True
    lambda_min = 0.5
    lambda_max = -0.5

    @property
    def x0(self) -> float:
        return self.shift

    def r_plus(self, x):
        s = np.abs((np.asarray(x, dtype=float) - self.shift) / self.width)
        return 1.0 - 0.5 * np.exp(-(s**self.beta))

    def r_minus(self, x):
        return -self.r_plus(x)

    def amplitude(self, x):
        return self.r_plus(x)

    def phase(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def turning_points(self, lam: float):
        """Closed form ``|x - shift| = width * (-ln(2(1 - |lam|)))**(1/beta)``."""
        m = _check_lambda(self, lam)
        if m == 0.5:
            return self.shift, self.shift
        r = self.width * (-math.log(2.0 * (1.0 - m))) ** (1.0 / self.beta)
        return self.shift - r, self.shift + r

    def gap(self, x, lam, d=None, side=None):
        """``(lam - r_plus)(lam - r_minus)`` (nonnegative between the turning points)."""
        m = abs(lam)
        level = -math.log(2.0 * (1.0 - m))
        s = np.abs((np.asarray(x, dtype=float) - self.shift) / self.width)
        root = level ** (1.0 / self.beta) if level > 0 else 0.0
        dd = None if d is None else np.asarray(d, dtype=float) / self.width
        # m - r_plus = (1 - m) * expm1(level - s^b)
        near = (1.0 - m) * np.expm1(_level_offset(level, s, self.beta, dd, root))
        far = m + self.r_plus(x)
        return near * far

    def numerator(self, x, lam):
        return lam - 0.5 * (self.r_plus(x) + self.r_minus(x))


# ---------------------------------------------------------------------------
# sampled wells


def _local_minima(values: np.ndarray) -> list:
    """Indices of strict-or-plateau local minima of a sampled sequence."""
    v = np.asarray(values, dtype=float)
    mins = []
    n = len(v)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and v[j + 1] == v[i]:
            j += 1
        left_higher = i == 0 or v[i - 1] > v[i]
        right_higher = j == n - 1 or v[j + 1] > v[i]
        interior = not (i == 0 and j == n - 1)
        if left_higher and right_higher and interior:
            mins.append(i)
        i = j + 1
    return mins


class SampledWell:
    """A sampled single well: one minimum, strictly monotone on each side.

    Each side is interpolated with a monotone piecewise cubic (PCHIP), which
    keeps the single-well property between samples. Construction does not
    raise on a multi-well input so that :func:`validate_single_well` can
    report it; operations that need the single-well structure do raise.
    """

    kind = "kdv"
    symmetric = False

    def __init__(self, x, values):
        x = np.asarray(x, dtype=float)
        values = np.asarray(values, dtype=float)
        if x.ndim != 1 or x.shape != values.shape:
            raise DataError("abscissae and values must be 1-D arrays of equal length")
        if x.size < 3:
            raise DataError("need at least 3 samples")
        if np.any(np.diff(x) <= 0):
            raise DataError("abscissae must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise DataError("values must be finite")
        self.x = x
        self.values = values
        self.minima = _local_minima(values)
        self.imin = int(np.argmin(values))
        self.problems = self._structure_problems()
        if not self.problems:
            i = self.imin
            left_x, left_v = x[: i + 1], values[: i + 1]
            right_x, right_v = x[i:], values[i:]
            self._left = PchipInterpolator(left_x, left_v) if i >= 1 else None
            self._right = PchipInterpolator(right_x, right_v) if i < len(x) - 1 else None

    def _structure_problems(self) -> list:
        problems = []
        if len(self.minima) != 1:
            extra = [float(self.x[i]) for i in self.minima if i != self.imin]
            problems.append(("local_minima", len(self.minima), extra))
        i = self.imin
        if i == 0 or i == len(self.x) - 1:
            problems.append(("minimum_on_boundary", float(self.x[i]), []))
        if np.any(np.diff(self.values[: i + 1]) >= 0):
            problems.append(("left_not_decreasing", None, []))
        if np.any(np.diff(self.values[i:]) <= 0):
            problems.append(("right_not_increasing", None, []))
        return problems

    def require_valid(self) -> None:
        if self.problems:
            raise DataError(f"sampled profile is not a single well: {self.problems}")

    @property
    def x0(self) -> float:
        return float(self.x[self.imin])

    @property
    def min_value(self) -> float:
        return float(self.values[self.imin])

    def __call__(self, x):
        self.require_valid()
        x = np.asarray(x, dtype=float)
        out = np.where(x <= self.x0, self._left(np.minimum(x, self.x0)),
                       self._right(np.maximum(x, self.x0)))
        return out

    u0 = __call__

    def drop(self, x, level: float, d=None, side=None):
        """``level - u0(x)`` where ``level`` is attained at ``x + side * d``.

        When the offset ``d`` to the crossing is tiny the direct difference
        cancels to roundoff, so a second-order Taylor expansion about ``x``
        is used instead.
        """
        direct = level - self(x)
        if d is None or side is None:
            return direct
        x = np.asarray(x, dtype=float)
        s = side * np.asarray(d, dtype=float)
        small = np.abs(s) < 1e-6 * (self.x[-1] - self.x[0])
        if not np.any(small):
            return direct
        on_left = x <= self.x0
        d1 = np.where(on_left, self._left.derivative(1)(np.minimum(x, self.x0)),
                      self._right.derivative(1)(np.maximum(x, self.x0)))
        d2 = np.where(on_left, self._left.derivative(2)(np.minimum(x, self.x0)),
                      self._right.derivative(2)(np.maximum(x, self.x0)))
        return np.where(small, d1 * s + 0.5 * d2 * s * s, direct)

    def gap(self, x, eta, d=None, side=None):
        """``-u0(x) - eta**2`` from the interpolant."""
        return self.drop(x, -eta**2, d, side)

    def level_crossings(self, level: float, tol: float = ROOT_XTOL):
        """Abscissae on each side where the interpolant equals ``level``."""
        self.require_valid()
        if level < self.min_value:
            raise DomainError(f"level {level} is below the minimum {self.min_value}")
        if level == self.min_value:
            return self.x0, self.x0
        left_top, right_top = self.values[0], self.values[-1]
        if level > left_top or level > right_top:
            raise DataError(
                f"level {level} is not bracketed by the samples (edges {left_top}, {right_top})"
            )
        xl = _bracketed_root(lambda s: float(self._left(s)) - level, self.x[: self.imin + 1], tol)
        xr = _bracketed_root(lambda s: float(self._right(s)) - level, self.x[self.imin :], tol)
        return xl, xr


def _bracketed_root(func, xs: np.ndarray, tol: float) -> float:
    """Bisection after locating the sign change by a monotone scan of ``xs``."""
    vals = np.array([func(s) for s in xs])
    if np.any(vals == 0.0):
        return float(xs[np.nonzero(vals == 0.0)[0][0]])
    idx = np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]
    if idx.size == 0:
        raise DataError("root is not bracketed by the sampled data")
    i = int(idx[0])
    return float(bisect(func, xs[i], xs[i + 1], xtol=tol, rtol=4 * np.finfo(float).eps))


class SampledNlsWell:
    """Sampled Riemann invariants ``r_plus`` (one minimum) and ``r_minus`` (one maximum)."""

    kind = "nls"
    symmetric = False

    def __init__(self, x, r_plus, r_minus):
        self.x = np.asarray(x, dtype=float)
        self.plus = SampledWell(x, r_plus)
        self.minus_neg = SampledWell(x, -np.asarray(r_minus, dtype=float))
        self.r_plus_values = np.asarray(r_plus, dtype=float)
        self.r_minus_values = np.asarray(r_minus, dtype=float)

    @property
    def lambda_min(self) -> float:
        return self.plus.min_value

    @property
    def lambda_max(self) -> float:
        return -self.minus_neg.min_value

    @property
    def x0(self) -> float:
        return self.plus.x0

    def r_plus(self, x):
        return self.plus(x)

    def r_minus(self, x):
        return -self.minus_neg(x)

    def turning_points(self, lam: float, tol: float = ROOT_XTOL):
        _check_lambda(self, lam)
        if lam >= self.lambda_min:
            return self.plus.level_crossings(lam, tol)
        return self.minus_neg.level_crossings(-lam, tol)

    def gap(self, x, lam, d=None, side=None):
        if lam >= self.lambda_min:
            return self.plus.drop(x, lam, d, side) * (lam - self.r_minus(x))
        return (lam - self.r_plus(x)) * -self.minus_neg.drop(x, -lam, d, side)

    def numerator(self, x, lam):
        return lam - 0.5 * (self.r_plus(x) + self.r_minus(x))

    def problems(self) -> list:
        return self.plus.problems + [(p[0].replace("minima", "maxima"),) + tuple(p[1:])
                                     for p in self.minus_neg.problems]


# ---------------------------------------------------------------------------
# turning-point operations


def _check_eta(eta: float) -> None:
    if not (0.0 < eta < 1.0):
        raise DomainError(f"eta must lie in (0, 1), got {eta}")


def _check_lambda(profile, lam: float) -> float:
    """Validate ``lam`` against the Whitham branches; returns ``|lam|`` for symmetric data."""
    lmin, lmax = profile.lambda_min, profile.lambda_max
    if lam >= 1.0 or lam <= -1.0:
        raise DomainError(f"lambda must lie inside (-1, 1), got {lam}")
    if lmax < lam < lmin:
        raise DomainError(
            f"lambda={lam} lies in the solitonless gap ({lmax}, {lmin})"
        )
    return abs(lam)


def kdv_turning_points(profile, eta: float, tol: float = ROOT_XTOL, closed_form: bool = True):
    """Turning points ``x_minus < x0 < x_plus`` with ``u0(x_pm) = -eta**2``.

    Analytic families use their closed form unless ``closed_form`` is false,
    in which case (and for sampled data) the roots are found by bisection
    after a monotone scan.
    """
    _check_eta(eta)
    if isinstance(profile, SampledWell):
        return profile.level_crossings(-(eta**2), tol)
    if closed_form:
        return profile.turning_points(eta)
    return _bisect_analytic(profile.u0, profile.x0, -(eta**2), tol)


def nls_turning_points(profile, lam: float, tol: float = ROOT_XTOL, closed_form: bool = True):
    """Turning points where ``r_plus = lam`` (positive branch) or ``r_minus = lam``."""
    _check_lambda(profile, lam)
    if isinstance(profile, SampledNlsWell) or closed_form:
        return profile.turning_points(lam)
    if lam == profile.lambda_min or lam == profile.lambda_max:
        return profile.x0, profile.x0
    if lam > 0:
        return _bisect_analytic(profile.r_plus, profile.x0, lam, tol)
    return _bisect_analytic(lambda x: -profile.r_minus(x), profile.x0, -lam, tol)


def _bisect_analytic(func, x0: float, level: float, tol: float):
    """Roots of ``func = level`` left and right of the minimum ``x0``."""
    g = lambda s: float(func(s)) - level  # noqa: E731
    roots = []
    for direction in (-1.0, 1.0):
        step = 1.0
        inner = x0
        outer = x0 + direction * step
        while g(outer) < 0:
            inner = outer
            step *= 2.0
            outer = x0 + direction * step
            if step > 1e6:
                raise DataError("could not bracket the turning point")
        lo, hi = sorted((inner, outer))
        if g(lo) == 0.0:
            roots.append(lo)
        elif g(hi) == 0.0:
            roots.append(hi)
        else:
            roots.append(bisect(g, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps))
    return roots[0], roots[1]


# ---------------------------------------------------------------------------
# validation


def _sample_grid(profile, n: int = 2001) -> np.ndarray:
    extent = profile.width * 12.0 ** (1.0 / min(profile.beta, 1.0)) if hasattr(profile, "beta") else 10.0
    return profile.x0 + np.linspace(-extent, extent, n)


def validate_single_well(profile) -> DiagnosticsReport:
    """Check the single-well hypotheses; failures are reported, not raised."""
    report = DiagnosticsReport("single_well")
    if isinstance(profile, SampledWell):
        _validate_sampled(report, profile)
    elif isinstance(profile, SampledNlsWell):
        _validate_sampled(report, profile.plus, label="r_plus")
        _validate_sampled(report, profile.minus_neg, label="r_minus")
        _validate_ordering(report, profile.x, profile.r_plus_values, profile.r_minus_values,
                             profile.lambda_min, profile.lambda_max)
    elif isinstance(profile, KdvBetaWell):
        x = _sample_grid(profile)
        u = profile.u0(x)
        report.add("unique_minimum", len(_local_minima(u)), 1, len(_local_minima(u)) == 1)
        report.add("min_value", float(u.min()), -1.0, abs(u.min() + 1.0) < 1e-12)
        right = u[x >= profile.x0]
        report.add("increasing_right", bool(np.all(np.diff(right) >= 0)), True,
                   bool(np.all(np.diff(right) >= 0)))
        report.add("strictly_negative", float(u.max()), 0.0, bool(np.all(u < 0)))
        if profile.beta <= 1:
            report.notes.append("beta <= 1: kink at the minimum, not Schwartz class")
        report.data["x0"] = profile.x0
    elif isinstance(profile, NlsBetaWell):
        x = _sample_grid(profile)
        rp, rm = profile.r_plus(x), profile.r_minus(x)
        report.add("unique_min_r_plus", len(_local_minima(rp)), 1, len(_local_minima(rp)) == 1)
        report.add("unique_max_r_minus", len(_local_minima(-rm)), 1, len(_local_minima(-rm)) == 1)
        report.add("zero_momentum", float(np.max(np.abs(rp + rm))), 0.0,
                   float(np.max(np.abs(rp + rm))) == 0.0)
        _validate_ordering(report, x, rp, rm, float(rp.min()), float(rm.max()))
        if profile.beta <= 1:
            report.notes.append("beta <= 1: kink at the minimum, not Schwartz class")
    else:
        raise TypeError(f"unsupported profile type {type(profile).__name__}")
    return report


def _validate_sampled(report, well: SampledWell, label: str = "values") -> None:
    n_min = len(well.minima)
    extra = [float(well.x[i]) for i in well.minima if i != well.imin]
    report.add(f"{label}_unique_extremum", n_min, 1, n_min == 1,
               note=f"additional extrema at x={extra}" if extra else "")
    for name, detail, _ in well.problems:
        if name in ("left_not_decreasing", "right_not_increasing", "minimum_on_boundary"):
            report.add(f"{label}_{name}", detail, None, False)
    if extra:
        report.data[f"{label}_extra_extrema"] = extra
    report.data[f"{label}_x0"] = well.x0


def _validate_ordering(report, x, rp, rm, lmin, lmax) -> None:
    ok = bool(np.all(rm >= -1) and np.all(rm <= lmax) and lmax < lmin
              and np.all(rp >= lmin) and np.all(rp <= 1))
    report.add("riemann_invariant_ordering", ok, "-1 <= r_minus <= lambda_max < lambda_min <= r_plus <= 1", ok)
    report.data["lambda_min"] = float(lmin)
    report.data["lambda_max"] = float(lmax)
