"""Quadrature for integrands with weak (exponent < 1) endpoint singularities.

Two independent schemes are provided:

``de``
    Double-exponential (tanh-sinh) node placement with level-by-level step
    halving. Endpoint singularities of the form ``(x - a)**-p`` with ``p < 1``
    are damped by the doubly exponential decay of the weights.

``subst``
    Power substitution ``x = b - t**m`` (or ``a + t**m``) with ``m = 1/(1-p)``
    that turns the singular factor into a smooth one, followed by adaptive
    Gauss-Legendre panels. For ``p = 1/2`` this is ``t = sqrt(b - x)``.

Integrands are called with numpy arrays. Near an endpoint the abscissa
``x`` cannot resolve offsets below machine precision, so integrands may opt
into receiving the exact offsets: with ``offsets=True`` the call is
``f(x, x_minus_a, b_minus_x)``. Offsets are computed without cancellation by
both schemes. Without offsets, accuracy next to a singular endpoint is
limited to roughly ``sqrt(ulp)`` and the error estimate says so.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import expit

from dispersion_lab.errors import DomainError, NonIntegrableError, QuadratureAccuracyError

DEFAULT_REL_TOL = 1e-10
DEFAULT_ABS_FLOOR = 1e-14
DEFAULT_MAX_DEPTH = 12
SCHEMES = ("de", "subst")

_HINTS = ("none", "inverse_sqrt")


@dataclass(frozen=True)
class SingularitySpec:
    """Declared endpoint behaviour: ``|f| <= C (x - a)**-left_exponent`` etc."""

    left_exponent: float = 0.0
    right_exponent: float = 0.0
    hint: str = "none"

    def __post_init__(self):
        for name in ("left_exponent", "right_exponent"):
            p = getattr(self, name)
            if not (0.0 <= p < 1.0):
                raise DomainError(f"{name} must lie in [0, 1) for integrability, got {p}")
        if self.hint not in _HINTS:
            raise DomainError(f"hint must be one of {_HINTS}, got {self.hint!r}")

    @classmethod
    def inverse_sqrt(cls, left: bool = False, right: bool = True) -> "SingularitySpec":
        return cls(0.5 if left else 0.0, 0.5 if right else 0.0, "inverse_sqrt")

    def substitution_power(self, exponent: float) -> float:
        if self.hint == "inverse_sqrt" or exponent == 0.5:
            return 2.0
        return 1.0 / (1.0 - exponent)


@dataclass(frozen=True)
class QuadResult:
    value: float
    error_estimate: float
    evaluations: int

    def __post_init__(self):
        if not self.error_estimate >= 0:
            raise ValueError("error_estimate must be nonnegative")
        if self.evaluations < 1:
            raise ValueError("evaluations must be >= 1")

    def __add__(self, other: "QuadResult") -> "QuadResult":
        return QuadResult(self.value + other.value, self.error_estimate + other.error_estimate,
                          self.evaluations + other.evaluations)

    def scaled(self, factor: float) -> "QuadResult":
        return QuadResult(factor * self.value, abs(factor) * self.error_estimate, self.evaluations)


class _Counted:
    """Wraps an integrand so that both call conventions look alike."""

    def __init__(self, f, a, b, offsets):
        self.f = f
        self.a = a
        self.b = b
        self.offsets = offsets
        self.count = 0

    def __call__(self, x, xa, xb):
        self.count += np.size(x)
        if self.offsets:
            y = self.f(x, xa, xb)
        else:
            y = self.f(x)
        return np.asarray(y, dtype=float) * np.ones_like(x)


def _tolerance(value, rel_tol, abs_floor):
    return max(rel_tol * abs(value), abs_floor)


def empirical_exponent(f: _Counted, a: float, b: float, at_right: bool) -> float:
    """Estimate ``p`` in ``|f| ~ C d**-p`` from two small offsets ``d``."""
    width = b - a
    d1, d2 = 1e-6 * width, 1e-9 * width
    offs = np.array([d1, d2])
    if at_right:
        x = b - offs
        y = f(x, width - offs, offs)
    else:
        x = a + offs
        y = f(x, offs, width - offs)
    y = np.abs(y)
    if not np.all(np.isfinite(y)):
        return math.inf
    if y[0] == 0.0 or y[1] == 0.0:
        return 0.0
    return math.log(y[1] / y[0]) / math.log(d1 / d2)


def _check_integrable(f, a, b, sing):
    for at_right in (False, True):
        p = empirical_exponent(f, a, b, at_right)
        if p >= 1.0 - 1e-3:
            side = "right" if at_right else "left"
            raise NonIntegrableError(
                f"integrand diverges like d**-{p:.3f} at the {side} endpoint; not integrable"
            )


# ---------------------------------------------------------------------------
# tanh-sinh


_DE_TMAX = 6.5


def _de_nodes(h: float, k: np.ndarray, step: float):
    t = k * step
    s = 0.5 * np.pi * np.sinh(t)
    # offsets from each end without cancellation
    xa = 2.0 * h * expit(2.0 * s)
    xb = 2.0 * h * expit(-2.0 * s)
    w = h * 0.5 * np.pi * np.cosh(t) * 4.0 * expit(2.0 * s) * expit(-2.0 * s)
    return xa, xb, w


def _de_level_sum(f: _Counted, a, b, step, odd_only, offsets):
    h = 0.5 * (b - a)
    kmax = int(math.ceil(_DE_TMAX / step))
    k = np.arange(-kmax, kmax + 1, dtype=float)
    if odd_only:
        k = k[np.abs(k) % 2 == 1]
    xa, xb, w = _de_nodes(h, k, step)
    x = np.where(xa <= xb, a + xa, b - xb)
    keep = (xa > 0) & (xb > 0) & (w > 0)
    if not offsets:
        keep &= (x > a) & (x < b)
    if not np.any(keep):
        return 0.0
    return float(np.sum(w[keep] * f(x[keep], xa[keep], xb[keep])))


def _de_tail(f: _Counted, a, b, sing, step):
    """Power-law estimate of the sliver next to each singular endpoint that
    plain abscissae cannot resolve (only used when offsets are unavailable)."""
    h = 0.5 * (b - a)
    kmax = int(math.ceil(_DE_TMAX / step))
    tail = 0.0
    for exponent, sign in ((sing.left_exponent, -1.0), (sing.right_exponent, 1.0)):
        if exponent <= 0.0:
            continue
        k = sign * np.arange(0, kmax + 1, dtype=float)
        xa, xb, _ = _de_nodes(h, k, step)
        x = np.where(xa <= xb, a + xa, b - xb)
        inside = np.nonzero((x > a) & (x < b))[0]
        if inside.size == 0:
            continue
        i = inside[-1]
        d = xa[i] if sign < 0 else xb[i]
        fi = f(np.array([x[i]]), np.array([xa[i]]), np.array([xb[i]]))[0]
        tail += fi * d / (1.0 - exponent)
    return tail


def _integrate_de(f, a, b, sing, rel_tol, abs_floor, max_depth, offsets):
    step = 1.0
    raw = _de_level_sum(f, a, b, step, False, offsets)
    tail = 0.0 if offsets else _de_tail(f, a, b, sing, step)
    value = step * raw + tail
    previous = value
    err = math.inf
    for level in range(1, max_depth + 1):
        step *= 0.5
        raw += _de_level_sum(f, a, b, step, True, offsets)
        tail = 0.0 if offsets else _de_tail(f, a, b, sing, step)
        value = step * raw + tail
        err = abs(value - previous)
        if level >= 3 and err <= _tolerance(value, rel_tol, abs_floor):
            # abscissa rounding next to a singular endpoint perturbs the
            # unresolved sliver by up to its own size
            return QuadResult(value, err + abs(tail), f.count)
        previous = value
    raise QuadratureAccuracyError(
        f"tanh-sinh did not reach rel_tol={rel_tol} within {max_depth} levels "
        f"(estimate {err:.3e})", value, err)


# ---------------------------------------------------------------------------
# substitution + adaptive Gauss-Legendre


@lru_cache(maxsize=8)
def _legendre(n: int):
    return np.polynomial.legendre.leggauss(n)


def _adaptive_gl(F, lo, hi, rel_tol, abs_floor, max_depth, n=16):
    """Adaptive Gauss-Legendre on [lo, hi]; ``F`` maps t-nodes to values."""
    x1, w1 = _legendre(n)
    x2, w2 = _legendre(2 * n)

    def panel(p, q):
        c, r = 0.5 * (p + q), 0.5 * (q - p)
        q1 = r * np.dot(w1, F(c + r * x1))
        q2 = r * np.dot(w2, F(c + r * x2))
        return q2, abs(q2 - q1)

    panels = [(lo, hi, 0) + panel(lo, hi)]
    while True:
        total = math.fsum(p[3] for p in panels)
        err = math.fsum(p[4] for p in panels)
        tol = _tolerance(total, rel_tol, abs_floor)
        if err <= tol:
            return total, err
        share = tol / len(panels)
        refined = []
        split_any = False
        for p, q, depth, val, e in panels:
            if e > share and depth < max_depth:
                mid = 0.5 * (p + q)
                refined.append((p, mid, depth + 1) + panel(p, mid))
                refined.append((mid, q, depth + 1) + panel(mid, q))
                split_any = True
            else:
                refined.append((p, q, depth, val, e))
        panels = refined
        if not split_any:
            raise QuadratureAccuracyError(
                f"substitution scheme did not reach rel_tol={rel_tol} within depth {max_depth} "
                f"(estimate {err:.3e})", total, err)


def _one_sided(f, a, b, exponent, at_right, sing, rel_tol, abs_floor, max_depth):
    width = b - a
    m = sing.substitution_power(exponent) if exponent > 0 else 1.0
    tmax = width ** (1.0 / m)

    def F(t):
        d = t ** m
        jac = m * t ** (m - 1.0) if m != 1.0 else np.ones_like(t)
        if at_right:
            x = b - d
            y = f(x, width - d, d)
        else:
            x = a + d
            y = f(x, d, width - d)
        return y * jac

    return _adaptive_gl(F, 0.0, tmax, rel_tol, abs_floor, max_depth)


def _integrate_subst(f, a, b, sing, rel_tol, abs_floor, max_depth, offsets):
    pl, pr = sing.left_exponent, sing.right_exponent
    if pl > 0 and pr > 0:
        mid = 0.5 * (a + b)
        # offsets relative to the full interval are rebuilt from sub-offsets
        fl = lambda x, xa, xb: f(x, xa, xb + (b - mid))  # noqa: E731
        fr = lambda x, xa, xb: f(x, xa + (mid - a), xb)  # noqa: E731
        v1, e1 = _one_sided(fl, a, mid, pl, False, sing, rel_tol, abs_floor, max_depth)
        v2, e2 = _one_sided(fr, mid, b, pr, True, sing, rel_tol, abs_floor, max_depth)
        value, err = v1 + v2, e1 + e2
    elif pl > 0:
        value, err = _one_sided(f, a, b, pl, False, sing, rel_tol, abs_floor, max_depth)
    else:
        value, err = _one_sided(f, a, b, pr, True, sing, rel_tol, abs_floor, max_depth)
    return QuadResult(value, err, max(f.count, 1))


def integrate_endpoint_singular(
    f: Callable,
    a: float,
    b: float,
    sing: SingularitySpec | None = None,
    rel_tol: float = DEFAULT_REL_TOL,
    abs_floor: float = DEFAULT_ABS_FLOOR,
    scheme: str = "de",
    max_depth: int = DEFAULT_MAX_DEPTH,
    offsets: bool = False,
    check: bool = True,
) -> QuadResult:
    """Integrate ``f`` over ``(a, b)`` allowing weak endpoint singularities.

    Parameters
    ----------
    f : callable
        Vectorised integrand ``f(x)``, or ``f(x, x - a, b - x)`` when
        ``offsets`` is true.
    a, b : float
        Interval with ``a < b``.
    sing : SingularitySpec, optional
        Declared endpoint exponents. Defaults to no singularity.
    rel_tol, abs_floor : float
        Stop once the estimated error is below ``max(rel_tol*|value|, abs_floor)``.
    scheme : {"de", "subst"}
        Tanh-sinh or power substitution with adaptive Gauss-Legendre.
    max_depth : int
        Refinement budget (tanh-sinh levels or panel bisections).
    check : bool
        Probe both endpoints for a non-integrable blow-up first.

    Raises
    ------
    NonIntegrableError
        The integrand grows like ``d**-p`` with ``p >= 1`` at an endpoint.
    QuadratureAccuracyError
        Budget exhausted; carries the best value and its error estimate.
    """
    if sing is None:
        sing = SingularitySpec()
    if not (a < b):
        raise DomainError(f"need a < b, got a={a}, b={b}")
    if scheme not in SCHEMES:
        raise DomainError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    a, b = float(a), float(b)
    counted = _Counted(f, a, b, offsets)
    if check:
        _check_integrable(counted, a, b, sing)
    if scheme == "de":
        return _integrate_de(counted, a, b, sing, rel_tol, abs_floor, max_depth, offsets)
    return _integrate_subst(counted, a, b, sing, rel_tol, abs_floor, max_depth, offsets)
