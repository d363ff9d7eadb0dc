"""Discrete Wigner transforms and the spectral diagnostics built on them.

The space transform of a periodic field sampled at ``x_j`` is

    W(x_j, k) = prod_i (2 dx_i) * sum_m h(r_m) u(x_j + m dx) (x) conj(u(x_j - m dx)) exp(-i k r_m)

with ``r_m = 2 m dx`` and ``k`` on the grid ``pi l / L``. Shifts are whole
samples on each side, so ``(1/2pi)**d sum_k W dk**d`` returns
``u(x_j) (x) conj(u(x_j))`` exactly (up to roundoff) for every ``x_j``.
The time transform is the same construction along a zero-padded record.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid

from dispersion_lab.errors import DomainError, ShapeError, ValidationError
from dispersion_lab.fields import FieldGrid, gradient, mollify
from dispersion_lab.reports import DiagnosticsReport


@dataclass
class WignerTensor:
    """Wigner samples with spatial (or time) base axes and dual axes.

    ``values`` has shape ``base_shape + dual_shape + component_shape``; the
    component shape is empty for scalar inputs and ``(d, d)`` for vector
    inputs. Dual axes are stored in increasing order. ``base_axes`` may be
    empty for a tensor at a single point or averaged over the base.
    """

    values: np.ndarray
    base_axes: tuple
    dual_axes: tuple
    mode: str = "space"
    window: str = "none"

    def __post_init__(self):
        self.values = np.asarray(self.values)
        self.base_axes = tuple(np.asarray(a, dtype=float) for a in self.base_axes)
        self.dual_axes = tuple(np.asarray(a, dtype=float) for a in self.dual_axes)
        if self.mode not in ("space", "time"):
            raise ValueError("mode must be 'space' or 'time'")
        lead = tuple(a.size for a in self.base_axes) + tuple(a.size for a in self.dual_axes)
        if self.values.shape[: len(lead)] != lead:
            raise ShapeError(f"values shape {self.values.shape} does not start with {lead}")

    @property
    def base_ndim(self) -> int:
        return len(self.base_axes)

    @property
    def dual_ndim(self) -> int:
        return len(self.dual_axes)

    @property
    def component_shape(self) -> tuple:
        return self.values.shape[self.base_ndim + self.dual_ndim:]

    @property
    def dual_spacing(self) -> tuple:
        return tuple(float(a[1] - a[0]) if a.size > 1 else 1.0 for a in self.dual_axes)

    def reconstruct(self) -> np.ndarray:
        """``(1/2pi)**d sum W dk**d`` over the dual axes."""
        axes = tuple(range(self.base_ndim, self.base_ndim + self.dual_ndim))
        weight = np.prod(self.dual_spacing) / (2.0 * math.pi) ** self.dual_ndim
        return weight * self.values.sum(axis=axes)

    def base_average(self) -> "WignerTensor":
        """Mean over the base axes."""
        vals = self.values.mean(axis=tuple(range(self.base_ndim))) if self.base_ndim else self.values
        return WignerTensor(vals, (), self.dual_axes, self.mode, self.window)

    def trace(self) -> np.ndarray:
        comp = self.component_shape
        if not comp:
            return self.values
        return np.trace(self.values, axis1=-2, axis2=-1)


# ---------------------------------------------------------------------------
# transforms


def _shift_indices(shape: Sequence[int]):
    """Index arrays for ``x + m`` and ``x - m`` on a periodic grid (base axes then shift axes)."""
    d = len(shape)
    plus, minus = [], []
    for i, n in enumerate(shape):
        j = np.arange(n)
        p = (j[:, None] + j[None, :]) % n
        q = (j[:, None] - j[None, :]) % n
        # place the (j, m) table on base axis i and shift axis i
        shape_ij = [1] * (2 * d)
        shape_ij[i] = n
        shape_ij[d + i] = n
        plus.append(p.reshape(shape_ij))
        minus.append(q.reshape(shape_ij))
    return tuple(plus), tuple(minus)


def _signed_shift(n: int) -> np.ndarray:
    m = np.arange(n)
    return np.where(m < n - n // 2, m, m - n)


def _outer(up, um, rank):
    if rank == 0:
        return up * np.conj(um)
    return up[..., :, None] * np.conj(um[..., None, :])


def wigner_pair(a: FieldGrid, b: Optional[FieldGrid] = None, window_width: Optional[float] = None) -> WignerTensor:
    """Cross Wigner transform of ``a`` and ``b`` (``b = a`` by default)."""
    b = a if b is None else b
    if not a.same_grid(b) or a.component_shape != b.component_shape:
        raise ShapeError("fields must share grid and components")
    if a.rank > 1:
        raise ShapeError("Wigner transform takes scalar or vector fields")
    d = a.ndim
    shape = a.shape
    lengths = [n * h for n, h in zip(shape, a.spacing)]
    plus, minus = _shift_indices(shape)
    comp = (slice(None),) * a.rank
    up = np.asarray(a.values)[plus + comp]
    um = np.asarray(b.values)[minus + comp]
    prod = _outer(up, um, a.rank)
    label = "none"
    if window_width is not None:
        if not window_width > 0:
            raise DomainError("window width must be positive")
        if any(window_width > L for L in lengths):
            raise DomainError(f"window width {window_width} exceeds the domain {min(lengths)}")
        taper = np.ones(shape)
        for i, (n, h) in enumerate(zip(shape, a.spacing)):
            r = 2.0 * h * _signed_shift(n)
            view = [1] * d
            view[i] = n
            taper = taper * np.exp(-0.5 * (r / window_width) ** 2).reshape(view)
        prod = prod * taper.reshape((1,) * d + shape + (1,) * (2 * a.rank))
        label = f"gaussian(r; width={window_width})"
    shift_axes = tuple(range(d, 2 * d))
    w = np.fft.fftshift(np.fft.fftn(prod, axes=shift_axes), axes=shift_axes)
    w = w * np.prod([2.0 * h for h in a.spacing])
    if not np.iscomplexobj(a.values) and not np.iscomplexobj(b.values):
        # the symmetric part; it carries the full reconstruction of u (x) u
        w = w.real
    k_axes = tuple(2.0 * np.pi * np.fft.fftshift(np.fft.fftfreq(n, d=2.0 * h)) for n, h in zip(shape, a.spacing))
    return WignerTensor(w, tuple(a.axis(i) for i in range(d)), k_axes, "space", label)


def wigner_space(field: FieldGrid, window_width: Optional[float] = None) -> WignerTensor:
    """Wigner transform ``W(x, k)`` of a periodic scalar or vector field.

    For real input the result is real, and for real vector input each
    ``d x d`` block is symmetric. ``window_width`` applies a Gaussian taper
    ``exp(-r**2 / (2 w**2))`` in the shift variable (equal to 1 at ``r = 0``).
    """
    return wigner_pair(field, None, window_width)


def gaussian_theta(width: float) -> Callable:
    """``exp(-s**2/(2 width**2))`` cut to zero beyond ``4 width``; equals 1 at 0."""
    def theta(s):
        s = np.asarray(s, dtype=float)
        return np.where(np.abs(s) <= 4.0 * width, np.exp(-0.5 * (s / width) ** 2), 0.0)
    theta.width = width
    return theta


def wigner_time(series, dt: float, theta: Optional[Callable] = None, t0: float = 0.0) -> WignerTensor:
    """Time Wigner transform ``W(t, tau)`` of a record at a fixed point.

    ``series`` has shape ``(n_t,)`` or ``(n_t, d)``. Samples beyond the
    record count as zero. ``theta`` weights the lag ``s = 2 m dt``; it must
    equal 1 at ``s = 0`` (default: Gaussian of width ``T/8``, ``T`` the
    record length).
    """
    u = np.asarray(series)
    if u.ndim not in (1, 2):
        raise ShapeError("series must have shape (n_t,) or (n_t, d)")
    if not dt > 0:
        raise DomainError("dt must be positive")
    n = u.shape[0]
    if n < 2:
        raise ShapeError("need at least two samples")
    record = n * dt
    if theta is None:
        theta = gaussian_theta(record / 8.0)
    width = getattr(theta, "width", None)
    if width is not None and width > record:
        raise DomainError(f"window width {width} exceeds the record length {record}")
    if not math.isclose(float(np.asarray(theta(np.array([0.0])))[0]), 1.0, rel_tol=0, abs_tol=1e-14):
        raise DomainError("theta must equal 1 at zero lag")
    m_count = n + (n % 2)
    m = _signed_shift(m_count)
    j = np.arange(n)[:, None]
    ip = j + m[None, :]
    im = j - m[None, :]
    valid = (ip >= 0) & (ip < n) & (im >= 0) & (im < n)
    ip = np.clip(ip, 0, n - 1)
    im = np.clip(im, 0, n - 1)
    rank = u.ndim - 1
    prod = _outer(u[ip], u[im], rank)
    weight = np.where(valid, np.asarray(theta(2.0 * dt * m))[None, :], 0.0)
    prod = prod * weight.reshape(weight.shape + (1,) * (2 * rank))
    w = 2.0 * dt * np.fft.fftshift(np.fft.fft(prod, axis=1), axes=1)
    if not np.iscomplexobj(u):
        w = w.real
    tau = 2.0 * np.pi * np.fft.fftshift(np.fft.fftfreq(m_count, d=2.0 * dt))
    label = f"theta(width={width})" if width is not None else "theta(custom)"
    return WignerTensor(w, (t0 + dt * np.arange(n),), (tau,), "time", label)


# ---------------------------------------------------------------------------
# defect spectra


def _smallest_member(runs, frame):
    from dispersion_lab.semiclassical import Trajectory

    pairs = []
    for r in runs:
        if isinstance(r, Trajectory):
            pairs.append((r.epsilon, r.frame_field(frame)))
        else:
            pairs.append((float(r[0]), r[1]))
    if not pairs:
        raise ValidationError("no runs given")
    return min(pairs, key=lambda p: p[0])


def defect_spectrum(runs, limit_field, mollifier: float, frame: int = -1,
                    window_width: Optional[float] = None) -> WignerTensor:
    """Wigner transform of ``u_eps - ubar`` at the smallest epsilon, mollified in ``x``.

    Its dual-axis integral equals the mollified defect tensor. Complex
    scalar members give ``|u - ubar|**2`` after integration.
    """
    eps, member = _smallest_member(runs, frame)
    ubar = limit_field.values if isinstance(limit_field, FieldGrid) else np.asarray(limit_field)
    if np.shape(ubar) != member.values.shape:
        raise ShapeError(f"limit shape {np.shape(ubar)} != member shape {member.values.shape}")
    diff = member.with_values(member.values - ubar)
    w = wigner_pair(diff, None, window_width)
    vals = w.values
    if np.iscomplexobj(vals) and diff.rank == 1:
        vals = vals.real  # matches the real part kept by the defect tensor
    vals = mollify(vals, member.spacing, mollifier, mode="wrap", axes=range(member.ndim))
    return WignerTensor(vals, w.base_axes, w.dual_axes, "space", w.window)


# ---------------------------------------------------------------------------
# isotropic spectra


@dataclass
class IsotropicSpectrum:
    """Shell-binned energy spectrum ``E(k)`` with bin width ``dk``."""

    k: np.ndarray
    energy: np.ndarray
    dk: float
    dimension: int
    residual: float
    min_trace: float

    @property
    def total(self) -> float:
        return float(np.sum(self.energy) * self.dk)


def _projector(kvec, d, rank):
    if rank == 0 or d == 1:
        return None
    kk = np.sqrt(np.sum(kvec**2, axis=-1))
    safe = np.where(kk > 0, kk, 1.0)
    khat = kvec / safe[..., None]
    p = np.eye(d) - khat[..., :, None] * khat[..., None, :]
    p[kk == 0] = np.eye(d) * (d - 1) / d
    return p


def isotropic_spectrum(tensor: WignerTensor, d: Optional[int] = None) -> IsotropicSpectrum:
    """Shell-averaged trace spectrum of a (base-averaged) Wigner tensor.

    For ``d`` in {1, 2} the bins are scaled so that ``sum E dk`` equals the
    mean of ``|u|**2``. For ``d = 3`` the isotropic form
    ``W = E(|k|)/(4 pi |k|**2) (I - k k/|k|**2)`` is inverted directly,
    ``E = 2 pi |k|**2 tr W``, whose integral is ``(2 pi)**3/2`` times the
    mean of ``|u|**2``. ``residual`` is the relative distance of the tensor
    from its isotropic counterpart with the same shell-averaged trace
    (interpolated in ``|k|``).
    """
    avg = tensor.base_average()
    ndual = avg.dual_ndim
    d = ndual if d is None else int(d)
    if d not in (1, 2, 3) or d != ndual:
        raise DomainError(f"dimension {d} must be 1, 2 or 3 and match the tensor's {ndual} dual axes")
    vals = avg.values.real if np.iscomplexobj(avg.values) else avg.values
    rank = len(avg.component_shape) // 2 if avg.component_shape else 0
    tr = np.trace(vals, axis1=-2, axis2=-1) if rank else vals
    grids = np.meshgrid(*avg.dual_axes, indexing="ij")
    kvec = np.stack(grids, axis=-1)
    kmag = np.sqrt(np.sum(kvec**2, axis=-1))
    dk = min(avg.dual_spacing)
    cell = float(np.prod(avg.dual_spacing))
    bins = np.rint(kmag / dk).astype(int)
    nb = int(bins.max()) + 1
    shell_sum = np.bincount(bins.ravel(), weights=tr.ravel(), minlength=nb)
    shell_cnt = np.bincount(bins.ravel(), minlength=nb)
    centers = dk * np.arange(nb)
    if d == 3:
        # invert pointwise with each sample's own |k|, then average the shell
        point_e = np.bincount(bins.ravel(), weights=(2.0 * math.pi * kmag**2 * tr).ravel(), minlength=nb)
        energy = np.divide(point_e, shell_cnt, out=np.zeros(nb), where=shell_cnt > 0)
    else:
        energy = shell_sum * cell / ((2.0 * math.pi) ** d * dk)
    # isotropy residual
    # the shell mean of |k|^2 tr, interpolated to each sample's |k|, so that
    # radial variation inside a discrete shell is not counted as anisotropy
    filled = shell_cnt > 0
    shell_k = np.bincount(bins.ravel(), weights=kmag.ravel(), minlength=nb)[filled] / shell_cnt[filled]
    shell_ktr = np.bincount(bins.ravel(), weights=(kmag**2 * tr).ravel(), minlength=nb)[filled] / shell_cnt[filled]
    origin_tr = shell_sum[0] / shell_cnt[0] if shell_cnt[0] else 0.0
    safe_k = np.where(kmag > 0, kmag, 1.0)
    mean_tr = np.where(kmag > 0, np.interp(kmag, shell_k, shell_ktr) / safe_k**2, origin_tr)
    proj = _projector(kvec, d, rank)
    if proj is None:
        iso = mean_tr if not rank else mean_tr[..., None, None] * np.eye(vals.shape[-1]) / vals.shape[-1]
    else:
        ptr = np.trace(proj, axis1=-2, axis2=-1)
        iso = (mean_tr / ptr)[..., None, None] * proj
    diff = np.abs(vals - iso)
    norm = np.abs(vals)
    if rank:
        diff = np.sqrt(np.sum(diff**2, axis=(-2, -1)))
        norm = np.sqrt(np.sum(norm**2, axis=(-2, -1)))
    total_norm = float(norm.sum())
    residual = float(diff.sum() / total_norm) if total_norm > 0 else 0.0
    return IsotropicSpectrum(centers, energy, dk, d, residual, float(tr.min()) if tr.size else 0.0)


# ---------------------------------------------------------------------------
# trace-free decomposition


def _velocity_gradient(u: FieldGrid, method: str) -> np.ndarray:
    """``G[..., i, j] = d_j u_i``."""
    if u.ndim != 2 or u.component_shape != (2,):
        raise ShapeError("velocity must be a 2-D vector field")
    g = np.empty(u.shape + (2, 2))
    for i in range(2):
        for j in range(2):
            g[..., i, j] = gradient(np.asarray(u.values[..., i], dtype=float), u.spacing[j], axis=j, method=method)
    return g


def strain_basis(u: FieldGrid, method: str = "fd"):
    """``B = grad u + grad u^T`` and ``Phi(u) = [[a, d2 u2], [d2 u2, -a]]``, ``a = (d2 u1 + d1 u2)/2``."""
    g = _velocity_gradient(u, method)
    b = g + np.swapaxes(g, -1, -2)
    a = 0.5 * (g[..., 0, 1] + g[..., 1, 0])
    d2u2 = g[..., 1, 1]
    phi = np.empty_like(b)
    phi[..., 0, 0] = a
    phi[..., 1, 1] = -a
    phi[..., 0, 1] = d2u2
    phi[..., 1, 0] = d2u2
    div = g[..., 0, 0] + g[..., 1, 1]
    return b, phi, div


def _frob(a, b):
    return np.sum(a * b, axis=(-2, -1))


@dataclass
class TurbTensorField:
    """Decomposition ``S_turb = nu B + delta Phi + residual``.

    ``R_turb`` and ``trace`` are set when built from a full Reynolds-type
    tensor (``trace = (R11 + R22)/2``).
    """

    S_turb: FieldGrid
    nu_turb: FieldGrid
    delta: FieldGrid
    residual: FieldGrid
    R_turb: Optional[FieldGrid] = None
    trace: Optional[FieldGrid] = None
    divergence: float = 0.0


def tracefree_decompose(S: FieldGrid, u: FieldGrid, eps_basis: float = 1e-12, method: str = "fd",
                        trace_tol: float = 1e-10, div_tol: float = 1e-8) -> TurbTensorField:
    """Project a trace-free symmetric 2x2 field on ``B`` and ``Phi(u)``.

    ``nu = <S, B>/<B, B>`` and ``delta = <S, Phi>/<Phi, Phi>`` (Frobenius);
    each is masked where its basis norm is below ``eps_basis``. The two
    projections are independent because ``<B, Phi> = 2 a div u`` vanishes
    for divergence-free ``u``.
    """
    if S.ndim != 2 or S.component_shape != (2, 2):
        raise ShapeError("S must be a 2x2 tensor field on a 2-D grid")
    if not S.same_grid(u):
        raise ShapeError("S and u are on different grids")
    s = np.asarray(S.values, dtype=float)
    scale = max(1.0, float(np.max(np.abs(s))) if s.size else 1.0)
    tr = s[..., 0, 0] + s[..., 1, 1]
    if np.max(np.abs(tr)) > trace_tol * scale:
        raise ValidationError(f"S is not trace-free: max |tr S| = {np.max(np.abs(tr)):.3e}")
    asym = np.max(np.abs(s[..., 0, 1] - s[..., 1, 0]))
    if asym > trace_tol * scale:
        raise ValidationError(f"S is not symmetric: max |S12 - S21| = {asym:.3e}")
    b, phi, div = strain_basis(u, method)
    gscale = max(1.0, float(np.max(np.abs(b))))
    worst_div = float(np.max(np.abs(div)))
    if worst_div > div_tol * gscale:
        raise ValidationError(f"u is not divergence-free: max |div u| = {worst_div:.3e}")
    bb = _frob(b, b)
    pp = _frob(phi, phi)
    mask_b = bb < eps_basis
    mask_p = pp < eps_basis
    with np.errstate(divide="ignore", invalid="ignore"):
        nu = np.where(mask_b, np.nan, _frob(s, b) / np.where(mask_b, 1.0, bb))
        delta = np.where(mask_p, np.nan, _frob(s, phi) / np.where(mask_p, 1.0, pp))
    res = s - np.nan_to_num(nu)[..., None, None] * b - np.nan_to_num(delta)[..., None, None] * phi
    return TurbTensorField(S, S.with_values(nu, mask=mask_b), S.with_values(delta, mask=mask_p),
                           S.with_values(res), divergence=worst_div)


def decompose_reynolds(R: FieldGrid, u: FieldGrid, eps_basis: float = 1e-12, method: str = "fd",
                       psd_tol: float = 1e-10, div_tol: float = 1e-8) -> TurbTensorField:
    """Split a symmetric 2x2 field into ``T I + S_turb`` and decompose ``S_turb``."""
    r = np.asarray(R.values, dtype=float)
    if R.component_shape != (2, 2):
        raise ShapeError("R must be a 2x2 tensor field")
    sym = 0.5 * (r + np.swapaxes(r, -1, -2))
    lowest = float(np.linalg.eigvalsh(sym).min()) if sym.size else 0.0
    if lowest < -psd_tol:
        raise ValidationError(f"R is not positive semidefinite (eigenvalue {lowest:.3e})")
    t = 0.5 * (sym[..., 0, 0] + sym[..., 1, 1])
    s = sym - t[..., None, None] * np.eye(2)
    out = tracefree_decompose(R.with_values(s), u, eps_basis, method, div_tol=div_tol)
    out.R_turb = R.with_values(sym)
    out.trace = R.with_values(t)
    return out


# ---------------------------------------------------------------------------
# strong-convergence diagnostic


def _space_time_integral(values, times, cell):
    per_time = np.asarray(values).reshape(len(times), -1).sum(axis=1) * cell
    if len(times) == 1:
        return float(per_time[0])
    return float(trapezoid(per_time, times))


def prop1_report(runs, limit_field, nu_field, times, spacing, T_horizon: Optional[float] = None,
                 tol: float = 1e-6, method: str = "fd") -> DiagnosticsReport:
    """Strong-convergence gap versus turbulent dissipation.

    ``runs`` has shape ``(n_members, n_t) + space (+ components)`` ordered
    along the sequence; ``limit_field`` is ``(n_t,) + space (+ components)``
    and ``nu_field`` ``(n_t,) + space``. The gap is
    ``int_0^T int |u_n - u|**2`` for the last member; the dissipation is
    ``int_0^T int nu |grad u|**2``. The verdict is consistent when both are
    at most ``tol`` or both exceed it.
    """
    runs = np.asarray(runs)
    limit = np.asarray(limit_field)
    nu = np.asarray(nu_field, dtype=float)
    times = np.asarray(times, dtype=float)
    spacing = tuple(np.atleast_1d(spacing).astype(float))
    d = len(spacing)
    if runs.ndim < 2 or runs.shape[1:] != limit.shape:
        raise ShapeError(f"runs {runs.shape} do not match limit {limit.shape}")
    if limit.shape[0] != times.size:
        raise ShapeError("limit and times disagree")
    if nu.shape != limit.shape[: 1 + d]:
        raise ShapeError(f"nu shape {nu.shape} != {limit.shape[: 1 + d]}")
    if T_horizon is not None:
        keep = times <= T_horizon + 1e-12
        runs, limit, nu, times = runs[:, keep], limit[keep], nu[keep], times[keep]
    cell = float(np.prod(spacing))
    comp_axes = tuple(range(2 + d, runs.ndim))
    sq = np.abs(runs - limit[None]) ** 2
    if comp_axes:
        sq = sq.sum(axis=comp_axes)
    gaps = [_space_time_integral(sq[n], times, cell) for n in range(runs.shape[0])]
    initial = [float(sq[n, 0].sum() * cell) for n in range(runs.shape[0])]
    grad_sq = np.zeros(nu.shape)
    lim = limit if limit.ndim > 1 + d else limit[..., None]
    for c in range(lim.shape[-1] if lim.ndim > 1 + d else 1):
        comp = lim[..., c] if lim.ndim > 1 + d else lim
        for ax in range(d):
            grad_sq += np.abs(gradient(comp, spacing[ax], axis=1 + ax, method=method)) ** 2
    dissipation = _space_time_integral(nu * grad_sq, times, cell)
    volume = cell * int(np.prod(limit.shape[1: 1 + d]))
    span = float(times[-1] - times[0]) if times.size > 1 else 1.0
    gap = gaps[-1]
    consistent = (gap <= tol) == (abs(dissipation) <= tol)
    report = DiagnosticsReport("strong_convergence")
    report.add("consistency", "consistent" if consistent else "inconsistent", tol, consistent,
               note="gap <= tol iff dissipation <= tol")
    report.add("initial_convergence", initial[-1], tol, initial[-1] <= tol,
               note="data must converge strongly at t=0")
    report.data.update({
        "gap": gap,
        "gaps": gaps,
        "initial_gaps": initial,
        "sup_abs_nu": float(np.nanmax(np.abs(nu))) if nu.size else 0.0,
        "dissipation": dissipation,
        "defect_trace_mean": gap / (volume * span),
        "horizon": float(times[-1]),
        "verdict": "consistent" if consistent else "inconsistent",
    })
    return report
