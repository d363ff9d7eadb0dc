"""Uniformly sampled fields on periodic (or plain) grids."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.ndimage import uniform_filter1d

from dispersion_lab.errors import DomainError, ShapeError


@dataclass(frozen=True)
class FieldGrid:
    """Samples of a scalar, vector or tensor field on a uniform grid.

    ``values`` has the spatial axes first; any trailing axes are component
    axes (one for vectors, two for tensors). ``spacing`` has one entry per
    spatial axis. ``mask`` marks points where the field is undefined.
    """

    values: np.ndarray
    spacing: tuple
    origin: tuple = ()
    mask: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values)
        spacing = tuple(float(s) for s in np.atleast_1d(self.spacing))
        if not spacing or any(s <= 0 for s in spacing):
            raise ShapeError(f"spacing must be positive, got {self.spacing}")
        if values.ndim < len(spacing):
            raise ShapeError(
                f"values have {values.ndim} axes but {len(spacing)} spatial axes were declared"
            )
        origin = tuple(float(o) for o in self.origin) if len(self.origin) else (0.0,) * len(spacing)
        if len(origin) != len(spacing):
            raise ShapeError("origin and spacing lengths differ")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)
        if self.mask is not None:
            mask = np.asarray(self.mask, dtype=bool)
            if mask.shape != self.shape:
                raise ShapeError(f"mask shape {mask.shape} != grid shape {self.shape}")
            object.__setattr__(self, "mask", mask)

    @property
    def ndim(self) -> int:
        return len(self.spacing)

    @property
    def shape(self) -> tuple:
        return self.values.shape[: self.ndim]

    @property
    def component_shape(self) -> tuple:
        return self.values.shape[self.ndim :]

    @property
    def rank(self) -> int:
        return self.values.ndim - self.ndim

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axis(self, i: int = 0) -> np.ndarray:
        return self.origin[i] + self.spacing[i] * np.arange(self.shape[i])

    def mesh(self) -> list:
        return np.meshgrid(*[self.axis(i) for i in range(self.ndim)], indexing="ij")

    def same_grid(self, other: "FieldGrid") -> bool:
        return (
            self.shape == other.shape
            and np.allclose(self.spacing, other.spacing, rtol=1e-12, atol=0)
            and np.allclose(self.origin, other.origin, rtol=1e-12, atol=1e-12)
        )

    def with_values(self, values, mask=None) -> "FieldGrid":
        return replace(self, values=np.asarray(values), mask=mask)

    def masked(self, fill=np.nan) -> np.ndarray:
        """Values with masked points replaced by ``fill``."""
        if self.mask is None:
            return self.values
        out = np.array(self.values, dtype=np.result_type(self.values, float), copy=True)
        out[self.mask] = fill
        return out

    @classmethod
    def from_function(cls, func, n, length, origin=None) -> "FieldGrid":
        """Sample ``func`` on an ``n``-point periodic grid of the given length(s)."""
        n = tuple(np.atleast_1d(n).astype(int))
        length = tuple(np.broadcast_to(np.atleast_1d(length), (len(n),)).astype(float))
        spacing = tuple(L / m for L, m in zip(length, n))
        if origin is None:
            origin = tuple(-L / 2 for L in length)
        axes = [o + d * np.arange(m) for o, d, m in zip(origin, spacing, n)]
        coords = np.meshgrid(*axes, indexing="ij")
        return cls(np.asarray(func(*coords)), spacing, tuple(origin))


def require_same_grid(*fields: FieldGrid) -> None:
    first = fields[0]
    for other in fields[1:]:
        if not first.same_grid(other):
            raise ShapeError(
                f"grid mismatch: {first.shape}/{first.spacing} vs {other.shape}/{other.spacing}"
            )


def window_points(width: float, spacing: float) -> int:
    """Odd number of samples covering a moving-average window of ``width``."""
    if width < spacing:
        raise DomainError(f"window {width} is smaller than the grid spacing {spacing}")
    n = int(round(width / spacing))
    return n if n % 2 == 1 else n + 1


def mollify(values: np.ndarray, spacing: Sequence[float], width: float, mode: str = "wrap",
            axes: Optional[Sequence[int]] = None) -> np.ndarray:
    """Boxcar moving average of ``width`` along each spatial axis."""
    values = np.asarray(values)
    spacing = list(np.atleast_1d(spacing))
    axes = list(range(len(spacing))) if axes is None else list(axes)
    out = values
    for ax, dx in zip(axes, spacing):
        size = window_points(width, dx)
        if size == 1:
            continue
        if np.iscomplexobj(out):
            out = (uniform_filter1d(out.real, size, axis=ax, mode=mode)
                   + 1j * uniform_filter1d(out.imag, size, axis=ax, mode=mode))
        else:
            out = uniform_filter1d(np.asarray(out, dtype=float), size, axis=ax, mode=mode)
    return out


def wavenumbers(n: int, spacing: float) -> np.ndarray:
    return 2.0 * np.pi * np.fft.fftfreq(n, d=spacing)


def spectral_derivative(values: np.ndarray, spacing: float, axis: int = 0, order: int = 1) -> np.ndarray:
    """Periodic Fourier derivative along ``axis``."""
    values = np.asarray(values)
    n = values.shape[axis]
    k = wavenumbers(n, spacing)
    if order % 2 == 1 and n % 2 == 0:
        k[n // 2] = 0.0
    shape = [1] * values.ndim
    shape[axis] = n
    factor = ((1j * k) ** order).reshape(shape)
    out = np.fft.ifft(factor * np.fft.fft(values, axis=axis), axis=axis)
    return out if np.iscomplexobj(values) else out.real


def gradient(values: np.ndarray, spacing: float, axis: int = 0, method: str = "fd") -> np.ndarray:
    """First derivative by second-order differences (``fd``) or Fourier (``spectral``)."""
    if method == "spectral":
        return spectral_derivative(values, spacing, axis=axis)
    if method == "fd":
        return np.gradient(values, spacing, axis=axis)
    raise ValueError(f"unknown derivative method {method!r}")
