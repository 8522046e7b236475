"""Grids, complex signals, the unitary DFT, periodic warping and the
elastic deformation metric.

Every spatial axis is periodic. Values are stored as ``complex128`` arrays
shaped like the grid (row-major in axis order) and are frozen after
construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

SPATIAL = "spatial"
CHANNEL = "channel"
_KINDS = (SPATIAL, CHANNEL)


@dataclass(frozen=True)
class Axis:
    name: str
    size: int
    kind: str = SPATIAL

    def __post_init__(self):
        if not isinstance(self.size, (int, np.integer)) or self.size < 1:
            raise ValueError(f"axis {self.name!r}: size must be a positive integer, got {self.size!r}")
        if self.kind not in _KINDS:
            raise ValueError(f"axis {self.name!r}: kind must be one of {_KINDS}, got {self.kind!r}")
        object.__setattr__(self, "size", int(self.size))


@dataclass(frozen=True)
class Grid:
    """Ordered product of named axes.

    ``resolution_log2`` holds, per axis, the cumulative log2 resolution loss
    produced by pooling (0 for an axis that was never pooled).
    """

    axes: tuple[Axis, ...]
    resolution_log2: tuple[int, ...] = ()

    def __post_init__(self):
        axes = tuple(self.axes)
        names = [a.name for a in axes]
        if len(set(names)) != len(names):
            raise ValueError(f"axis names must be unique, got {names}")
        res = tuple(int(r) for r in self.resolution_log2) or (0,) * len(axes)
        if len(res) != len(axes):
            raise ValueError("resolution_log2 must have one entry per axis")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "resolution_log2", res)

    @classmethod
    def line(cls, n: int, name: str = "u") -> Grid:
        return cls((Axis(name, n),))

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.size for a in self.axes)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.axes)

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown axis {name!r}; grid has {list(self.names)}") from None

    def axis(self, name: str) -> Axis:
        return self.axes[self.index(name)]

    def resolution(self, name: str) -> int:
        return self.resolution_log2[self.index(name)]

    def with_axis(self, axis: Axis) -> Grid:
        """Append a new axis (the lifting step of a filter bank)."""
        return Grid(self.axes + (axis,), self.resolution_log2 + (0,))

    def resized(self, name: str, size: int, lost_log2: int = 0) -> Grid:
        i = self.index(name)
        axes = list(self.axes)
        axes[i] = Axis(name, size, axes[i].kind)
        res = list(self.resolution_log2)
        res[i] += lost_log2
        return Grid(tuple(axes), tuple(res))


@dataclass(frozen=True, eq=False)
class Signal:
    """Complex values over a :class:`Grid`."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.complex128)
        if v.size != self.grid.size:
            raise ValueError(f"value count {v.size} does not match grid size {self.grid.size}")
        v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("signal values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_array(cls, values, names: Sequence[str] | None = None, kinds: Sequence[str] | None = None) -> Signal:
        v = np.asarray(values)
        if v.ndim == 0:
            v = v.reshape(1)
        names = list(names) if names is not None else (["u"] if v.ndim == 1 else [f"axis{i}" for i in range(v.ndim)])
        kinds = list(kinds) if kinds is not None else [SPATIAL] * v.ndim
        if len(names) != v.ndim or len(kinds) != v.ndim:
            raise ValueError("need one axis name and kind per array dimension")
        grid = Grid(tuple(Axis(n, s, k) for n, s, k in zip(names, v.shape, kinds)))
        return cls(grid, v)

    def replace(self, values, grid: Grid | None = None) -> Signal:
        return Signal(grid if grid is not None else self.grid, values)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.grid.shape

    def is_real(self, rtol: float = 1e-12) -> bool:
        scale = float(np.max(np.abs(self.values), initial=0.0))
        return bool(np.all(np.abs(self.values.imag) <= rtol * max(scale, 1e-300)))

    def __sub__(self, other: Signal) -> Signal:
        if self.grid.shape != other.grid.shape:
            raise ValueError(f"shape mismatch: {self.grid.shape} vs {other.grid.shape}")
        return Signal(self.grid, self.values - other.values)

    def __add__(self, other: Signal) -> Signal:
        if self.grid.shape != other.grid.shape:
            raise ValueError(f"shape mismatch: {self.grid.shape} vs {other.grid.shape}")
        return Signal(self.grid, self.values + other.values)

    def scaled(self, c: complex) -> Signal:
        return Signal(self.grid, c * self.values)


@dataclass(frozen=True, eq=False)
class DeformationField:
    """Displacement ``tau`` (in samples) along one periodic axis."""

    axis: str
    tau: np.ndarray = field(repr=False)
    boundary: str = "periodic"

    def __post_init__(self):
        t = np.array(self.tau, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(t)):
            raise ValueError("tau must be finite")
        if self.boundary != "periodic":
            raise ValueError("only periodic boundaries are supported")
        t.flags.writeable = False
        object.__setattr__(self, "tau", t)

    @classmethod
    def sinusoid(cls, n: int, amplitude: float, axis: str = "u", cycles: int = 1) -> DeformationField:
        u = np.arange(n)
        return cls(axis, amplitude * np.sin(2 * np.pi * cycles * u / n))

    @classmethod
    def constant(cls, n: int, value: float, axis: str = "u") -> DeformationField:
        return cls(axis, np.full(n, float(value)))

    def scaled(self, c: float) -> DeformationField:
        return DeformationField(self.axis, c * self.tau)


def l2_norm(z: Signal) -> float:
    return float(np.sqrt(np.sum(np.abs(z.values) ** 2)))


def dft(z: Signal, axis: str) -> Signal:
    """Unitary DFT along ``axis`` (``e^{-2 pi i jk/N} / sqrt(N)`` kernel)."""
    i = z.grid.index(axis)
    return z.replace(np.fft.fft(z.values, axis=i, norm="ortho"))


def idft(z: Signal, axis: str) -> Signal:
    i = z.grid.index(axis)
    return z.replace(np.fft.ifft(z.values, axis=i, norm="ortho"))


def _along(arr: np.ndarray, axis: int, ndim: int) -> np.ndarray:
    shape = [1] * ndim
    shape[axis] = -1
    return arr.reshape(shape)


def warp(z: Signal, d: DeformationField) -> Signal:
    """Sample ``z`` at ``u - tau(u)`` along ``d.axis`` with periodic linear
    interpolation. An integer constant ``tau`` gives an exact cyclic shift.
    """
    i = z.grid.index(d.axis)
    n = z.shape[i]
    if d.tau.shape[0] != n:
        raise ValueError(f"tau has length {d.tau.shape[0]}, axis {d.axis!r} has size {n}")
    pos = np.arange(n, dtype=np.float64) - d.tau
    lo = np.floor(pos)
    frac = pos - lo
    lo = lo.astype(np.int64) % n
    hi = (lo + 1) % n
    v = z.values
    a = np.take(v, lo, axis=i)
    b = np.take(v, hi, axis=i)
    w = _along(frac, i, v.ndim)
    return z.replace((1.0 - w) * a + w * b)


def tau_gradient(tau: np.ndarray) -> np.ndarray:
    """Centered periodic first difference ``(tau[u+1] - tau[u-1]) / 2``."""
    tau = np.asarray(tau, dtype=np.float64)
    return 0.5 * (np.roll(tau, -1) - np.roll(tau, 1))


def tau_hessian(tau: np.ndarray) -> np.ndarray:
    """Periodic second difference ``tau[u+1] - 2 tau[u] + tau[u-1]``."""
    tau = np.asarray(tau, dtype=np.float64)
    return np.roll(tau, -1) - 2.0 * tau + np.roll(tau, 1)


def deformation_metric(d: DeformationField) -> float:
    """Elastic distance of a warp to the translation group:
    ``max|grad tau| + max|hess tau|`` with periodic finite differences.
    """
    if d.tau.shape[0] < 3:
        raise ValueError(f"deformation axis too short for the difference stencil: {d.tau.shape[0]} < 3")
    return float(np.max(np.abs(tau_gradient(d.tau))) + np.max(np.abs(tau_hessian(d.tau))))


def impulse(n: int, position: int = 0, axis: str = "u") -> Signal:
    v = np.zeros(n, dtype=np.complex128)
    v[position % n] = 1.0
    return Signal(Grid.line(n, axis), v)


def relative_error(a: Signal | np.ndarray, b: Signal | np.ndarray, reference: float | None = None) -> float:
    av = a.values if isinstance(a, Signal) else np.asarray(a)
    bv = b.values if isinstance(b, Signal) else np.asarray(b)
    num = float(np.sqrt(np.sum(np.abs(av - bv) ** 2)))
    den = reference if reference is not None else float(np.sqrt(np.sum(np.abs(bv) ** 2)))
    return num / den if den > 0 else num


def stack(signals: Iterable[Signal]) -> np.ndarray:
    """Flattened values of equally sized signals as an (m, N) array."""
    rows = [s.values.reshape(-1) for s in signals]
    if not rows:
        raise ValueError("empty dataset")
    n = rows[0].shape[0]
    if any(r.shape[0] != n for r in rows):
        raise ValueError("all signals in a dataset must have the same size")
    return np.stack(rows)
