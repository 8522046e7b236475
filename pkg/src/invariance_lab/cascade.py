"""Filter banks, frame bounds, point-wise nonlinearities, pooling and the
k-layer convolutional cascade, plus rotated (structured) filter banks.

All convolutions are circular over the bank's axes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .groups import LayerAction, act_on_layer
from .signal import CHANNEL, Axis, Grid, Signal, l2_norm

NONLINEARITIES = ("modulus", "relu", "none")
POOL_KERNELS = ("average", "max")


@dataclass(frozen=True, eq=False)
class FilterBank:
    """Filters ``psi_lambda`` convolved over ``axes``; the output gains a new
    channel axis named ``new_axis`` with one entry per filter.

    With ``centered`` the middle tap of each filter is the origin, otherwise
    index 0 is.
    """

    filters: tuple[np.ndarray, ...] = field(repr=False)
    axes: tuple[str, ...] = ("u",)
    new_axis: str = "lambda1"
    centered: bool = False

    def __post_init__(self):
        axes = (self.axes,) if isinstance(self.axes, str) else tuple(self.axes)
        if not axes:
            raise ValueError("filter bank needs at least one convolution axis")
        filters = []
        for h in self.filters:
            h = np.array(h, dtype=np.complex128)
            if h.ndim == 0:
                h = h.reshape((1,) * len(axes))
            if h.ndim != len(axes):
                raise ValueError(f"filter of dimension {h.ndim} for {len(axes)} convolution axes")
            if not np.all(np.isfinite(h)):
                raise ValueError("filter coefficients must be finite")
            h.flags.writeable = False
            filters.append(h)
        if not filters:
            raise ValueError("filter bank needs at least one filter")
        object.__setattr__(self, "filters", tuple(filters))
        object.__setattr__(self, "axes", axes)

    def __len__(self) -> int:
        return len(self.filters)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(max(h.shape[d] for h in self.filters) for d in range(len(self.axes)))

    def l1_masses(self) -> list[float]:
        return [float(np.sum(np.abs(h))) for h in self.filters]

    def embedded(self, shape: Sequence[int]) -> np.ndarray:
        """Filters zero-padded onto a periodic grid of ``shape``; result has
        shape ``(len(bank), *shape)``."""
        shape = tuple(int(s) for s in shape)
        if len(shape) != len(self.axes):
            raise ValueError("grid shape must match the number of convolution axes")
        if any(s < m for s, m in zip(shape, self.support)):
            raise ValueError(f"filter support {self.support} exceeds grid {shape}")
        out = np.zeros((len(self),) + shape, dtype=np.complex128)
        for i, h in enumerate(self.filters):
            out[(i,) + tuple(slice(0, m) for m in h.shape)] = h
            if self.centered:
                out[i] = np.roll(out[i], [-(m // 2) for m in h.shape], axis=tuple(range(len(shape))))
        return out

    def spectra(self, shape: Sequence[int]) -> np.ndarray:
        """Unnormalized DFT of every embedded filter."""
        emb = self.embedded(shape)
        return np.fft.fftn(emb, axes=tuple(range(1, emb.ndim)))


@dataclass(frozen=True)
class PoolingSpec:
    """Pool along each ``(axis, J)``: window ``2^J``, stride
    ``2^{round(alpha * J)}``."""

    axes: tuple[tuple[str, int], ...]
    alpha: float = 1.0
    kernel: str = "average"

    def __post_init__(self):
        axes = tuple((str(a), int(j)) for a, j in self.axes)
        if any(j < 0 for _, j in axes):
            raise ValueError("pooling scales J must be non-negative")
        if len({a for a, _ in axes}) != len(axes):
            raise ValueError("pooling axes must be distinct")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"oversampling factor alpha must lie in [0, 1], got {self.alpha}")
        if self.kernel not in POOL_KERNELS:
            raise ValueError(f"unknown pooling kernel {self.kernel!r}")
        object.__setattr__(self, "axes", axes)

    def stride_log2(self, j: int) -> int:
        return int(math.floor(self.alpha * j + 0.5))

    def scale(self, axis: str) -> int:
        for a, j in self.axes:
            if a == axis:
                return j
        raise KeyError(f"pooling does not act on axis {axis!r}")


@dataclass(frozen=True)
class Layer:
    bank: FilterBank
    nonlinearity: str = "modulus"
    pooling: PoolingSpec | None = None

    def __post_init__(self):
        if self.nonlinearity not in NONLINEARITIES:
            raise ValueError(f"unknown nonlinearity {self.nonlinearity!r}")


@dataclass(frozen=True)
class CascadeSpec:
    layers: tuple[Layer, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))

    def without_pooling(self) -> CascadeSpec:
        return CascadeSpec(tuple(Layer(l.bank, l.nonlinearity, None) for l in self.layers))


@dataclass(frozen=True)
class LayerOutput:
    stages: tuple[Signal, ...]

    @property
    def final(self) -> Signal:
        return self.stages[-1]

    @property
    def grids(self) -> tuple[Grid, ...]:
        return tuple(s.grid for s in self.stages)


def filter_bank_apply(x: Signal, f: FilterBank) -> Signal:
    """``z(..., lambda) = x * psi_lambda`` (circular), new axis appended last."""
    if f.new_axis in x.grid.names:
        raise ValueError(f"axis {f.new_axis!r} already exists in the input grid")
    idx = [x.grid.index(a) for a in f.axes]
    conv_shape = [x.shape[i] for i in idx]
    spectra = f.spectra(conv_shape)
    xf = np.fft.fftn(x.values, axes=idx)
    # (L, *conv) -> x's layout with singleton non-conv axes and L appended
    shape = [1] * x.values.ndim + [len(f)]
    view = np.moveaxis(spectra, 0, -1)
    for d, i in enumerate(idx):
        shape[i] = conv_shape[d]
    order = np.argsort(idx)
    view = np.transpose(view, list(order) + [len(idx)])
    view = view.reshape(shape)
    out = np.fft.ifftn(xf[..., None] * view, axes=idx)
    grid = x.grid.with_axis(Axis(f.new_axis, len(f), CHANNEL))
    return Signal(grid, out)


def frame_bounds(f: FilterBank, n: int | Sequence[int]) -> tuple[float, float]:
    """Tight lower/upper frame bounds ``(a, A)`` of the circular bank on a
    grid of size ``n``: the square roots of the extreme bin-wise energies
    ``sum_lambda |psi_hat_lambda(w)|^2``."""
    shape = (n,) * len(f.axes) if isinstance(n, (int, np.integer)) else tuple(n)
    energy = np.sum(np.abs(f.spectra(shape)) ** 2, axis=0)
    return float(np.sqrt(energy.min())), float(np.sqrt(energy.max()))


def nonlinearity_apply(z: Signal, kind: str) -> Signal:
    if kind == "modulus":
        return z.replace(np.abs(z.values))
    if kind == "relu":
        if not z.is_real():
            raise ValueError("relu needs a real-valued signal (non-zero imaginary part found)")
        return z.replace(np.maximum(z.values.real, 0.0))
    if kind == "none":
        return z
    raise ValueError(f"unknown nonlinearity {kind!r}")


def pooled_grid(grid: Grid, p: PoolingSpec) -> Grid:
    for axis, j in p.axes:
        n = grid.axis(axis).size
        window = 2**j
        s = p.stride_log2(j)
        if window > n:
            raise ValueError(f"pooling window 2^{j} exceeds axis {axis!r} of size {n}")
        if n % (2**s):
            raise ValueError(f"stride 2^{s} does not divide axis {axis!r} of size {n}")
        grid = grid.resized(axis, n // 2**s, s)
    return grid


def pool(z: Signal, p: PoolingSpec) -> Signal:
    """Circular window of width ``2^J`` starting at each sample, then keep
    every ``2^{round(alpha J)}``-th sample. Average windows have weights
    ``2^{-J}``; max windows need real input."""
    grid = pooled_grid(z.grid, p)
    v = z.values
    if p.kernel == "max":
        if not z.is_real():
            raise ValueError("max pooling needs a real-valued signal")
        v = v.real
    for axis, j in p.axes:
        i = z.grid.index(axis)
        window = 2**j
        acc = v
        for k in range(1, window):
            shifted = np.roll(v, -k, axis=i)
            acc = np.maximum(acc, shifted) if p.kernel == "max" else acc + shifted
        if p.kernel == "average":
            acc = acc / window
        stride = 2 ** p.stride_log2(j)
        v = np.take(acc, np.arange(0, z.shape[i], stride), axis=i)
    return Signal(grid, v)


def predict_grids(spec: CascadeSpec, grid: Grid) -> tuple[Grid, ...]:
    """Domain chain of a cascade, computed from shapes alone."""
    if not spec.layers:
        return (grid,)
    out = []
    for layer in spec.layers:
        for a in layer.bank.axes:
            grid.axis(a)
        if layer.bank.new_axis in grid.names:
            raise ValueError(f"layer creates axis {layer.bank.new_axis!r} which already exists")
        grid = grid.with_axis(Axis(layer.bank.new_axis, len(layer.bank), CHANNEL))
        if layer.pooling is not None:
            grid = pooled_grid(grid, layer.pooling)
        out.append(grid)
    return tuple(out)


def apply_layer(z: Signal, layer: Layer) -> Signal:
    z = nonlinearity_apply(filter_bank_apply(z, layer.bank), layer.nonlinearity)
    return pool(z, layer.pooling) if layer.pooling is not None else z


def cascade_apply(x: Signal, spec: CascadeSpec) -> LayerOutput:
    """Run ``P_k M F_k ... P_1 M F_1`` and keep every stage ``z^(i)``.
    An empty cascade returns ``(x,)``."""
    try:
        predict_grids(spec, x.grid)
    except (KeyError, ValueError) as e:
        raise ValueError(f"cascade does not chain from input grid: {e}") from e
    if not spec.layers:
        return LayerOutput((x,))
    stages = []
    z = x
    for layer in spec.layers:
        z = apply_layer(z, layer)
        stages.append(z)
    return LayerOutput(tuple(stages))


def representation(spec: CascadeSpec):
    """The cascade's final stage as a ``Signal -> Signal`` map."""

    def phi(x: Signal) -> Signal:
        return cascade_apply(x, spec).final

    return phi


def stage_bound_residuals(x: Signal, spec: CascadeSpec, out: LayerOutput | None = None) -> list[float]:
    """``||z^(i)|| - A_i ||z^(i-1)||`` per stage (non-positive when the
    frame-bound sandwich holds); only meaningful for non-expansive M and
    average pooling."""
    out = out or cascade_apply(x, spec)
    prev = x
    res = []
    for layer, z in zip(spec.layers, out.stages):
        conv_shape = [prev.grid.axis(a).size for a in layer.bank.axes]
        _, upper = frame_bounds(layer.bank, conv_shape)
        res.append(l2_norm(z) - upper * l2_norm(prev))
        prev = z
    return res


def _bilinear(h: np.ndarray, r: np.ndarray, c: np.ndarray) -> np.ndarray:
    n = h.shape[0]
    r0 = np.floor(r).astype(np.int64)
    c0 = np.floor(c).astype(np.int64)
    fr = r - r0
    fc = c - c0
    out = np.zeros(r.shape, dtype=np.complex128)
    for dr, wr in ((0, 1 - fr), (1, fr)):
        for dc, wc in ((0, 1 - fc), (1, fc)):
            rr, cc = r0 + dr, c0 + dc
            inside = (rr >= 0) & (rr < n) & (cc >= 0) & (cc < n)
            w = wr * wc
            out[inside] += w[inside] * h[rr[inside], cc[inside]]
    return out


def rotate_filter(h0: np.ndarray, theta: float) -> np.ndarray:
    """Rotate a square odd-sided filter counter-clockwise (as displayed, rows
    pointing down) about its centre; zero outside the support. Sampling
    positions within 1e-9 of a lattice point snap to it, so multiples of
    pi/2 are exact index permutations."""
    h0 = np.asarray(h0, dtype=np.complex128)
    if h0.ndim != 2 or h0.shape[0] != h0.shape[1]:
        raise ValueError("h0 must be a square 2-D filter")
    n = h0.shape[0]
    if n % 2 == 0:
        raise ValueError(f"h0 must have an odd side length, got {n}")
    m = n // 2
    row, col = np.mgrid[0:n, 0:n].astype(np.float64)
    x, y = col - m, m - row
    ct, st = math.cos(theta), math.sin(theta)
    xs, ys = ct * x + st * y, -st * x + ct * y
    sr, sc = m - ys, m + xs
    for arr in (sr, sc):
        near = np.abs(arr - np.round(arr)) <= 1e-9
        arr[near] = np.round(arr[near])
    return _bilinear(h0, sr, sc)


def _fsum_norm(h: np.ndarray) -> float:
    return math.sqrt(math.fsum((np.abs(h) ** 2).ravel().tolist()))


def rotated_bank(h0, angles: Sequence[float], axes: tuple[str, str] = ("u", "v"),
                 new_axis: str = "theta") -> FilterBank:
    """``{R_theta h0}`` with each rotated copy rescaled to the l2 norm of h0."""
    h0 = np.asarray(h0, dtype=np.complex128)
    if not all(math.isfinite(a) for a in angles):
        raise ValueError("angles must be finite")
    target = _fsum_norm(h0)
    filters = []
    for theta in angles:
        h = rotate_filter(h0, theta)
        norm = _fsum_norm(h)
        if norm > 0 and norm != target:
            h = h * (target / norm)
        filters.append(h)
    return FilterBank(tuple(filters), axes, new_axis, centered=True)


def pooling_attenuation(z: Signal, a: LayerAction, t: float, p: PoolingSpec) -> tuple[float, float]:
    """Relative change of the pooled layer under a channel shift, and the
    shift-to-window ratio ``|t eta| / 2^J``."""
    try:
        j = p.scale(a.channel_axis)
    except KeyError:
        raise ValueError(f"pooling must act on the channel axis {a.channel_axis!r}") from None
    norm = l2_norm(z)
    if norm == 0:
        raise ValueError("z must be non-zero")
    moved = pool(act_on_layer(a, t, z), p)
    err = l2_norm(moved - pool(z, p)) / norm
    return err, abs(t * a.eta) / 2**j


# presets -------------------------------------------------------------------

def identity_bank(axis: str = "u", new_axis: str = "lambda1") -> FilterBank:
    return FilterBank((np.array([1.0]),), (axis,), new_axis)


def duplicated_bank(axis: str = "u", new_axis: str = "lambda1") -> FilterBank:
    return FilterBank((np.array([1.0]), np.array([1.0])), (axis,), new_axis)


def haar_pair(axis: str = "u", new_axis: str = "lambda1") -> FilterBank:
    """Normalized Haar average/difference pair; a tight frame with a = A = 1."""
    return FilterBank((np.array([0.5, 0.5]), np.array([0.5, -0.5])), (axis,), new_axis)


def half_band_pair(n: int, axis: str = "u", new_axis: str = "lambda1") -> FilterBank:
    """Ideal complementary pair: indicator of the low-|frequency| half of the
    DFT bins and of the remaining half."""
    freqs = np.abs(np.fft.fftfreq(n))
    order = np.argsort(freqs, kind="stable")
    low = np.zeros(n)
    low[order[: n // 2]] = 1.0
    high = 1.0 - low
    return FilterBank((np.fft.ifft(low), np.fft.ifft(high)), (axis,), new_axis)


def oriented4(axis: str = "u", new_axis: str = "lambda1") -> FilterBank:
    """Four complex oriented differences ``(delta_0 - e^{i theta} delta_1) / sqrt(8)``
    for theta in {0, pi/2, pi, 3 pi/2}. Tight frame with a = A = 1."""
    filters = tuple(np.array([1.0, -np.exp(1j * th)]) / np.sqrt(8.0) for th in (np.arange(4) * np.pi / 2))
    return FilterBank(filters, (axis,), new_axis)


def random_bank(rng: np.random.Generator, count: int, taps: int, axis: str = "u",
                new_axis: str = "lambda1", complex_valued: bool = True) -> FilterBank:
    filters = []
    for _ in range(count):
        h = rng.standard_normal(taps)
        if complex_valued:
            h = h + 1j * rng.standard_normal(taps)
        filters.append(h)
    return FilterBank(tuple(filters), (axis,), new_axis)


BANK_PRESETS = {
    "identity": identity_bank,
    "duplicated": duplicated_bank,
    "haar_pair": haar_pair,
    "oriented4": oriented4,
}


def modulus_cascade(depth: int = 2, pool_j: int = 3, axis: str = "u", alpha: float = 1.0) -> CascadeSpec:
    """``depth`` layers of oriented4 + modulus + average pooling along ``axis``."""
    layers = []
    for d in range(depth):
        layers.append(Layer(oriented4(axis, f"lambda{d + 1}"), "modulus", PoolingSpec(((axis, pool_j),), alpha)))
    return CascadeSpec(tuple(layers))
