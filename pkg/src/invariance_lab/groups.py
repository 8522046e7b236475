"""One-parameter unitary group actions on signals and on intermediate
network layers, and their ordered composition.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .signal import DeformationField, Signal, warp

TRANSLATION = "translation"
TRANSPOSITION = "frequency_transposition"
DILATION = "dilation"
GROUP_KINDS = (TRANSLATION, TRANSPOSITION, DILATION)

_INTEGER_SLACK = 1e-9


@dataclass(frozen=True)
class GroupDescriptor:
    """A one-parameter group acting along ``axis``.

    ``direction`` is the translation velocity (samples per unit t), the
    transposition rate (radians/sample per unit t), or unused for dilation
    (the log base is fixed at 2).
    """

    kind: str
    axis: str = "u"
    direction: float = 1.0

    def __post_init__(self):
        if self.kind not in GROUP_KINDS:
            raise ValueError(f"unknown group kind {self.kind!r}; expected one of {GROUP_KINDS}")
        if not math.isfinite(self.direction):
            raise ValueError("direction must be finite")
        object.__setattr__(self, "direction", float(self.direction))

    def norm(self, t: float) -> float:
        """Parameter arc length ``|t| * |direction|``."""
        return abs(t) * abs(self.direction)


@dataclass(frozen=True)
class LayerAction:
    """Group acting on a layer by cyclic channel shift ``t * eta`` along
    ``channel_axis``, optionally composed with a spatial action."""

    eta: int
    channel_axis: str
    spatial: GroupDescriptor | None = None

    def __post_init__(self):
        if int(self.eta) != self.eta:
            raise ValueError("eta must be an integer channel shift")
        object.__setattr__(self, "eta", int(self.eta))

    @property
    def axes(self) -> tuple[str, ...]:
        return (self.channel_axis,) if self.spatial is None else (self.channel_axis, self.spatial.axis)

    def norm(self, t: float) -> float:
        return abs(t) * abs(self.eta)


Factor = Union[GroupDescriptor, LayerAction]


@dataclass(frozen=True)
class ProductGroup:
    """Ordered factors, applied left to right."""

    factors: tuple[Factor, ...]

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))


def _translate(x: Signal, axis: str, shift: float) -> Signal:
    n = x.grid.axis(axis).size
    rounded = round(shift)
    if abs(shift - rounded) <= _INTEGER_SLACK:
        i = x.grid.index(axis)
        return x.replace(np.roll(x.values, int(rounded), axis=i))
    return warp(x, DeformationField.constant(n, shift, axis))


def _dilate(x: Signal, axis: str, t: float) -> Signal:
    """``2^{-t/2} x(c + 2^{-t}(u - c))`` about the centre ``c = N/2`` with
    periodic linear interpolation."""
    i = x.grid.index(axis)
    n = x.shape[i]
    if n & (n - 1):
        raise ValueError(f"dilation needs a power-of-two axis, {axis!r} has size {n}")
    c = n / 2
    u = np.arange(n, dtype=np.float64)
    src = c + 2.0 ** (-t) * (u - c)
    lo = np.floor(src)
    frac = src - lo
    lo = lo.astype(np.int64) % n
    hi = (lo + 1) % n
    shape = [1] * x.values.ndim
    shape[i] = -1
    w = frac.reshape(shape)
    v = x.values
    out = (1.0 - w) * np.take(v, lo, axis=i) + w * np.take(v, hi, axis=i)
    return x.replace(2.0 ** (-t / 2) * out)


def act(g: GroupDescriptor, t: float, x: Signal) -> Signal:
    """Apply ``U_t`` of the one-parameter group ``g`` to ``x``."""
    i = x.grid.index(g.axis)
    if g.kind == TRANSLATION:
        return _translate(x, g.axis, t * g.direction)
    if g.kind == TRANSPOSITION:
        n = x.shape[i]
        shape = [1] * x.values.ndim
        shape[i] = -1
        phase = np.exp(1j * t * g.direction * np.arange(n)).reshape(shape)
        return x.replace(x.values * phase)
    return _dilate(x, g.axis, t)


def channel_shift(a: LayerAction, t: float) -> int:
    shift = t * a.eta
    rounded = round(shift)
    if abs(shift - rounded) > _INTEGER_SLACK:
        raise ValueError(f"channel displacement t*eta = {shift} is not an integer")
    return int(rounded)


def act_on_layer(a: LayerAction, t: float, z: Signal) -> Signal:
    """Cyclically move channel ``c`` to ``c + t*eta``, then apply the spatial
    factor (if any) with the same parameter."""
    k = channel_shift(a, t)
    i = z.grid.index(a.channel_axis)
    out = z.replace(np.roll(z.values, k, axis=i)) if k else z
    if a.spatial is not None:
        out = act(a.spatial, t, out)
    return out


def apply_factor(f: Factor, t: float, x: Signal) -> Signal:
    if isinstance(f, LayerAction):
        return act_on_layer(f, t, x)
    return act(f, t, x)


def compose(p: ProductGroup, params: Sequence[float], x: Signal) -> Signal:
    if len(params) != len(p.factors):
        raise ValueError(f"product has {len(p.factors)} factors but {len(params)} parameters were given")
    for f, t in zip(p.factors, params):
        x = apply_factor(f, t, x)
    return x
