"""Empirical stability and invariance measurements for representations built
from the other modules.

A representation is any callable ``Signal -> Signal``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .cascade import CascadeSpec, FilterBank, apply_layer, filter_bank_apply, nonlinearity_apply, pool
from .groups import Factor, GroupDescriptor, LayerAction, ProductGroup, act, act_on_layer, apply_factor
from .serialization import fmt
from .signal import CHANNEL, Axis, DeformationField, Signal, deformation_metric, l2_norm, warp

Representation = Callable[[Signal], Signal]


@dataclass(frozen=True)
class Sample:
    k_metric: float
    group_norm: float
    error: float

    @property
    def denominator(self) -> float:
        return self.group_norm + self.k_metric

    @property
    def ratio(self) -> float:
        """``error / (group_norm + k_metric)``; NaN when the denominator is 0."""
        d = self.denominator
        return self.error / d if d > 0 else math.nan

    @property
    def included(self) -> bool:
        return self.denominator > 0


@dataclass(frozen=True)
class StabilityReport:
    samples: tuple[Sample, ...]
    representation_id: str = ""
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))

    @property
    def ratios(self) -> list[float]:
        return [s.ratio for s in self.samples if s.included]

    @property
    def estimated_C(self) -> float:
        r = self.ratios
        return max(r) if r else 0.0

    def bound_violations(self, c: float | None = None, slack: float = 0.0) -> list[Sample]:
        """Samples with ``error > C (group_norm + k_metric) + slack``."""
        c = self.estimated_C if c is None else c
        return [s for s in self.samples if s.error > c * s.denominator + slack]

    def sorted_samples(self) -> list[Sample]:
        return sorted(self.samples, key=lambda s: (s.k_metric, s.group_norm, s.error))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k_metric", "group_norm", "error", "ratio"])
        for s in self.sorted_samples():
            w.writerow([fmt(s.k_metric), fmt(s.group_norm), fmt(s.error), fmt(s.ratio)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "representation_id": self.representation_id,
            "estimated_C": self.estimated_C,
            "samples": [
                {"k_metric": s.k_metric, "group_norm": s.group_norm, "error": s.error,
                 "ratio": s.ratio if s.included else None}
                for s in self.sorted_samples()
            ],
            "metadata": dict(self.metadata),
        }


def invariance_error(phi: Representation, x: Signal, transformed: Signal) -> float:
    """``||phi(transformed) - phi(x)|| / ||x||``."""
    norm = l2_norm(x)
    if norm == 0:
        raise ValueError("invariance error needs a non-zero input")
    return l2_norm(phi(transformed) - phi(x)) / norm


def stability_curve(phi: Representation, x: Signal, family: Sequence[DeformationField],
                    representation_id: str = "") -> StabilityReport:
    samples = []
    for d in family:
        k = deformation_metric(d)
        if k == 0:
            raise ValueError("family contains a zero-metric field (a group element, not a deformation)")
        samples.append(Sample(k, 0.0, invariance_error(phi, x, warp(x, d))))
    return StabilityReport(tuple(samples), representation_id)


def local_invariance_sample(phi: Representation, x: Signal, g: GroupDescriptor, t: float,
                            d: DeformationField | None = None) -> Sample:
    """One sample of the local-invariance bound for ``h = (t, tau)``: group
    part ``|t| |direction|``, deformation part the elastic metric of tau."""
    moved = act(g, t, x)
    k = 0.0
    if d is not None:
        moved = warp(moved, d)
        k = deformation_metric(d)
    return Sample(k, g.norm(t), invariance_error(phi, x, moved))


def _zero_padded_bank_apply(z: Signal, f: FilterBank) -> Signal:
    """Linear (non-wrapping) convolution truncated to the input length."""
    if len(f.axes) != 1:
        raise ValueError("zero-padded control is one-dimensional")
    i = z.grid.index(f.axes[0])
    n = z.shape[i]
    out = []
    for h in f.filters:
        acc = np.zeros(z.shape, dtype=np.complex128)
        for k, c in enumerate(h):
            if k >= n:
                break
            src = np.take(z.values, np.arange(0, n - k), axis=i)
            pad = [(0, 0)] * z.values.ndim
            pad[i] = (k, 0)
            acc += c * np.pad(src, pad)
        out.append(acc)
    grid = z.grid.with_axis(Axis(f.new_axis, len(f), CHANNEL))
    return Signal(grid, np.stack(out, axis=-1))


def commutation_residual(z: Signal, a: LayerAction, t: float, f: FilterBank,
                         boundary: str = "periodic") -> float:
    """Relative defect of ``F(g.z) = g.F(z)`` when ``F`` convolves along the
    shifted channel coordinate. ``boundary='zero'`` is a negative control."""
    if tuple(f.axes) != (a.channel_axis,):
        raise ValueError(f"bank must convolve along the channel axis {a.channel_axis!r}, got {f.axes}")
    if boundary == "periodic":
        apply = filter_bank_apply
    elif boundary == "zero":
        apply = _zero_padded_bank_apply
    else:
        raise ValueError(f"unknown boundary {boundary!r}")
    norm = l2_norm(z)
    if norm == 0:
        raise ValueError("z must be non-zero")
    lhs = apply(act_on_layer(a, t, z), f)
    rhs = act_on_layer(a, t, apply(z, f))
    return l2_norm(lhs - rhs) / norm


# factorization ---------------------------------------------------------------

def _factor_axes(f: Factor) -> tuple[str, ...]:
    return f.axes if isinstance(f, LayerAction) else (f.axis,)


def insertion_points(x: Signal, spec: CascadeSpec, p: ProductGroup) -> list[int]:
    """Where each factor acts: ``-1`` for the input, ``i`` for the output of
    layer ``i``'s filter bank and nonlinearity (before its pooling), chosen as
    the earliest point at which all of the factor's axes exist."""
    names = [set(x.grid.names)]
    for layer in spec.layers:
        names.append(names[-1] | {layer.bank.new_axis})
    out = []
    for f in p.factors:
        need = set(_factor_axes(f))
        for pos, avail in enumerate(names):
            if need <= avail:
                out.append(pos - 1)
                break
        else:
            raise ValueError(f"no cascade stage carries the axes {sorted(need)} of factor {f}")
    return out


def _run_with_actions(x: Signal, spec: CascadeSpec, actions: dict[int, list[tuple[Factor, float]]]) -> Signal:
    z = x
    for f, t in actions.get(-1, []):
        z = apply_factor(f, t, z)
    for i, layer in enumerate(spec.layers):
        here = actions.get(i, [])
        if not here:
            z = apply_layer(z, layer)
            continue
        z = nonlinearity_apply(filter_bank_apply(z, layer.bank), layer.nonlinearity)
        for f, t in here:
            z = apply_factor(f, t, z)
        if layer.pooling is not None:
            z = pool(z, layer.pooling)
    return z


@dataclass(frozen=True)
class FactorizationReport:
    per_factor: tuple[float, ...]
    full: float
    insertion: tuple[int, ...]

    @property
    def satisfies_triangle(self) -> bool:
        return self.full <= sum(self.per_factor) + 1e-9

    def to_dict(self) -> dict:
        return {"per_factor": list(self.per_factor), "full": self.full, "insertion": list(self.insertion),
                "triangle_ok": self.satisfies_triangle}


def factorization_demo(x: Signal, spec: CascadeSpec, p: ProductGroup, params: Sequence[float]) -> FactorizationReport:
    """Invariance error of the cascade output under each factor alone and
    under the full product; each factor acts at its insertion point."""
    if len(params) != len(p.factors):
        raise ValueError(f"product has {len(p.factors)} factors but {len(params)} parameters were given")
    norm = l2_norm(x)
    if norm == 0:
        raise ValueError("x must be non-zero")
    where = insertion_points(x, spec, p)
    reference = _run_with_actions(x, spec, {})
    per = []
    everything: dict[int, list] = {}
    for f, t, pos in zip(p.factors, params, where):
        out = _run_with_actions(x, spec, {pos: [(f, t)]})
        per.append(l2_norm(out - reference) / norm)
        everything.setdefault(pos, []).append((f, t))
    full = l2_norm(_run_with_actions(x, spec, everything) - reference) / norm
    return FactorizationReport(tuple(per), full, tuple(where))
