"""Spectral form ``U_t = O^{-1} diag(e^{i t w}) O`` of the exactly unitary
one-parameter groups on a periodic grid, and the one-layer modulus invariant.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .groups import TRANSLATION, TRANSPOSITION, GroupDescriptor, act
from .serialization import fmt
from .signal import Signal, l2_norm


@dataclass(frozen=True, eq=False)
class DiagonalizingBasis:
    """Unitary ``transform`` (rows are the measurement vectors) and the
    ``frequencies`` of the generator in that basis."""

    transform: np.ndarray = field(repr=False)
    frequencies: np.ndarray
    group: GroupDescriptor

    @property
    def n(self) -> int:
        return self.frequencies.shape[0]

    def unitarity_defect(self) -> float:
        o = self.transform
        return float(np.max(np.abs(o.conj().T @ o - np.eye(self.n))))

    def propagate(self, t: float, values: np.ndarray) -> np.ndarray:
        """``O^{-1} diag(e^{itw}) O`` applied along the first array axis."""
        o = self.transform
        coeffs = np.tensordot(o, values, axes=(1, 0))
        phase = np.exp(1j * t * self.frequencies).reshape((-1,) + (1,) * (values.ndim - 1))
        return np.tensordot(o.conj().T, phase * coeffs, axes=(1, 0))


def principal_branch(w: np.ndarray) -> np.ndarray:
    """Map angles to (-pi, pi]."""
    w = np.mod(np.asarray(w, dtype=np.float64) + np.pi, 2 * np.pi) - np.pi
    return np.where(w == -np.pi, np.pi, w)


def basis_for(g: GroupDescriptor, n: int) -> DiagonalizingBasis:
    """Diagonalizing basis of a translation or frequency-transposition group.

    Translation uses ``O[k, j] = exp(+2 pi i jk/N) / sqrt(N)`` so that a
    shift by ``t`` multiplies coefficient ``k`` by ``exp(i t w_k)`` with
    ``w_k = 2 pi k v0 / N`` on the principal branch; this is exact for
    integer ``t * v0``. Transposition is already diagonal (``O = I``) with
    ``w_u = w0 * u``, unwrapped so that every real ``t`` is exact.
    """
    if n < 1:
        raise ValueError("n must be positive")
    k = np.arange(n)
    if g.kind == TRANSLATION:
        o = np.exp(2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)
        w = principal_branch(2 * np.pi * k * g.direction / n)
    elif g.kind == TRANSPOSITION:
        o = np.eye(n, dtype=np.complex128)
        w = g.direction * k.astype(np.float64)
    else:
        raise ValueError(f"no exact diagonalizing basis for group kind {g.kind!r}")
    o.flags.writeable = False
    w.flags.writeable = False
    return DiagonalizingBasis(o, w, g)


def _along_group_axis(b: DiagonalizingBasis, x: Signal) -> tuple[int, np.ndarray]:
    i = x.grid.index(b.group.axis)
    if x.shape[i] != b.n:
        raise ValueError(f"basis has size {b.n}, axis {b.group.axis!r} has size {x.shape[i]}")
    return i, np.moveaxis(x.values, i, 0)


def verify_diagonalization(b: DiagonalizingBasis, t: float, x: Signal) -> float:
    """Relative residual between the direct action and its spectral form."""
    i, v = _along_group_axis(b, x)
    spectral = np.moveaxis(b.propagate(t, v), 0, i)
    direct = act(b.group, t, x).values
    norm = l2_norm(x)
    if norm == 0:
        raise ValueError("x must be non-zero")
    return float(np.sqrt(np.sum(np.abs(direct - spectral) ** 2)) / norm)


def stone_invariant(x: Signal, b: DiagonalizingBasis) -> Signal:
    """``|O x|`` along the group axis."""
    i, v = _along_group_axis(b, x)
    coeffs = np.moveaxis(np.tensordot(b.transform, v, axes=(1, 0)), 0, i)
    return x.replace(np.abs(coeffs))


def basis_to_csv(b: DiagonalizingBasis) -> str:
    """Rows ``index, omega, re0, im0, re1, im1, ...`` (one per basis row)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["index", "omega"]
    for j in range(b.n):
        header += [f"re{j}", f"im{j}"]
    w.writerow(header)
    for k in range(b.n):
        row = [k, fmt(b.frequencies[k])]
        for c in b.transform[k]:
            row += [fmt(c.real), fmt(c.imag)]
        w.writerow(row)
    return buf.getvalue()
