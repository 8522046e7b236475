"""Covariance-based group discovery.

The covariance of a dataset spread uniformly over a group orbit commutes
with the group action, so its real eigenvectors, paired by equal
eigenvalue, assemble into complex rows whose modulus is constant on the
orbit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .signal import Signal, stack

DEFAULT_PAIRING_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class CovarianceEstimate:
    sigma: np.ndarray = field(repr=False)
    sample_count: int
    centered: bool = False

    @property
    def n(self) -> int:
        return self.sigma.shape[0]


@dataclass(frozen=True, eq=False)
class EigenPairing:
    """Indices refer to columns of ``eigenvectors`` (sorted by descending
    eigenvalue)."""

    pairs: tuple[tuple[int, int, float], ...]
    singletons: tuple[tuple[int, float], ...]
    eigenvectors: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray
    pairing_tolerance: float
    sweeps: int = 0

    def groups(self) -> list[tuple[tuple[int, ...], float]]:
        """Pairs and singletons as ``(indices, eigenvalue)`` in eigen order."""
        g = [((a, b), lam) for a, b, lam in self.pairs] + [((i,), lam) for i, lam in self.singletons]
        return sorted(g, key=lambda item: item[0][0])


@dataclass(frozen=True, eq=False)
class DiscoveredBasis:
    u: np.ndarray = field(repr=False)
    pairing: EigenPairing
    objective: float | None = None

    @property
    def rows(self) -> int:
        return self.u.shape[0]

    def orthonormality_defect(self) -> float:
        return float(np.max(np.abs(self.u @ self.u.conj().T - np.eye(self.rows))))


def _dataset_matrix(dataset: Sequence[Signal] | np.ndarray) -> np.ndarray:
    if isinstance(dataset, np.ndarray):
        x = np.asarray(dataset)
        if x.ndim != 2 or x.shape[0] == 0:
            raise ValueError("dataset array must be (m, N) with m >= 1")
        return x
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    return stack(dataset)


def covariance(dataset: Sequence[Signal] | np.ndarray, center: bool = False) -> CovarianceEstimate:
    """Uncentered second moment ``(1/m) sum_i x_i x_i^H`` (``x_i x_i^T`` for
    real data), symmetrized. Complex data must yield a real moment matrix;
    full orbits of unitary groups do."""
    x = _dataset_matrix(dataset).astype(np.complex128)
    m = x.shape[0]
    if center:
        x = x - x.mean(axis=0)
    s = (x.T @ x.conj()) / m
    scale = max(float(np.max(np.abs(s))), 1e-300)
    if np.max(np.abs(s.imag)) > 1e-10 * scale:
        raise ValueError("second-moment matrix is not real; only real symmetric covariances are supported")
    s = s.real
    s = 0.5 * (s + s.T)
    return CovarianceEstimate(s, m, center)


def jacobi_eigh(a: np.ndarray, rtol: float = 1e-12, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray, int]:
    """Cyclic Jacobi eigendecomposition of a real symmetric matrix.

    Sweeps over every (p, q) pair annihilating ``a[p, q]`` with a plane
    rotation until the off-diagonal Frobenius norm is at most
    ``rtol * ||a||_F``.

    Returns
    -------
    w : ndarray
        Eigenvalues, unsorted (diagonal order).
    v : ndarray
        Orthogonal matrix whose columns are the eigenvectors.
    sweeps : int
        Number of full sweeps performed.
    """
    a = np.array(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    n = a.shape[0]
    scale = float(np.linalg.norm(a))
    if np.max(np.abs(a - a.T), initial=0.0) > 1e-12 * max(scale, 1e-300):
        raise ValueError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    v = np.eye(n)
    target = rtol * scale

    mask = ~np.eye(n, dtype=bool)

    def off() -> float:
        return float(np.sqrt(np.sum(a[mask] ** 2)))

    sweeps = 0
    while off() > target and sweeps < max_sweeps:
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(1.0 + theta * theta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                cp, cq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                rp, rq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    if off() > target:
        raise RuntimeError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")
    return np.diag(a).copy(), v, sweeps


def eigendecompose(c: CovarianceEstimate | np.ndarray, tol: float = DEFAULT_PAIRING_TOL) -> EigenPairing:
    """Eigenvalues sorted descending (ties keep index order), then greedy
    adjacent pairing of eigenvalues equal to relative tolerance ``tol``."""
    sigma = c.sigma if isinstance(c, CovarianceEstimate) else np.asarray(c, dtype=np.float64)
    w, v, sweeps = jacobi_eigh(sigma)
    order = np.argsort(-w, kind="stable")
    w, v = w[order], v[:, order]
    floor = 1e-8 * float(np.max(np.abs(w), initial=0.0))
    pairs, singles = [], []
    i, n = 0, len(w)
    while i < n:
        if i + 1 < n and abs(w[i] - w[i + 1]) <= tol * max(w[i], w[i + 1], floor):
            pairs.append((i, i + 1, float(0.5 * (w[i] + w[i + 1]))))
            i += 2
        else:
            singles.append((i, float(w[i])))
            i += 1
    return EigenPairing(tuple(pairs), tuple(singles), v, w, tol, sweeps)


def build_complex_basis(p: EigenPairing) -> DiscoveredBasis:
    """One row ``(v_a + i v_b)/sqrt(2)`` per pair, the real eigenvector per
    singleton, in eigen order."""
    v = p.eigenvectors
    rows = []
    for idx, _ in p.groups():
        if len(idx) == 2:
            rows.append((v[:, idx[0]] + 1j * v[:, idx[1]]) / math.sqrt(2.0))
        else:
            rows.append(v[:, idx[0]].astype(np.complex128))
    return DiscoveredBasis(np.array(rows), p)


def objective_of(u: np.ndarray, dataset: Sequence[Signal] | np.ndarray) -> float:
    """Summed per-coordinate population variance of ``|U x_i|``."""
    x = _dataset_matrix(dataset)
    u = np.asarray(u)
    if u.shape[1] != x.shape[1]:
        raise ValueError(f"basis acts on size {u.shape[1]}, dataset has size {x.shape[1]}")
    mags = np.abs(x @ u.T)
    return float(np.sum(np.var(mags, axis=0)))


def invariance_objective(u: DiscoveredBasis, dataset: Sequence[Signal] | np.ndarray) -> DiscoveredBasis:
    return replace(u, objective=objective_of(u.u, dataset))


def discover(dataset: Sequence[Signal] | np.ndarray, tol: float = DEFAULT_PAIRING_TOL,
             center: bool = False) -> DiscoveredBasis:
    pairing = eigendecompose(covariance(dataset, center), tol)
    return invariance_objective(build_complex_basis(pairing), dataset)


def mean_energy(dataset: Sequence[Signal] | np.ndarray) -> float:
    x = _dataset_matrix(dataset)
    return float(np.mean(np.sum(np.abs(x) ** 2, axis=1)))


def eigen_subspaces(p: EigenPairing) -> list[tuple[float, np.ndarray]]:
    """``(eigenvalue, N x d)`` real eigenvector blocks, one per pair/singleton."""
    return [(lam, p.eigenvectors[:, list(idx)]) for idx, lam in p.groups()]


def max_principal_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Largest principal angle between the column spans of ``a`` and ``b``
    (complex allowed), computed from sines for small-angle accuracy."""
    qa, _ = np.linalg.qr(np.asarray(a, dtype=np.complex128))
    qb, _ = np.linalg.qr(np.asarray(b, dtype=np.complex128))
    if qa.shape[1] != qb.shape[1]:
        return math.pi / 2
    resid = qb - qa @ (qa.conj().T @ qb)
    s = np.linalg.svd(resid, compute_uv=False)
    return float(np.arcsin(min(1.0, float(s.max(initial=0.0)))))


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    """Haar-distributed unitary from the QR of a complex Gaussian matrix."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))
