"""Experiment runners behind the ``lab`` subcommands.

Each runner takes a validated :class:`ExperimentConfig` and returns a
:class:`Result`: a JSON-ready report plus a CSV rendering of its main table.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import cascade as cc
from .config import BankConfig, ExperimentConfig, LayerConfig, SignalConfig, streams
from .discovery import (
    discover,
    max_principal_angle,
    mean_energy,
    objective_of,
    random_unitary,
)
from .groups import TRANSPOSITION, GroupDescriptor, LayerAction, act
from .meter import StabilityReport, commutation_residual, stability_curve
from .serialization import dumps_json, fmt, read_dataset, read_signal
from .signal import DeformationField, Grid, Signal, impulse, l2_norm, warp
from .stone import basis_for, basis_to_csv, stone_invariant, verify_diagonalization


class ExperimentError(RuntimeError):
    """Precondition or runtime failure inside an experiment (exit code 1)."""


@dataclass
class Result:
    report: dict
    csv: str
    curve: StabilityReport | None = None

    def json(self) -> str:
        return dumps_json(self.report)


def _table(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


# builders --------------------------------------------------------------------

def make_signal(sc: SignalConfig | None, n: int, rng: np.random.Generator, default: str = "white-noise") -> Signal:
    sc = sc or SignalConfig(preset=default)
    if sc.path is not None:
        return read_signal(sc.path)
    u = np.arange(n, dtype=np.float64)
    center = n / 2 if sc.center is None else sc.center
    if sc.preset == "impulse":
        return impulse(n, sc.position)
    if sc.preset == "gaussian-bump":
        width = n / 16 if sc.width is None else sc.width
        return Signal(Grid.line(n), np.exp(-0.5 * ((u - center) / width) ** 2))
    if sc.preset == "chirp":
        width = n / 8 if sc.width is None else sc.width
        s = u - center
        phase = 2 * np.pi * (sc.f0 * s + (sc.f1 - sc.f0) * s * np.abs(s) / (2 * n))
        return Signal(Grid.line(n), np.exp(-0.5 * (s / width) ** 2) * np.cos(phase))
    v = rng.standard_normal(n)
    if sc.complex:
        v = v + 1j * rng.standard_normal(n)
    return Signal(Grid.line(n), v)


def make_bank(bc: BankConfig, n: int, rng: np.random.Generator, new_axis: str) -> cc.FilterBank:
    name = bc.new_axis or new_axis
    if bc.filters is not None:
        filters = [np.array([complex(*c) if isinstance(c, tuple) else c for c in f]) for f in bc.filters]
        return cc.FilterBank(tuple(filters), (bc.axis,), name)
    if bc.preset == "half_band":
        return cc.half_band_pair(n, bc.axis, name)
    if bc.preset == "random":
        return cc.random_bank(rng, bc.count, bc.taps, bc.axis, name)
    return cc.BANK_PRESETS[bc.preset](bc.axis, name)


def make_cascade(layers: list[LayerConfig] | None, x: Signal, rng: np.random.Generator, pool_j: int) -> cc.CascadeSpec:
    if layers is None:
        return cc.modulus_cascade(2, pool_j)
    out = []
    grid = x.grid
    for i, lc in enumerate(layers):
        size = grid.axis(lc.bank.axis).size
        bank = make_bank(lc.bank, size, rng, f"lambda{i + 1}")
        pooling = None
        if lc.pooling is not None:
            pooling = cc.PoolingSpec(tuple(lc.pooling.axes.items()), lc.pooling.alpha, lc.pooling.kernel)
        layer = cc.Layer(bank, lc.nonlinearity, pooling)
        grid = cc.predict_grids(cc.CascadeSpec((layer,)), grid)[-1]
        out.append(layer)
    return cc.CascadeSpec(tuple(out))


def _group(cfg: ExperimentConfig, n: int) -> GroupDescriptor:
    gc = cfg.group
    kind = gc.kind if gc else "translation"
    axis = gc.axis if gc else "u"
    direction = gc.direction if gc and gc.direction is not None else (2 * np.pi / n if kind == TRANSPOSITION else 1.0)
    return GroupDescriptor(kind, axis, direction)


# experiments -----------------------------------------------------------------

def run_stone(cfg: ExperimentConfig) -> Result:
    n = cfg.n or 64
    sig_rng, rng = streams(cfg.seed)
    g = _group(cfg, n)
    b = basis_for(g, n)
    signals = [make_signal(cfg.signal, n, sig_rng) for _ in range(cfg.signals)]
    orbit_dev = 0.0
    for x in signals:
        ref = stone_invariant(x, b).values
        scale = float(np.max(np.abs(ref)))
        for t in range(1, n):
            moved = stone_invariant(act(g, t, x), b).values
            orbit_dev = max(orbit_dev, float(np.max(np.abs(moved - ref))) / scale)
    residuals = []
    for x in signals:
        t = float(rng.integers(-n, n + 1)) if g.kind != TRANSPOSITION else float(rng.uniform(-n, n))
        residuals.append(verify_diagonalization(b, t, x))
    bad = type(b)(b.transform, b.frequencies + rng.uniform(0.5, 1.0, n), g)
    control = min(verify_diagonalization(bad, 1.0, x) for x in signals)
    report = {
        "experiment": "stone",
        "group": {"kind": g.kind, "axis": g.axis, "direction": g.direction},
        "n": n,
        "signals": len(signals),
        "unitarity_defect": b.unitarity_defect(),
        "max_orbit_deviation": orbit_dev,
        "max_diagonalization_residual": max(residuals),
        "perturbed_frequency_residual_min": control,
        "checks": {
            "orbit_invariance": orbit_dev <= 1e-10,
            "diagonalization": max(residuals) <= 1e-10,
            "negative_control": control > 0.1,
        },
    }
    return Result(report, basis_to_csv(b))


def run_stability(cfg: ExperimentConfig) -> Result:
    n = cfg.n or 128
    sig_rng, rng = streams(cfg.seed)
    x = make_signal(cfg.signal, n, sig_rng)
    spec = make_cascade(cfg.cascade, x, rng, cfg.pool_j)
    phi = cc.representation(spec)
    family = [DeformationField.sinusoid(n, a) for a in cfg.amplitudes]
    rep = stability_curve(phi, x, family, representation_id=f"cascade[{len(spec.layers)} layers]")
    raw = [l2_norm(warp(x, d) - x) / l2_norm(x) for d in family]
    ratios = rep.ratios
    median = float(np.median(ratios))
    rep = StabilityReport(rep.samples, rep.representation_id, {"amplitudes": list(cfg.amplitudes), "n": n})
    report = {
        "experiment": "stability",
        **rep.to_dict(),
        "raw_errors": raw,
        "max_over_median_ratio": max(ratios) / median if median > 0 else math.inf,
        "checks": {
            "finite": all(math.isfinite(r) for r in ratios),
            "bounded_ratio": max(ratios) <= 3 * median,
            "pooled_below_raw": all(s.error < r for s, r in zip(rep.samples, raw)),
        },
    }
    return Result(report, rep.to_csv(), rep)


def run_commutation(cfg: ExperimentConfig) -> Result:
    n = cfg.n or 8
    _, rng = streams(cfg.seed)
    rows = []
    worst, control = 0.0, math.inf
    for c in cfg.channels:
        if c < 2:
            raise ExperimentError("channel counts must be at least 2")
        vals = rng.standard_normal((n, c)) + 1j * rng.standard_normal((n, c))
        z = Signal.from_array(vals, ["u", "lambda1"], ["spatial", "channel"])
        bank = cc.random_bank(rng, 2, cfg.taps, "lambda1", "lambda2")
        a = LayerAction(1, "lambda1")
        for k in range(1, c):
            r = commutation_residual(z, a, k, bank)
            zr = commutation_residual(z, a, k, bank, boundary="zero")
            rows.append([c, k, r, zr])
            worst = max(worst, r)
            control = min(control, zr)
    report = {
        "experiment": "commutation",
        "n": n,
        "channels": list(cfg.channels),
        "taps": cfg.taps,
        "max_residual": worst,
        "zero_padded_min_residual": control,
        "checks": {"exact": worst <= 1e-12, "negative_control": control > 0},
    }
    return Result(report, _table(["channels", "shift", "periodic_residual", "zero_padded_residual"], rows))


def run_pooling(cfg: ExperimentConfig) -> Result:
    n = cfg.n or 8
    c = cfg.channels[-1] if cfg.channels else 16
    if c & (c - 1):
        raise ExperimentError(f"channel count {c} must be a power of two for full-axis pooling")
    _, rng = streams(cfg.seed)
    z = Signal.from_array(rng.standard_normal((n, c)), ["u", "lambda1"], ["spatial", "channel"])
    a = LayerAction(1, "lambda1")
    rows, errors = [], []
    for j in cfg.scales:
        err, ratio = cc.pooling_attenuation(z, a, cfg.shift, cc.PoolingSpec((("lambda1", j),)))
        rows.append([j, err, ratio])
        errors.append(err)
    full, _ = cc.pooling_attenuation(z, a, cfg.shift, cc.PoolingSpec((("lambda1", int(math.log2(c))),)))
    monotone = all(e2 <= e1 + 1e-12 for e1, e2 in zip(errors, errors[1:]))
    report = {
        "experiment": "pooling",
        "channels": c,
        "shift": cfg.shift,
        "scales": list(cfg.scales),
        "errors": errors,
        "full_axis_error": full,
        "checks": {"non_increasing": monotone, "full_axis_invariant": full <= 1e-10},
    }
    return Result(report, _table(["J", "error", "ratio"], rows))


def orbit_dataset(kind: str, x0: Signal) -> list[Signal]:
    n = x0.shape[0]
    if kind == "shift-orbit":
        g = GroupDescriptor("translation", "u", 1.0)
    else:
        g = GroupDescriptor(TRANSPOSITION, "u", 2 * np.pi / n)
    return [act(g, t, x0) for t in range(n)]


def fourier_alignment(found, dataset, reference: np.ndarray, rtol: float = 1e-6) -> float:
    """Largest principal angle between each discovered eigen-subspace and the
    span of reference rows whose dataset energy matches its eigenvalue."""
    x = np.stack([s.values.reshape(-1) for s in dataset])
    energies = np.mean(np.abs(x @ reference.T) ** 2, axis=0)
    scale = float(np.max(energies))
    worst = 0.0
    for idx, lam in found.pairing.groups():
        match = np.flatnonzero(np.abs(energies - lam) <= rtol * scale)
        block = found.pairing.eigenvectors[:, list(idx)]
        worst = max(worst, max_principal_angle(block, reference[match].conj().T) if len(match) else math.pi / 2)
    return worst


def run_discover(cfg: ExperimentConfig) -> Result:
    n = cfg.n or 8
    sig_rng, rng = streams(cfg.seed)
    dc = cfg.dataset
    preset = dc.preset if dc else "shift-orbit"
    if dc is not None and dc.path is not None:
        dataset = read_dataset(dc.path)
        n = dataset[0].shape[0]
    elif preset == "white-noise":
        m = dc.samples if dc else 512
        dataset = [Signal(Grid.line(n), v) for v in rng.standard_normal((m, n))]
    else:
        dataset = orbit_dataset(preset, make_signal(cfg.signal, n, sig_rng))
    found = discover(dataset, cfg.tol, cfg.center)
    energy = mean_energy(dataset)
    identity_obj = objective_of(np.eye(n), dataset)
    randoms = [objective_of(random_unitary(rng, n), dataset) for _ in range(cfg.random_bases)]
    report = {
        "experiment": "discover",
        "dataset": preset if dc is None or dc.path is None else dc.path,
        "n": n,
        "samples": len(dataset),
        "eigenvalues": list(found.pairing.eigenvalues),
        "pairs": [list(p) for p in found.pairing.pairs],
        "singletons": [list(s) for s in found.pairing.singletons],
        "objective": found.objective,
        "mean_energy": energy,
        "objective_over_energy": found.objective / energy if energy > 0 else math.inf,
        "identity_objective": identity_obj,
        "random_basis_min_objective": min(randoms) if randoms else None,
        "orthonormality_defect": found.orthonormality_defect(),
    }
    checks = {}
    if preset in ("shift-orbit", "transposition-orbit") and (dc is None or dc.path is None):
        g = GroupDescriptor("translation", "u", 1.0) if preset == "shift-orbit" else \
            GroupDescriptor(TRANSPOSITION, "u", 2 * np.pi / n)
        angle = fourier_alignment(found, dataset, basis_for(g, n).transform)
        report["max_subspace_angle"] = angle
        checks = {
            "orbit_invariant": found.objective <= 1e-10 * energy,
            "aligned": angle <= 1e-6,
            "beats_random": all(found.objective < r for r in randoms),
        }
    elif preset == "white-noise":
        checks = {"near_identity": abs(found.objective - identity_obj) <= 0.1 * identity_obj}
    report["checks"] = checks
    rows = []
    for k, lam in enumerate(found.pairing.eigenvalues):
        rows.append([k, float(lam)] + [float(c) for c in found.pairing.eigenvectors[:, k]])
    return Result(report, _table(["index", "eigenvalue"] + [f"v{j}" for j in range(n)], rows))


def run_frame(cfg: ExperimentConfig) -> Result:
    n = cfg.n or 8
    sig_rng, rng = streams(cfg.seed)
    rows, banks = [], {}
    xs = [sig_rng.standard_normal(n) + 1j * sig_rng.standard_normal(n) for _ in range(cfg.trials)]
    for name in cfg.banks:
        bank = make_bank(BankConfig(preset=name), n, rng, "lambda1")
        a, big_a = cc.frame_bounds(bank, n)
        ratios = []
        violations = 0
        for v in xs:
            x = Signal(Grid.line(n), v)
            nz, nx = l2_norm(cc.filter_bank_apply(x, bank)), l2_norm(x)
            ratios.append(nz / nx)
            violations += not (a * nx - 1e-9 <= nz <= big_a * nx + 1e-9)
        banks[name] = {"a": a, "A": big_a, "min_ratio": min(ratios), "max_ratio": max(ratios),
                       "violations": violations}
        rows.append([name, a, big_a, min(ratios), max(ratios), violations])
    report = {
        "experiment": "frame",
        "n": n,
        "trials": cfg.trials,
        "banks": banks,
        "checks": {"sandwich": all(b["violations"] == 0 for b in banks.values())},
    }
    return Result(report, _table(["bank", "a", "A", "min_ratio", "max_ratio", "violations"], rows))


RUNNERS: dict[str, Callable[[ExperimentConfig], Result]] = {
    "stone": run_stone,
    "stability": run_stability,
    "commutation": run_commutation,
    "pooling": run_pooling,
    "discover": run_discover,
    "frame": run_frame,
}


def run_experiment(cfg: ExperimentConfig) -> Result:
    try:
        return RUNNERS[cfg.experiment](cfg)
    except ExperimentError:
        raise
    except (ValueError, KeyError) as e:
        raise ExperimentError(str(e)) from e
