"""Bohmian paths and Nelson diffusions driven by a synthesized wave function.

Conventions (hbar = 1, mass m from the model, nu = 1/(2m)):

    current velocity   v = Im(psi'/psi) / m
    osmotic velocity   u = nu * rho'/rho = Re(psi'/psi) / m
    Nelson SDE         dx = (v + u) dt + sqrt(2 nu) dW

For the box (2m = 1) this is v = 2 Im(psi'/psi), nu = 1.  psi and psi' are
exact mode sums; nothing is differentiated numerically.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.stats import kstest

from .errors import DomainRequired, NodeProximity
from .evolution import synthesize
from .spectral_model import ModelKind, eigenfunction_matrix, energies
from .state_space import StateVector, classify

EPS_NODE = 1e-10
CDF_POINTS = 1 << 14
BLOCK = 4096

__all__ = [
    "WaveField",
    "TrajectoryEnsemble",
    "velocity",
    "integrate_bohmian",
    "sample_nelson",
    "sample_initial_positions",
    "equivariance_statistic",
    "density_cdf",
]


def _worker_count() -> int:
    cap = os.environ.get("SCHRSCALE_THREADS")
    n = os.cpu_count() or 1
    return max(1, min(n, int(cap))) if cap else n


class WaveField:
    """psi(x, t) and psi'(x, t) for a state in D(H), as exact finite mode sums."""

    def __init__(self, state: StateVector, truncation: int | None = None):
        if classify(state) < 2:
            raise DomainRequired("state not in D(H): window it first")
        if not state.finite_support and truncation is None:
            raise ValueError("tail state in D(H): pass an explicit truncation index")
        n_max = state.max_mode if state.finite_support else truncation
        self.state = state
        self.model = state.model
        self.truncation = n_max
        self.modes, self.coeffs = state.materialize(n_max)
        self.energies = energies(self.model, self.modes)
        self.mass = self.model.mass
        self.nu = 0.5 / self.mass

    def evaluate(self, x: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        ct = self.coeffs * np.exp(-1j * self.energies * t)
        if self.model.kind is ModelKind.BOX:
            k = self.modes * (math.pi / self.model.length)
            amp = math.sqrt(2.0 / self.model.length)
            arg = np.multiply.outer(x, k)
            psi = amp * (np.sin(arg) @ ct)
            dpsi = amp * (np.cos(arg) @ (ct * k))
            return psi, dpsi
        phi = eigenfunction_matrix(self.model, self.modes, x)
        dphi = eigenfunction_matrix(self.model, self.modes, x, derivative=True)
        return np.tensordot(ct, phi, axes=1), np.tensordot(ct, dphi, axes=1)

    def velocities(self, x, t):
        """(v, u, rho); entries where rho <= EPS_NODE are returned as nan."""
        psi, dpsi = self.evaluate(x, t)
        rho = psi.real**2 + psi.imag**2
        prod = dpsi * np.conj(psi)
        with np.errstate(divide="ignore", invalid="ignore"):
            guard = rho > EPS_NODE
            denom = np.where(guard, self.mass * rho, np.nan)
            v = prod.imag / denom
            u = prod.real / denom
        return v, u, rho


def velocity(state: StateVector, t: float, x, truncation: int | None = None):
    """Bohmian current velocity Im(psi'/psi)/m at x."""
    field = WaveField(state, truncation)
    v, _, rho = field.velocities(np.atleast_1d(x), t)
    if np.any(rho <= EPS_NODE):
        raise NodeProximity(f"|psi|^2 <= {EPS_NODE:g} at x={np.atleast_1d(x)[rho <= EPS_NODE][:3]}")
    return float(v[0]) if np.ndim(x) == 0 else v


@dataclass(eq=False)
class TrajectoryEnsemble:
    kind: str
    times: np.ndarray
    positions: np.ndarray  # paths x times
    dt: float
    seed: int | None
    breached: np.ndarray  # bool per path
    node_guard_hits: int
    crossings: int = 0
    truncation: int = 0

    @property
    def breach_fraction(self) -> float:
        return float(np.mean(self.breached)) if self.breached.size else 0.0

    def to_csv(self, path) -> None:
        P, T = self.positions.shape
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "path_id", "x"])
            for j in range(T):
                tj = format(self.times[j], ".17g")
                w.writerows([tj, i, format(x, ".17g")] for i, x in enumerate(self.positions[:, j]))


def _time_grid(t_span, dt, n_out):
    t0, t1 = map(float, t_span)
    steps = max(1, int(round((t1 - t0) / dt)))
    dt = (t1 - t0) / steps
    record = np.unique(np.round(np.linspace(0, steps, max(2, n_out))).astype(int))
    return t0, dt, steps, record


def density_cdf(field: WaveField, t: float):
    """(grid, cdf) of |psi(., t)|^2 by trapezoidal quadrature."""
    model = field.model
    if model.kind is ModelKind.BOX:
        grid = np.linspace(0.0, model.length, CDF_POINTS + 1)
    else:
        reach = math.sqrt(2.0 * max(field.modes.max(), 0) + 1.0) + 8.0
        grid = np.linspace(-reach, reach, CDF_POINTS + 1)
    samples = synthesize(field.state, t, grid, field.truncation)
    cdf = cumulative_trapezoid(samples.density, grid, initial=0.0)
    return grid, cdf / cdf[-1]


def _inverse_cdf(grid, cdf, u):
    return np.interp(u, cdf, grid)


def sample_initial_positions(state: StateVector, n: int, seed: int, t: float = 0.0, truncation=None) -> np.ndarray:
    field = WaveField(state, truncation)
    grid, cdf = density_cdf(field, t)
    return _inverse_cdf(grid, cdf, np.random.default_rng(seed).random(n))


def _reflect(x, model):
    if model.kind is not ModelKind.BOX:
        return x
    L = model.length
    x = np.abs(x)
    x = np.where(x > L, 2 * L - x, x)
    return np.clip(x, 0.0, L)


def integrate_bohmian(state, x0s, t_span, dt=1e-3, n_out=11, truncation=None) -> TrajectoryEnsemble:
    """RK4 on dx/dt = v(x, t); paths that start a step with rho < 10 eps_node
    take ten substeps of dt/10.  Guard hits inside the substeps mark the path
    as breached and freeze its velocity for that stage."""
    field = WaveField(state, truncation)
    x = np.array(x0s, dtype=float)
    t0, dt, steps, record = _time_grid(t_span, dt, n_out)
    out = np.empty((x.size, record.size))
    breached = np.zeros(x.size, dtype=bool)
    hits = 0

    def vel(xs, t, mask=None):
        nonlocal hits
        v, _, _ = field.velocities(xs, t)
        bad = ~np.isfinite(v)
        if bad.any():
            hits += int(bad.sum())
            if mask is not None:
                breached[mask[bad]] = True
            v = np.where(bad, 0.0, v)
        return v

    def rk4(xs, t, h, idx=None):
        k1 = vel(xs, t, idx)
        k2 = vel(xs + 0.5 * h * k1, t + 0.5 * h, idx)
        k3 = vel(xs + 0.5 * h * k2, t + 0.5 * h, idx)
        k4 = vel(xs + h * k3, t + h, idx)
        return xs + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    ri = 0
    if record[0] == 0:
        out[:, 0] = x
        ri = 1
    all_idx = np.arange(x.size)
    for step in range(steps):
        t = t0 + step * dt
        _, _, rho = field.velocities(x, t)
        near = rho < 10 * EPS_NODE
        if near.any():
            far = ~near
            x[far] = rk4(x[far], t, dt, all_idx[far])
            xs, idx = x[near], all_idx[near]
            for sub in range(10):
                xs = rk4(xs, t + sub * dt / 10, dt / 10, idx)
            x[near] = xs
        else:
            x = rk4(x, t, dt, all_idx)
        x = _reflect(x, field.model)
        if ri < record.size and step + 1 == record[ri]:
            out[:, ri] = x
            ri += 1
    order = np.argsort(out[:, 0], kind="stable")
    crossings = int(np.sum(np.diff(out[order], axis=0) < 0))
    return TrajectoryEnsemble(
        "bohmian", t0 + record * dt, out, dt, None, breached, hits, crossings, field.truncation
    )


def _nelson_block(field, grid, cdf, seq, n, t0, dt, steps, record):
    rng = np.random.default_rng(seq)
    x = _inverse_cdf(grid, cdf, rng.random(n))
    out = np.empty((n, record.size))
    breached = np.zeros(n, dtype=bool)
    hits = 0
    sigma = math.sqrt(2.0 * field.nu * dt)
    ri = 0
    if record[0] == 0:
        out[:, 0] = x
        ri = 1
    for step in range(steps):
        v, u, _ = field.velocities(x, t0 + step * dt)
        drift = v + u
        bad = ~np.isfinite(drift)
        if bad.any():
            hits += int(bad.sum())
            breached |= bad
            drift = np.where(bad, 0.0, drift)
        x = _reflect(x + drift * dt + sigma * rng.standard_normal(n), field.model)
        if ri < record.size and step + 1 == record[ri]:
            out[:, ri] = x
            ri += 1
    return out, breached, hits


def sample_nelson(state, n_paths: int, t_span, dt=1e-3, seed: int = 0, n_out=11, truncation=None) -> TrajectoryEnsemble:
    """Euler-Maruyama sample paths of the Nelson diffusion.

    Paths are processed in fixed blocks of 4096, each with its own generator
    spawned from ``seed``; results do not depend on the worker count.
    """
    if n_paths < 1:
        raise ValueError("need at least one path")
    field = WaveField(state, truncation)
    t0, dt, steps, record = _time_grid(t_span, dt, n_out)
    grid, cdf = density_cdf(field, t0)
    sizes = [min(BLOCK, n_paths - i) for i in range(0, n_paths, BLOCK)]
    seqs = np.random.SeedSequence(seed).spawn(len(sizes))
    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        parts = list(
            pool.map(lambda a: _nelson_block(field, grid, cdf, a[0], a[1], t0, dt, steps, record), zip(seqs, sizes))
        )
    positions = np.concatenate([p[0] for p in parts])
    breached = np.concatenate([p[1] for p in parts])
    hits = sum(p[2] for p in parts)
    return TrajectoryEnsemble("nelson", t0 + record * dt, positions, dt, seed, breached, hits, 0, field.truncation)


def equivariance_statistic(ensemble: TrajectoryEnsemble, state: StateVector, t: float) -> float:
    """Kolmogorov-Smirnov distance between the ensemble at t and |psi(., t)|^2."""
    j = np.flatnonzero(np.isclose(ensemble.times, t, rtol=0, atol=1e-9))
    if not j.size:
        raise ValueError(f"t={t} is not an output time of the ensemble")
    field = WaveField(state, ensemble.truncation if not state.finite_support else None)
    grid, cdf = density_cdf(field, t)
    return float(kstest(ensemble.positions[:, j[0]], lambda q: np.interp(q, grid, cdf)).statistic)
