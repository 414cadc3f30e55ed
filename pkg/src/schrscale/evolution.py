"""Unitary evolution, position-space synthesis and the extended operator S.

For a multiplier u with lambda - u(lambda) bounded, the multiplier evolution
psi^u(t) = exp(-i u(H) t) psi carries the coefficients exp(-i u(E_n) t) c_n,
and S acts on it coefficientwise as

    (S psi^u(t))_n = [E_n - u(E_n)] exp(-i u(E_n) t) c_n,

so ||S psi^u(t)||^2 <= M ||psi||^2 with M = sup |lambda - u(lambda)|^2.
With u(lambda) = lambda the multiplier vanishes identically and S psi = 0.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np
import scipy.fft

from .errors import NotInExtensionFamily, UnsupportedOperation
from .series import EPS, Envelope, certified_sum, pseries_tail
from .spectral_model import ModelKind, SpectrumModel, eigenfunction_matrix, energies
from .state_space import NormResult, PowerLawTail, StateVector

__all__ = [
    "MultiplierKind",
    "MultiplierSpec",
    "ExtensionResult",
    "WaveSamples",
    "evolve",
    "synthesize",
    "truncation_bound",
    "apply_extension",
    "extension_bound_check",
]


def evolve(f: StateVector, t: float) -> StateVector:
    """exp(-i H t) f; tails carry the phase symbolically."""
    if t == 0.0:
        return f
    coeffs = f.coeffs * np.exp(-1j * f.head_energies() * t) if f.modes.size else f.coeffs.copy()
    tail = replace(f.tail, time=f.tail.time + t) if f.tail is not None else None
    return StateVector(f.model, f.modes.copy(), coeffs, tail, f.norm_sq)


# -- synthesis --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WaveSamples:
    grid: np.ndarray
    values: np.ndarray
    t: float
    truncation: int
    l2_error_bound: float

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def to_csv(self, path) -> None:
        rows = np.column_stack([self.grid, self.values.real, self.values.imag, self.density])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "re", "im", "density"])
            w.writerows([[format(v, ".17g") for v in r] for r in rows])


def truncation_bound(f: StateVector, N: int) -> float:
    """Upper bound on ||f - f_{<=N}||_0."""
    if f.finite_support:
        return 0.0
    tail = f.tail
    if tail.exponent <= 0.5:
        return math.inf
    _, hi = pseries_tail(2.0 * tail.exponent, max(N, tail.start - 1))
    return math.sqrt(tail.amplitude**2 * hi * (1 + 16 * EPS))


def _uniform_box_grid(model: SpectrumModel, grid: np.ndarray) -> bool:
    if model.kind is not ModelKind.BOX or grid.size < 3:
        return False
    ref = np.linspace(0.0, model.length, grid.size)
    return bool(np.array_equal(grid, ref))


def _box_dst(model: SpectrumModel, ns, cs, npts: int) -> np.ndarray:
    """Sum c_n sqrt(2/L) sin(n pi x_j / L) on x_j = j L/(npts-1) via DST-I."""
    M = npts - 1
    dense = np.zeros(M - 1, dtype=complex)
    keep = ns < M
    dense[ns[keep] - 1] = cs[keep]
    out = np.zeros(npts, dtype=complex)
    y = scipy.fft.dst(dense.real, type=1) + 1j * scipy.fft.dst(dense.imag, type=1)
    out[1:-1] = 0.5 * math.sqrt(2.0 / model.length) * y
    return out


def _mode_sum(model: SpectrumModel, ns, cs, x, derivative=False, chunk=512) -> np.ndarray:
    out = np.zeros(x.shape, dtype=complex)
    for i in range(0, ns.size, chunk):
        phi = eigenfunction_matrix(model, ns[i : i + chunk], x, derivative=derivative)
        out += np.tensordot(cs[i : i + chunk], phi, axes=1)
    return out


def synthesize(f: StateVector, t: float, grid, N: int) -> WaveSamples:
    """psi(x, t) = sum_{n <= N} c_n exp(-i E_n t) phi_n(x) on ``grid``."""
    if not f.model.has_eigenfunctions:
        raise UnsupportedOperation("table models carry no eigenfunctions")
    if N < f.max_mode:
        raise ValueError(f"truncation N={N} is below the largest head index {f.max_mode}")
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    ns, cs = evolve(f, t).materialize(N)
    if _uniform_box_grid(f.model, grid) and ns.size and ns.max() < grid.size - 1:
        values = _box_dst(f.model, ns, cs, grid.size)
    else:
        values = _mode_sum(f.model, ns, cs, grid)
    return WaveSamples(grid, values, t, N, truncation_bound(f, N))


# -- extension operator ---------------------------------------------------


class MultiplierKind(str, Enum):
    ZERO = "zero"
    SINE = "sine"
    CLAMP = "clamp"
    TABLE = "table"


@dataclass(frozen=True)
class MultiplierSpec:
    """u(lambda) = lambda + g(lambda) with g bounded on the spectrum in use.

    SINE: g = alpha sin(lambda).  CLAMP: u = min(lambda, cap).  TABLE: rows
    (lo, hi, value) set u = value on lo < lambda <= hi, u = lambda elsewhere.
    """

    kind: MultiplierKind = MultiplierKind.ZERO
    alpha: float = 1.0
    cap: float = math.nan
    table: tuple[tuple[float, float, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", MultiplierKind(self.kind))

    def deviation(self, lam: np.ndarray) -> np.ndarray:
        """lambda - u(lambda)."""
        lam = np.asarray(lam, dtype=float)
        if self.kind is MultiplierKind.ZERO:
            return np.zeros_like(lam)
        if self.kind is MultiplierKind.SINE:
            return -self.alpha * np.sin(lam)
        if self.kind is MultiplierKind.CLAMP:
            return np.maximum(lam - self.cap, 0.0)
        dev = np.zeros_like(lam)
        for lo, hi, value in self.table:
            inside = (lam > lo) & (lam <= hi)
            dev = np.where(inside, lam - value, dev)
        return dev

    def u(self, lam: np.ndarray) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        if self.kind is MultiplierKind.CLAMP:
            return np.minimum(lam, self.cap)
        return lam - self.deviation(lam)

    @property
    def global_bound(self) -> float:
        """sup over all lambda of |lambda - u(lambda)|^2 (inf when unbounded)."""
        if self.kind is MultiplierKind.ZERO:
            return 0.0
        if self.kind is MultiplierKind.SINE:
            return self.alpha**2
        if self.kind is MultiplierKind.CLAMP:
            return math.inf
        return max((max(abs(lo - v), abs(hi - v)) ** 2 for lo, hi, v in self.table), default=0.0)

    def bound(self, f: StateVector) -> float:
        """M over the spectrum the state actually uses."""
        M = self.global_bound
        if math.isfinite(M):
            return M
        if not f.finite_support:
            raise NotInExtensionFamily(
                f"{self.kind.value} multiplier: lambda - u(lambda) is unbounded on the tail spectrum"
            )
        dev = self.deviation(f.head_energies())
        return float(np.max(dev**2)) if dev.size else 0.0

    def describe(self) -> dict:
        d = {"kind": self.kind.value}
        if self.kind is MultiplierKind.SINE:
            d["alpha"] = self.alpha
        elif self.kind is MultiplierKind.CLAMP:
            d["cap"] = self.cap
        elif self.kind is MultiplierKind.TABLE:
            d["table"] = [list(r) for r in self.table]
        return d


@dataclass(frozen=True, eq=False)
class ExtensionResult:
    """Coefficient sequence of S psi^u(t); the tail stays symbolic."""

    modes: np.ndarray
    coeffs: np.ndarray
    tail: PowerLawTail | None
    multiplier: MultiplierSpec
    t: float
    model: SpectrumModel
    bound: float
    norm_sq: NormResult

    def tail_coefficients(self, ns: np.ndarray) -> np.ndarray:
        if self.tail is None:
            return np.zeros(len(ns), dtype=complex)
        return _extension_coeffs(self.model, self.multiplier, ns, self.tail.coefficients(self.model, ns), self.t)

    def is_exactly_zero(self, n_check: int = 4096) -> bool:
        if np.any(self.coeffs != 0):
            return False
        if self.tail is None:
            return True
        ns = np.arange(self.tail.start, self.tail.start + n_check, dtype=np.int64)
        return bool(np.all(self.tail_coefficients(ns) == 0))


def _extension_coeffs(model, u: MultiplierSpec, ns, cs, t: float) -> np.ndarray:
    lam = energies(model, ns)
    dev = u.deviation(lam)
    return dev * np.exp(-1j * u.u(lam) * t) * cs


def _norm_with_cutoff(f: StateVector, weights_fn, M: float, tol: float, min_cutoff: int):
    """Bracket on sum w(E_n) |c_n|^2 with 0 <= w <= M; also the matching bracket of M ||f||^2."""
    head = np.abs(f.coeffs) ** 2
    w_head = weights_fn(f.head_energies()) * head if head.size else head
    if f.finite_support:
        s = math.fsum(w_head) if w_head.size else 0.0
        n = math.fsum(head) if head.size else 0.0
        return (s * (1 - 8 * EPS), s * (1 + 8 * EPS), 0), n * (1 + 8 * EPS)
    tail, model = f.tail, f.model
    env = Envelope((), ((M * tail.amplitude**2, -2.0 * tail.exponent),))

    def terms(ns):
        return weights_fn(energies(model, ns)) * tail.magnitudes_sq(ns)

    res = certified_sum(terms, tail.start, env, tol, offset=math.fsum(w_head), min_cutoff=min_cutoff)
    ref = certified_sum(
        tail.magnitudes_sq,
        tail.start,
        Envelope((), ((tail.amplitude**2, -2.0 * tail.exponent),)),
        math.inf,
        offset=math.fsum(head),
        min_cutoff=res.cutoff,
    )
    return (res.lo, res.hi, res.cutoff), ref.hi


def apply_extension(
    f: StateVector,
    u: MultiplierSpec,
    t: float,
    tol: float = math.inf,
    min_cutoff: int = 1 << 14,
) -> ExtensionResult:
    """Coefficients of S psi^u(t) together with a bracket on their squared norm.

    With the default ``tol=inf`` the norm is bracketed at a fixed cutoff; a
    finite ``tol`` tightens it (the lower tail bound is 0, so this is slow
    for tails).
    """
    M = u.bound(f)
    if f.modes.size:
        coeffs = _extension_coeffs(f.model, u, f.modes, f.coeffs, t)
    else:
        coeffs = np.zeros(0, dtype=complex)
    (lo, hi, cutoff), _ = _norm_with_cutoff(f, lambda lam: u.deviation(lam) ** 2, M, tol, min_cutoff)
    tail = None if f.finite_support else f.tail
    return ExtensionResult(
        f.modes.copy(), coeffs, tail, u, t, f.model, M, NormResult(True, lo, hi, cutoff=cutoff)
    )


def extension_bound_check(f: StateVector, u: MultiplierSpec, t: float) -> tuple[float, float]:
    """(lhs, rhs) = (||S psi^u(t)||^2 upper bracket, M ||f||^2) at a shared cutoff."""
    M = u.bound(f)
    (_, hi, _), norm_hi = _norm_with_cutoff(f, lambda lam: u.deviation(lam) ** 2, M, math.inf, 1 << 14)
    return hi, M * norm_hi
