"""Strictly positive model Hamiltonians with pure point spectrum.

Units are hbar = 1.  The box uses 2m = 1, so H = -d^2/dx^2 + shift on
[0, L] with Dirichlet walls and E_n = (n pi / L)^2 + shift, n >= 1.  The
oscillator is the standard one (m = omega = 1), E_n = n + 1/2 + shift,
n >= 0, with Hermite-function eigenstates.

Every model is shifted so that its lowest eigenvalue is at least 1; the
shift actually applied is kept on the model for provenance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.integrate import trapezoid

from .errors import DomainError, UnsupportedOperation

__all__ = [
    "ModelKind",
    "SpectrumModel",
    "energy",
    "energies",
    "eigenfunction",
    "eigenfunction_matrix",
    "orthonormality_defect",
]


class ModelKind(str, Enum):
    BOX = "box"
    OSCILLATOR = "oscillator"
    TABLE = "table"


@dataclass(frozen=True)
class SpectrumModel:
    kind: ModelKind
    length: float = math.pi
    shift: float = 0.0
    requested_shift: float = 0.0
    table: tuple[tuple[int, float], ...] = field(default=())

    # -- constructors -----------------------------------------------------

    @classmethod
    def box(cls, length: float = math.pi, shift: float = 0.0) -> "SpectrumModel":
        if not length > 0:
            raise ValueError(f"box length must be positive, got {length}")
        if shift < 0:
            raise ValueError("shift must be nonnegative")
        e1 = (math.pi / length) ** 2
        return cls(ModelKind.BOX, float(length), max(shift, 1.0 - e1), float(shift))

    @classmethod
    def oscillator(cls, shift: float = 0.5) -> "SpectrumModel":
        if shift < 0:
            raise ValueError("shift must be nonnegative")
        return cls(ModelKind.OSCILLATOR, math.nan, max(shift, 0.5), float(shift))

    @classmethod
    def from_table(cls, pairs, shift: float = 0.0) -> "SpectrumModel":
        rows = tuple(sorted((int(n), float(e)) for n, e in pairs))
        if not rows:
            raise ValueError("table model needs at least one (n, E_n) pair")
        ns = [n for n, _ in rows]
        es = [e for _, e in rows]
        if len(set(ns)) != len(ns):
            raise ValueError("duplicate mode index in table")
        if any(b <= a for a, b in zip(es, es[1:])):
            raise ValueError("table energies must be strictly increasing in n")
        if shift < 0:
            raise ValueError("shift must be nonnegative")
        return cls(ModelKind.TABLE, math.nan, max(shift, 1.0 - es[0]), float(shift), rows)

    # -- properties -------------------------------------------------------

    @property
    def auto_shift(self) -> float:
        """Extra shift added on top of the requested one to reach E_min >= 1."""
        return self.shift - self.requested_shift

    @property
    def first_index(self) -> int:
        if self.kind is ModelKind.BOX:
            return 1
        if self.kind is ModelKind.OSCILLATOR:
            return 0
        return self.table[0][0]

    @property
    def mass(self) -> float:
        """Particle mass in the model's units (needed by the velocity fields)."""
        if self.kind is ModelKind.BOX:
            return 0.5
        if self.kind is ModelKind.OSCILLATOR:
            return 1.0
        raise UnsupportedOperation("table models have no configuration space")

    @property
    def has_eigenfunctions(self) -> bool:
        return self.kind is not ModelKind.TABLE

    def power_law(self) -> tuple[float, float, float]:
        """Return (a, gamma, b) with E_n = a * n**gamma + b for every valid n.

        Only defined for the infinite-spectrum kinds; tails need it.
        """
        if self.kind is ModelKind.BOX:
            return (math.pi / self.length) ** 2, 2.0, self.shift
        if self.kind is ModelKind.OSCILLATOR:
            return 1.0, 1.0, 0.5 + self.shift
        raise UnsupportedOperation("table spectra are finite; no asymptotic law")

    def interval(self) -> tuple[float, float]:
        if self.kind is ModelKind.BOX:
            return 0.0, self.length
        if self.kind is ModelKind.OSCILLATOR:
            return -math.inf, math.inf
        raise UnsupportedOperation("table models have no configuration space")

    def describe(self) -> dict:
        d = {
            "kind": self.kind.value,
            "requested_shift": self.requested_shift,
            "shift": self.shift,
            "auto_shift": self.auto_shift,
        }
        if self.kind is ModelKind.BOX:
            d["length"] = self.length
        if self.kind is ModelKind.TABLE:
            d["table"] = [list(r) for r in self.table]
        return d


# -- spectrum -------------------------------------------------------------


def _check_index(model: SpectrumModel, n) -> None:
    if model.kind is ModelKind.TABLE:
        known = {k for k, _ in model.table}
        bad = [int(k) for k in np.atleast_1d(n) if int(k) not in known]
        if bad:
            raise IndexError(f"mode(s) {bad[:5]} not present in table model")
    elif np.any(np.asarray(n) < model.first_index):
        raise IndexError(f"{model.kind.value} modes start at n={model.first_index}")


def energies(model: SpectrumModel, ns) -> np.ndarray:
    """Vectorized eigenvalues E_n (shift included)."""
    ns = np.asarray(ns)
    _check_index(model, ns)
    if model.kind is ModelKind.TABLE:
        lookup = dict(model.table)
        raw = np.array([lookup[int(k)] for k in ns.ravel()], dtype=float).reshape(ns.shape)
        return raw + model.shift
    a, gamma, b = model.power_law()
    nf = ns.astype(float)
    return a * nf**2 + b if gamma == 2.0 else a * nf + b


def energy(model: SpectrumModel, n: int) -> float:
    if isinstance(n, (bool, np.bool_)) or int(n) != n:
        raise IndexError(f"mode index must be an integer, got {n!r}")
    return float(energies(model, np.array([int(n)]))[0])


# -- eigenfunctions -------------------------------------------------------


def _hermite_functions(nmax: int, x: np.ndarray) -> np.ndarray:
    """Rows 0..nmax of normalized Hermite functions at x (stable recurrence)."""
    out = np.empty((nmax + 1,) + x.shape)
    out[0] = math.pi**-0.25 * np.exp(-0.5 * x * x)
    if nmax >= 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for k in range(1, nmax):
        out[k + 1] = math.sqrt(2.0 / (k + 1)) * x * out[k] - math.sqrt(k / (k + 1)) * out[k - 1]
    return out


def eigenfunction_matrix(model: SpectrumModel, ns, x, derivative: bool = False) -> np.ndarray:
    """phi_n(x) (or phi_n'(x)) for every n in ``ns``; shape (len(ns),) + x.shape."""
    if not model.has_eigenfunctions:
        raise UnsupportedOperation("table models carry no eigenfunctions")
    ns = np.atleast_1d(np.asarray(ns, dtype=np.int64))
    _check_index(model, ns)
    x = np.asarray(x, dtype=float)
    if model.kind is ModelKind.BOX:
        L = model.length
        if np.any(x < 0) or np.any(x > L):
            raise DomainError(f"box positions must lie in [0, {L}]")
        k = (ns * (math.pi / L)).reshape((-1,) + (1,) * x.ndim)
        amp = math.sqrt(2.0 / L)
        if derivative:
            return amp * k * np.cos(k * x)
        return amp * np.sin(k * x)
    nmax = int(ns.max())
    h = _hermite_functions(nmax + 1 if derivative else nmax, x)
    if not derivative:
        return h[ns]
    # psi_n' = sqrt(n/2) psi_{n-1} - sqrt((n+1)/2) psi_{n+1}
    lower = np.where((ns > 0).reshape((-1,) + (1,) * x.ndim), h[np.maximum(ns - 1, 0)], 0.0)
    cn = np.sqrt(ns / 2.0).reshape((-1,) + (1,) * x.ndim)
    cp = np.sqrt((ns + 1) / 2.0).reshape((-1,) + (1,) * x.ndim)
    return cn * lower - cp * h[ns + 1]


def eigenfunction(model: SpectrumModel, n: int, x):
    """phi_n(x); scalar in, scalar out."""
    vals = eigenfunction_matrix(model, [n], x)[0]
    return float(vals) if np.ndim(vals) == 0 else vals


def orthonormality_defect(model: SpectrumModel, n: int, m: int, grid) -> float:
    """|trapezoid(phi_n phi_m) - delta_nm| on the given grid."""
    grid = np.asarray(grid, dtype=float)
    rows = eigenfunction_matrix(model, [n, m], grid)
    return abs(float(trapezoid(rows[0] * rows[1], grid)) - (1.0 if n == m else 0.0))
