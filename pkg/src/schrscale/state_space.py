"""States as coefficient sequences over an eigenbasis, and the Hilbert scale.

A state is a finite *head* of explicit amplitudes plus an optional
power-law *tail*  c_n = A n^-s phase(n) exp(-i E_n t)  for n >= n0.  Tails
make membership questions exact: with E_n ~ a n^gamma the series
sum E_n^k |c_n|^2 converges iff gamma*k - 2s < -1, so the scale index of a
tail state is decided by the p-series test rather than by truncation.

All norm-type results are brackets [lo, hi] on the *squared* quantity,
e.g. ``scale_norm(f, k)`` bounds ||f||_k^2 = sum E_n^k |c_n|^2.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import BadWindow, DomainRequired, EmptyState, NotNormalizable, UnsupportedOperation
from .series import EPS, Envelope, binomial_energy_powers, certified_sum, polynomial_powers
from .spectral_model import ModelKind, SpectrumModel, energies

DEFAULT_TOL = 1e-10
SCALE_LEVELS = (-2, -1, 0, 1, 2)
MAX_WINDOW_MODES = 1 << 24

__all__ = [
    "Phase",
    "PowerLawTail",
    "CoefficientSpec",
    "StateVector",
    "NormResult",
    "normalize",
    "scale_norm",
    "classify",
    "in_domain",
    "has_finite_mean_energy",
    "mean_energy",
    "inverse_energy_mean",
    "spectral_window",
    "renormalize",
    "apply_hamiltonian",
    "parse_state_spec",
    "format_state_spec",
]


class Phase(str, Enum):
    ZERO = "zero"
    ALTERNATING = "alternating"


@dataclass(frozen=True)
class PowerLawTail:
    exponent: float
    start: int = 1
    amplitude: float = 1.0
    phase: Phase = Phase.ZERO
    time: float = 0.0

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("tail amplitude must be nonnegative")
        if self.start < 1:
            raise ValueError("power-law tails start at n0 >= 1")
        object.__setattr__(self, "phase", Phase(self.phase))

    def magnitudes_sq(self, ns: np.ndarray) -> np.ndarray:
        return self.amplitude**2 * ns.astype(float) ** (-2.0 * self.exponent)

    def coefficients(self, model: SpectrumModel, ns: np.ndarray) -> np.ndarray:
        ns = np.asarray(ns, dtype=np.int64)
        c = self.amplitude * ns.astype(float) ** -self.exponent
        if self.phase is Phase.ALTERNATING:
            c = np.where(ns % 2 == 0, c, -c)
        c = c.astype(complex)
        if self.time != 0.0:
            c = c * np.exp(-1j * energies(model, ns) * self.time)
        return c


@dataclass(frozen=True)
class CoefficientSpec:
    head: tuple[tuple[int, complex], ...] = ()
    tail: PowerLawTail | None = None

    def __post_init__(self):
        head = tuple((int(n), complex(c)) for n, c in self.head)
        ns = [n for n, _ in head]
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValueError("head indices must be strictly increasing")
        if self.tail is not None and ns and ns[-1] >= self.tail.start:
            raise ValueError("head indices overlap the tail range")
        object.__setattr__(self, "head", head)


@dataclass(frozen=True)
class NormResult:
    finite: bool
    lo: float = math.nan
    hi: float = math.nan
    witness: float | None = None
    cutoff: int = 0
    label: str = ""

    @property
    def value(self) -> float:
        return 0.5 * (self.lo + self.hi) if self.finite else math.inf

    def sqrt(self) -> "NormResult":
        if not self.finite:
            return self
        return replace(self, lo=math.sqrt(max(self.lo, 0.0)), hi=math.sqrt(self.hi))

    def to_dict(self) -> dict:
        if self.finite:
            d = {"finite": True, "lo": self.lo, "hi": self.hi}
        else:
            d = {"finite": False, "witness_exponent": self.witness}
        if self.label:
            d["label"] = self.label
        return d


@dataclass(frozen=True, eq=False)
class StateVector:
    """Immutable state: head modes/coefficients, optional tail, norm bracket."""

    model: SpectrumModel
    modes: np.ndarray
    coeffs: np.ndarray
    tail: PowerLawTail | None = None
    norm_sq: tuple[float, float] = field(default=(math.nan, math.nan))

    def __post_init__(self):
        self.modes.setflags(write=False)
        self.coeffs.setflags(write=False)

    @property
    def spec(self) -> CoefficientSpec:
        return CoefficientSpec(tuple(zip(self.modes.tolist(), self.coeffs.tolist())), self.tail)

    @property
    def finite_support(self) -> bool:
        return self.tail is None or self.tail.amplitude == 0.0

    @property
    def norm(self) -> float:
        return math.sqrt(0.5 * (self.norm_sq[0] + self.norm_sq[1]))

    @property
    def max_mode(self) -> int:
        return int(self.modes[-1]) if self.modes.size else -1

    def head_energies(self) -> np.ndarray:
        return energies(self.model, self.modes) if self.modes.size else np.zeros(0)

    def coefficient(self, n: int) -> complex:
        hit = np.nonzero(self.modes == n)[0]
        if hit.size:
            return complex(self.coeffs[hit[0]])
        if not self.finite_support and n >= self.tail.start:
            return complex(self.tail.coefficients(self.model, np.array([n]))[0])
        return 0j

    def materialize(self, n_max: int) -> tuple[np.ndarray, np.ndarray]:
        """All (n, c_n) with n <= n_max, tail included."""
        ns, cs = self.modes[self.modes <= n_max], self.coeffs[self.modes <= n_max]
        if not self.finite_support and n_max >= self.tail.start:
            tn = np.arange(self.tail.start, n_max + 1, dtype=np.int64)
            ns = np.concatenate([ns, tn])
            cs = np.concatenate([cs, self.tail.coefficients(self.model, tn)])
        return ns, cs

    def with_coefficients(self, coeffs, tail=None, norm_sq=None) -> "StateVector":
        return StateVector(
            self.model,
            self.modes.copy(),
            np.asarray(coeffs, dtype=complex),
            tail if tail is not None else self.tail,
            self.norm_sq if norm_sq is None else norm_sq,
        )


def _head_sum(values: np.ndarray) -> tuple[float, float]:
    s = math.fsum(values) if values.size else 0.0
    slack = 8 * EPS * s
    return s - slack, s + slack


def _finite_state(model: SpectrumModel, modes, coeffs) -> StateVector:
    modes = np.array(modes, dtype=np.int64)
    coeffs = np.array(coeffs, dtype=complex)
    return StateVector(model, modes, coeffs, None, _head_sum(np.abs(coeffs) ** 2))


def _tail_envelope(model: SpectrumModel, tail: PowerLawTail, k: int) -> Envelope:
    """Envelope for |c_n|^2 E_n^k on the tail."""
    a, gamma, b = model.power_law()
    A2, s2 = tail.amplitude**2, 2.0 * tail.exponent
    if k >= 0:
        terms = polynomial_powers([A2 * c for c in binomial_energy_powers(a, b, k)], gamma, -s2)
        return Envelope(terms, terms)
    m = -k
    scale, y = A2 * a**-m, b / a
    base = -m * gamma - s2
    lower = ((scale, base), (-scale * m * y, base - gamma))
    upper = lower + ((scale * m * (m + 1) / 2 * y * y, base - 2 * gamma),)
    return Envelope(lower, upper)


def _check_tail_model(model: SpectrumModel, tail: PowerLawTail | None) -> None:
    if tail is not None and model.kind is ModelKind.TABLE:
        raise UnsupportedOperation("power-law tails need an infinite spectrum")


def normalize(spec: CoefficientSpec, model: SpectrumModel, tol: float = DEFAULT_TOL) -> StateVector:
    """Rescale ``spec`` to unit norm with a certified bracket on sum |c_n|^2."""
    tail = spec.tail
    _check_tail_model(model, tail)
    modes = np.array([n for n, _ in spec.head], dtype=np.int64)
    coeffs = np.array([c for _, c in spec.head], dtype=complex)
    if modes.size:
        energies(model, modes)  # validates indices
    if tail is not None and tail.amplitude > 0 and tail.exponent <= 0.5:
        raise NotNormalizable(f"sum n^(-{2 * tail.exponent:g}) diverges (s <= 1/2)")
    head_sq = np.abs(coeffs) ** 2
    has_tail = tail is not None and tail.amplitude > 0
    if not has_tail and not np.any(head_sq > 0):
        raise EmptyState("state has no nonzero amplitude")
    if has_tail:
        floor = math.fsum(head_sq) + tail.amplitude**2 * tail.start ** (-2.0 * tail.exponent)
        res = certified_sum(
            tail.magnitudes_sq,
            tail.start,
            _tail_envelope(model, tail, 0),
            tol * floor,
            offset=math.fsum(head_sq),
        )
        lo, hi = res.lo, res.hi
    else:
        lo, hi = _head_sum(head_sq)
    mid = 0.5 * (lo + hi)
    scale = 1.0 / math.sqrt(mid)
    new_tail = replace(tail, amplitude=tail.amplitude * scale) if tail is not None else None
    return StateVector(model, modes, coeffs * scale, new_tail, (lo / mid, hi / mid))


def renormalize(f: StateVector, tol: float = DEFAULT_TOL) -> StateVector:
    return normalize(f.spec, f.model, tol)


def _check_level(k: int) -> None:
    if k not in SCALE_LEVELS:
        raise ValueError(f"scale index must be one of {SCALE_LEVELS}, got {k}")


def _diverges(f: StateVector, k: int) -> Envelope | None:
    if f.finite_support:
        return None
    env = _tail_envelope(f.model, f.tail, k)
    return env if env.diverges() else None


def scale_norm(f: StateVector, k: int, tol: float = DEFAULT_TOL) -> NormResult:
    """Bracket on ||f||_k^2 = sum E_n^k |c_n|^2, or a divergence certificate."""
    _check_level(k)
    head = np.abs(f.coeffs) ** 2 * f.head_energies() ** k if f.modes.size else np.zeros(0)
    if f.finite_support:
        lo, hi = _head_sum(head)
        return NormResult(True, lo, hi)
    env = _tail_envelope(f.model, f.tail, k)
    if env.diverges():
        return NormResult(False, witness=env.witness())
    tail, model = f.tail, f.model

    def terms(ns):
        return tail.magnitudes_sq(ns) * energies(model, ns) ** k

    res = certified_sum(terms, tail.start, env, tol, offset=math.fsum(head) if head.size else 0.0)
    return NormResult(True, res.lo, res.hi, cutoff=res.cutoff)


def classify(f: StateVector) -> int:
    """Largest k in {2, 1, 0} with f in H_k."""
    for k in (2, 1):
        if _diverges(f, k) is None:
            return k
    return 0


def in_domain(f: StateVector) -> bool:
    """Condition (a): f in D(H) = H_2."""
    return classify(f) == 2


def has_finite_mean_energy(f: StateVector) -> bool:
    return classify(f) >= 1


def mean_energy(f: StateVector, tol: float = DEFAULT_TOL) -> NormResult:
    """(f, H f) on D(H); on H_1 outside D(H) the value is ||H^{1/2} f||^2."""
    res = scale_norm(f, 1, tol)
    if res.finite and not in_domain(f):
        return replace(res, label="generalized (H^1/2) mean")
    return res


def inverse_energy_mean(f: StateVector, tol: float = DEFAULT_TOL) -> NormResult:
    """(f, H^-1 f); finite for every f since E_n >= 1."""
    return scale_norm(f, -1, tol)


def _mode_range(model: SpectrumModel, lo_e: float, hi_e: float, n_min: int) -> np.ndarray:
    """Modes n >= n_min with lo_e < E_n <= hi_e on an infinite spectrum."""
    a, gamma, b = model.power_law()

    def inv(e):
        return ((e - b) / a) ** (1.0 / gamma) if e > b else 0.0

    first = max(n_min, int(math.floor(inv(lo_e))) - 2) if math.isfinite(lo_e) else n_min
    last = int(math.floor(inv(hi_e))) + 2
    if last - first > MAX_WINDOW_MODES:
        raise BadWindow(f"window would keep more than {MAX_WINDOW_MODES} modes")
    if last < first:
        return np.zeros(0, dtype=np.int64)
    ns = np.arange(first, last + 1, dtype=np.int64)
    e = energies(model, ns)
    return ns[(e > lo_e) & (e <= hi_e)]


def spectral_window(f: StateVector, a: float, b: float) -> StateVector:
    """The projection [E_b - E_a] f: keep modes with a < E_n <= b.

    The result has finite support (so it lies in D(H)) and is *not*
    renormalized; its ``norm`` is available for callers that want to.
    """
    if not a < b:
        raise BadWindow(f"need a < b, got ({a}, {b}]")
    keep = np.zeros(0, dtype=bool)
    if f.modes.size:
        e = f.head_energies()
        keep = (e > a) & (e <= b)
    modes, coeffs = f.modes[keep], f.coeffs[keep]
    if not f.finite_support:
        if not math.isfinite(b):
            raise BadWindow("an unbounded window of a tail state has infinite support")
        tn = _mode_range(f.model, a, b, f.tail.start)
        modes = np.concatenate([modes, tn])
        coeffs = np.concatenate([coeffs, f.tail.coefficients(f.model, tn)])
    return _finite_state(f.model, modes, coeffs)


def apply_hamiltonian(f: StateVector) -> StateVector:
    """H f for a finite-support f (unnormalized)."""
    if not f.finite_support:
        raise DomainRequired("H is only applied to finite-support states")
    return _finite_state(f.model, f.modes, f.coeffs * f.head_energies())


# -- state specification strings ------------------------------------------

_PAREN_SPLIT = re.compile(r"\+(?![^()]*\))")


def parse_state_spec(text: str) -> CoefficientSpec:
    """Parse e.g. ``"modes:1=0.7,2=0.7+powerlaw:s=2,n0=3,phase=zero"``.

    Complex amplitudes go in parentheses: ``modes:1=(0.5+0.5j)``.
    """
    head: list[tuple[int, complex]] = []
    tail = None
    for part in _PAREN_SPLIT.split(text.strip()):
        kind, _, body = part.strip().partition(":")
        kind = kind.strip().lower()
        items = [p.strip() for p in re.split(r",(?![^()]*\))", body) if p.strip()]
        if kind == "modes":
            for item in items:
                n, _, c = item.partition("=")
                head.append((int(n), complex(c.strip().strip("()").replace(" ", ""))))
        elif kind == "powerlaw":
            if tail is not None:
                raise ValueError("at most one powerlaw tail")
            kv = dict(i.split("=", 1) for i in items)
            unknown = set(kv) - {"s", "n0", "phase", "A"}
            if unknown or "s" not in kv:
                raise ValueError(f"powerlaw needs s=..., got keys {sorted(kv)}")
            tail = PowerLawTail(
                float(kv["s"]),
                int(kv.get("n0", 1)),
                float(kv.get("A", 1.0)),
                Phase(kv.get("phase", "zero").lower()),
            )
        else:
            raise ValueError(f"unknown state component {kind!r}")
    head.sort()
    return CoefficientSpec(tuple(head), tail)


def format_state_spec(spec: CoefficientSpec) -> str:
    parts = []
    if spec.head:
        body = ",".join(
            f"{n}={c.real!r}" if c.imag == 0 else f"{n}=({c!r})".replace("((", "(").replace("))", ")")
            for n, c in spec.head
        )
        parts.append(f"modes:{body}")
    if spec.tail is not None:
        t = spec.tail
        parts.append(f"powerlaw:s={t.exponent!r},n0={t.start},phase={t.phase.value},A={t.amplitude!r}")
    return "+".join(parts)
