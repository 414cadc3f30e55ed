"""Certified two-sided bounds for positive series with power-law tails.

A summand is handled as an explicit partial sum up to a cutoff N plus a
bracket on the remainder.  The remainder is bounded through an *envelope*:
two finite combinations  sum_j w_j n**e_j  known to sit below and above the
summand for n > N.  Each pure power is bracketed by the convex form of the
integral test,

    int_{N+1}^inf x^-p dx + (N+1)^-p / 2  <=  sum_{n>N} n^-p  <=  int_{N+1/2}^inf x^-p dx,

which is contained in the plain integral-test bracket [int_{N+1}, int_N]
and is one order of N tighter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ToleranceError

EPS = float(np.finfo(float).eps)
N_CAP = 1 << 23
_BLOCK = 1 << 16

Terms = tuple[tuple[float, float], ...]  # (weight, exponent of n)


def pseries_tail(p: float, N: int) -> tuple[float, float]:
    """Bracket on sum_{n > N} n**-p for p > 1, N >= 0."""
    if not p > 1.0:
        raise ValueError(f"p-series with p={p} diverges")
    q = p - 1.0
    lo = (N + 1.0) ** -q / q + 0.5 * (N + 1.0) ** -p
    hi = (N + 0.5) ** -q / q
    return lo, hi


def integral_test_tail(p: float, N: int) -> tuple[float, float]:
    """The plain integral-test bracket [int_{N+1}, int_N] (N >= 1)."""
    q = p - 1.0
    return (N + 1.0) ** -q / q, float(N) ** -q / q


def leading(terms: Terms) -> tuple[float, float]:
    """(weight, exponent) of the dominant nonzero term."""
    live = [(w, e) for w, e in terms if w != 0.0]
    if not live:
        return 0.0, -math.inf
    e = max(e for _, e in live)
    return sum(w for w, ee in live if ee == e), e


def combine(terms: Terms, N: int, side: str) -> float:
    """Lower (side='lo') or upper (side='hi') bound on sum_{n>N} sum_j w_j n**e_j."""
    total = 0.0
    for w, e in terms:
        if w == 0.0:
            continue
        lo, hi = pseries_tail(-e, N)
        pick_lo = (w > 0) == (side == "lo")
        total += w * (lo if pick_lo else hi)
    return total


@dataclass(frozen=True)
class Envelope:
    """Power-combination bounds on a positive summand, valid for n > valid_after."""

    lower: Terms
    upper: Terms
    valid_after: int = 0

    def diverges(self) -> bool:
        w, e = leading(self.lower)
        return w > 0 and e >= -1.0

    def converges(self) -> bool:
        return all(e < -1.0 for w, e in self.upper if w != 0.0)

    def witness(self) -> float:
        """Exponent of the dominant term: the p-series that fails (or passes)."""
        return leading(self.lower)[1]

    def bracket(self, N: int) -> tuple[float, float]:
        lo = max(combine(self.lower, N, "lo"), 0.0)
        hi = combine(self.upper, N, "hi")
        return lo, hi


def polynomial_powers(coeffs: Sequence[float], gamma: float, base_exp: float) -> Terms:
    """sum_i coeffs[i] * n**(gamma*i + base_exp) as a term list."""
    return tuple((float(c), gamma * i + base_exp) for i, c in enumerate(coeffs) if c != 0.0)


def binomial_energy_powers(a: float, b: float, k: int) -> list[float]:
    """Coefficients of (a x + b)**k in ascending powers of x, k >= 0."""
    return [math.comb(k, j) * a**j * b ** (k - j) for j in range(k + 1)]


@dataclass(frozen=True)
class CertifiedSum:
    lo: float
    hi: float
    cutoff: int

    @property
    def width(self) -> float:
        return self.hi - self.lo


def certified_sum(
    term_fn: Callable[[np.ndarray], np.ndarray],
    start: int,
    envelope: Envelope,
    tol: float,
    offset: float = 0.0,
    transform: Callable[[float], float] | None = None,
    min_cutoff: int = 0,
) -> CertifiedSum:
    """Bracket ``offset + sum_{n >= start} term_fn(n)``.

    The cutoff doubles until the bracket, after ``transform`` (monotone), is
    narrower than ``tol``.  ``term_fn`` must return nonnegative floats.
    Rounding is covered by a slack of 16 ulp on the accumulated magnitude.
    """
    if not envelope.converges():
        raise ValueError("envelope does not certify convergence")
    f = transform or (lambda v: v)
    # tol=inf: a single pass at the minimal cutoff
    N =max(start - 1, envelope.valid_after, min_cutoff, 1024)
    partial_blocks: list[float] = []
    done = start - 1
    while True:
        while done < N:
            stop = min(N, done + _BLOCK)
            ns = np.arange(done + 1, stop + 1, dtype=np.int64)
            partial_blocks.append(math.fsum(term_fn(ns)))
            done = stop
        S = math.fsum(partial_blocks)
        tlo, thi = envelope.bracket(N)
        slack = 16 * EPS * (abs(offset) + S + thi)
        lo = offset + S + tlo - slack
        hi = offset + S + thi + slack
        if f(hi) - f(max(lo, 0.0)) <= tol:
            return CertifiedSum(max(lo, 0.0), hi, N)
        if N >= N_CAP:
            raise ToleranceError(
                f"bracket width {f(hi) - f(max(lo, 0.0)):.3g} > tol={tol:g} at cutoff {N}"
            )
        N = min(2 * N, N_CAP)
