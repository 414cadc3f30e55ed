import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy.special import zeta

from schrscale.errors import BadWindow, DomainRequired, EmptyState, NotNormalizable
from schrscale.spectral_model import SpectrumModel
from schrscale.state_space import (
    CoefficientSpec,
    Phase,
    PowerLawTail,
    apply_hamiltonian,
    classify,
    format_state_spec,
    has_finite_mean_energy,
    in_domain,
    inverse_energy_mean,
    mean_energy,
    normalize,
    parse_state_spec,
    scale_norm,
    spectral_window,
)

BOX = SpectrumModel.box()
OSC = SpectrumModel.oscillator()
R2 = 1 / math.sqrt(2)


def tail(s, model=BOX, **kw):
    return normalize(CoefficientSpec((), PowerLawTail(s, **kw)), model)


def head(*pairs, model=BOX):
    return normalize(CoefficientSpec(tuple(pairs)), model)


heads = st.lists(
    st.tuples(st.integers(1, 40), st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)),
    min_size=1,
    max_size=8,
    unique_by=lambda p: p[0],
).map(lambda ps: tuple(sorted(ps)))


# -- normalize -----------------------------------------------------------


def test_normalize_tail_amplitude():
    f = tail(1.0)
    assert f.tail.amplitude == pytest.approx(math.sqrt(6) / math.pi, rel=1e-10)
    lo, hi = f.norm_sq
    assert lo <= 1.0 <= hi and hi - lo <= 1e-10


def test_normalize_head():
    f = head((1, 1.0), (2, 1.0))
    assert np.allclose(f.coeffs, [R2, R2])


def test_normalize_errors():
    with pytest.raises(NotNormalizable):
        tail(0.5)
    with pytest.raises(EmptyState):
        head((1, 0.0))
    with pytest.raises(ValueError):
        CoefficientSpec(((2, 1.0), (1, 1.0)))
    with pytest.raises(ValueError):
        CoefficientSpec(((5, 1.0),), PowerLawTail(2.0, start=3))


def test_state_arrays_are_immutable():
    f = head((1, 1.0), (2, 1.0))
    with pytest.raises(ValueError):
        f.coeffs[0] = 0


# -- norms ---------------------------------------------------------------


def test_scale_norm_examples():
    r = scale_norm(head((1, 1.0)), 2)
    assert r.finite and r.lo <= 1.0 <= r.hi
    f = tail(2.0)
    r = scale_norm(f, 1)
    assert r.finite and r.lo <= f.tail.amplitude**2 * zeta(2) <= r.hi
    assert r.value == pytest.approx(15 / math.pi**2, rel=1e-10)
    assert r.hi - r.lo <= 1e-10
    r = scale_norm(tail(2.0), 2)
    assert not r.finite and r.witness == 0.0


def test_mean_energy_examples():
    r = mean_energy(head((1, R2), (2, R2)))
    assert r.value == pytest.approx(2.5, abs=1e-14)
    assert mean_energy(head((1, 1.0))).value == pytest.approx(1.0, abs=1e-15)
    assert not mean_energy(tail(1.0)).finite
    assert mean_energy(tail(2.0)).label == "generalized (H^1/2) mean"
    assert mean_energy(tail(3.0)).label == ""


def test_inverse_energy_mean_examples():
    assert inverse_energy_mean(head((1, 1.0))).value == pytest.approx(1.0, abs=1e-15)
    assert inverse_energy_mean(head((1, R2), (2, R2))).value == pytest.approx(0.625, abs=1e-15)
    f = tail(1.0)
    r = inverse_energy_mean(f)
    # exact for the stored amplitude; pi^2/15 only up to the normalization tolerance
    assert r.lo <= f.tail.amplitude**2 * zeta(4) <= r.hi
    assert r.value == pytest.approx(math.pi**2 / 15, rel=1e-10)


@pytest.mark.parametrize("k", [-2, -1, 0, 1, 2])
def test_tail_norms_with_offset_spectrum_match_oracle(k):
    # shifted box: E_n = n^2 + 2 exercises the binomial/Bernoulli envelopes
    model = SpectrumModel.box(shift=2.0)
    f = normalize(CoefficientSpec(((1, 0.3),), PowerLawTail(3.5, start=2)), model)
    n = np.arange(2, 2_000_001, dtype=float)
    partial = abs(f.coeffs[0]) ** 2 * 3.0**k + math.fsum(f.tail.amplitude**2 * n ** (-7.0) * (n * n + 2) ** k)
    r = scale_norm(f, k)
    # the remainder beyond 2e6 is below 1e-18 for every k here
    assert r.lo - 1e-15 <= partial <= r.hi + 1e-15


def test_oscillator_tail():
    f = tail(1.5, OSC)
    assert classify(f) == 1  # sum n^(k-3) converges for k < 2
    r = scale_norm(f, 1)
    assert r.finite


def test_classify_examples():
    assert [classify(tail(s)) for s in (1, 2, 3, 2.6)] == [0, 1, 2, 2]
    assert in_domain(tail(3.0)) and not in_domain(tail(2.0))
    assert has_finite_mean_energy(tail(2.0)) and not has_finite_mean_energy(tail(1.0))


@given(st.floats(0.55, 6.0))
def test_threshold_s_greater_than_k_plus_half(s):
    assume(all(abs(s - (k + 0.5)) > 1e-9 for k in (0, 1, 2)))
    f = tail(s)
    for k in (0, 1, 2):
        assert scale_norm(f, k, tol=1e-6).finite == (s > k + 0.5)


@pytest.mark.parametrize("s,k", [(1.0, 1), (2.0, 2), (1.5, 2)])
def test_divergent_partial_sums_keep_growing(s, k):
    # sum n^(2k - 2s) with 2k - 2s >= -1: doubling N adds a fixed amount or more
    def partial(N):
        n = np.arange(1, N + 1, dtype=float)
        return math.fsum(n ** (2 * k - 2 * s))

    gains = [partial(2 * N) - partial(N) for N in (1000, 10000, 100000)]
    assert min(gains) > 0.6
    assert not scale_norm(tail(s), k).finite


@given(heads)
@settings(max_examples=200)
def test_norm_chain_property(pairs):
    assume(sum(abs(c) ** 2 for _, c in pairs) > 1e-6)
    f = normalize(CoefficientSpec(pairs), BOX)
    r = [scale_norm(f, k) for k in (2, 1, 0, -1, -2)]
    assert all(a.hi >= b.lo for a, b in zip(r, r[1:]))


@given(st.floats(0.6, 5.0), st.sampled_from(["zero", "alternating"]))
@settings(max_examples=30, deadline=None)
def test_monotone_membership(s, phase):
    f = tail(s, phase=Phase(phase))
    k_star = classify(f)
    for k in range(-2, k_star + 1):
        assert scale_norm(f, k, tol=1e-6).finite


@given(heads)
@settings(max_examples=200)
def test_mean_energy_identity(pairs):
    assume(sum(abs(c) ** 2 for _, c in pairs) > 1e-6)
    f = normalize(CoefficientSpec(pairs), BOX)
    lhs = inverse_energy_mean(apply_hamiltonian(f)).value
    assert abs(lhs - mean_energy(f).value) < 1e-12 * max(1.0, mean_energy(f).value)


def test_apply_hamiltonian_needs_finite_support():
    with pytest.raises(DomainRequired):
        apply_hamiltonian(tail(3.0))


# -- windows -------------------------------------------------------------


def test_window_examples():
    w = spectral_window(tail(1.0), 0, 9.5)
    assert w.modes.tolist() == [1, 2, 3]
    empty = spectral_window(tail(1.0), 0, 0.5)
    assert empty.modes.size == 0 and empty.norm == 0.0
    with pytest.raises(BadWindow):
        spectral_window(tail(1.0), 2, 2)


def test_window_remainder_matches_tail_bound():
    f = tail(1.0)
    N = 100
    w = spectral_window(f, 0, N * N)
    rest = 1.0 - w.norm**2
    A2 = f.tail.amplitude**2
    assert A2 / (N + 1) <= rest <= A2 / N
    assert rest == pytest.approx(A2 * zeta(2, N + 1), rel=1e-9)


@given(st.floats(0.6, 4.0), st.floats(0.0, 500.0), st.floats(1.0, 5000.0))
@settings(max_examples=50, deadline=None)
def test_windows_land_in_domain(s, a, width):
    w = spectral_window(tail(s), a, a + width)
    assert scale_norm(w, 2).finite
    assert in_domain(w)


def test_window_limit_recovers_state():
    f = tail(1.0, phase=Phase.ALTERNATING)
    gaps = [1.0 - spectral_window(f, -1, b).norm ** 2 for b in (1e2, 1e4, 1e6)]
    assert gaps[0] > gaps[1] > gaps[2] > 0


# -- spec strings --------------------------------------------------------


def test_parse_and_format_roundtrip():
    text = "modes:1=0.7,3=(0.5-0.25j)+powerlaw:s=2.5,n0=4,phase=alternating,A=2"
    spec = parse_state_spec(text)
    assert spec.head == ((1, 0.7 + 0j), (3, 0.5 - 0.25j))
    assert spec.tail == PowerLawTail(2.5, 4, 2.0, Phase.ALTERNATING)
    assert parse_state_spec(format_state_spec(spec)) == spec


@pytest.mark.parametrize("bad", ["wave:1=1", "powerlaw:n0=2", "modes:1=1+powerlaw:s=2+powerlaw:s=3"])
def test_parse_rejects(bad):
    with pytest.raises(ValueError):
        parse_state_spec(bad)
