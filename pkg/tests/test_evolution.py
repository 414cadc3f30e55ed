import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import trapezoid

from schrscale.errors import NotInExtensionFamily, UnsupportedOperation
from schrscale.evolution import (
    MultiplierKind,
    MultiplierSpec,
    apply_extension,
    evolve,
    extension_bound_check,
    synthesize,
    truncation_bound,
)
from schrscale.spectral_model import SpectrumModel, eigenfunction_matrix
from schrscale.state_space import (
    CoefficientSpec,
    Phase,
    PowerLawTail,
    apply_hamiltonian,
    normalize,
    scale_norm,
    spectral_window,
)

BOX = SpectrumModel.box()
OSC = SpectrumModel.oscillator()
R2 = 1 / math.sqrt(2)
ZERO = MultiplierSpec(MultiplierKind.ZERO)


def head(*pairs, model=BOX):
    return normalize(CoefficientSpec(tuple(pairs)), model)


def tail(s, model=BOX, **kw):
    return normalize(CoefficientSpec((), PowerLawTail(s, **kw)), model)


# -- evolve ----------------------------------------------------------------


def test_evolve_examples():
    f = head((1, 1.0))
    assert evolve(f, 0.0) is f
    assert evolve(f, math.pi).coeffs[0] == pytest.approx(-1.0, abs=1e-15)
    g = head((1, R2), (2, R2))
    assert np.max(np.abs(evolve(g, 2 * math.pi).coeffs - g.coeffs)) < 1e-14


def test_tail_phase_is_symbolic():
    f = tail(1.0, phase=Phase.ALTERNATING)
    g = evolve(evolve(f, 0.4), 0.9)
    ns, c = g.materialize(50)
    _, c0 = f.materialize(50)
    assert np.allclose(c, c0 * np.exp(-1j * ns.astype(float) ** 2 * 1.3), atol=1e-13)
    assert g.tail.amplitude == f.tail.amplitude


@given(st.floats(-20, 20), st.floats(-20, 20))
@settings(max_examples=100)
def test_unitarity_and_group_law(t1, t2):
    f = head((1, 0.3), (4, 0.5j), (9, -0.2 + 0.1j))
    assert abs(scale_norm(evolve(f, t1), 0).value - 1) < 1e-12
    a = evolve(evolve(f, t1), t2).coeffs
    b = evolve(f, t1 + t2).coeffs
    assert np.max(np.abs(a - b)) < 1e-12


# -- synthesis -------------------------------------------------------------


def test_synthesis_single_mode():
    s = synthesize(head((1, 1.0)), 0.0, np.array([math.pi / 2]), 1)
    assert s.values[0] == pytest.approx(math.sqrt(2 / math.pi), abs=1e-15)
    assert s.l2_error_bound == 0.0


def test_dst_path_matches_direct_sum():
    f = tail(1.0, phase=Phase.ALTERNATING)
    grid = np.linspace(0, math.pi, 513)
    fast = synthesize(f, 0.3, grid, 200).values
    ns, cs = evolve(f, 0.3).materialize(200)
    slow = cs @ eigenfunction_matrix(BOX, ns, grid)
    assert np.max(np.abs(fast - slow)) < 1e-12


def test_synthesis_normalization_transport():
    f = tail(2.0)
    grid = np.linspace(0, math.pi, 8193)
    s = synthesize(f, 0.7, grid, 2000)
    mass = trapezoid(s.density, grid)
    assert abs(mass - 1) < 2 * s.l2_error_bound + 1e-6


def test_oscillator_synthesis_normalization():
    f = head((0, 1.0), (3, 1j), model=OSC)
    grid = np.linspace(-10, 10, 4001)
    s = synthesize(f, 1.1, grid, 3)
    assert trapezoid(s.density, grid) == pytest.approx(1.0, abs=1e-10)


def test_truncation_difference_is_bounded():
    f = tail(1.0)
    x = np.array([1.0])
    a = synthesize(f, 0.0, x, 10_000).values[0]
    b = synthesize(f, 0.0, x, 20_000).values[0]
    A = f.tail.amplitude
    # l1 bound on modes 10001..20000
    l1 = A * math.sqrt(2 / math.pi) * math.fsum(1.0 / np.arange(10_001, 20_001))
    assert abs(a - b) <= l1
    assert truncation_bound(f, 10_000) == pytest.approx(A / math.sqrt(10_000), rel=1e-3)


def test_synthesis_errors(tmp_path):
    table = SpectrumModel.from_table([(1, 1.0), (2, 3.0)])
    with pytest.raises(UnsupportedOperation):
        synthesize(normalize(CoefficientSpec(((1, 1.0),)), table), 0.0, [0.0], 2)
    with pytest.raises(ValueError):
        synthesize(head((5, 1.0)), 0.0, [1.0], 3)


def test_samples_csv(tmp_path):
    s = synthesize(head((1, 1.0), (2, 1j)), 0.2, np.linspace(0, math.pi, 5), 2)
    path = tmp_path / "s.csv"
    s.to_csv(path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["x", "re", "im", "density"]
    back = np.array(rows[1:], dtype=float)
    assert np.array_equal(back[:, 1] + 1j * back[:, 2], s.values)


# -- extension operator ------------------------------------------------------


def test_zero_multiplier_gives_exact_zero():
    for f in (head((1, 1.0), (7, 2j)), tail(1.0), tail(0.7, OSC, phase=Phase.ALTERNATING)):
        for t in (0.0, 0.37, -12.5):
            res = apply_extension(f, ZERO, t)
            assert res.is_exactly_zero()
    assert extension_bound_check(tail(1.0), ZERO, 1.0) == (0.0, 0.0)


def test_clamp_single_mode():
    res = apply_extension(head((3, 1.0)), MultiplierSpec(MultiplierKind.CLAMP, cap=2.0), 0.0)
    assert res.coeffs.tolist() == [7.0]


def test_bound_check_examples():
    lhs, rhs = extension_bound_check(head((1, 1.0)), MultiplierSpec(MultiplierKind.SINE, alpha=1.0), 0.3)
    assert lhs == pytest.approx(math.sin(1.0) ** 2, rel=1e-14)
    assert rhs == pytest.approx(1.0, rel=1e-14)
    f = head((1, R2), (3, R2))
    lhs, rhs = extension_bound_check(f, MultiplierSpec(MultiplierKind.CLAMP, cap=2.0), 0.0)
    assert lhs == pytest.approx(24.5, rel=1e-14)
    assert rhs == pytest.approx(49.0, rel=1e-14)


def test_sine_norm_bracket_on_tail():
    u = MultiplierSpec(MultiplierKind.SINE, alpha=1.0)
    f = tail(1.0)
    res = apply_extension(f, u, 0.5, tol=1e-6)
    n = np.arange(1, 400_001, dtype=float)
    partial = math.fsum(f.tail.amplitude**2 * n**-2.0 * np.sin(n * n) ** 2)
    rest = f.tail.amplitude**2 / n[-1]  # bound on the terms past n[-1]
    assert partial <= res.norm_sq.hi
    assert res.norm_sq.lo <= partial + rest
    assert res.norm_sq.hi <= 1.0


def test_clamp_rejects_tails():
    with pytest.raises(NotInExtensionFamily):
        apply_extension(tail(2.0), MultiplierSpec(MultiplierKind.CLAMP, cap=5.0), 0.0)


def test_table_multiplier():
    u = MultiplierSpec(MultiplierKind.TABLE, table=((0.0, 5.0, 3.0),))
    res = apply_extension(head((1, R2), (4, R2)), u, 0.0)
    # E=1 is in (0, 5]: 1 - 3 = -2; E=16 lies outside, u = lambda
    assert np.allclose(res.coeffs, [-2 * R2, 0.0])
    # sup of |lambda - 3|^2 over (0, 5]
    assert u.bound(head((1, 1.0))) == pytest.approx(9.0)


@given(
    st.integers(0, 2**32 - 1),
    st.floats(-10, 10),
    st.sampled_from(["sine", "clamp"]),
)
@settings(max_examples=100, deadline=None)
def test_uniform_bound_randomized(seed, t, kind):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 6))
    modes = np.sort(rng.choice(np.arange(1, 40), k, replace=False))
    pairs = tuple((int(n), complex(*rng.normal(size=2))) for n in modes)
    if kind == "sine":
        u = MultiplierSpec(MultiplierKind.SINE, alpha=float(rng.uniform(0.1, 4)))
        spec = CoefficientSpec(pairs, PowerLawTail(float(rng.uniform(0.6, 3)), start=40))
    else:
        u = MultiplierSpec(MultiplierKind.CLAMP, cap=float(rng.uniform(1, 100)))
        spec = CoefficientSpec(pairs)
    f = normalize(spec, BOX)
    lhs, rhs = extension_bound_check(f, u, t)
    assert lhs <= rhs + 1e-12


@pytest.mark.parametrize("s", [1.0, 2.0])
def test_windowed_state_solves_literal_equation(s):
    # H f_w(t) - i (f_w(t+h) - f_w(t-h)) / 2h = O(h^2) for a windowed state
    f_w = spectral_window(tail(s, phase=Phase.ALTERNATING), 0, 100)
    t = 0.4
    errs = []
    for h in (1e-3, 5e-4, 2.5e-4):
        hf = apply_hamiltonian(evolve(f_w, t)).coeffs
        fd = 1j * (evolve(f_w, t + h).coeffs - evolve(f_w, t - h).coeffs) / (2 * h)
        errs.append(np.linalg.norm(hf - fd))
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.02)
    assert errs[1] / errs[2] == pytest.approx(4, rel=0.02)
    assert apply_extension(f_w, ZERO, t).is_exactly_zero()
