import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rasql.regularizers import (KL, Entropy, Unregularized, grad_omega_conjugate,
                                make_regularizer, omega, omega_conjugate)

E = math.e


# --- closed-form examples --------------------------------------------------

def test_entropy_point_mass_is_zero():
    assert omega(Entropy(1.0), [1.0, 0.0]) == 0.0


def test_entropy_uniform_beta_two():
    assert omega(Entropy(2.0), [0.5, 0.5]) == pytest.approx(-math.log(2) / 2, abs=1e-15)
    assert -math.log(2) / 2 == pytest.approx(-0.34657, abs=1e-5)


def test_kl_at_reference_is_zero():
    reg = KL(3.0, (0.3, 0.7))
    assert omega(reg, [0.3, 0.7]) == pytest.approx(0.0, abs=1e-15)


def test_conjugate_examples():
    assert omega_conjugate(Entropy(1.0), [0.0, 0.0]) == pytest.approx(math.log(2), abs=1e-15)
    assert omega_conjugate(Entropy(1.0), [1.0, 0.0]) == pytest.approx(math.log(E + 1), abs=1e-15)
    assert math.log(E + 1) == pytest.approx(1.31326, abs=1e-5)
    assert omega_conjugate(KL(1.0, (0.5, 0.5)), [0.0, 0.0]) == pytest.approx(0.0, abs=1e-15)


def test_gradient_examples():
    assert np.allclose(grad_omega_conjugate(Entropy(1.0), [0.0, 0.0]), [0.5, 0.5], atol=1e-15)
    g = grad_omega_conjugate(Entropy(1.0), [1.0, 0.0])
    assert np.allclose(g, [E / (E + 1), 1 / (E + 1)], atol=1e-15)
    assert np.allclose(g, [0.73106, 0.26894], atol=1e-5)
    for c in (-7.0, 0.0, 3.5):
        assert np.allclose(grad_omega_conjugate(KL(2.0, (0.9, 0.1)), [c, c]), [0.9, 0.1],
                           atol=1e-15)


def test_conjugate_is_stable_for_large_inputs():
    q = np.array([1e4, -1e4, 0.0])
    assert omega_conjugate(Entropy(1.0), q) == pytest.approx(1e4)
    assert np.isfinite(grad_omega_conjugate(Entropy(1.0), q)).all()
    assert omega_conjugate(KL(1.0, (0.2, 0.3, 0.5)), q) == pytest.approx(1e4 + math.log(0.2))


def test_unregularized_is_hard_max():
    reg = Unregularized()
    assert reg.conjugate([1.0, 3.0, 2.0]) == 3.0
    assert list(reg.gradient([1.0, 3.0, 2.0])) == [0.0, 1.0, 0.0]


def test_input_checks():
    with pytest.raises(ValueError):
        omega(Entropy(1.0), [1.1, -0.1])
    with pytest.raises(ValueError):
        omega(Entropy(1.0), [0.5, 0.4])
    with pytest.raises(ValueError):
        omega_conjugate(Entropy(1.0), [np.inf, 0.0])
    with pytest.raises(ValueError):
        grad_omega_conjugate(Entropy(1.0), [np.nan, 0.0])
    with pytest.raises(ValueError):
        Entropy(0.0)
    with pytest.raises(ValueError):
        KL(1.0, (0.0, 1.0))


def test_near_simplex_renormalized():
    p = np.array([0.5 + 4e-10, 0.5])
    assert omega(Entropy(1.0), p) == pytest.approx(-math.log(2), abs=1e-9)


def test_make_regularizer():
    assert make_regularizer({"kind": "entropy", "beta": 2}) == Entropy(2.0)
    assert make_regularizer({"kind": "kl", "beta": 1, "ref": [0.5, 0.5]}).ref == (0.5, 0.5)
    assert isinstance(make_regularizer({"kind": "none"}), Unregularized)
    with pytest.raises(ValueError):
        make_regularizer({"kind": "tsallis"})


# --- properties ------------------------------------------------------------

regs = st.one_of(
    st.builds(Entropy, st.floats(0.05, 20.0)),
    st.integers(2, 5).flatmap(lambda n: st.builds(
        KL, st.floats(0.05, 20.0),
        arrays(float, n, elements=st.floats(0.05, 1.0)).map(lambda w: tuple(w / w.sum())))),
)


def _q_for(reg, data, lo=-10.0, hi=10.0):
    n = len(reg.ref) if isinstance(reg, KL) else data.draw(st.integers(1, 5))
    return data.draw(arrays(float, n, elements=st.floats(lo, hi)))


@given(regs, st.data())
def test_fenchel_young_equality(reg, data):
    q = _q_for(reg, data)
    p = reg.gradient(q)
    assert abs(reg.conjugate(q) - (p @ q - reg.omega(p))) <= 1e-10


@given(regs, st.data())
def test_maximality(reg, data):
    q = _q_for(reg, data)
    w = data.draw(arrays(float, q.size, elements=st.floats(0.0, 1.0)))
    if w.sum() == 0:
        w[0] = 1.0
    p = w / w.sum()
    assert p @ q - reg.omega(p) <= reg.conjugate(q) + 1e-12


@given(regs, st.data(), st.floats(-50, 50))
def test_shift_covariance(reg, data, c):
    q = _q_for(reg, data)
    assert abs(reg.conjugate(q + c) - (reg.conjugate(q) + c)) <= 1e-12
    assert np.abs(reg.gradient(q + c) - reg.gradient(q)).max() <= 1e-12


@given(regs, st.data())
def test_monotonicity(reg, data):
    q = _q_for(reg, data)
    bump = data.draw(arrays(float, q.size, elements=st.floats(0.0, 5.0)))
    assert reg.conjugate(q) <= reg.conjugate(q + bump) + 1e-12


@given(regs, st.data())
def test_bounds(reg, data):
    q = _q_for(reg, data)
    v = reg.conjugate(q)
    if isinstance(reg, Entropy):
        assert q.max() - 1e-12 <= v <= q.max() + math.log(q.size) / reg.beta + 1e-12
    else:
        assert np.dot(reg.ref, q) - 1e-12 <= v <= q.max() + 1e-12


@settings(deadline=None)
@given(regs, st.data())
def test_gradient_matches_finite_differences(reg, data):
    q = _q_for(reg, data)
    h = 1e-6
    fd = np.array([(reg.conjugate(q + h * e) - reg.conjugate(q - h * e)) / (2 * h)
                   for e in np.eye(q.size)])
    assert np.abs(fd - reg.gradient(q)).max() <= 1e-6


@given(regs, st.data())
def test_sup_norm_lipschitz(reg, data):
    q1 = _q_for(reg, data)
    q2 = data.draw(arrays(float, q1.size, elements=st.floats(-10, 10)))
    assert abs(reg.conjugate(q1) - reg.conjugate(q2)) <= np.abs(q1 - q2).max() + 1e-12


@given(regs, st.data())
def test_gradient_interior(reg, data):
    p = reg.gradient(_q_for(reg, data))
    assert abs(p.sum() - 1.0) <= 1e-12
    assert (p > 0).all()


@given(st.one_of(regs, st.just(Unregularized())), st.data())
def test_scalar_path_agrees(reg, data):
    q = _q_for(reg, data, -100, 100) if not isinstance(reg, Unregularized) else \
        data.draw(arrays(float, 3, elements=st.floats(-100, 100)))
    assert reg.conjugate_row(q.tolist()) == pytest.approx(float(reg.conjugate(q)),
                                                          rel=1e-14, abs=1e-12)


def test_batched_rows():
    reg = Entropy(0.7)
    table = np.random.default_rng(0).normal(size=(5, 3))
    assert np.allclose(reg.conjugate(table), [reg.conjugate(row) for row in table])
    assert np.allclose(reg.gradient(table).sum(axis=1), 1.0)
