import numpy as np
import pytest
from numpy.testing import assert_allclose

from artifact import numkernel, scattering, starprod
from artifact.boundary import (DimensionMismatch, InvalidParameters,
                               kirchhoff_standard, random_unitary)
from artifact.graph import MetricGraph, Vertex, assemble, cut, ext_ref, int_ref
from artifact.starprod import (ConditionAViolated, StarOperands,
                               associativity_check, compose_smatrices,
                               condition_a, factorize_graph, star)


def _draw_operands(rng, allow_p0=False):
    p = int(rng.integers(0 if allow_p0 else 1, 4))
    nl = p + int(rng.integers(1, 4))
    nr = p + int(rng.integers(1, 4))
    return StarOperands(random_unitary(nl, rng), random_unitary(nr, rng),
                        random_unitary(p, rng) if p else np.eye(0), p)


def test_operand_validation():
    rng = np.random.default_rng(0)
    u2 = random_unitary(2, rng)
    u3 = random_unitary(3, rng)
    with pytest.raises(DimensionMismatch):
        StarOperands(np.ones((2, 3)), u2, np.eye(1), 1)
    with pytest.raises(InvalidParameters):
        StarOperands(u2, u3, np.eye(3), 3)  # p > min size
    with pytest.raises(InvalidParameters):
        StarOperands(u2, u2, np.eye(2), 2)  # 2p = n' + n''
    with pytest.raises(DimensionMismatch):
        StarOperands(u2, u3, np.eye(2), 1)  # coupling shape
    with pytest.raises(InvalidParameters):
        StarOperands(2.0 * u2, u3, np.eye(1), 1)  # not unitary
    with pytest.raises(InvalidParameters):
        StarOperands(u2, u3, 0.5 * np.eye(1), 1)  # coupling not unitary


def test_star_products_are_unitary():
    rng = np.random.default_rng(1)
    for _ in range(100):
        ops = _draw_operands(rng, allow_p0=True)
        try:
            u = star(ops)
        except ConditionAViolated:
            continue
        expected = ops.n_left + ops.n_right - 2 * ops.p
        assert u.shape == (expected, expected)
        assert numkernel.unitarity_defect(u) < 1e-12


def test_star_with_no_glued_channels_is_block_diagonal():
    rng = np.random.default_rng(2)
    ul = random_unitary(2, rng)
    ur = random_unitary(3, rng)
    ops = StarOperands(ul, ur, np.eye(0), 0)
    ok, margin = condition_a(ops)
    assert ok and margin == np.inf
    u = star(ops)
    assert_allclose(u[:2, :2], ul)
    assert_allclose(u[2:, 2:], ur)
    assert_allclose(u[:2, 2:], 0, atol=0)


def _flip(p):
    z = np.zeros((p, p))
    i = np.eye(p)
    return np.block([[z, i], [i, z]])


def test_unit_laws():
    # the 2p x 2p antidiagonal flip acts as a (dressed) identity on both sides
    rng = np.random.default_rng(3)
    for _ in range(25):
        p = int(rng.integers(1, 4))
        v = random_unitary(p, rng)
        v_inv = np.linalg.inv(v)
        nr = p + int(rng.integers(1, 4))
        ur = random_unitary(nr, rng)
        left_unit = star(StarOperands(_flip(p), ur, v, p))
        dl = np.eye(nr, dtype=complex)
        dl[:p, :p] = v_inv
        dr = np.eye(nr, dtype=complex)
        dr[:p, :p] = v
        assert_allclose(left_unit, dl @ ur @ dr, atol=1e-12)

        nl = p + int(rng.integers(1, 4))
        ul = random_unitary(nl, rng)
        right_unit = star(StarOperands(ul, _flip(p), v, p))
        el = np.eye(nl, dtype=complex)
        el[nl - p:, nl - p:] = v
        er = np.eye(nl, dtype=complex)
        er[nl - p:, nl - p:] = v_inv
        assert_allclose(right_unit, el @ ul @ er, atol=1e-12)


def _tau(u, leading, trailing):
    """Swap the leading and trailing channel blocks, keeping internal order."""
    assert leading + trailing == u.shape[0]
    perm = list(range(leading, leading + trailing)) + list(range(leading))
    return u[np.ix_(perm, perm)]


def test_transposition_law():
    rng = np.random.default_rng(4)
    done = 0
    while done < 50:
        ops = _draw_operands(rng)
        try:
            product = star(ops)
        except ConditionAViolated:
            continue
        p, nl, nr = ops.p, ops.n_left, ops.n_right
        lhs = _tau(product, nl - p, nr - p)
        swapped = StarOperands(_tau(ops.u_right, p, nr - p),
                               _tau(ops.u_left, nl - p, p),
                               np.linalg.inv(ops.v), p)
        rhs = star(swapped)
        assert numkernel.spectral_norm(lhs - rhs) < 1e-11
        done += 1


def test_associativity():
    rng = np.random.default_rng(5)
    done = 0
    while done < 20:
        p = int(rng.integers(1, 3))
        pp = int(rng.integers(1, 3))
        n1 = p + int(rng.integers(1, 3))
        n2 = p + pp + int(rng.integers(0, 3))
        n3 = pp + int(rng.integers(1, 3))
        try:
            defect = associativity_check(
                random_unitary(n1, rng), random_unitary(n2, rng),
                random_unitary(n3, rng), random_unitary(p, rng),
                random_unitary(pp, rng), p, pp)
        except ConditionAViolated:
            continue
        assert defect < 1e-10
        done += 1


def test_associativity_rejects_overlapping_glue():
    rng = np.random.default_rng(6)
    with pytest.raises(InvalidParameters):
        associativity_check(random_unitary(3, rng), random_unitary(3, rng),
                            random_unitary(3, rng), random_unitary(2, rng),
                            random_unitary(2, rng), 2, 2)


def test_k_factor_equals_neumann_series():
    rng = np.random.default_rng(7)
    done = 0
    while done < 10:
        p = int(rng.integers(1, 4))
        ul = random_unitary(p + int(rng.integers(1, 4)), rng)
        ur = random_unitary(p + int(rng.integers(1, 4)), rng)
        v = random_unitary(p, rng)
        m = v @ ul[-p:, -p:] @ np.linalg.inv(v) @ ur[:p, :p]
        if numkernel.spectral_norm(m) > 0.9:
            continue
        k1 = np.linalg.solve(np.eye(p) - m, v)
        term = v.astype(complex)
        total = np.zeros_like(term)
        for _ in range(400):
            total += term
            term = m @ term
            if numkernel.spectral_norm(term) < 1e-17:
                break
        assert numkernel.spectral_norm(total - k1) < 1e-12
        done += 1


def test_condition_a_resonance_detected():
    # corner blocks both exactly 1: the glue resonates with zero margin
    w = np.exp(0.3j)
    ul = np.diag([w, 1.0 + 0.0j])
    ur = np.diag([1.0 + 0.0j, w])
    ops = StarOperands(ul, ur, np.eye(1), 1)
    ok, margin = condition_a(ops)
    assert not ok and margin == 0.0
    with pytest.raises(ConditionAViolated) as info:
        star(ops)
    assert info.value.margin == 0.0


def _ring(a=1.0):
    v0 = Vertex((ext_ref("l1"), int_ref("i1", "0"), int_ref("i2", "0")),
                kirchhoff_standard(3))
    v1 = Vertex((ext_ref("l2"), int_ref("i1", "a"), int_ref("i2", "a")),
                kirchhoff_standard(3))
    return MetricGraph(("l1", "l2"), (("i1", a), ("i2", a)), (v0, v1))


def _tadpole(a=1.0):
    v = Vertex((ext_ref("l1"), int_ref("loop", "0"), int_ref("loop", "a")),
               kirchhoff_standard(3))
    return MetricGraph(("l1",), (("loop", a),), (v,))


def test_compose_matches_direct_solve_on_ring():
    g = _ring()
    left, right, cm = cut(g, ["i1", "i2"])
    for e in (0.6, 2.2, 13.0):
        sl = scattering.solve_scattering(assemble(left), e).s
        sr = scattering.solve_scattering(assemble(right), e).s
        composed = compose_smatrices(sl, sr, cm, e)
        direct = scattering.solve_scattering(assemble(g), e).s
        assert numkernel.spectral_norm(composed - direct) < 1e-12


def test_ring_glue_inverse_closed_form():
    # the (I - glue)^{-1} factor of the ring composition in closed form
    s3 = scattering.smatrix_single_vertex(kirchhoff_standard(3), 1.0)
    corner = s3[1:, 1:]
    for e in (0.9, 3.7, 21.0):
        q2 = np.exp(2j * np.sqrt(e))
        k1 = np.linalg.solve(np.eye(2) - corner @ (q2 * corner), np.eye(2))
        den = (1.0 - q2 / 9.0) * (1.0 - q2)
        expected = np.array([[1.0 - 5.0 * q2 / 9.0, -4.0 * q2 / 9.0],
                             [-4.0 * q2 / 9.0, 1.0 - 5.0 * q2 / 9.0]]) / den
        assert_allclose(k1, expected, atol=1e-12)


def test_factorize_ring_and_random_graph():
    _, _, defect = factorize_graph(_ring(), ["i1", "i2"], 1.9)
    assert defect < 1e-10
    rng = np.random.default_rng(8)
    from artifact.boundary import random_bc
    v0 = Vertex((ext_ref("l1"), int_ref("b", "0")), random_bc(2, rng))
    v1 = Vertex((int_ref("b", "a"), ext_ref("l2"), ext_ref("l3")), random_bc(3, rng))
    g = MetricGraph(("l1", "l2", "l3"), (("b", 0.8),), (v0, v1))
    _, _, defect = factorize_graph(g, ["b"], 2.4)
    assert defect < 1e-10


def test_factorize_tadpole_closed_form_and_resonance():
    g = _tadpole()
    for e in (0.5, 2.0, 11.0):
        q = np.exp(1j * np.sqrt(e))
        expected = q * (1.0 / q - 3.0) / (q - 3.0)
        composed, direct, defect = factorize_graph(g, ["loop"], e)
        assert defect < 1e-10
        assert_allclose(direct[0, 0], expected, atol=1e-12)
        assert_allclose(composed[0, 0], expected, atol=1e-10)
    with pytest.raises(ConditionAViolated) as info:
        factorize_graph(g, ["loop"], 4 * np.pi ** 2)
    assert info.value.margin < 1e-8


def test_compose_rejects_mismatched_inputs():
    g = _ring()
    left, right, cm = cut(g, ["i1", "i2"])
    sl = scattering.solve_scattering(assemble(left), 1.0).s
    sr = scattering.solve_scattering(assemble(right), 1.0).s
    with pytest.raises(DimensionMismatch):
        compose_smatrices(sl[:2, :2], sr, cm, 1.0)
    with pytest.raises(DimensionMismatch):
        compose_smatrices(sl, sr[:2, :2], cm, 1.0)
