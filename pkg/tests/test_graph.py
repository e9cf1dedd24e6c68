import numpy as np
import pytest
from numpy.testing import assert_allclose

from artifact import boundary, graph, scattering
from artifact.boundary import (BoundaryCondition, InvalidBoundaryCondition,
                               InvalidParameters, kirchhoff_standard, random_bc)
from artifact.graph import (InvalidGraph, MetricGraph, NotACut, UnknownEdge,
                            Vertex, assemble, cut, ext_ref, insert_trivial_vertex,
                            int_ref, trivial_vertex_bc)


def _ring(a=1.0):
    """Two vertices joined by two parallel edges, one external line each."""
    v0 = Vertex((ext_ref("l1"), int_ref("i1", "0"), int_ref("i2", "0")),
                kirchhoff_standard(3))
    v1 = Vertex((ext_ref("l2"), int_ref("i1", "a"), int_ref("i2", "a")),
                kirchhoff_standard(3))
    return MetricGraph(("l1", "l2"), (("i1", a), ("i2", a)), (v0, v1))


def _tadpole(a=1.0):
    v = Vertex((ext_ref("l1"), int_ref("loop", "0"), int_ref("loop", "a")),
               kirchhoff_standard(3))
    return MetricGraph(("l1",), (("loop", a),), (v,))


def test_endpoint_reference_helpers():
    assert ext_ref("x") == ("ext", "x")
    assert int_ref("e", "0") == ("int", "e", "0")
    assert int_ref("e", "a") == ("int", "e", "a")
    with pytest.raises(ValueError):
        int_ref("e", "b")


def test_counts_lengths_tadpole_queries():
    g = _ring(2.5)
    assert g.n == 2 and g.m == 2
    assert g.length("i1") == 2.5
    assert not g.is_tadpole("i1")
    assert _tadpole().is_tadpole("loop")
    with pytest.raises(UnknownEdge):
        g.length("nope")
    with pytest.raises(UnknownEdge):
        g.is_tadpole("nope")


def test_graph_validation_rejects_bad_wiring():
    v_ok = Vertex((ext_ref("l1"),), boundary.neumann(1))
    # dangling internal endpoints
    with pytest.raises(InvalidGraph):
        MetricGraph(("l1",), (("i1", 1.0),), (v_ok,))
    # unknown endpoint reference
    with pytest.raises(InvalidGraph):
        MetricGraph((), (("i1", 1.0),),
                    (Vertex((int_ref("i1", "0"), int_ref("i2", "a")),
                            boundary.neumann(2)),))
    # one endpoint claimed twice
    with pytest.raises(InvalidGraph):
        MetricGraph(("l1",), (),
                    (Vertex((ext_ref("l1"),), boundary.neumann(1)),
                     Vertex((ext_ref("l1"),), boundary.neumann(1))))
    # duplicate line ids
    with pytest.raises(InvalidGraph):
        MetricGraph(("l1", "l1"), (), (v_ok, v_ok))
    # nonpositive length
    with pytest.raises(InvalidGraph):
        MetricGraph((), (("i1", 0.0),),
                    (Vertex((int_ref("i1", "0"), int_ref("i1", "a")),
                            boundary.neumann(2)),))


def test_vertex_validation():
    with pytest.raises(InvalidGraph):
        Vertex((), boundary.neumann(1))
    with pytest.raises(InvalidGraph):
        Vertex((ext_ref("l1"),), boundary.neumann(2))  # size mismatch
    with pytest.raises(InvalidGraph):
        Vertex((("int", "i1"),), boundary.neumann(1))  # malformed reference


def test_assemble_ring_explicit_layout():
    gbc = assemble(_ring())
    assert gbc.n == 2 and gbc.m == 2 and gbc.lengths == (1.0, 1.0)
    # columns: l1, l2, i1:0, i2:0, i1:a, i2:a
    expected_a = np.zeros((6, 6), dtype=complex)
    expected_b = np.zeros((6, 6), dtype=complex)
    expected_a[0, 0], expected_a[0, 2] = 1, -1
    expected_a[1, 2], expected_a[1, 3] = 1, -1
    expected_b[2, [0, 2, 3]] = 1
    expected_a[3, 1], expected_a[3, 4] = 1, -1
    expected_a[4, 4], expected_a[4, 5] = 1, -1
    expected_b[5, [1, 4, 5]] = 1
    assert_allclose(gbc.bc.A, expected_a)
    assert_allclose(gbc.bc.B, expected_b)


def test_assemble_respects_endpoint_order_within_vertex():
    bc = random_bc(3, 7)
    v = Vertex((int_ref("i1", "a"), ext_ref("l1"), int_ref("i1", "0")), bc)
    gbc = assemble(MetricGraph(("l1",), (("i1", 1.0),), (v,)))
    # global columns: l1 -> 0, i1:0 -> 1, i1:a -> 2
    assert_allclose(gbc.bc.A[:, [2, 0, 1]], bc.A)
    assert_allclose(gbc.bc.B[:, [2, 0, 1]], bc.B)


def test_assemble_names_offending_vertex():
    bad = BoundaryCondition(np.zeros((1, 1)), np.zeros((1, 1)))
    g = MetricGraph(("l1", "l2"), (),
                    (Vertex((ext_ref("l1"),), boundary.neumann(1)),
                     Vertex((ext_ref("l2"),), bad)))
    with pytest.raises(InvalidBoundaryCondition, match="vertex 1"):
        assemble(g)


def test_global_bc_consistency_checks():
    gbc = assemble(_ring())
    with pytest.raises(InvalidGraph):
        graph.GlobalBC(n=2, m=2, lengths=(1.0,), bc=gbc.bc)
    with pytest.raises(InvalidGraph):
        graph.GlobalBC(n=2, m=2, lengths=(1.0, -1.0), bc=gbc.bc)
    with pytest.raises(InvalidGraph):
        graph.GlobalBC(n=3, m=2, lengths=(1.0, 1.0), bc=gbc.bc)


def test_trivial_vertex_is_transparent_on_a_line():
    # two external lines joined by the trivial vertex: pure transmission
    g = MetricGraph(("l1", "l2"), (),
                    (Vertex((ext_ref("l1"), ext_ref("l2")), trivial_vertex_bc()),))
    s = scattering.solve_scattering(assemble(g), 2.0).s
    assert_allclose(s, [[0, 1], [1, 0]], atol=1e-14)


def test_insert_trivial_vertex_splits_length():
    g = insert_trivial_vertex(_tadpole(2.0), "loop", position=0.3)
    ids = dict(g.internals)
    assert set(ids) == {"loop.1", "loop.2"}
    assert_allclose(ids["loop.1"], 0.6)
    assert_allclose(ids["loop.2"], 1.4)
    assert g.n == 1 and g.m == 2
    assert len(g.vertices) == 2


def test_insert_trivial_vertex_preserves_smatrix():
    for builder in (_ring, _tadpole):
        g = builder(1.3)
        edge = g.internals[0][0]
        split = insert_trivial_vertex(g, edge, position=0.37)
        for e in (0.8, 3.1, 17.0):
            s0 = scattering.solve_scattering(assemble(g), e).s
            s1 = scattering.solve_scattering(assemble(split), e).s
            assert_allclose(s1, s0, atol=1e-11)


def test_insert_trivial_vertex_preserves_spectrum():
    g = _ring()
    split = insert_trivial_vertex(g, "i1", position=0.41)
    ev0 = scattering.spectrum(assemble(g), 1.0, 50.0).eigenvalues
    ev1 = scattering.spectrum(assemble(split), 1.0, 50.0).eigenvalues
    assert_allclose(ev1, ev0, rtol=1e-8)


def test_insert_trivial_vertex_avoids_id_collisions():
    v = Vertex((ext_ref("l1"), int_ref("loop", "0"), int_ref("loop", "a"),
                int_ref("loop.1", "0"), int_ref("loop.1", "a")),
               kirchhoff_standard(5))
    g = MetricGraph(("l1",), (("loop", 1.0), ("loop.1", 1.0)), (v,))
    split = insert_trivial_vertex(g, "loop")
    ids = [i for i, _ in split.internals]
    assert len(set(ids)) == 3
    assert "loop.1x" in ids  # the first candidate was taken


def test_insert_trivial_vertex_rejects_bad_requests():
    with pytest.raises(UnknownEdge):
        insert_trivial_vertex(_tadpole(), "nope")
    with pytest.raises(InvalidParameters):
        insert_trivial_vertex(_tadpole(), "loop", position=0.0)
    with pytest.raises(InvalidParameters):
        insert_trivial_vertex(_tadpole(), "loop", position=1.0)


def test_cut_ring_bookkeeping():
    left, right, cm = cut(_ring(), ["i1", "i2"])
    assert [p[:2] for p in cm.pairs] == [("i1.cut0", "i1.cuta"),
                                         ("i2.cut0", "i2.cuta")]
    assert cm.pairs[0][2] == 1.0
    # cut channels trail on the left, lead on the right
    assert cm.left_externals == ("l1", "i1.cut0", "i2.cut0")
    assert cm.right_externals == ("i1.cuta", "i2.cuta", "l2")
    assert left.n == 3 and left.m == 0
    assert right.n == 3 and right.m == 0
    # both halves are valid graphs with intact vertex conditions
    assemble(left)
    assemble(right)


def test_cut_order_follows_internal_listing():
    _, _, cm = cut(_ring(), ["i2", "i1"])
    assert [p[2] for p in cm.pairs] == [1.0, 1.0]
    assert cm.left_externals == ("l1", "i1.cut0", "i2.cut0")


def test_cut_rejects_non_separating_selections():
    with pytest.raises(NotACut):
        cut(_ring(), ["i1"])  # still connected
    with pytest.raises(NotACut):
        cut(_tadpole(), ["loop"])  # loop removal leaves one component
    with pytest.raises(NotACut):
        cut(_ring(), [])
    with pytest.raises(UnknownEdge):
        cut(_ring(), ["ghost"])


def test_cut_rejects_three_component_split():
    # chain of three vertices: cutting both bridges leaves three parts
    v0 = Vertex((ext_ref("l1"), int_ref("b1", "0")), kirchhoff_standard(2))
    v1 = Vertex((int_ref("b1", "a"), int_ref("b2", "0")), kirchhoff_standard(2))
    v2 = Vertex((int_ref("b2", "a"), ext_ref("l2")), kirchhoff_standard(2))
    g = MetricGraph(("l1", "l2"), (("b1", 1.0), ("b2", 1.0)), (v0, v1, v2))
    with pytest.raises(NotACut):
        cut(g, ["b1", "b2"])


def test_cut_rejects_edge_inside_one_component():
    # bridge plus a tadpole on the left vertex: the tadpole never straddles
    v0 = Vertex((ext_ref("l1"), int_ref("t", "0"), int_ref("t", "a"),
                 int_ref("b", "0")), kirchhoff_standard(4))
    v1 = Vertex((int_ref("b", "a"), ext_ref("l2")), kirchhoff_standard(2))
    g = MetricGraph(("l1", "l2"), (("t", 0.8), ("b", 1.0)), (v0, v1))
    with pytest.raises(NotACut):
        cut(g, ["b", "t"])
