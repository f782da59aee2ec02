"""Tests for mesh construction, the text format, quadrature and location."""

import math

import numpy as np
import pytest

from qflow.mesh import (
    Mesh,
    MeshFormatError,
    load_mesh,
    locate_point,
    save_mesh,
    structured_rect_mesh,
    triangle_quadrature,
)


def ref_monomial(a: int, b: int) -> float:
    """Exact integral of x^a y^b over the reference triangle x,y>=0, x+y<=1."""
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


class TestStructuredMesh:
    def test_counts_square_h02(self):
        m = structured_rect_mesh(2.0, 2.0, 0.2)
        assert m.n_nodes == 121
        assert m.n_elements == 200
        assert len(m.boundary_ids) == 40
        assert len(m.interior_ids) == 81

    def test_counts_coarse(self):
        m = structured_rect_mesh(2.0, 2.0, 1.0)
        assert m.n_nodes == 9
        assert m.n_elements == 8

    def test_area_sum_exact(self):
        m = structured_rect_mesh(2.0, 2.0, 0.2)
        assert abs(m.areas.sum() - 4.0) < 1e-12
        assert np.all(m.areas > 0)

    def test_rectangle(self):
        m = structured_rect_mesh(1.0, 0.5, 0.25)
        assert m.n_elements == 2 * 4 * 2
        assert abs(m.areas.sum() - 0.5) < 1e-14

    def test_indivisible_h_rejected(self):
        with pytest.raises(ValueError):
            structured_rect_mesh(2.0, 2.0, 0.3)

    def test_shape_gradient_partition_of_unity(self):
        # gradients of the three local shape functions sum to zero
        m = structured_rect_mesh(2.0, 2.0, 0.5)
        assert np.max(np.abs(m.grads.sum(axis=1))) < 1e-13

    def test_gradients_reproduce_linear(self):
        # grad of interpolant of f(x) = 3x - 2y + 1 is (3, -2) on every element
        m = structured_rect_mesh(2.0, 2.0, 0.4)
        f = 3.0 * m.nodes[:, 0] - 2.0 * m.nodes[:, 1] + 1.0
        g = np.einsum("la,lak->lk", f[m.elements], m.grads)
        assert np.allclose(g, [3.0, -2.0], atol=1e-12)

    def test_elements_counterclockwise(self):
        m = structured_rect_mesh(2.0, 2.0, 0.25)
        assert np.all(m.areas > 0)


class TestQuadrature:
    @pytest.mark.parametrize("degree", [4, 6])
    def test_exact_on_monomials(self, degree):
        rule = triangle_quadrature(degree)
        # reference-triangle vertices (0,0), (1,0), (0,1); bary -> (x, y)
        xy = rule.bary @ np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        area = 0.5
        for a in range(degree + 1):
            for b in range(degree + 1 - a):
                got = area * np.sum(rule.weights * xy[:, 0] ** a * xy[:, 1] ** b)
                assert abs(got - ref_monomial(a, b)) < 1e-15, (a, b)

    def test_x2y2_value(self):
        rule = triangle_quadrature(4)
        xy = rule.bary @ np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        got = 0.5 * np.sum(rule.weights * xy[:, 0] ** 2 * xy[:, 1] ** 2)
        assert abs(got - 1.0 / 180.0) < 1e-16

    @pytest.mark.parametrize("degree", [4, 6])
    def test_weights_positive_sum_one(self, degree):
        rule = triangle_quadrature(degree)
        assert np.all(rule.weights > 0)
        assert abs(rule.weights.sum() - 1.0) < 1e-14
        assert np.allclose(rule.bary.sum(axis=1), 1.0, atol=1e-14)
        assert np.all(rule.bary > 0)  # interior points

    def test_unsupported_degree(self):
        with pytest.raises(ValueError):
            triangle_quadrature(5)


class TestMeshFile:
    def _write(self, tmp_path, text):
        p = tmp_path / "mesh.txt"
        p.write_text(text)
        return str(p)

    def test_roundtrip_structured(self, tmp_path):
        m = structured_rect_mesh(2.0, 2.0, 0.5)
        path = str(tmp_path / "m.txt")
        save_mesh(m, path, comment="structured test mesh")
        m2 = load_mesh(path)
        assert np.array_equal(m2.elements, m.elements)
        assert np.allclose(m2.nodes, m.nodes)
        assert np.array_equal(np.sort(m2.boundary_ids), np.sort(m.boundary_ids))

    def test_comments_and_blank_lines(self, tmp_path):
        path = self._write(tmp_path, """
# a triangle pair
4 2 4

0 0
1 0
1 1
0 1
# elements
0 1 2
0 2 3
0
1
2
3
""")
        m = load_mesh(path)
        assert m.n_nodes == 4
        assert m.n_elements == 2
        assert abs(m.areas.sum() - 1.0) < 1e-15

    def test_bad_header(self, tmp_path):
        path = self._write(tmp_path, "3 1\n0 0\n1 0\n0 1\n0 1 2\n")
        with pytest.raises(MeshFormatError, match=r":1:"):
            load_mesh(path)

    def test_truncated_file(self, tmp_path):
        path = self._write(tmp_path, "4 2 4\n0 0\n1 0\n1 1\n")
        with pytest.raises(MeshFormatError, match="unexpected end"):
            load_mesh(path)

    def test_bad_node_line(self, tmp_path):
        path = self._write(tmp_path, "3 1 3\n0 0\noops\n0 1\n0 1 2\n0\n1\n2\n")
        with pytest.raises(MeshFormatError, match=r":3:"):
            load_mesh(path)

    def test_element_index_out_of_range(self, tmp_path):
        path = self._write(tmp_path, "3 1 3\n0 0\n1 0\n0 1\n0 1 7\n0\n1\n2\n")
        with pytest.raises(MeshFormatError, match=r":5:.*out of range"):
            load_mesh(path)

    def test_repeated_node_in_element(self, tmp_path):
        path = self._write(tmp_path, "3 1 3\n0 0\n1 0\n0 1\n0 1 1\n0\n1\n2\n")
        with pytest.raises(MeshFormatError, match=r":5:.*repeated"):
            load_mesh(path)

    def test_negative_area_element(self, tmp_path):
        # clockwise orientation -> negative area, reported with its line
        path = self._write(tmp_path, "3 1 3\n0 0\n1 0\n0 1\n0 2 1\n0\n1\n2\n")
        with pytest.raises(MeshFormatError, match=r":5:.*non-positive area"):
            load_mesh(path)

    def test_zero_area_element(self, tmp_path):
        path = self._write(tmp_path, "3 1 3\n0 0\n1 0\n2 0\n0 1 2\n0\n1\n2\n")
        with pytest.raises(MeshFormatError, match="non-positive area"):
            load_mesh(path)

    def test_boundary_flag_mismatch(self, tmp_path):
        # node 3 is on the hull but not flagged
        path = self._write(tmp_path, "4 2 4\n0 0\n1 0\n1 1\n0 1\n0 1 2\n0 2 3\n0\n1\n2\n2\n")
        with pytest.raises(MeshFormatError):
            load_mesh(path)

    def test_flagged_interior_node(self, tmp_path):
        m = structured_rect_mesh(2.0, 2.0, 1.0)
        path = str(tmp_path / "m.txt")
        save_mesh(m, path)
        text = open(path).read()
        # node 4 is the center: claim it is boundary as well
        bad = text.replace(f"{m.n_nodes} {m.n_elements} 8", f"{m.n_nodes} {m.n_elements} 9")
        bad = bad + "4\n"
        path2 = str(tmp_path / "bad.txt")
        open(path2, "w").write(bad)
        with pytest.raises(MeshFormatError, match="flagged interior"):
            load_mesh(path2)

    def test_duplicate_boundary_entry(self, tmp_path):
        path = self._write(tmp_path, "3 1 3\n0 0\n1 0\n0 1\n0 1 2\n0\n0\n2\n")
        with pytest.raises(MeshFormatError, match="twice"):
            load_mesh(path)

    def test_trailing_content(self, tmp_path):
        path = self._write(tmp_path, "3 1 3\n0 0\n1 0\n0 1\n0 1 2\n0\n1\n2\n99 99\n")
        with pytest.raises(MeshFormatError, match="trailing"):
            load_mesh(path)


class TestLocate:
    def test_structured_linear_reproduction(self):
        m = structured_rect_mesh(2.0, 2.0, 0.2)
        rng = np.random.default_rng(7)
        f = 0.75 * m.nodes[:, 0] - 1.25 * m.nodes[:, 1] + 0.5
        for _ in range(300):
            x = rng.uniform(0.0, 2.0, size=2)
            elem, bary = locate_point(m, x)
            assert bary.min() >= -1e-9
            val = f[m.elements[elem]] @ bary
            exact = 0.75 * x[0] - 1.25 * x[1] + 0.5
            assert abs(val - exact) < 1e-12
            # barycentric combination reproduces the point itself
            assert np.allclose(m.nodes[m.elements[elem]].T @ bary, x, atol=1e-12)

    def test_structured_hits_vertices_and_edges(self):
        m = structured_rect_mesh(2.0, 2.0, 0.5)
        for x in ([0.0, 0.0], [2.0, 2.0], [0.5, 0.5], [0.25, 0.25], [1.0, 0.0]):
            elem, bary = locate_point(m, x)
            assert np.allclose(m.nodes[m.elements[elem]].T @ bary, x, atol=1e-13)

    def test_structured_outside_raises(self):
        m = structured_rect_mesh(2.0, 2.0, 0.5)
        with pytest.raises(ValueError, match="outside"):
            locate_point(m, [2.5, 1.0])

    def test_walking_search_linear_reproduction(self, tmp_path):
        # strip the structured tag so the generic walking path is exercised
        ms = structured_rect_mesh(2.0, 2.0, 0.25)
        m = Mesh(nodes=ms.nodes, elements=ms.elements, boundary_ids=ms.boundary_ids,
                 interior_ids=ms.interior_ids, areas=ms.areas, grads=ms.grads,
                 structured=None)
        rng = np.random.default_rng(8)
        f = -0.4 * m.nodes[:, 0] + 2.2 * m.nodes[:, 1] - 1.0
        for _ in range(200):
            x = rng.uniform(0.0, 2.0, size=2)
            elem, bary = locate_point(m, x)
            val = f[m.elements[elem]] @ bary
            exact = -0.4 * x[0] + 2.2 * x[1] - 1.0
            assert abs(val - exact) < 1e-12

    def test_walking_outside_raises(self):
        ms = structured_rect_mesh(1.0, 1.0, 0.25)
        m = Mesh(nodes=ms.nodes, elements=ms.elements, boundary_ids=ms.boundary_ids,
                 interior_ids=ms.interior_ids, areas=ms.areas, grads=ms.grads,
                 structured=None)
        with pytest.raises(ValueError, match="outside"):
            locate_point(m, [1.7, 0.3])


class TestNeighbors:
    def test_node_neighbors_center(self):
        m = structured_rect_mesh(2.0, 2.0, 1.0)
        nb = m.node_neighbors()
        # center node 4 touches every other node except the two opposite
        # off-diagonal corners (2 and 6 share no element with 4)
        assert set(nb[4].tolist()) == {0, 1, 3, 5, 7, 8}

    def test_mean_edge_length(self):
        m = structured_rect_mesh(2.0, 2.0, 1.0)
        expected = (2.0 + math.sqrt(2.0)) / 3.0  # legs 1, 1 and hypotenuse sqrt2
        assert abs(m.mean_edge_length() - expected) < 1e-12
