"""Normalized operators, block spectra, operator norms, and error radii."""
from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.sparse as sp

import palink.spectral as spectral
from palink.graphdata import make_dataset, within_group_structure
from palink.spectral import (
    block_spectrum,
    dense_power_entries,
    matrix_from_edges,
    normalized_matrix,
    operator_norm,
    residual_and_bounds,
    residual_cross_term,
)

from conftest import complete_graph, random_planted_dataset


class TestNormalizedMatrix:
    def test_k3_symmetric_entries(self, k3):
        nm = normalized_matrix(k3, "symmetric")
        dense = nm.matrix.toarray()
        expected = np.full((3, 3), 0.5)
        np.fill_diagonal(expected, 0.0)
        np.testing.assert_allclose(dense, expected)

    def test_random_walk_rows_sum_to_one(self):
        rng = np.random.default_rng(0)
        ds = random_planted_dataset(rng, weights=(1.0,))
        nm = normalized_matrix(ds, "random_walk")
        np.testing.assert_allclose(nm.matrix.sum(axis=1).A1, 1.0, atol=1e-12)

    def test_zero_degree_row_flagged(self):
        ds = make_dataset([(0, 1)], np.ones((3, 1)), [0, 0, 0],
                          self_loop_weight=0.0)
        for kind in ("symmetric", "random_walk"):
            nm = normalized_matrix(ds, kind)
            np.testing.assert_array_equal(nm.zero_degree, [False, False, True])
            assert nm.matrix[2].nnz == 0

    def test_self_loop_weight_on_diagonal(self):
        ds = make_dataset([(0, 1)], np.ones((2, 1)), [0, 0],
                          self_loop_weight=1.0)
        nm = normalized_matrix(ds, "symmetric")
        np.testing.assert_allclose(nm.matrix.toarray(),
                                   [[0.5, 0.5], [0.5, 0.5]])

    def test_within_group_source(self):
        ds = make_dataset([(0, 1), (1, 2)], np.ones((3, 1)), [0, 0, 1],
                          self_loop_weight=0.0)
        view = within_group_structure(ds)
        nm = normalized_matrix(view, "symmetric")
        dense = nm.matrix.toarray()
        assert dense[1, 2] == 0.0  # cross-group edge dropped
        assert dense[0, 1] == 1.0  # normalized by within-group degree 1

    def test_unknown_kind(self, k3):
        with pytest.raises(ValueError):
            normalized_matrix(k3, "laplacian")


class TestBlockSpectrum:
    def test_k3_eigenvalues_and_gap(self, k3):
        view = within_group_structure(k3)
        summary = block_spectrum(view)
        ev = summary.groups[0].eigenvalues
        np.testing.assert_allclose(ev, [1.0, -0.5, -0.5], atol=1e-12)
        assert summary.groups[0].lambda_gap == pytest.approx(0.5)

    def test_k4_gap(self, k4):
        view = within_group_structure(k4)
        summary = block_spectrum(view)
        assert summary.groups[0].lambda_gap == pytest.approx(1.0 / 3.0)

    def test_c4_bipartite_gap_is_one(self, c4):
        view = within_group_structure(c4)
        summary = block_spectrum(view)
        ev = summary.groups[0].eigenvalues
        np.testing.assert_allclose(sorted(ev), [-1.0, 0.0, 0.0, 1.0],
                                   atol=1e-12)
        assert summary.groups[0].lambda_gap == pytest.approx(1.0)

    def test_leading_eigenvalue_is_one_when_volume_positive(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            ds = random_planted_dataset(rng)
            view = within_group_structure(ds)
            summary = block_spectrum(view)
            for g in summary.groups:
                if not g.degenerate:
                    assert g.eigenvalues[0] == pytest.approx(1.0, abs=1e-9)
                    assert g.eigenvalues.min() >= -1.0 - 1e-9

    def test_random_walk_spectrum_equals_symmetric(self):
        rng = np.random.default_rng(4)
        ds = random_planted_dataset(rng, weights=(1.0,))
        view = within_group_structure(ds)
        sym = block_spectrum(view, "symmetric")
        rw = block_spectrum(view, "random_walk")
        for a, b in zip(sym.groups, rw.groups):
            np.testing.assert_allclose(a.eigenvalues, b.eigenvalues, atol=1e-12)
        # cross-check against eigenvalues of the actual random-walk block
        nm_rw = normalized_matrix(view, "random_walk")
        g0 = view.groups[0]
        block = nm_rw.matrix.toarray()[np.ix_(g0, g0)]
        ev = np.sort(np.linalg.eigvals(block).real)[::-1]
        np.testing.assert_allclose(sym.groups[0].eigenvalues, ev, atol=1e-8)

    def test_singleton_groups(self):
        ds = make_dataset([(0, 1)], np.ones((3, 1)), [0, 0, 1],
                          self_loop_weight=1.0)
        view = within_group_structure(ds)
        summary = block_spectrum(view)
        lone = summary.groups[1]
        assert lone.size == 1
        np.testing.assert_allclose(lone.eigenvalues, [1.0])
        assert lone.lambda_gap == 0.0
        assert not lone.degenerate

    def test_zero_volume_singleton_flagged(self):
        ds = make_dataset([(0, 1)], np.ones((3, 1)), [0, 0, 1],
                          self_loop_weight=0.0)
        view = within_group_structure(ds)
        summary = block_spectrum(view)
        assert summary.groups[1].degenerate
        np.testing.assert_allclose(summary.groups[1].eigenvalues, [0.0])

    def test_iterative_path_matches_dense(self, monkeypatch):
        rng = np.random.default_rng(5)
        ds = random_planted_dataset(rng, n_max=40, b_max=1,
                                    p_in_range=(0.4, 0.6), weights=(1.0,))
        view = within_group_structure(ds)
        dense = block_spectrum(view)
        monkeypatch.setattr(spectral, "DENSE_EIG_LIMIT", 2)
        iterative = block_spectrum(view)
        for d, it in zip(dense.groups, iterative.groups):
            if d.size <= 2:
                continue
            assert it.method == "iterative"
            assert it.lambda_gap == pytest.approx(d.lambda_gap, abs=1e-7)

    def test_eigenvectors_orthonormal(self, k4):
        view = within_group_structure(k4)
        summary, vectors = block_spectrum(view, compute_vectors=True)
        v = vectors[0]
        np.testing.assert_allclose(v.T @ v, np.eye(4), atol=1e-10)


class TestOperatorNorm:
    def test_matches_svd_on_random_sparse(self):
        rng = np.random.default_rng(6)
        for _ in range(5):
            dense = rng.normal(size=(12, 12))
            mat = sp.csr_matrix(dense)
            expected = np.linalg.svd(dense, compute_uv=False)[0]
            assert operator_norm(mat) == pytest.approx(expected, rel=1e-12)

    def test_power_iteration_path(self, monkeypatch):
        rng = np.random.default_rng(7)
        dense = rng.normal(size=(30, 30))
        expected = np.linalg.svd(dense, compute_uv=False)[0]
        monkeypatch.setattr(spectral, "DENSE_SVD_LIMIT", 4)
        got = operator_norm(sp.csr_matrix(dense))
        assert got == pytest.approx(expected, rel=1e-6)

    def test_zero_matrix(self):
        assert operator_norm(sp.csr_matrix((5, 5))) == 0.0


class TestBounds:
    def test_k3_frozen_bound_values(self, k3):
        view = within_group_structure(k3)
        full = normalized_matrix(k3, "symmetric")
        within = normalized_matrix(view, "symmetric")
        summary = block_spectrum(view)
        bounds = residual_and_bounds(full, within, summary, L=2, view=view)
        # single group, no cross edges: residual vanishes
        assert bounds.xi_norm == pytest.approx(0.0, abs=1e-12)
        assert bounds.cross_term == pytest.approx(0.0, abs=1e-12)
        assert bounds.zeta[0] == pytest.approx(0.25)
        p2 = dense_power_entries(full, 2)
        np.testing.assert_allclose(np.diag(p2), 0.5)
        off = p2[0, 1]
        assert off == pytest.approx(0.25)
        # stationary target 2/6; deviation 1/12 within the radius 0.25
        assert abs(off - 2.0 / 6.0) == pytest.approx(1.0 / 12.0)
        assert abs(off - 2.0 / 6.0) <= bounds.zeta[0] + 1e-9

    def test_cross_term_formula(self):
        xi, phat = 0.3, 1.1
        expected = sum(
            math.comb(3, l) * xi**l * phat ** (3 - l) for l in (1, 2, 3)
        )
        assert residual_cross_term(3, xi, phat) == pytest.approx(expected)

    def test_degree_ratio_random_walk(self, toy_cs):
        view = within_group_structure(toy_cs)
        full = normalized_matrix(toy_cs, "random_walk")
        within = normalized_matrix(view, "random_walk")
        summary = block_spectrum(view, "random_walk")
        bounds = residual_and_bounds(full, within, summary, L=2, view=view)
        # degrees: {1, 2, 1, 3, 1, 0}; max/min positive = 3/1
        assert bounds.degree_ratio == pytest.approx(math.sqrt(3.0))
        assert np.isnan(bounds.zeta[1])  # zero-volume singleton group

    def test_all_zero_degrees_error_random_walk(self):
        ds = make_dataset([(0, 1)], np.ones((2, 1)), [0, 1],
                          self_loop_weight=0.0)
        view = within_group_structure(ds)
        full = normalized_matrix(ds, "random_walk")
        within = normalized_matrix(view, "random_walk")
        summary = block_spectrum(view, "random_walk")
        with pytest.raises(ValueError):
            residual_and_bounds(full, within, summary, L=1, view=view)

    def test_kind_mismatch_and_bad_L(self, k3):
        view = within_group_structure(k3)
        full = normalized_matrix(k3, "symmetric")
        within = normalized_matrix(view, "random_walk")
        summary = block_spectrum(view)
        with pytest.raises(ValueError):
            residual_and_bounds(full, within, summary, L=1, view=view)
        within_ok = normalized_matrix(view, "symmetric")
        with pytest.raises(ValueError):
            residual_and_bounds(full, within_ok, summary, L=0, view=view)

    def test_entrywise_bounds_on_random_graphs(self):
        """Mini version of the bound suite; the full corpus runs in the
        acceptance tests."""
        rng = np.random.default_rng(8)
        for _ in range(15):
            ds = random_planted_dataset(rng)
            view = within_group_structure(ds)
            for kind in ("symmetric", "random_walk"):
                if kind == "random_walk" and not (view.wg_degrees > 0).any():
                    continue
                full = normalized_matrix(ds, kind)
                within = normalized_matrix(view, kind)
                summary = block_spectrum(view, kind)
                for L in (1, 3):
                    bounds = residual_and_bounds(full, within, summary, L,
                                                 view)
                    pl = dense_power_entries(full, L)
                    check_entry_bounds(pl, view, bounds, kind)


def check_entry_bounds(pl, view, bounds, kind, slack=1e-9):
    """Every same-group entry within its radius of the degree target; every
    cross-group entry within the residual-only radius."""
    deg = view.wg_degrees
    gof = view.group_of
    n = view.n
    for i in range(n):
        for j in range(n):
            if gof[i] == gof[j]:
                g = gof[i]
                vol = view.volumes[g]
                if vol == 0.0:
                    # degenerate group: block power is zero, residual-only
                    assert abs(pl[i, j]) <= bounds.cross_term + slack
                    continue
                if kind == "symmetric":
                    target = math.sqrt(deg[i] * deg[j]) / vol
                else:
                    target = deg[j] / vol
                assert abs(pl[i, j] - target) <= bounds.zeta[g] + slack
            else:
                assert abs(pl[i, j]) <= bounds.cross_term + slack


class TestDensePowers:
    def test_identity_and_first_power(self, k3):
        nm = normalized_matrix(k3, "symmetric")
        np.testing.assert_array_equal(dense_power_entries(nm, 0), np.eye(3))
        np.testing.assert_allclose(dense_power_entries(nm, 1),
                                   nm.matrix.toarray())

    def test_matches_matrix_power_oracle(self):
        rng = np.random.default_rng(9)
        ds = random_planted_dataset(rng)
        nm = normalized_matrix(ds, "symmetric")
        got = dense_power_entries(nm, 4)
        expected = np.linalg.matrix_power(nm.matrix.toarray(), 4)
        np.testing.assert_allclose(got, expected, atol=1e-12)

    def test_size_guard(self):
        nm = matrix_from_edges(5001, np.zeros((0, 2), dtype=np.int64), 1.0,
                               "symmetric")
        with pytest.raises(ValueError):
            dense_power_entries(nm, 2)

    def test_negative_power_rejected(self, k3):
        nm = normalized_matrix(k3, "symmetric")
        with pytest.raises(ValueError):
            dense_power_entries(nm, -1)
