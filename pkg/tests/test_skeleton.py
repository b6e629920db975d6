"""Beta-skeleton construction, faces, and cycle counts vs naive oracles."""

import numpy as np
import pytest

from oracles import (
    brute_force_beta_edges,
    enumerate_faces,
    naive_persistent_b1,
    spanning_forest_cycle_count,
)
from topovision.exceptions import MalformedComplexError
from topovision.skeleton import (
    PointSet,
    SkeletonComplex,
    betti_b1,
    build_beta_skeleton,
    persistent_b1,
)


def random_point_set(seed, n_points=25, width=48, height=48):
    rng = np.random.default_rng(seed)
    xy = rng.uniform(0.0, [width - 1e-9, height - 1e-9], size=(n_points, 2))
    return PointSet([tuple(p) for p in xy], width=width, height=height)


class TestPointSet:
    def test_basic_fields(self):
        ps = PointSet([(1.0, 2.0), (3.5, 4.0)], width=8, height=8)
        assert len(ps) == 2
        assert ps.width == 8 and ps.height == 8
        np.testing.assert_allclose(ps.as_array(), [[1.0, 2.0], [3.5, 4.0]])

    def test_duplicates_within_tolerance_collapse(self):
        ps = PointSet([(1.0, 1.0), (1.0 + 1e-10, 1.0), (3.0, 3.0)], width=8, height=8)
        assert len(ps) == 2

    def test_distinct_points_survive(self):
        ps = PointSet([(1.0, 1.0), (1.0001, 1.0)], width=8, height=8)
        assert len(ps) == 2

    def test_out_of_bounds_rejected(self):
        with pytest.raises(ValueError):
            PointSet([(8.0, 1.0)], width=8, height=8)
        with pytest.raises(ValueError):
            PointSet([(-0.1, 1.0)], width=8, height=8)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            PointSet([(np.nan, 1.0)], width=8, height=8)

    def test_bad_dimensions_rejected(self):
        with pytest.raises(ValueError):
            PointSet([(0.0, 0.0)], width=0, height=8)

    def test_pixel_indices_floor_and_clamp(self):
        ps = PointSet([(2.7, 3.2), (7.999, 7.0)], width=8, height=8)
        assert ps.pixel_indices() == [(3, 2), (7, 7)]

    def test_empty_set_allowed(self):
        assert len(PointSet([], width=4, height=4)) == 0


class TestBuildBetaSkeleton:
    def test_beta_zero_degenerates(self):
        ps = random_point_set(0, n_points=10)
        comp = build_beta_skeleton(ps, 0.0)
        assert comp.edges == ()
        assert comp.component_count == 10
        assert comp.filled_face_count == 0

    def test_two_points_joined_at_boundary_distance(self):
        ps = PointSet([(2.0, 2.0), (3.9, 2.0)], width=8, height=8)
        comp = build_beta_skeleton(ps, 1.0)
        assert comp.edges == ((0, 1),)
        assert comp.component_count == 1

    def test_three_collinear_points_skip_blocked_chord(self):
        ps = PointSet([(1.0, 1.0), (2.0, 1.0), (3.0, 1.0)], width=8, height=8)
        comp = build_beta_skeleton(ps, 1.05)
        assert set(comp.edges) == {(0, 1), (1, 2)}

    def test_negative_beta_rejected(self):
        ps = random_point_set(1, n_points=4)
        with pytest.raises(ValueError):
            build_beta_skeleton(ps, -0.5)

    def test_edges_normalized_no_self_loops(self):
        comp = build_beta_skeleton(random_point_set(2, n_points=30), 6.0)
        for i, j in comp.edges:
            assert i < j
        assert len(set(comp.edges)) == len(comp.edges)

    def test_output_arrays_read_only(self):
        comp = build_beta_skeleton(random_point_set(3, n_points=12), 4.0)
        with pytest.raises(ValueError):
            comp.raster_mask[0, 0] = True
        with pytest.raises(ValueError):
            comp.face_label_mask[0, 0] = 5

    @pytest.mark.parametrize("seed", range(12))
    def test_matches_brute_force_lens_oracle(self, seed):
        rng = np.random.default_rng(seed + 100)
        n = int(rng.integers(5, 41))
        ps = random_point_set(seed + 40, n_points=n)
        beta = float(rng.uniform(0.5, 12.0))
        comp = build_beta_skeleton(ps, beta)
        assert set(comp.edges) == brute_force_beta_edges(list(ps.points), beta)

    def test_component_count_matches_forest_oracle(self):
        for seed in range(8):
            ps = random_point_set(seed, n_points=20)
            comp = build_beta_skeleton(ps, 5.0)
            _, components = spanning_forest_cycle_count(len(ps), comp.edges)
            assert comp.component_count == components


class TestFaces:
    def test_large_square_encloses_one_face(self):
        ps = PointSet(
            [(2.0, 2.0), (2.0, 12.0), (12.0, 2.0), (12.0, 12.0)], width=16, height=16
        )
        comp = build_beta_skeleton(ps, 5.5)
        assert len(comp.edges) == 4
        assert comp.face_ids == (1,)
        assert betti_b1(comp) == 1

    def test_faces_match_flood_fill_oracle(self):
        for seed in (0, 1, 2, 3):
            ps = random_point_set(seed + 300, n_points=18, width=40, height=40)
            comp = build_beta_skeleton(ps, 6.0)
            got = sorted(
                frozenset(zip(*np.nonzero(mask))) for mask in comp.face_masks().values()
            )
            want = sorted(enumerate_faces(list(ps.points), 6.0, 40, 40))
            assert got == want

    def test_face_mask_disjoint_from_raster(self):
        comp = build_beta_skeleton(random_point_set(5, n_points=20), 6.0)
        assert not np.any((comp.face_label_mask > 0) & comp.raster_mask)

    def test_faces_do_not_touch_border(self):
        comp = build_beta_skeleton(random_point_set(6, n_points=20), 8.0)
        border = np.zeros_like(comp.face_label_mask, dtype=bool)
        border[0, :] = border[-1, :] = border[:, 0] = border[:, -1] = True
        assert not np.any((comp.face_label_mask > 0) & border)


class TestBettiB1:
    def test_triangle_counts(self):
        ps = PointSet([(2.0, 2.0), (10.0, 2.0), (6.0, 9.0)], width=16, height=16)
        comp = build_beta_skeleton(ps, 5.0)
        assert comp.component_count == 1
        assert comp.edge_count == 3
        assert betti_b1(comp) == 1

    def test_tree_is_acyclic(self):
        ps = PointSet([(1.0, 1.0), (3.0, 1.0), (5.0, 1.0), (7.0, 1.0)], width=9, height=4)
        comp = build_beta_skeleton(ps, 1.05)
        assert comp.edge_count == 3
        assert betti_b1(comp) == 0

    def test_unit_square_cycle(self):
        ps = PointSet([(2.0, 2.0), (3.0, 2.0), (3.0, 3.0), (2.0, 3.0)], width=6, height=6)
        comp = build_beta_skeleton(ps, 0.55)
        assert len(comp.edges) == 4
        assert betti_b1(comp) == 1

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_spanning_forest_oracle(self, seed):
        rng = np.random.default_rng(seed + 900)
        n = int(rng.integers(5, 35))
        ps = random_point_set(seed + 70, n_points=n)
        beta = float(rng.uniform(1.0, 10.0))
        comp = build_beta_skeleton(ps, beta)
        cycles, _ = spanning_forest_cycle_count(len(ps), comp.edges)
        assert betti_b1(comp) == cycles

    def test_malformed_counts_raise(self):
        ps = PointSet([(1.0, 1.0), (3.0, 1.0)], width=6, height=6)
        bogus = SkeletonComplex(
            beta=1.0,
            points=ps,
            edges=(),
            raster_mask=np.zeros((6, 6), dtype=bool),
            face_label_mask=np.zeros((6, 6), dtype=np.int32),
            component_count=0,
        )
        with pytest.raises(MalformedComplexError):
            betti_b1(bogus)


class TestPersistentB1:
    def test_zero_persistence_equals_base_betti(self):
        for seed in range(6):
            ps = random_point_set(seed + 50, n_points=20)
            assert persistent_b1(ps, 5.0, 0.0) == betti_b1(build_beta_skeleton(ps, 5.0))

    def test_unit_square_example(self):
        ps = PointSet([(2.0, 2.0), (3.0, 2.0), (3.0, 3.0), (2.0, 3.0)], width=6, height=6)
        assert persistent_b1(ps, 0.55, 0.0) == 1

    # seeds chosen so newborn wide-complex holes never outnumber base
    # cycles; the window count is only defined when it is non-negative
    @pytest.mark.parametrize("seed", [832, 837, 839, 841, 843, 845])
    def test_matches_two_radius_flood_fill_oracle(self, seed):
        ps = random_point_set(seed, n_points=14, width=48, height=48)
        got = persistent_b1(ps, 5.0, 2.0)
        want = naive_persistent_b1(list(ps.points), 5.0, 2.0, 48, 48)
        assert got == want

    def test_excess_newborn_holes_raise(self):
        # dense cloud: the wider complex births more holes than the base
        # has cycles, which the non-negative contract must reject
        ps = random_point_set(822, n_points=14, width=48, height=48)
        assert naive_persistent_b1(list(ps.points), 5.0, 2.0, 48, 48) < 0
        with pytest.raises(MalformedComplexError):
            persistent_b1(ps, 5.0, 2.0)

    def test_invalid_parameters_rejected(self):
        ps = random_point_set(7, n_points=5)
        with pytest.raises(ValueError):
            persistent_b1(ps, 0.0, 1.0)
        with pytest.raises(ValueError):
            persistent_b1(ps, 2.0, -1.0)


class TestMonotonicity:
    """Edge growth in beta, restricted to the sub-critical regime.

    Lens blocking can delete edges as beta grows, so global edge-count
    monotonicity is false in general.  Below the minimum pairwise
    distance no lens can contain a blocker, and growth is guaranteed.
    """

    @pytest.mark.parametrize("seed", range(8))
    def test_subcritical_edges_nested(self, seed):
        ps = random_point_set(seed + 600, n_points=15)
        coords = ps.as_array()
        dists = np.linalg.norm(coords[:, None] - coords[None, :], axis=-1)
        d_min = dists[np.triu_indices(len(ps), k=1)].min()
        beta_hi = float(d_min)
        beta_lo = 0.5 * beta_hi
        lo_edges = set(build_beta_skeleton(ps, beta_lo).edges)
        hi_edges = set(build_beta_skeleton(ps, beta_hi).edges)
        assert lo_edges <= hi_edges

    @pytest.mark.parametrize("seed", range(8))
    def test_surviving_lens_edges_persist_generally(self, seed):
        rng = np.random.default_rng(seed)
        ps = random_point_set(seed + 700, n_points=20)
        pts = list(ps.points)
        beta_lo = float(rng.uniform(1.0, 5.0))
        beta_hi = beta_lo + float(rng.uniform(0.5, 4.0))
        hi_edges = set(build_beta_skeleton(ps, beta_hi).edges)
        wide_oracle = brute_force_beta_edges(pts, beta_hi)
        for edge in build_beta_skeleton(ps, beta_lo).edges:
            if edge in wide_oracle:
                assert edge in hi_edges
