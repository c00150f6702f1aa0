import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quasilevel.errors import ShiftNotFound
from quasilevel.lattice import (LatticeShift, Ray, dist_point_ray, find_integer_shift,
                                residual_vector, shift_potential_by_lattice)
from quasilevel.potential import phase_shift

IRR = np.array([1.0, np.sqrt(2), np.sqrt(3)])


def brute_best(ray, delta, min_dist, radius):
    """Nearest-to-origin lattice point within delta of the ray, scanning a whole box."""
    ends = np.vstack([ray.origin, ray.origin + radius * ray.dir])
    lo = np.floor(ends.min(axis=0)) - 1
    hi = np.ceil(ends.max(axis=0)) + 1
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
    dr = dist_point_ray(pts, ray)
    do = np.linalg.norm(pts - ray.origin, axis=1)
    ok = (dr < delta) & (do > min_dist) & (do <= radius)
    if not ok.any():
        return None
    cand = pts[ok]
    order = np.lexsort(tuple(cand.T[::-1]) + (do[ok],))
    return tuple(int(v) for v in cand[order[0]]), float(do[ok][order[0]])


class TestDistance:
    def test_on_ray(self):
        r = Ray([0, 0, 0], [0, 0, 1])
        assert dist_point_ray([0, 0, 5], r) == 0

    def test_perpendicular(self):
        r = Ray([1, 2], [1, 0])
        assert dist_point_ray([1, 3], r) == pytest.approx(1.0)

    def test_behind_one_sided(self):
        r = Ray([0, 0], [1, 0])
        assert dist_point_ray([-3, 0], r) == pytest.approx(3.0)
        assert dist_point_ray([-3, 0], Ray([0, 0], [1, 0], two_sided=True)) == 0.0

    def test_vectorised(self):
        r = Ray.through([0, 0, 0], IRR)
        pts = np.array([[1, 1, 2], [3, 4, 5], [0, 0, 0]])
        np.testing.assert_allclose(dist_point_ray(pts, r), [dist_point_ray(q, r) for q in pts])

    def test_rejects_non_unit(self):
        with pytest.raises(ValueError):
            Ray([0, 0], [1, 1])

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-50, 50), min_size=3, max_size=3))
    def test_line_reflection_symmetry(self, p):
        ray = Ray.through([0.5, -1.0, 2.0], IRR, two_sided=True)
        p = np.asarray(p)
        w = p - ray.origin
        foot = ray.origin + (w @ ray.dir) * ray.dir
        mirrored = 2 * foot - p
        assert dist_point_ray(p, ray) == pytest.approx(dist_point_ray(mirrored, ray), abs=1e-9)


class TestFindShift:
    def test_axis_ray(self):
        s = find_integer_shift(Ray([0, 0, 0], [1, 0, 0]), 0.1, min_dist=5)
        assert s.m == (6, 0, 0)
        assert s.dist_to_ray == 0.0

    @pytest.mark.parametrize("delta", [0.2, 0.1, 0.05])
    def test_irrational_direction(self, delta):
        ray = Ray.through([0, 0, 0], IRR)
        s = find_integer_shift(ray, delta, min_dist=20, max_steps=10 ** 6)
        assert s.dist_to_ray < delta
        assert s.dist_to_origin > 20
        assert abs(dist_point_ray(np.array(s.m, dtype=float), ray) - s.dist_to_ray) <= 1e-12
        want = brute_best(ray, delta, 20, s.dist_to_origin + 2)
        assert want is not None
        assert s.m == want[0]

    def test_budget_exhausted(self):
        with pytest.raises(ShiftNotFound) as ei:
            find_integer_shift(Ray.through([0, 0, 0], IRR), 0.05, min_dist=1e9, max_steps=1000)
        assert ei.value.steps == 1000

    def test_overflow(self):
        ray = Ray.through([2.0 ** 62, 0, 0], IRR)
        with pytest.raises(OverflowError):
            find_integer_shift(ray, 0.1, max_steps=10)

    def test_two_sided_finds_either_direction(self):
        ray = Ray.through([0.3, 0.2, 0.1], IRR, two_sided=True)
        s = find_integer_shift(ray, 0.1, min_dist=10)
        assert s.dist_to_ray < 0.1 and s.dist_to_origin > 10

    def test_deterministic_chunking(self):
        ray = Ray.through([0, 0, 0], IRR)
        a = find_integer_shift(ray, 0.1, min_dist=10)
        b = find_integer_shift(ray, 0.1, min_dist=10, chunk=7)
        assert a == b

    def test_success_persists_with_budget(self):
        ray = Ray.through([0, 0, 0], IRR)
        found = []
        for budget in (10 ** 3, 10 ** 4, 10 ** 5):
            try:
                found.append(find_integer_shift(ray, 0.02, min_dist=10, max_steps=budget))
            except ShiftNotFound:
                found.append(None)
        first = next(i for i, f in enumerate(found) if f is not None)
        assert all(f is not None for f in found[first:])
        assert len({f.m for f in found[first:]}) == 1

    def test_shift_dict(self):
        s = LatticeShift((1, 2), 0.5, 2.2)
        assert s.to_dict() == {"m": [1, 2], "dist_to_ray": 0.5, "dist_to_origin": 2.2}


class TestShiftPotential:
    def test_identity(self, star5, rng):
        ray = Ray.through(np.zeros(5), [1, np.sqrt(2), np.sqrt(3), np.sqrt(5), np.sqrt(7)])
        s = find_integer_shift(ray, 0.3, min_dist=5)
        q = shift_potential_by_lattice(star5, s)
        r = rng.uniform(-30, 30, size=(100, 2))
        np.testing.assert_allclose(q.values(*r.T), star5.values(*r.T), atol=1e-12)

    def test_any_integer(self, star5, rng):
        for m in itertools.islice(itertools.product(range(-3, 4), repeat=5), 0, 3000, 500):
            q = shift_potential_by_lattice(star5, LatticeShift(m, 0.0, 0.0))
            r = rng.uniform(-30, 30, size=(100, 2))
            np.testing.assert_allclose(q.values(*r.T), star5.values(*r.T), atol=1e-12)

    def test_dimension_mismatch(self, star5):
        with pytest.raises(ValueError):
            shift_potential_by_lattice(star5, LatticeShift((1, 2), 0.0, 0.0))

    def test_residual_moves_little(self, star5, rng):
        ray = Ray.through(np.zeros(5), [1, np.sqrt(2), np.sqrt(3), np.sqrt(5), np.sqrt(7)])
        delta = 0.3
        s = find_integer_shift(ray, delta, min_dist=5)
        h = residual_vector(s, ray)
        assert np.linalg.norm(h) == pytest.approx(s.dist_to_ray, abs=1e-12)
        q = phase_shift(shift_potential_by_lattice(star5, s), h)
        r = rng.uniform(-30, 30, size=(500, 2))
        diff = np.abs(q.values(*r.T) - star5.values(*r.T))
        assert diff.max() <= star5.f.gradient_bound() * delta + 1e-9
