import numpy as np
import pytest

from hsiseg import (
    ClickSet,
    HyperCube,
    ScfMethod,
    SimilarityMap,
    ValidationError,
    equalize,
    pcc,
    pcc_similarity,
    sa_similarity,
    scf_map,
    spectral_angle,
)


def cube_from(data):
    data = np.asarray(data, dtype=np.float32)
    wl = np.linspace(400, 700, data.shape[2])
    return HyperCube(wavelengths=wl, data=data)


class TestSpectralAngle:
    def test_orthogonal(self):
        assert spectral_angle([1, 0], [0, 1]) == pytest.approx(np.pi / 2, rel=1e-15)

    def test_identity_exact(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            s = rng.uniform(0.1, 5, size=rng.integers(1, 20))
            assert spectral_angle(s, s) == 0.0

    def test_45_degrees(self):
        assert spectral_angle([1, 1], [1, 0]) == pytest.approx(np.pi / 4, rel=1e-12)

    def test_errors(self):
        with pytest.raises(ValidationError, match="zero-norm"):
            spectral_angle([0, 0], [1, 0])
        with pytest.raises(ValidationError, match="length mismatch"):
            spectral_angle([1, 0], [1, 0, 0])


class TestSaSimilarity:
    def test_identity(self):
        assert sa_similarity([3.0, 1.0, 2.0], [3.0, 1.0, 2.0]) == 1.0

    def test_orthogonal(self):
        assert sa_similarity([1, 0], [0, 1]) == 0.0

    def test_halfway(self):
        # cos(theta) = 1/sqrt(2) -> theta = pi/4 -> 1 - (pi/4)/(pi/2) = 0.5
        assert sa_similarity([1, 1], [1, 0]) == pytest.approx(0.5, abs=1e-12)

    def test_scale_invariance(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            s = rng.uniform(0.01, 1, size=16)
            t = rng.uniform(0.01, 1, size=16)
            base = sa_similarity(s, t)
            for c in (1e-3, 0.37, 2.0, 815.0, 1e3):
                assert abs(sa_similarity(c * s, t) - base) < 1e-6

    def test_symmetry(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            s, t = rng.uniform(0.01, 2, size=(2, 12))
            assert abs(sa_similarity(s, t) - sa_similarity(t, s)) < 1e-9

    def test_one_iff_positive_multiple(self):
        s = np.array([0.5, 1.25, 0.75])
        assert sa_similarity(2.0 * s, s) == 1.0  # power-of-two scaling is exact
        assert sa_similarity(3.7 * s, s) > 1.0 - 1e-12
        assert sa_similarity(s + np.array([0.0, 0.0, 0.5]), s) < 1.0 - 1e-6


class TestPcc:
    def test_exact_positive_linear(self):
        assert pcc([1, 2, 3], [2, 4, 6]) == 1.0

    def test_exact_negative_linear(self):
        assert pcc([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0, abs=1e-12)

    def test_half(self):
        # two-pass by hand: centered dot = 1, both norms sqrt(2) -> r = 0.5
        assert pcc([1, 2, 3], [1, 3, 2]) == pytest.approx(0.5, abs=1e-12)

    def test_affine_invariance_and_sign(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            s, t = rng.uniform(0, 1, size=(2, 10))
            base = pcc(s, t)
            for a, b in ((2.0, 0.0), (0.5, 3.0), (117.0, -20.0)):
                assert abs(pcc(a * s + b, t) - base) < 1e-6
            assert abs(pcc(-s, t) + base) < 1e-6

    def test_symmetry(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            s, t = rng.uniform(0, 1, size=(2, 10))
            assert abs(pcc(s, t) - pcc(t, s)) < 1e-9

    def test_errors(self):
        with pytest.raises(ValidationError, match="zero-variance"):
            pcc([2, 2, 2], [1, 2, 3])
        with pytest.raises(ValidationError, match="at least two"):
            pcc([1.0], [2.0])

    def test_similarity_mapping(self):
        assert pcc_similarity([1, 2, 3], [2, 4, 6]) == 1.0
        assert pcc_similarity([1, 2, 3], [3, 2, 1]) == pytest.approx(0.0, abs=1e-12)
        assert pcc_similarity([1, 2, 3], [1, 3, 2]) == pytest.approx(0.75, abs=1e-12)


class TestEqualize:
    def test_three_pixel_cdf(self):
        m = equalize(SimilarityMap(np.array([[0.1, 0.5, 0.9]])))
        assert m.data.tolist() == [[1 / 3, 2 / 3, 1.0]]

    def test_constant_map(self):
        m = equalize(SimilarityMap(np.full((3, 3), 0.42)))
        assert (m.data == 1.0).all()

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(5)
        values = rng.uniform(0, 1, size=(8, 8))
        base = equalize(SimilarityMap(values))
        cubed = equalize(SimilarityMap(values**3))
        assert np.array_equal(base.data, cubed.data)

    def test_rank_preservation_with_ties(self):
        rng = np.random.default_rng(6)
        values = np.round(rng.uniform(0, 1, size=(10, 10)), 1)  # force ties
        eq = equalize(SimilarityMap(values)).data
        for a in range(20):
            i, j = rng.integers(0, 100, size=2)
            vi, vj = values.flat[i], values.flat[j]
            ei, ej = eq.flat[i], eq.flat[j]
            if vi < vj:
                assert ei < ej
            elif vi == vj:
                assert ei == ej

    def test_output_in_unit_interval_exclusive_zero(self):
        rng = np.random.default_rng(7)
        eq = equalize(SimilarityMap(rng.uniform(0, 1, size=(9, 9)))).data
        assert eq.min() > 0.0 and eq.max() == 1.0


def scalar_reference_map(cube, clicks, method):
    """Per-pixel scalar loop, the independent oracle for the vectorized kernel."""
    refs = [cube.spectrum(c.row, c.col) for c in clicks.positives()]
    out = np.zeros((cube.height, cube.width))
    for r in range(cube.height):
        for c in range(cube.width):
            s = cube.spectrum(r, c)
            best = 0.0
            for ref in refs:
                if method is ScfMethod.SA:
                    if np.linalg.norm(s) == 0.0:
                        sim = 0.0
                    else:
                        sim = sa_similarity(s, ref)
                else:
                    if np.std(s) == 0.0:
                        sim = 0.5
                    else:
                        sim = pcc_similarity(s, ref)
                best = max(best, sim)
            out[r, c] = best
    return out


class TestScfMap:
    def test_self_similarity_exactly_one(self):
        rng = np.random.default_rng(8)
        cube = cube_from(rng.uniform(0.1, 1, size=(6, 6, 5)))
        for method in ScfMethod:
            m = scf_map(cube, ClickSet.of((2, 3)), method)
            assert m.data[2, 3] == 1.0

    def test_two_clicks_is_pointwise_max(self):
        rng = np.random.default_rng(9)
        cube = cube_from(rng.uniform(0.1, 1, size=(7, 5, 4)))
        a = scf_map(cube, ClickSet.of((0, 0)), ScfMethod.SA)
        b = scf_map(cube, ClickSet.of((6, 4)), ScfMethod.SA)
        both = scf_map(cube, ClickSet.of((0, 0), (6, 4)), ScfMethod.SA)
        assert np.array_equal(both.data, np.maximum(a.data, b.data))

    def test_scaled_cube_is_all_ones(self):
        rng = np.random.default_rng(10)
        base = rng.uniform(0.1, 1, size=5)
        factors = rng.uniform(0.2, 4.0, size=(6, 6))
        cube = cube_from(base[None, None, :] * factors[:, :, None])
        m = scf_map(cube, ClickSet.of((3, 3)), ScfMethod.SA)
        assert np.abs(m.data - 1.0).max() < 1e-6

    def test_negative_clicks_ignored(self):
        rng = np.random.default_rng(11)
        cube = cube_from(rng.uniform(0.1, 1, size=(5, 5, 4)))
        pos_only = scf_map(cube, ClickSet.of((1, 1)), ScfMethod.PCC)
        with_neg = scf_map(cube, ClickSet.of((1, 1), (3, 3, False)), ScfMethod.PCC)
        assert np.array_equal(pos_only.data, with_neg.data)

    def test_click_errors(self):
        data = np.ones((3, 3, 4), dtype=np.float32)
        data[0, 0] = 0.0
        cube = cube_from(data)
        with pytest.raises(ValidationError, match="zero-norm"):
            scf_map(cube, ClickSet.of((0, 0)), ScfMethod.SA)
        with pytest.raises(ValidationError, match="zero-variance"):
            scf_map(cube, ClickSet.of((1, 1)), ScfMethod.PCC)  # constant spectrum
        with pytest.raises(ValidationError, match="positive click"):
            scf_map(cube, ClickSet.of((1, 1, False)), ScfMethod.SA)
        with pytest.raises(ValidationError, match="positive click"):
            scf_map(cube, ClickSet(), ScfMethod.SA)

    def test_degenerate_candidate_pixels(self):
        rng = np.random.default_rng(12)
        data = rng.uniform(0.5, 1, size=(4, 4, 4)).astype(np.float32)
        data[0, 0] = 0.0  # dead pixel
        data[0, 1] = 0.7  # flat spectrum
        cube = cube_from(data)
        sa = scf_map(cube, ClickSet.of((2, 2)), ScfMethod.SA)
        assert sa.data[0, 0] == 0.0
        m = scf_map(cube, ClickSet.of((2, 2)), ScfMethod.PCC)
        assert m.data[0, 1] == 0.5

    def test_kernel_matches_scalar_reference(self):
        rng = np.random.default_rng(13)
        for trial in range(5):
            cube = cube_from(rng.uniform(0.05, 1, size=(8, 8, 5)))
            clicks = ClickSet.of((1, 1), (6, 2))
            for method in (ScfMethod.SA, ScfMethod.PCC):
                got = scf_map(cube, clicks, method)
                want = scalar_reference_map(cube, clicks, method)
                assert np.abs(got.data - want).max() < 1e-6

    def test_thread_count_does_not_change_results(self):
        rng = np.random.default_rng(14)
        cube = cube_from(rng.uniform(0.05, 1, size=(16, 11, 6)))
        clicks = ClickSet.of((3, 3), (10, 9))
        for method in ScfMethod:
            single = scf_map(cube, clicks, method, threads=1)
            multi = scf_map(cube, clicks, method, threads=4)
            assert single.data.tobytes() == multi.data.tobytes()

    def test_multi_click_monotone(self):
        rng = np.random.default_rng(15)
        cube = cube_from(rng.uniform(0.05, 1, size=(9, 9, 5)))
        subset = ClickSet.of((1, 1), (4, 4))
        superset = ClickSet.of((1, 1), (4, 4), (7, 2))
        for method in (ScfMethod.SA, ScfMethod.PCC):
            small = scf_map(cube, subset, method)
            big = scf_map(cube, superset, method)
            assert (big.data >= small.data).all()

    def test_equalized_variants_equalize_the_max_map(self):
        rng = np.random.default_rng(16)
        cube = cube_from(rng.uniform(0.05, 1, size=(6, 7, 5)))
        clicks = ClickSet.of((2, 2), (5, 6))
        raw = scf_map(cube, clicks, ScfMethod.SA)
        eq = scf_map(cube, clicks, ScfMethod.SA_EQUALIZED)
        assert np.array_equal(eq.data, equalize(raw).data)

    def test_shading_invariance_of_sa_map(self):
        rng = np.random.default_rng(17)
        base = cube_from(rng.uniform(0.1, 1, size=(16, 16, 8)))
        field = rng.uniform(0.2, 1.5, size=(16, 16))
        shaded = cube_from(base.data.astype(np.float64) * field[:, :, None])
        clicks = ClickSet.of((4, 4), (12, 9))
        a = scf_map(base, clicks, ScfMethod.SA)
        b = scf_map(shaded, clicks, ScfMethod.SA)
        assert np.abs(a.data - b.data).max() < 1e-5
