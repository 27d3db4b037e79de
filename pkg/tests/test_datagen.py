import math

import numpy as np
import pytest
from scipy import stats

from adaptrim import OracleConfig, OutlierFreeBound, brute_force_mts, greedy_trim
from adaptrim.datagen import (
    BUNNY_EXTENTS,
    LinearScenario,
    RegistrationScenario,
    chi2_bound,
    chi2_quantile,
    cloud_diameter,
    downsample,
    gen_linear,
    gen_registration,
    load_ply,
)
from adaptrim.exceptions import ParseError, TargetTooLarge, UnsupportedFormat


class TestChi2Quantile:
    def test_two_dof_closed_form(self):
        assert chi2_quantile(0.99, 2) == pytest.approx(-2.0 * math.log(0.01), abs=1e-10)
        assert chi2_quantile(0.99, 2) == pytest.approx(9.210340371976, abs=1e-10)

    @pytest.mark.parametrize("p, dof, expected", [(0.99, 1, 6.6349), (0.5, 1, 0.4549)])
    def test_one_dof(self, p, dof, expected):
        assert chi2_quantile(p, dof) == pytest.approx(expected, abs=1e-4)

    @pytest.mark.parametrize("p", [1e-6, 0.01, 0.5, 0.9, 0.99, 0.999999])
    @pytest.mark.parametrize("dof", [1, 2, 3, 7, 30])
    def test_inverts_cdf(self, p, dof):
        q = chi2_quantile(p, dof)
        assert stats.chi2.cdf(q, dof) == pytest.approx(p, abs=1e-10)
        assert q == pytest.approx(stats.chi2.ppf(p, dof), rel=1e-9)

    def test_monte_carlo(self):
        rng = np.random.default_rng(0)
        z2 = rng.standard_normal(10_000_000) ** 2
        for p in (0.5, 0.99):
            # 1e7 samples give a CDF standard error near 3e-5 at p = 0.99
            assert np.mean(z2 <= chi2_quantile(p, 1)) == pytest.approx(p, abs=3e-4)

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
    def test_domain(self, p):
        with pytest.raises(ValueError):
            chi2_quantile(p, 1)

    def test_bad_dof(self):
        with pytest.raises(ValueError):
            chi2_quantile(0.5, 0)

    def test_bound_scaling(self):
        bound = chi2_bound(0.1, dof=1, p=0.99)
        assert bound.per_measurement_eps == pytest.approx(6.6349 * 0.01, rel=1e-4)
        assert bound.budget(4) == pytest.approx(4 * bound.per_measurement_eps)


class TestRegistrationGenerator:
    def test_no_outliers_within_noise(self):
        problem, truth = gen_registration(RegistrationScenario(outlier_fraction=0.0, seed=3))
        assert truth.outliers == set()
        diff = problem.matched_target - truth.transform.apply(problem.matched_source)
        assert np.all(np.abs(diff) <= 6 * truth.noise_sigma)
        assert np.all(problem.residuals(truth.transform) <= 3 * (6 * truth.noise_sigma) ** 2)

    def test_noise_scale(self):
        problem, truth = gen_registration(RegistrationScenario(seed=1))
        assert truth.diameter == pytest.approx(cloud_diameter(problem.matched_source))
        assert truth.noise_sigma == pytest.approx(2.5e-4 * truth.diameter)

    def test_ninety_percent(self):
        problem, truth = gen_registration(RegistrationScenario(n_points=453, outlier_fraction=0.9, seed=0))
        assert len(truth.outliers) == 408
        lo, hi = truth.bbox
        src = problem.matched_source
        assert np.array_equal(lo, src.min(axis=0)) and np.array_equal(hi, src.max(axis=0))
        tgt = problem.matched_target
        for i in truth.outliers:
            assert np.all(tgt[i] >= lo) and np.all(tgt[i] <= hi)

    def test_deterministic(self):
        scen = RegistrationScenario(n_points=50, outlier_fraction=0.3, seed=12)
        p1, t1 = gen_registration(scen)
        p2, t2 = gen_registration(scen)
        assert np.array_equal(p1.matched_target, p2.matched_target)
        assert np.array_equal(p1.matched_source, p2.matched_source)
        assert t1.outliers == t2.outliers
        assert np.array_equal(t1.transform.rotation, t2.transform.rotation)

    def test_planted_transform_is_rotation(self):
        _, truth = gen_registration(RegistrationScenario(n_points=20, seed=4))
        assert truth.transform.is_valid()

    def test_synthetic_cloud_extents(self):
        problem, _ = gen_registration(RegistrationScenario(seed=0))
        src = problem.matched_source
        extent = src.max(axis=0) - src.min(axis=0)
        assert extent == pytest.approx(BUNNY_EXTENTS, rel=1e-9)
        assert np.allclose(src.mean(axis=0), 0.0, atol=1e-12)

    def test_external_source_downsampled(self):
        cloud = np.random.default_rng(0).uniform(size=(1000, 3))
        problem, _ = gen_registration(RegistrationScenario(n_points=453, source=cloud, seed=0))
        assert problem.measurement_count == 453
        assert len(np.unique(problem.matched_source, axis=0)) == 453

    def test_external_source_too_small(self):
        with pytest.raises(TargetTooLarge):
            gen_registration(RegistrationScenario(n_points=20, source=np.zeros((10, 3))))

    @pytest.mark.parametrize("kwargs", [dict(n_points=3), dict(outlier_fraction=1.5),
                                        dict(noise_sigma_frac=-1.0)])
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            RegistrationScenario(**kwargs)


class TestLinearGenerator:
    def test_noiseless_consistent(self):
        problem, truth = gen_linear(LinearScenario(n=2, m=8, inlier_noise_sigma=0.0, seed=0))
        assert truth.outliers == set()
        out, _ = brute_force_mts(problem, OracleConfig(OutlierFreeBound(1e-12)))
        assert out == set()

    def test_deterministic(self):
        scen = LinearScenario(n=3, m=10, outlier_fraction=0.3, seed=5)
        (p1, t1), (p2, t2) = gen_linear(scen), gen_linear(scen)
        assert np.array_equal(p1.A, p2.A) and np.array_equal(p1.y, p2.y)
        assert t1.outliers == t2.outliers

    def test_outliers_clear_budget(self):
        floor = chi2_quantile(0.99, 1)
        for seed in range(20):
            problem, truth = gen_linear(LinearScenario(n=2, m=12, n_outliers=4, seed=seed,
                                                       outlier_magnitude_range=(0.0, 0.3)))
            err = problem.y - problem.A @ truth.x
            for i in truth.outliers:
                assert err[i] ** 2 / truth.noise_sigma**2 > floor

    def test_planted_count(self):
        assert LinearScenario(m=12, outlier_fraction=0.25).planted_count == 3
        assert LinearScenario(m=12, outlier_fraction=0.25, n_outliers=1).planted_count == 1

    def test_large_outliers_found_by_greedy(self):
        for seed in range(10):
            problem, truth = gen_linear(LinearScenario(n=1, m=12, n_outliers=3, seed=seed,
                                                       inlier_noise_sigma=0.1,
                                                       outlier_magnitude_range=(5.0, 10.0)))
            assert greedy_trim(problem, 3) == truth.outliers
            out, _ = brute_force_mts(problem, OracleConfig(chi2_bound(0.1)))
            assert out == truth.outliers

    @pytest.mark.parametrize("kwargs", [dict(n=3, m=2), dict(n=0), dict(inlier_noise_sigma=-1),
                                        dict(outlier_magnitude_range=(2.0, 1.0)), dict(n_outliers=20)])
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            LinearScenario(**kwargs)


class TestDownsample:
    def test_identity(self):
        pts = np.arange(30.0).reshape(10, 3)
        assert np.array_equal(downsample(pts, 10, seed=1), pts)

    def test_size_and_uniqueness(self):
        pts = np.random.default_rng(0).uniform(size=(2000, 3))
        out = downsample(pts, 453, seed=3)
        assert out.shape == (453, 3)
        assert len(np.unique(out, axis=0)) == 453

    def test_deterministic_and_ordered(self):
        pts = np.arange(300.0).reshape(100, 3)
        a, b = downsample(pts, 20, seed=7), downsample(pts, 20, seed=7)
        assert np.array_equal(a, b)
        assert np.all(np.diff(a[:, 0]) > 0)

    def test_too_large(self):
        with pytest.raises(TargetTooLarge):
            downsample(np.zeros((3, 3)), 4)


PLY_BASIC = """ply
format ascii 1.0
comment tiny
element vertex 3
property float x
property float y
property float z
end_header
0 0 0
1 0 0
0 1 0.5
"""

PLY_NORMALS = """ply
format ascii 1.0
element vertex 2
property float nx
property float x
property float y
property float ny
property float z
property float nz
element face 1
property list uchar int vertex_indices
end_header
9 1 2 9 3 9
9 4 5 9 6 9
3 0 1 1
"""


class TestLoadPly:
    def _write(self, tmp_path, text, name="c.ply"):
        path = tmp_path / name
        path.write_text(text)
        return path

    def test_basic(self, tmp_path):
        pts = load_ply(self._write(tmp_path, PLY_BASIC))
        assert np.array_equal(pts, [[0, 0, 0], [1, 0, 0], [0, 1, 0.5]])

    def test_extra_properties(self, tmp_path):
        pts = load_ply(self._write(tmp_path, PLY_NORMALS))
        assert np.array_equal(pts, [[1, 2, 3], [4, 5, 6]])

    def test_missing_end_header(self, tmp_path):
        text = PLY_BASIC.split("end_header")[0]
        with pytest.raises(ParseError, match="end_header"):
            load_ply(self._write(tmp_path, text))

    def test_binary(self, tmp_path):
        text = PLY_BASIC.replace("ascii", "binary_little_endian")
        with pytest.raises(UnsupportedFormat):
            load_ply(self._write(tmp_path, text))

    def test_bad_magic(self, tmp_path):
        with pytest.raises(ParseError, match="line 1"):
            load_ply(self._write(tmp_path, "plx\n"))

    def test_truncated_body(self, tmp_path):
        with pytest.raises(ParseError, match="file ended"):
            load_ply(self._write(tmp_path, PLY_BASIC.rsplit("0 1 0.5", 1)[0]))

    def test_non_numeric(self, tmp_path):
        with pytest.raises(ParseError, match="line 10"):
            load_ply(self._write(tmp_path, PLY_BASIC.replace("1 0 0", "1 a 0")))

    def test_missing_coordinate(self, tmp_path):
        text = PLY_BASIC.replace("property float z\n", "").replace("0 1 0.5", "0 1")
        with pytest.raises(ParseError, match="x, y, z"):
            load_ply(self._write(tmp_path, text.replace("0 0 0", "0 0").replace("1 0 0", "1 0")))
