import numpy as np
import pytest

import parapack as pp
from conftest import linear_curve


class TestOcvCurve:
    def test_interpolates_between_table_points(self):
        curve = pp.OcvCurve.from_points([(0.0, 3.0), (0.5, 3.5), (1.0, 4.0)])
        assert curve.eval(0.25) == pytest.approx(3.25, abs=1e-12)
        assert curve(0.75) == pytest.approx(3.75, abs=1e-12)

    def test_exact_at_table_points(self, nmc_curve):
        for s, v in zip(nmc_curve.soc, nmc_curve.ocv):
            assert nmc_curve.eval(s) == pytest.approx(v, abs=1e-12)

    def test_vector_eval(self, nmc_curve):
        s = np.linspace(0.0, 1.0, 17)
        out = nmc_curve.eval(s)
        assert out.shape == s.shape
        assert np.all(np.diff(out) >= 0)

    def test_builtin_curves_monotone_nondecreasing(self, nmc_curve, lfp_curve):
        for curve in (nmc_curve, lfp_curve):
            assert np.all(np.diff(curve.ocv) >= 0)
            assert curve.soc[0] == 0.0 and curve.soc[-1] == 1.0

    def test_secant_slope_two_point(self):
        curve = linear_curve(3.0, 4.2)
        assert curve.slope(0.2, 0.8) == pytest.approx(1.2, rel=1e-12)
        assert curve.slope(0.4, 0.6) == pytest.approx(1.2, rel=1e-12)

    def test_secant_slope_matches_finite_difference(self, rng, nmc_curve):
        for _ in range(20):
            lo, hi = np.sort(rng.uniform(0.0, 1.0, size=2))
            if hi - lo < 1e-3:
                continue
            expected = (nmc_curve.eval(hi) - nmc_curve.eval(lo)) / (hi - lo)
            assert nmc_curve.slope(lo, hi) == pytest.approx(expected, rel=1e-12)

    def test_slope_rejects_empty_window(self, nmc_curve):
        with pytest.raises(ValueError):
            nmc_curve.slope(0.6, 0.4)
        with pytest.raises(ValueError):
            nmc_curve.slope(0.5, 0.5)

    def test_eval_rejects_out_of_range(self, nmc_curve):
        with pytest.raises(ValueError):
            nmc_curve.eval(-0.01)
        with pytest.raises(ValueError):
            nmc_curve.eval(1.01)

    def test_rejects_bad_tables(self):
        with pytest.raises(ValueError):
            pp.OcvCurve([0.0, 0.5, 0.5, 1.0], [3.0, 3.2, 3.3, 3.9])  # repeat
        with pytest.raises(ValueError):
            pp.OcvCurve([0.1, 1.0], [3.0, 4.0])                      # no soc=0
        with pytest.raises(ValueError):
            pp.OcvCurve([0.0, 0.9], [3.0, 4.0])                      # no soc=1
        with pytest.raises(ValueError):
            pp.OcvCurve([0.0, 1.0], [3.0, np.nan])

    def test_csv_round_trip(self, tmp_path):
        path = tmp_path / "curve.csv"
        path.write_text("soc,ocv_volts\n0.0,3.0\n0.5,3.6\n1.0,4.1\n")
        curve = pp.OcvCurve.from_csv(path)
        assert curve.eval(0.5) == pytest.approx(3.6)

    def test_csv_rejects_wrong_header(self, tmp_path):
        path = tmp_path / "curve.csv"
        path.write_text("x,y\n0.0,3.0\n1.0,4.1\n")
        with pytest.raises(ValueError):
            pp.OcvCurve.from_csv(path)

    def test_builtin_unknown_chemistry(self):
        with pytest.raises(ValueError):
            pp.builtin_ocv("nca")

    def test_equality_and_hash(self, nmc_curve):
        again = pp.builtin_ocv("nmc")
        assert nmc_curve == again
        assert hash(nmc_curve) == hash(again)
        assert nmc_curve != pp.builtin_ocv("lfp")


class TestCellParams:
    def test_validation(self, nmc_curve):
        with pytest.raises(ValueError):
            pp.CellParams(-1.0, 0.1, (), nmc_curve)
        with pytest.raises(ValueError):
            pp.CellParams(100.0, 0.0, (), nmc_curve)
        with pytest.raises(ValueError):
            pp.CellParams(100.0, 0.1, ((-0.1, 10.0),), nmc_curve)
        with pytest.raises(ValueError):
            pp.CellParams(100.0, 0.1, (), None)

    def test_without_rc(self, nmc_cell_rc):
        reduced = nmc_cell_rc.without_rc()
        assert reduced.n_rc == 0
        assert reduced.q == nmc_cell_rc.q
        assert reduced.r_s == nmc_cell_rc.r_s
        assert reduced.ocv == nmc_cell_rc.ocv


class TestEigenvalue:
    def test_unit_slope_values(self, nmc_cell, lfp_cell):
        # with gamma=1 the eigenvalue is -1/(Q Rs); characterized values
        assert pp.cell_eigenvalue(nmc_cell, 1.0) == pytest.approx(
            -1.0 / (9925.0 * 0.102), rel=1e-12)
        assert pp.cell_eigenvalue(lfp_cell, 1.0) == pytest.approx(
            -1.0 / (4579.0 * 0.261), rel=1e-12)

    def test_scales_linearly_in_gamma(self, rng, nmc_cell):
        for _ in range(10):
            g = float(rng.uniform(0.05, 3.0))
            k = float(rng.uniform(0.1, 10.0))
            assert pp.cell_eigenvalue(nmc_cell, k * g) == pytest.approx(
                k * pp.cell_eigenvalue(nmc_cell, g), rel=1e-12)

    def test_inverse_in_q_and_rs(self, rng, nmc_curve):
        for _ in range(10):
            q = float(rng.uniform(1e3, 2e4))
            rs = float(rng.uniform(0.05, 0.5))
            k = float(rng.uniform(0.5, 4.0))
            a = pp.cell_eigenvalue(pp.CellParams(q, rs, (), nmc_curve), 1.0)
            b = pp.cell_eigenvalue(pp.CellParams(k * q, rs, (), nmc_curve), 1.0)
            assert b == pytest.approx(a / k, rel=1e-12)

    def test_zero_gamma_gives_zero(self, nmc_cell):
        assert pp.cell_eigenvalue(nmc_cell, 0.0) == 0.0

    def test_negative_for_positive_slope(self, nmc_cell):
        assert pp.cell_eigenvalue(nmc_cell, 0.75) < 0.0

    def test_rejects_nonfinite_gamma(self, nmc_cell):
        with pytest.raises(ValueError):
            pp.cell_eigenvalue(nmc_cell, np.nan)
