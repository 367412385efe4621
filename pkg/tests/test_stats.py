import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bidlab.errors import InputError, NumericalError
from bidlab.stats import (
    correlate_matrices,
    correlate_term_vectors,
    flatten,
    p_value_for_r,
    pearson,
    student_t_sf,
)

mpmath.mp.dps = 40


def t_two_sided_quad(t, df):
    """2 * integral of the Student-t density from |t| to infinity, in high precision."""
    nu = mpmath.mpf(df)
    c = mpmath.gamma((nu + 1) / 2) / (mpmath.sqrt(nu * mpmath.pi) * mpmath.gamma(nu / 2))
    f = lambda x: c * (1 + x * x / nu) ** (-(nu + 1) / 2)  # noqa: E731
    return float(2 * mpmath.quad(f, [abs(mpmath.mpf(t)), abs(mpmath.mpf(t)) + 10, mpmath.inf]))


def pearson_fsum(x, y):
    n = len(x)
    mx, my = math.fsum(x) / n, math.fsum(y) / n
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = math.fsum((a - mx) ** 2 for a in x)
    syy = math.fsum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def sym(rng, n):
    v = rng.random((n, n))
    v = (v + v.T) / 2
    np.fill_diagonal(v, 1.0)
    return v


class TestStudentT:
    def test_zero(self):
        assert student_t_sf(0.0, 5) == 1.0

    def test_cauchy_quartile(self):
        assert student_t_sf(1.0, 1) == pytest.approx(0.5, abs=1e-14)

    def test_table_value(self):
        assert student_t_sf(2.2281, 10) == pytest.approx(0.05, abs=5e-5)

    @pytest.mark.parametrize("df", [1, 2, 5, 10, 30, 100, 3598, 13922])
    @pytest.mark.parametrize("t", [0.01, 0.3, 1.0, 1.96, 2.5, 4.0, 8.0, 20.0])
    def test_quadrature_oracle(self, t, df):
        assert student_t_sf(t, df) == pytest.approx(t_two_sided_quad(t, df), abs=1e-12)

    def test_symmetric_in_sign(self):
        assert student_t_sf(-2.0, 7) == student_t_sf(2.0, 7)

    def test_bad_df(self):
        with pytest.raises(InputError):
            student_t_sf(1.0, 0)


class TestPearson:
    @pytest.mark.parametrize("seed", range(5))
    def test_random_symmetric_pair(self, seed):
        rng = np.random.default_rng(seed)
        a, b = sym(rng, 10), sym(rng, 10)
        res = correlate_matrices(a, b)
        assert res.n == 100 and res.df == 98
        assert res.r == pytest.approx(pearson_fsum(a.ravel().tolist(), b.ravel().tolist()), abs=1e-12)
        t = res.r * math.sqrt(res.df / (1 - res.r**2))
        assert res.p_value == pytest.approx(t_two_sided_quad(t, res.df), abs=1e-9)

    def test_matches_scipy(self):
        from scipy.stats import pearsonr

        rng = np.random.default_rng(8)
        x, y = rng.random(500), rng.random(500)
        ref = pearsonr(x, y)
        res = correlate_matrices(x.reshape(20, 25), y.reshape(20, 25))
        assert res.r == pytest.approx(ref.statistic, abs=1e-12)
        assert res.p_value == pytest.approx(ref.pvalue, abs=1e-12)

    def test_self(self):
        a = sym(np.random.default_rng(1), 6)
        res = correlate_matrices(a, a)
        assert res.r == 1.0 and res.p_value == 0.0

    @pytest.mark.parametrize("n, df", [(118, 13922), (60, 3598)])
    def test_full_mode_df(self, n, df):
        rng = np.random.default_rng(n)
        assert correlate_matrices(sym(rng, n), sym(rng, n)).df == df

    def test_modes(self):
        a = np.arange(16.0).reshape(4, 4)
        assert flatten(a, "full").size == 16
        assert flatten(a, "off-diagonal").size == 12
        assert flatten(a, "upper-triangle").tolist() == [1, 2, 3, 6, 7, 11]
        with pytest.raises(InputError):
            flatten(a, "diagonal")
        with pytest.raises(InputError):
            flatten(np.ones((2, 3)), "off-diagonal")

    def test_zero_variance(self):
        with pytest.raises(NumericalError):
            correlate_matrices(np.ones((3, 3)), np.arange(9.0).reshape(3, 3))

    def test_shape_mismatch(self):
        with pytest.raises(InputError):
            correlate_matrices(np.ones((3, 3)), np.ones((2, 2)))

    @given(st.integers(0, 2**32 - 1), st.floats(0.1, 10), st.floats(-5, 5), st.floats(0.1, 10), st.floats(-5, 5))
    @settings(max_examples=40)
    def test_affine_invariance(self, seed, s1, c1, s2, c2):
        rng = np.random.default_rng(seed)
        x, y = rng.random(30), rng.random(30)
        assert pearson(s1 * x + c1, s2 * y + c2) == pytest.approx(pearson(x, y), abs=1e-9)

    @given(st.floats(0.0, 0.99), st.floats(0.0, 0.99), st.integers(1, 5000))
    def test_p_monotone_in_abs_r(self, r1, r2, df):
        lo, hi = sorted((r1, r2))
        assert p_value_for_r(hi, df) <= p_value_for_r(lo, df) + 1e-15
        assert 0.0 <= p_value_for_r(-hi, df) <= 1.0

    def test_json(self):
        res = correlate_matrices(np.arange(9.0).reshape(3, 3), np.arange(9.0).reshape(3, 3) ** 2)
        obj = json.loads(res.to_json())
        assert obj["df"] == 7 and obj["flatten_mode"] == "full"


class TestTermVectors:
    def test_identical(self):
        v = np.array([0.1, 0.0, 0.3])
        table, undefined = correlate_term_vectors([v, v])
        assert table[0, 1] == pytest.approx(1.0) and not undefined

    def test_disjoint_vocabularies(self):
        vs = [np.array([0.2, 0.1, 0, 0, 0, 0]), np.array([0, 0, 0.3, 0.1, 0, 0]), np.array([0, 0, 0, 0, 0.05, 0.4])]
        table, _ = correlate_term_vectors(vs)
        for i in range(3):
            for j in range(3):
                if i != j:
                    assert table[i, j] < 0
                    assert table[i, j] == pytest.approx(pearson_fsum(vs[i].tolist(), vs[j].tolist()), abs=1e-12)
        assert np.array_equal(table, table.T)

    def test_constant_flagged(self):
        table, undefined = correlate_term_vectors([np.zeros(4), np.arange(4.0)])
        assert undefined == [(0, 1)] and math.isnan(table[0, 1])
