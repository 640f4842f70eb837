"""Distribution, sampling, and problem-loading tests.

Distribution correctness is checked three ways: law-of-large-numbers
moment estimates, Kolmogorov-Smirnov distance to the analytic CDFs, and
exact reconstruction of the documented inverse transforms from the same
uniform stream.
"""

import json
import math

import numpy as np
import pytest
from scipy import stats
from scipy.special import ndtri, stdtrit

from ccopt import expr as ex
from ccopt.problem import (
    CcoProblem,
    Distribution,
    ProblemError,
    SampleSet,
    exponential_mean,
    laplace,
    load_problem,
    make_sample_set,
    normal,
    product_of,
    sample,
    student_t,
    validate_sizes,
)


class TestDistributionValidation:
    def test_parameter_checks(self):
        with pytest.raises(ProblemError):
            exponential_mean(-1.0)
        with pytest.raises(ProblemError):
            exponential_mean(0.0)
        with pytest.raises(ProblemError):
            laplace(0.0, 0.0)
        with pytest.raises(ProblemError):
            normal(0.0, -0.5)
        with pytest.raises(ProblemError):
            student_t(0.0, 1.0, 0.0)
        with pytest.raises(ProblemError):
            Distribution("uniform", (0.0, 1.0))
        with pytest.raises(ProblemError):
            product_of()
        with pytest.raises(ProblemError):
            product_of(product_of(normal(0, 1), normal(0, 1)))

    def test_dims(self):
        assert normal(0, 1).dim == 1
        assert laplace(0, 1, dim=10).dim == 10
        assert product_of(normal(0, 1), laplace(0, 1, dim=2)).dim == 3


class TestMoments:
    def test_exponential_mean(self):
        rows = sample(exponential_mean(3.0), 10 ** 6, seed=101)
        assert rows.shape == (10 ** 6, 1)
        assert abs(rows.mean() - 3.0) < 0.01
        assert np.all(rows > 0)

    def test_laplace_variance(self):
        rows = sample(laplace(0.0, 0.02), 10 ** 6, seed=102)
        want = 2 * 0.02 ** 2
        assert abs(rows.var() - want) < 0.05 * want
        assert abs(rows.mean()) < 1e-4

    def test_normal_second_parameter_is_variance(self):
        rows = sample(normal(0.12, 0.013), 10 ** 6, seed=103)
        assert abs(rows.var() - 0.013) < 0.05 * 0.013
        assert abs(rows.mean() - 0.12) < 1e-3

    def test_student_t_variance(self):
        rows = sample(student_t(0.0, 1.0, 10.0), 10 ** 6, seed=104)
        want = 10.0 / 8.0
        assert abs(rows.var() - want) < 0.05 * want
        assert abs(rows.mean()) < 5e-3


class TestDistributionShape:
    def test_ks_against_analytic_cdfs(self):
        n = 10 ** 5
        draws = sample(exponential_mean(3.0), n, seed=111).ravel()
        ks = stats.kstest(draws, lambda t: 1 - np.exp(-t / 3.0)).statistic
        assert ks < 0.01

        draws = sample(laplace(0.5, 0.02), n, seed=112).ravel()
        assert stats.kstest(draws, stats.laplace(0.5, 0.02).cdf).statistic < 0.01

        draws = sample(normal(0.12, 0.013), n, seed=113).ravel()
        cdf = stats.norm(0.12, math.sqrt(0.013)).cdf
        assert stats.kstest(draws, cdf).statistic < 0.01

        draws = sample(student_t(1.0, 2.0, 10.0), n, seed=114).ravel()
        assert stats.kstest(draws, stats.t(10.0, 1.0, 2.0).cdf).statistic < 0.01

    def test_inverse_transforms_reconstruct_exactly(self):
        # same Philox stream, transforms applied by hand
        count = 1000

        def uniforms(seed, dim=1):
            g = np.random.Generator(np.random.Philox(key=[seed, 0]))
            return np.maximum(g.random((count, dim)), 2.0 ** -54)

        u = uniforms(7)
        assert np.array_equal(sample(exponential_mean(3.0), count, 7),
                              -3.0 * np.log1p(-u))
        u = uniforms(8)
        want = np.where(u < 0.5, 1.0 + 0.5 * np.log(2 * u),
                        1.0 - 0.5 * np.log(2 * (1 - u)))
        assert np.array_equal(sample(laplace(1.0, 0.5), count, 8), want)
        u = uniforms(9)
        assert np.array_equal(sample(normal(2.0, 4.0), count, 9),
                              2.0 + 2.0 * ndtri(u))
        u = uniforms(10)
        assert np.array_equal(sample(student_t(1.0, 2.0, 10.0), count, 10),
                              1.0 + 2.0 * stdtrit(10.0, u))

    def test_product_columns(self):
        dist = product_of(normal(0.1, 0.013), normal(0.11, 0.011),
                          normal(0.07, 0.007))
        rows = sample(dist, 10 ** 5, seed=115)
        assert rows.shape == (10 ** 5, 3)
        for j, (m, v) in enumerate([(0.1, 0.013), (0.11, 0.011),
                                    (0.07, 0.007)]):
            assert abs(rows[:, j].mean() - m) < 0.005
            assert abs(rows[:, j].var() - v) < 0.05 * v
        corr = np.corrcoef(rows, rowvar=False)
        assert np.all(np.abs(corr - np.eye(3)) < 0.02)

    def test_iid_dim_broadcast(self):
        rows = sample(laplace(0.0, 0.02, dim=10), 10 ** 5, seed=116)
        assert rows.shape == (10 ** 5, 10)
        want = 2 * 0.02 ** 2
        assert np.all(np.abs(rows.var(axis=0) - want) < 0.1 * want)


class TestDeterminism:
    def test_bit_identical_repeats(self):
        dist = product_of(exponential_mean(3.0), normal(0.0, 1.0))
        a = sample(dist, 500, seed=42, stream=3)
        b = sample(dist, 500, seed=42, stream=3)
        assert a.tobytes() == b.tobytes()

    def test_seed_and_stream_change_rows(self):
        dist = normal(0.0, 1.0)
        a = sample(dist, 100, seed=42, stream=0)
        assert not np.array_equal(a, sample(dist, 100, seed=43, stream=0))
        assert not np.array_equal(a, sample(dist, 100, seed=42, stream=1))

    def test_count_validation(self):
        with pytest.raises(ProblemError):
            sample(normal(0.0, 1.0), 0, seed=1)


class TestSampleSet:
    def test_partition_views(self):
        rows = np.arange(20.0).reshape(10, 2)
        ss = SampleSet(5, 3, 2, rows, seed=0)
        assert np.array_equal(ss.train, rows[:5])
        assert np.array_equal(ss.calib, rows[5:8])
        assert np.array_equal(ss.test, rows[8:])

    def test_size_mismatch(self):
        with pytest.raises(ProblemError):
            SampleSet(5, 3, 3, np.zeros((10, 2)), seed=0)
        with pytest.raises(ProblemError):
            SampleSet(5, -1, 6, np.zeros((10, 2)), seed=0)

    def test_make_sample_set_prefix_stable(self):
        dist = exponential_mean(3.0)
        with_test = make_sample_set(dist, 50, 20, 30, seed=9, stream=2)
        without = make_sample_set(dist, 50, 20, 0, seed=9, stream=2)
        assert np.array_equal(with_test.rows[:70], without.rows)
        assert with_test.rows.shape == (100, 1)

    def test_shifted_test_block(self):
        base = normal(0.0, 1.0)
        shifted = normal(5.0, 1.0)
        ss = make_sample_set(base, 200, 0, 200, seed=11, test_dist=shifted)
        assert ss.train.mean() < 1.0
        assert ss.test.mean() > 4.0
        again = make_sample_set(base, 200, 0, 200, seed=11, test_dist=shifted)
        assert ss.rows.tobytes() == again.rows.tobytes()

    def test_shifted_dim_mismatch(self):
        with pytest.raises(ProblemError):
            make_sample_set(normal(0, 1), 10, 0, 10, seed=0,
                            test_dist=normal(0, 1, dim=2))


def _tiny_doc(**over):
    doc = {
        "n": 1, "d": 1, "sense": "min",
        "objective": "x[0]^2",
        "chance": ["y[0] - x[0]"],
        "delta": 0.1,
        "bounds": [[-5, 5]],
        "distribution": {"kind": "normal", "mean": 0.0, "variance": 1.0},
    }
    doc.update(over)
    return doc


class TestCcoProblem:
    def test_validation_errors(self):
        ok = load_problem(_tiny_doc())
        assert ok.delta == 0.1 and ok.n == 1
        with pytest.raises(ProblemError):
            load_problem(_tiny_doc(delta=1.5))
        with pytest.raises(ProblemError):
            load_problem(_tiny_doc(delta=0.0))
        with pytest.raises(ProblemError):
            load_problem(_tiny_doc(sense="minimize"))
        with pytest.raises(ProblemError):
            load_problem(_tiny_doc(chance=[]))
        with pytest.raises(ProblemError):
            load_problem(_tiny_doc(bounds=[[-5, "inf"]]))
        with pytest.raises(ProblemError):
            load_problem(_tiny_doc(bounds=[[5, -5]]))
        with pytest.raises(ProblemError):
            load_problem(_tiny_doc(bounds=[]))
        with pytest.raises(ProblemError):
            load_problem(_tiny_doc(chi=-1.0))
        with pytest.raises(ProblemError):
            load_problem(_tiny_doc(epsilon=-0.1))
        with pytest.raises(ProblemError):
            load_problem(_tiny_doc(divergence="wasserstein"))

    def test_index_range_enforced(self):
        with pytest.raises(ProblemError):
            load_problem(_tiny_doc(objective="x[1]^2"))
        with pytest.raises(ProblemError):
            load_problem(_tiny_doc(chance=["y[2] - x[0]"]))

    def test_objective_and_side_constraints_deterministic(self):
        with pytest.raises(ProblemError):
            load_problem(_tiny_doc(objective="x[0] + y[0]"))
        with pytest.raises(ProblemError):
            load_problem(_tiny_doc(ineq=["y[0] - 1"]))

    def test_parse_error_names_field(self):
        with pytest.raises(ProblemError, match="chance"):
            load_problem(_tiny_doc(chance=["y[0] -"]))
        with pytest.raises(ProblemError, match="objective"):
            load_problem(_tiny_doc(objective="sin(x[0])"))

    def test_missing_fields(self):
        doc = _tiny_doc()
        del doc["delta"]
        with pytest.raises(ProblemError, match="delta"):
            load_problem(doc)

    def test_distribution_dim_must_match_d(self):
        with pytest.raises(ProblemError):
            load_problem(_tiny_doc(
                distribution={"kind": "normal", "mean": 0, "variance": 1,
                              "dim": 3}))

    def test_min_objective_sense(self):
        p = load_problem(_tiny_doc(sense="max", objective="x[0]"))
        assert ex.evaluate(p.min_objective, [2.0]) == -2.0
        q = load_problem(_tiny_doc())
        assert ex.evaluate(q.min_objective, [2.0]) == 4.0

    def test_lower_upper_arrays(self):
        p = load_problem(_tiny_doc(n=2, objective="x[0] + x[1]",
                                   chance=["y[0] - x[0] - x[1]"],
                                   bounds=[[-5, 5], [0, 2]]))
        assert np.array_equal(p.lower, [-5, 0])
        assert np.array_equal(p.upper, [5, 2])


class TestLoadSources:
    def test_from_json_string_and_file(self, tmp_path):
        doc = _tiny_doc(name="tiny")
        p1 = load_problem(json.dumps(doc))
        path = tmp_path / "tiny.json"
        path.write_text(json.dumps(doc))
        p2 = load_problem(str(path))
        assert p1.name == p2.name == "tiny"
        assert ex.to_str(p1.objective) == ex.to_str(p2.objective)

    def test_bad_sources(self):
        with pytest.raises(ProblemError):
            load_problem("{not json")
        with pytest.raises(ProblemError):
            load_problem(42)
        with pytest.raises(ProblemError):
            load_problem('["a", "list"]')

    def test_test_distribution_loaded(self):
        doc = _tiny_doc(test_distribution={"kind": "normal", "mean": 1.0,
                                           "variance": 2.0})
        p = load_problem(doc)
        assert p.test_distribution.params == (1.0, 2.0)

    def test_product_distribution_loaded(self):
        doc = _tiny_doc(d=2, chance=["y[0] + y[1] - x[0]"],
                        distribution={"kind": "product", "components": [
                            {"kind": "normal", "mean": 0, "variance": 1},
                            {"kind": "exponential_mean", "mean": 2.0},
                        ]})
        p = load_problem(doc)
        assert p.distribution.dim == 2
        rows = sample(p.distribution, 2000, seed=5)
        assert abs(rows[:, 1].mean() - 2.0) < 0.15


class TestValidateSizes:
    def test_plain_examples(self):
        p = load_problem(_tiny_doc(delta=0.05))
        assert validate_sizes(p, 50, 19) == []
        out = validate_sizes(p, 50, 10)
        assert len(out) == 1 and "19" in out[0] and "L=10" in out[0]
        out = validate_sizes(p, 5, 5)
        assert len(out) == 2

    def test_robust_example(self):
        p = load_problem(_tiny_doc(delta=0.2, epsilon=0.05, divergence="tv"))
        assert validate_sizes(p, 6, 6, robust=True) == []
        out = validate_sizes(p, 5, 6, robust=True)
        assert len(out) == 1 and "6" in out[0]

    def test_robust_without_epsilon(self):
        p = load_problem(_tiny_doc())
        out = validate_sizes(p, 100, 100, robust=True)
        assert len(out) == 1 and "epsilon" in out[0]

    def test_robust_infeasible_budget(self):
        p = load_problem(_tiny_doc(delta=0.2, epsilon=0.9, divergence="tv"))
        out = validate_sizes(p, 10 ** 6, 10 ** 6, robust=True)
        assert len(out) == 1
