import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latentrel.errors import (
    DivisionByZeroError,
    EmptyInputError,
    ExprSyntaxError,
    IndexOutOfRangeError,
    MalformedRowError,
    NonFiniteResultError,
    NonNumericCellError,
    ShapeMismatchError,
    UnknownFunctionError,
)
from latentrel.mathcore import RandomSource
from latentrel.problem import (
    InputSpec,
    LabeledDataset,
    UnlabeledDataset,
    build_labeled_dataset,
    eval_limit_state,
    eval_limit_state_batch,
    load_csv_dataset,
    parse_limit_state,
    sample_inputs,
    write_dataset_csv,
)

from conftest import CASE_EXPR_TEXT, CASE_NR


def benchmark_reference(x: np.ndarray) -> np.ndarray:
    """Hand-coded version of the benchmark limit state (the parser oracle)."""
    x = np.atleast_2d(x)
    acc = np.zeros(x.shape[0])
    for i in range(20):
        acc = acc + x[:, i] ** 2
    return 160.5 - (x[:, 0] ** 2 + 4.0) * (x[:, 1] - 1.0) / 20.0 + np.cos(5.0 * x[:, 0]) - acc


class TestParser:
    def test_basic_arithmetic(self):
        expr = parse_limit_state("x1 + 2*x2", 2)
        assert eval_limit_state(expr, [1.0, 2.0]) == 5.0

    def test_summation(self):
        expr = parse_limit_state("sum(i=1..3, x_i^2)", 3)
        assert eval_limit_state(expr, [1.0, 2.0, 3.0]) == 14.0

    def test_index_out_of_range(self):
        with pytest.raises(IndexOutOfRangeError) as exc:
            parse_limit_state("x5", 3)
        assert exc.value.index == 5 and exc.value.nr == 3

    def test_index_zero_rejected(self):
        with pytest.raises(IndexOutOfRangeError):
            parse_limit_state("x0", 3)

    def test_summation_bounds_checked_against_nr(self):
        with pytest.raises(IndexOutOfRangeError):
            parse_limit_state("sum(i=1..5, x_i)", 3)

    def test_underscore_and_plain_forms_agree(self):
        a = parse_limit_state("x_1 + x_2", 2)
        b = parse_limit_state("x1 + x2", 2)
        pt = [3.5, -1.25]
        assert eval_limit_state(a, pt) == eval_limit_state(b, pt)

    def test_precedence(self):
        assert eval_limit_state(parse_limit_state("2 + 3*4", 1), [0.0]) == 14.0
        assert eval_limit_state(parse_limit_state("(2 + 3)*4", 1), [0.0]) == 20.0
        assert eval_limit_state(parse_limit_state("2*3^2", 1), [0.0]) == 18.0

    def test_power_right_associative(self):
        assert eval_limit_state(parse_limit_state("2^3^2", 1), [0.0]) == 512.0

    def test_unary_minus(self):
        assert eval_limit_state(parse_limit_state("-x1", 1), [4.0]) == -4.0
        # unary minus binds looser than the exponent
        assert eval_limit_state(parse_limit_state("-2^2", 1), [0.0]) == -4.0
        assert eval_limit_state(parse_limit_state("2^-1", 1), [0.0]) == 0.5

    def test_functions(self):
        assert eval_limit_state(parse_limit_state("cos(0)", 1), [0.0]) == 1.0
        assert eval_limit_state(parse_limit_state("sqrt(abs(-9))", 1), [0.0]) == 3.0
        assert abs(eval_limit_state(parse_limit_state("exp(1)", 1), [0.0]) - math.e) < 1e-15

    def test_unknown_function(self):
        with pytest.raises(UnknownFunctionError):
            parse_limit_state("tan(x1)", 1)

    def test_syntax_errors_carry_position(self):
        with pytest.raises(ExprSyntaxError) as exc:
            parse_limit_state("x1 + ", 1)
        assert exc.value.position == 5
        with pytest.raises(ExprSyntaxError):
            parse_limit_state("x1 @ x2", 2)
        with pytest.raises(ExprSyntaxError):
            parse_limit_state("(x1", 1)
        with pytest.raises(ExprSyntaxError):
            parse_limit_state("", 1)
        with pytest.raises(ExprSyntaxError):
            parse_limit_state("x1 x2", 2)

    def test_unknown_symbol(self):
        with pytest.raises(ExprSyntaxError):
            parse_limit_state("foo + 1", 1)

    def test_loop_var_outside_sum_rejected(self):
        with pytest.raises(ExprSyntaxError):
            parse_limit_state("x_i", 3)

    def test_empty_summation_range(self):
        assert eval_limit_state(parse_limit_state("sum(i=3..2, x_i) + 1", 3), [1, 1, 1]) == 1.0


class TestEvaluation:
    def test_benchmark_at_origin(self):
        expr = parse_limit_state(CASE_EXPR_TEXT, CASE_NR)
        assert abs(eval_limit_state(expr, np.zeros(20)) - 161.7) < 1e-12

    def test_benchmark_at_mean_point(self):
        expr = parse_limit_state(CASE_EXPR_TEXT, CASE_NR)
        x = np.full(20, 2.86)
        expected = 160.5 - (2.86**2 + 4) * (2.86 - 1) / 20 + math.cos(5 * 2.86) - 20 * 2.86**2
        got = eval_limit_state(expr, x)
        assert abs(got - expected) < 1e-12
        assert abs(got - (-4.3868)) < 1e-3

    def test_division_by_zero(self):
        expr = parse_limit_state("x1/x2", 2)
        with pytest.raises(DivisionByZeroError):
            eval_limit_state(expr, [1.0, 0.0])

    def test_non_finite_result(self):
        with pytest.raises(NonFiniteResultError):
            eval_limit_state(parse_limit_state("sqrt(x1)", 1), [-1.0])
        with pytest.raises(NonFiniteResultError):
            eval_limit_state(parse_limit_state("exp(x1)", 1), [1000.0])

    def test_batch_matches_scalar(self):
        expr = parse_limit_state(CASE_EXPR_TEXT, CASE_NR)
        x = RandomSource(9).normal(2.86, 0.7, 200).reshape(10, 20)
        batch = eval_limit_state_batch(expr, x)
        for i in range(10):
            assert batch[i] == eval_limit_state(expr, x[i])

    def test_batch_wrong_width(self):
        expr = parse_limit_state("x1", 1)
        with pytest.raises(ShapeMismatchError):
            eval_limit_state_batch(expr, np.zeros((3, 2)))

    def test_benchmark_symmetric_in_tail_variables(self):
        # only x1 and x2 appear outside the sum
        expr = parse_limit_state(CASE_EXPR_TEXT, CASE_NR)
        rng = RandomSource(21)
        x = rng.normal(2.86, 0.7, 20)
        base = eval_limit_state(expr, x)
        for seed in range(5):
            perm = np.arange(20)
            tail = 2 + RandomSource(seed).integers(18, size=50)  # shuffle via swaps
            for k in range(0, 50, 2):
                i, j = tail[k], tail[k + 1]
                perm[i], perm[j] = perm[j], perm[i]
            assert abs(eval_limit_state(expr, x[perm]) - base) < 1e-10

    def test_benchmark_agrees_with_reference(self):
        expr = parse_limit_state(CASE_EXPR_TEXT, CASE_NR)
        x = RandomSource(77).normal(2.86, 0.7, 20 * 500).reshape(500, 20)
        assert np.abs(eval_limit_state_batch(expr, x) - benchmark_reference(x)).max() < 1e-12


# -- randomized parser/evaluator agreement ----------------------------------
#
# The strategy builds an expression string together with an independently
# composed evaluation function, so the expected value never flows through
# the parser under test.

_NR = 3


def _leaf():
    return st.one_of(
        st.integers(min_value=0, max_value=9).map(lambda k: (str(k), lambda x, env: float(k))),
        st.integers(min_value=1, max_value=_NR).map(
            lambda i: (f"x{i}", lambda x, env, i=i: x[i - 1])
        ),
        st.integers(min_value=1, max_value=_NR).map(
            lambda i: (f"x_{i}", lambda x, env, i=i: x[i - 1])
        ),
    )


def _combine(children):
    binops = st.sampled_from(["+", "-", "*"]).flatmap(
        lambda op: st.tuples(children, children).map(
            lambda lr, op=op: (
                f"({lr[0][0]} {op} {lr[1][0]})",
                {
                    "+": lambda x, env, l=lr[0][1], r=lr[1][1]: l(x, env) + r(x, env),
                    "-": lambda x, env, l=lr[0][1], r=lr[1][1]: l(x, env) - r(x, env),
                    "*": lambda x, env, l=lr[0][1], r=lr[1][1]: l(x, env) * r(x, env),
                }[op],
            )
        )
    )
    neg = children.map(lambda c: (f"(-{c[0]})", lambda x, env, f=c[1]: -f(x, env)))
    funcs = st.sampled_from(["cos", "sin", "abs"]).flatmap(
        lambda name: children.map(
            lambda c, name=name: (
                f"{name}({c[0]})",
                lambda x, env, f=c[1], g=getattr(np, name if name != "abs" else "abs"): g(
                    f(x, env)
                ),
            )
        )
    )
    square = children.map(lambda c: (f"({c[0]})^2", lambda x, env, f=c[1]: f(x, env) ** 2))
    summation = children.map(
        lambda c: (
            f"sum(i=1..{_NR}, x_i + {c[0]})",
            lambda x, env, f=c[1]: sum(x[i - 1] + f(x, env) for i in range(1, _NR + 1)),
        )
    )
    return st.one_of(binops, neg, funcs, square, summation)


_expr_strategy = st.recursive(_leaf(), _combine, max_leaves=20)


@given(_expr_strategy, st.integers(min_value=0, max_value=2**32))
@settings(max_examples=1000, deadline=None)
def test_parser_agrees_with_independent_reference(pair, seed):
    text, fn = pair
    x = RandomSource(seed).uniform(-3.0, 3.0, size=_NR)
    expr = parse_limit_state(text, _NR)
    expected = float(fn(x, {}))
    got = eval_limit_state(expr, x)
    assert got == pytest.approx(expected, rel=1e-9, abs=1e-9)


class TestSampling:
    def test_shapes_and_determinism(self):
        spec = InputSpec.iid_normal(20, 2.86, 0.7)
        a = sample_inputs(spec, 150, RandomSource(3))
        b = sample_inputs(spec, 150, RandomSource(3))
        assert a.shape == (150, 20)
        assert np.array_equal(a, b)

    def test_tiny_std_close_to_mean(self):
        spec = InputSpec.iid_normal(4, 7.0, 0.001)
        x = sample_inputs(spec, 1, RandomSource(0))
        assert np.abs(x - 7.0).max() < 0.01  # 10 sigma

    def test_column_marginals(self):
        spec = InputSpec(means=np.array([0.0, 5.0]), stds=np.array([1.0, 2.0]))
        x = sample_inputs(spec, 50_000, RandomSource(8))
        assert abs(x[:, 0].mean()) < 3 / np.sqrt(50_000) * 1.5
        assert abs(x[:, 1].mean() - 5.0) < 3 * 2 / np.sqrt(50_000) * 1.5

    def test_mean_convergence_bound(self):
        spec = InputSpec.iid_normal(1, 2.86, 0.7)
        x = sample_inputs(spec, 10_000, RandomSource(4))
        assert abs(x.mean() - 2.86) < 3 * 0.7 / np.sqrt(10_000)

    def test_count_validation(self):
        with pytest.raises(EmptyInputError):
            sample_inputs(InputSpec.iid_normal(2, 0, 1), 0, RandomSource(0))

    def test_spec_validation(self):
        with pytest.raises(Exception):
            InputSpec.iid_normal(2, 0.0, 0.0)


class TestLabeledDataset:
    def test_build(self):
        expr = parse_limit_state(CASE_EXPR_TEXT, CASE_NR)
        spec = InputSpec.iid_normal(CASE_NR, 2.86, 0.7)
        ds = build_labeled_dataset(expr, spec, 150, RandomSource(1))
        assert ds.n == 150 and ds.nr == 20
        assert np.array_equal(ds.y, eval_limit_state_batch(expr, ds.x))

    def test_constant_expression(self):
        ds = build_labeled_dataset(
            parse_limit_state("1.0", 2), InputSpec.iid_normal(2, 0, 1), 10, RandomSource(0)
        )
        assert np.all(ds.y == 1.0)

    def test_minimum_size(self):
        with pytest.raises(EmptyInputError):
            build_labeled_dataset(
                parse_limit_state("x1", 1), InputSpec.iid_normal(1, 0, 1), 1, RandomSource(0)
            )


class TestCsv:
    def test_roundtrip_bit_exact(self, tmp_path):
        path = tmp_path / "data.csv"
        x = RandomSource(2).normal(0.0, 3.0, 12).reshape(4, 3)
        y = RandomSource(3).normal(0.0, 1.0, 4)
        write_dataset_csv(path, x, y)
        ds = load_csv_dataset(path, has_response=True)
        assert isinstance(ds, LabeledDataset)
        assert np.array_equal(ds.x, x) and np.array_equal(ds.y, y)

    def test_header_written(self, tmp_path):
        path = tmp_path / "data.csv"
        write_dataset_csv(path, np.zeros((2, 2)), np.zeros(2))
        assert path.read_text().splitlines()[0] == "x1,x2,y"

    def test_unlabeled(self, tmp_path):
        path = tmp_path / "u.csv"
        write_dataset_csv(path, np.ones((3, 2)))
        ds = load_csv_dataset(path, has_response=False)
        assert isinstance(ds, UnlabeledDataset)
        assert ds.x.shape == (3, 2)

    def test_ragged_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x1,x2,y\n1,2,3\n4,5\n")
        with pytest.raises(MalformedRowError) as exc:
            load_csv_dataset(path, has_response=True)
        assert exc.value.line == 3

    def test_non_numeric_cell(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x1,x2,y\n1,abc,3\n")
        with pytest.raises(NonNumericCellError) as exc:
            load_csv_dataset(path, has_response=True)
        assert exc.value.line == 2 and exc.value.col == 2

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_csv_dataset(tmp_path / "missing.csv", has_response=True)

    def test_crlf_accepted(self, tmp_path):
        path = tmp_path / "crlf.csv"
        path.write_bytes(b"x1,y\r\n1.5,2.5\r\n3.5,4.5\r\n")
        ds = load_csv_dataset(path, has_response=True)
        assert ds.x[:, 0].tolist() == [1.5, 3.5]
        assert ds.y.tolist() == [2.5, 4.5]

    def test_header_only_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("x1,x2\n")
        with pytest.raises(EmptyInputError):
            load_csv_dataset(path, has_response=False)
