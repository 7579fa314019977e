"""Reliability problem definitions.

A limit state is written as an arithmetic expression over indexed input
variables (``x1`` and ``x_1`` are equivalent), with ``+ - * / ^``, unary
minus, ``cos sin exp sqrt abs``, and bounded summation
``sum(i=1..20, x_i^2)``. ``^`` is right-associative and binds tighter
than unary minus; angles are radians. Inputs are independent normal
random variables, one marginal per dimension.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass

import numpy as np

from .errors import (
    DivisionByZeroError,
    EmptyInputError,
    ExprSyntaxError,
    IndexOutOfRangeError,
    MalformedRowError,
    NonFiniteResultError,
    NonNumericCellError,
    NonPositiveStdError,
    ShapeMismatchError,
    UnknownFunctionError,
)
from .mathcore import RandomSource

_FUNCTIONS = {
    "cos": np.cos,
    "sin": np.sin,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "abs": np.abs,
}


# -- abstract syntax tree -------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class LoopVar:
    name: str  # resolved against the active summation index


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    arg: object


@dataclass(frozen=True)
class Sum:
    var: str
    start: int
    stop: int
    body: object


@dataclass(frozen=True)
class LimitStateExpr:
    """Parsed limit state, bound to a fixed input dimensionality."""

    root: object
    nr: int
    text: str = ""


# -- tokenizer ------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.(?!\.)\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<dotdot>\.\.)"
    r"|(?P<op>[-+*/^(),=]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise ExprSyntaxError(f"unexpected character {stripped[0]!r}", pos)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


# -- recursive-descent parser ---------------------------------------------

_VAR_RE = re.compile(r"^x_?(\d+)$")
_LOOPREF_RE = re.compile(r"^x_?([A-Za-z_][A-Za-z_0-9]*)$")


class _Parser:
    def __init__(self, text: str, nr: int):
        self.tokens = _tokenize(text)
        self.i = 0
        self.nr = nr
        self.loop_vars: list[str] = []

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.peek()
        if text != value:
            raise ExprSyntaxError(f"expected {value!r}, found {text or 'end of input'!r}", pos)
        return self.advance()

    def parse(self):
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected trailing input {text!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.advance()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[1] == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.advance()
            # right-associative; exponent may carry its own unary minus
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, text, pos = self.peek()
        if kind == "num":
            self.advance()
            return Num(float(text))
        if text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if kind == "ident":
            self.advance()
            return self.ident(text, pos)
        raise ExprSyntaxError(f"expected a value, found {text or 'end of input'!r}", pos)

    def ident(self, name: str, pos: int):
        if name == "sum":
            return self.summation(pos)
        if self.peek()[1] == "(":
            if name not in _FUNCTIONS:
                raise UnknownFunctionError(name, pos)
            self.advance()
            arg = self.expr()
            self.expect(")")
            return Call(name, arg)
        m = _VAR_RE.match(name)
        if m:
            index = int(m.group(1))
            if not 1 <= index <= self.nr:
                raise IndexOutOfRangeError(index, self.nr)
            return Var(index)
        m = _LOOPREF_RE.match(name)
        if m and m.group(1) in self.loop_vars:
            return LoopVar(m.group(1))
        raise ExprSyntaxError(f"unknown symbol {name!r}", pos)

    def summation(self, pos: int):
        self.expect("(")
        kind, var, vpos = self.advance()
        if kind != "ident":
            raise ExprSyntaxError("expected a summation index name", vpos)
        self.expect("=")
        start = self.int_literal()
        self.expect("..")
        stop = self.int_literal()
        self.expect(",")
        self.loop_vars.append(var)
        body = self.expr()
        self.loop_vars.pop()
        self.expect(")")
        if start <= stop and _uses_loop_var(body, var):
            if start < 1 or stop > self.nr:
                bad = start if start < 1 else stop
                raise IndexOutOfRangeError(bad, self.nr)
        return Sum(var, start, stop, body)

    def int_literal(self) -> int:
        sign = 1
        if self.peek()[1] == "-":
            self.advance()
            sign = -1
        kind, text, pos = self.advance()
        if kind != "num" or not re.fullmatch(r"\d+", text):
            raise ExprSyntaxError("expected an integer bound", pos)
        return sign * int(text)


def _uses_loop_var(node, name: str) -> bool:
    if isinstance(node, LoopVar):
        return node.name == name
    if isinstance(node, Neg):
        return _uses_loop_var(node.arg, name)
    if isinstance(node, BinOp):
        return _uses_loop_var(node.left, name) or _uses_loop_var(node.right, name)
    if isinstance(node, Call):
        return _uses_loop_var(node.arg, name)
    if isinstance(node, Sum):
        return node.var != name and _uses_loop_var(node.body, name)
    return False


def parse_limit_state(text: str, nr: int) -> LimitStateExpr:
    """Parse an expression into a limit state over ``nr`` input variables."""
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    root = _Parser(text, nr).parse()
    return LimitStateExpr(root=root, nr=nr, text=text)


# -- evaluation -----------------------------------------------------------


def _eval_node(node, x: np.ndarray, env: dict) -> np.ndarray:
    if isinstance(node, Num):
        return np.full(x.shape[0], node.value)
    if isinstance(node, Var):
        return x[:, node.index - 1]
    if isinstance(node, LoopVar):
        return x[:, env[node.name] - 1]
    if isinstance(node, Neg):
        return -_eval_node(node.arg, x, env)
    if isinstance(node, BinOp):
        left = _eval_node(node.left, x, env)
        right = _eval_node(node.right, x, env)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        if node.op == "/":
            if np.any(right == 0.0):
                raise DivisionByZeroError("division by zero during evaluation")
            return left / right
        return left ** right
    if isinstance(node, Call):
        return _FUNCTIONS[node.func](_eval_node(node.arg, x, env))
    if isinstance(node, Sum):
        acc = np.zeros(x.shape[0])
        for i in range(node.start, node.stop + 1):
            acc = acc + _eval_node(node.body, x, {**env, node.var: i})
        return acc
    raise TypeError(f"unknown node {node!r}")


def eval_limit_state_batch(expr: LimitStateExpr, x: np.ndarray) -> np.ndarray:
    """Evaluate the limit state on every row of ``x`` (shape n x nr)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != expr.nr:
        raise ShapeMismatchError(f"expected {expr.nr} input columns, got shape {x.shape}")
    with np.errstate(over="ignore", invalid="ignore"):
        out = _eval_node(expr.root, x, {})
    if not np.all(np.isfinite(out)):
        raise NonFiniteResultError("limit state produced a non-finite value")
    return out


def eval_limit_state(expr: LimitStateExpr, x) -> float:
    """Evaluate the limit state at a single input point."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return float(eval_limit_state_batch(expr, x)[0])


# -- input randomness and datasets ----------------------------------------


@dataclass(frozen=True)
class InputSpec:
    """Independent normal marginals, one per input dimension."""

    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float)
        stds = np.asarray(self.stds, dtype=float)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stds", stds)
        if means.ndim != 1 or means.shape != stds.shape or means.shape[0] < 1:
            raise EmptyInputError("means and stds must be equal-length, non-empty vectors")
        if np.any(stds <= 0.0):
            raise NonPositiveStdError("all marginal standard deviations must be positive")

    @classmethod
    def iid_normal(cls, nr: int, mean: float, std: float) -> "InputSpec":
        return cls(means=np.full(nr, float(mean)), stds=np.full(nr, float(std)))

    @property
    def nr(self) -> int:
        return self.means.shape[0]


@dataclass(frozen=True)
class LabeledDataset:
    x: np.ndarray  # n x nr
    y: np.ndarray  # n

    def __post_init__(self):
        if self.x.shape[0] != self.y.shape[0]:
            raise MalformedRowError(0, "input and response row counts differ")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
            raise NonFiniteResultError("dataset contains non-finite values")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def nr(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class UnlabeledDataset:
    x: np.ndarray  # q x nr

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def nr(self) -> int:
        return self.x.shape[1]


def sample_inputs(spec: InputSpec, count: int, rng: RandomSource) -> np.ndarray:
    """Draw ``count`` input vectors, column j from marginal j."""
    if count < 1:
        raise EmptyInputError("count must be at least 1")
    x = np.empty((count, spec.nr))
    for j in range(spec.nr):
        x[:, j] = rng.normal(spec.means[j], spec.stds[j], count)
    return x


def build_labeled_dataset(
    expr: LimitStateExpr, spec: InputSpec, n: int, rng: RandomSource
) -> LabeledDataset:
    """Sample inputs and evaluate the true limit state at each of them."""
    if n < 2:
        raise EmptyInputError("a labeled dataset needs at least 2 samples")
    x = sample_inputs(spec, n, rng)
    y = eval_limit_state_batch(expr, x)
    return LabeledDataset(x=x, y=y)


# -- CSV interchange -------------------------------------------------------


def _format_float(v: float) -> str:
    return repr(float(v))


def write_dataset_csv(path, x: np.ndarray, y: np.ndarray | None = None) -> None:
    """Write a dataset with header ``x1,...,xN[,y]`` (LF line endings)."""
    x = np.asarray(x, dtype=float)
    header = [f"x{j + 1}" for j in range(x.shape[1])]
    if y is not None:
        header.append("y")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(x.shape[0]):
            row = [_format_float(v) for v in x[i]]
            if y is not None:
                row.append(_format_float(y[i]))
            writer.writerow(row)


def load_csv_dataset(path, has_response: bool):
    """Load a numeric CSV with a mandatory header row.

    Returns :class:`LabeledDataset` when ``has_response`` (last column is
    the response), :class:`UnlabeledDataset` otherwise.
    """
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    rows = [r for r in rows if r]  # drop blank trailing lines
    if len(rows) < 2:
        raise EmptyInputError(f"{path}: need a header row and at least one data row")
    width = len(rows[0])
    if has_response and width < 2:
        raise MalformedRowError(1, "need at least one input column plus a response")
    data = np.empty((len(rows) - 1, width))
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise MalformedRowError(i, f"expected {width} cells, found {len(row)}")
        for j, cell in enumerate(row):
            try:
                data[i - 2, j] = float(cell)
            except ValueError:
                raise NonNumericCellError(i, j + 1, cell) from None
    if has_response:
        return LabeledDataset(x=data[:, :-1], y=data[:, -1])
    return UnlabeledDataset(x=data)
