"""Fourth-order jets of the plane-image graph function.

Two producers:

* ``jet_of_expression`` evaluates a parsed analytic expression with
  degree-4 truncated bivariate Taylor arithmetic. Every partial up to total
  order 4 comes out exact to machine precision (no finite differences).
* ``fit_jet_scattered`` fits a full bivariate quartic to scattered samples
  by weighted least squares; the exact first partials carried by each
  sample enter as additional Hermite rows, which is what makes third and
  fourth derivative estimates usable on measured data.

Expression grammar (whitespace insignificant)::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := atom ('^' integer)?
    atom   := number | 'x' | 'y' | func '(' expr ')' | '(' expr ')'
    func   := sin | cos | tan | atan | sqrt | exp | log

Unary minus is allowed in front of any factor.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ExpressionSyntaxError, IllConditioned, TooFewSamples, UnknownFunction

# ---------------------------------------------------------------------------
# Jet container
# ---------------------------------------------------------------------------

JET_FIELDS = (
    "f",
    "fx", "fy",
    "fxx", "fxy", "fyy",
    "fxxx", "fxxy", "fxyy", "fyyy",
    "fxxxx", "fxxxy", "fxxyy", "fxyyy", "fyyyy",
)

# (i, j) -> multi-index of d^(i+j) f / dx^i dy^j for each jet field
JET_ORDERS = (
    (0, 0),
    (1, 0), (0, 1),
    (2, 0), (1, 1), (0, 2),
    (3, 0), (2, 1), (1, 2), (0, 3),
    (4, 0), (3, 1), (2, 2), (1, 3), (0, 4),
)


@dataclass(frozen=True)
class Jet4:
    """Value and all partials up to total order 4 at a base point."""

    x: float
    y: float
    f: float
    fx: float
    fy: float
    fxx: float
    fxy: float
    fyy: float
    fxxx: float
    fxxy: float
    fxyy: float
    fyyy: float
    fxxxx: float
    fxxxy: float
    fxxyy: float
    fxyyy: float
    fyyyy: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in JET_FIELDS])

    @staticmethod
    def from_array(x, y, values) -> "Jet4":
        return Jet4(float(x), float(y), *(float(v) for v in values))

    @staticmethod
    def from_taylor(x, y, coeffs) -> "Jet4":
        """Build from Taylor coefficients c[i, j] of f(x+dx, y+dy)."""
        vals = [coeffs[i, j] * math.factorial(i) * math.factorial(j) for (i, j) in JET_ORDERS]
        return Jet4.from_array(x, y, vals)

    def taylor_coeffs(self) -> np.ndarray:
        c = np.zeros((5, 5))
        for (i, j), name in zip(JET_ORDERS, JET_FIELDS):
            c[i, j] = getattr(self, name) / (math.factorial(i) * math.factorial(j))
        return c

    def eval_shifted(self, x, y):
        """(f, fx, fy) of the jet's Taylor polynomial at a nearby point."""
        dx = x - self.x
        dy = y - self.y
        c = self.taylor_coeffs()
        f = fx = fy = 0.0
        for i in range(5):
            for j in range(5 - i):
                m = c[i, j] * dx**i * dy**j
                f += m
                if i > 0:
                    fx += c[i, j] * i * dx ** (i - 1) * dy**j
                if j > 0:
                    fy += c[i, j] * j * dx**i * dy ** (j - 1)
        return f, fx, fy

    def scale(self) -> float:
        """Magnitude of the curvature-relevant entries, floored at 1."""
        return max(1.0, max(abs(getattr(self, name)) for name in JET_FIELDS[3:]))


# ---------------------------------------------------------------------------
# Degree-4 truncated bivariate Taylor arithmetic
# ---------------------------------------------------------------------------

_DEG = 4
_IDX = [(i, j) for i in range(_DEG + 1) for j in range(_DEG + 1 - i)]
_PAIRS = [
    ((i1, j1), (i2, j2))
    for (i1, j1) in _IDX
    for (i2, j2) in _IDX
    if i1 + j1 + i2 + j2 <= _DEG
]


class Series:
    """Truncated Taylor polynomial in two displacement variables."""

    __slots__ = ("c",)

    def __init__(self, c=None):
        self.c = np.zeros((_DEG + 1, _DEG + 1)) if c is None else c

    @staticmethod
    def constant(v) -> "Series":
        s = Series()
        s.c[0, 0] = v
        return s

    @staticmethod
    def variable(which, value) -> "Series":
        s = Series()
        s.c[0, 0] = value
        if which == "x":
            s.c[1, 0] = 1.0
        else:
            s.c[0, 1] = 1.0
        return s

    def __add__(self, other):
        return Series(self.c + other.c)

    def __sub__(self, other):
        return Series(self.c - other.c)

    def __neg__(self):
        return Series(-self.c)

    def __mul__(self, other):
        out = Series()
        a, b, o = self.c, other.c, out.c
        for (i1, j1), (i2, j2) in _PAIRS:
            o[i1 + i2, j1 + j2] += a[i1, j1] * b[i2, j2]
        return out

    def scaled(self, k) -> "Series":
        return Series(self.c * k)

    def compose_univariate(self, g) -> "Series":
        """g applied to this series; g = [g0..g4] are Taylor coefficients of
        the outer function at this series' constant term."""
        h = Series(self.c.copy())
        h.c[0, 0] = 0.0  # h = self - constant
        out = Series.constant(g[0])
        power = Series.constant(1.0)
        for k in range(1, _DEG + 1):
            power = power * h
            out = out + power.scaled(g[k])
        return out

    def inverse(self) -> "Series":
        b0 = self.c[0, 0]
        if abs(b0) < 1e-300:
            raise DomainError("division by zero in expression")
        g = [(-1.0) ** k / b0 ** (k + 1) for k in range(_DEG + 1)]
        return self.compose_univariate(g)

    def __truediv__(self, other):
        return self * other.inverse()

    def pow_int(self, n: int) -> "Series":
        if n < 0:
            return self.inverse().pow_int(-n)
        out = Series.constant(1.0)
        base = self
        k = n
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out


def _sin_coeffs(a):
    s, c = math.sin(a), math.cos(a)
    return [s, c, -s / 2.0, -c / 6.0, s / 24.0]


def _cos_coeffs(a):
    s, c = math.sin(a), math.cos(a)
    return [c, -s, -c / 2.0, s / 6.0, c / 24.0]


def _tan_coeffs(a):
    t = math.tan(a)
    d1 = 1.0 + t * t
    d2 = 2.0 * t + 2.0 * t**3
    d3 = 2.0 + 8.0 * t * t + 6.0 * t**4
    d4 = 16.0 * t + 40.0 * t**3 + 24.0 * t**5
    return [t, d1, d2 / 2.0, d3 / 6.0, d4 / 24.0]


def _atan_coeffs(a):
    w = 1.0 + a * a
    d1 = 1.0 / w
    d2 = -2.0 * a / w**2
    d3 = (6.0 * a * a - 2.0) / w**3
    d4 = 24.0 * a * (1.0 - a * a) / w**4
    return [math.atan(a), d1, d2 / 2.0, d3 / 6.0, d4 / 24.0]


def _sqrt_coeffs(a):
    if a <= 0.0:
        raise DomainError(f"sqrt of nonpositive value {a}")
    s = math.sqrt(a)
    return [s, 0.5 / s, -1.0 / (8.0 * s**3), 1.0 / (16.0 * s**5), -5.0 / (128.0 * s**7)]


def _exp_coeffs(a):
    e = math.exp(a)
    return [e, e, e / 2.0, e / 6.0, e / 24.0]


def _log_coeffs(a):
    if a <= 0.0:
        raise DomainError(f"log of nonpositive value {a}")
    return [math.log(a), 1.0 / a, -1.0 / (2.0 * a * a), 1.0 / (3.0 * a**3), -1.0 / (4.0 * a**4)]


_FUNCTIONS = {
    "sin": (_sin_coeffs, math.sin),
    "cos": (_cos_coeffs, math.cos),
    "tan": (_tan_coeffs, math.tan),
    "atan": (_atan_coeffs, math.atan),
    "sqrt": (_sqrt_coeffs, None),
    "exp": (_exp_coeffs, math.exp),
    "log": (_log_coeffs, None),
}


def _plain_sqrt(a):
    if a <= 0.0:
        raise DomainError(f"sqrt of nonpositive value {a}")
    return math.sqrt(a)


def _plain_log(a):
    if a <= 0.0:
        raise DomainError(f"log of nonpositive value {a}")
    return math.log(a)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise ExpressionSyntaxError(f"unexpected character {stripped[0]!r}", len(text) - len(stripped))
        if m.group("num") is not None:
            tokens.append(("num", float(m.group(0)), m.start(0)))
        elif m.group("name") is not None:
            tokens.append(("name", m.group("name"), m.start("name")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", None, len(text)))
    return tokens


@dataclass(frozen=True)
class ExprAst:
    """Parsed expression over variables x, y. Nodes are nested tuples."""

    root: tuple
    source: str

    def evaluate(self, x: float, y: float) -> float:
        return _eval_node(self.root, x, y)

    def taylor4(self, x: float, y: float) -> Series:
        return _series_node(self.root, x, y)


def parse_expression(text: str) -> ExprAst:
    """Parse a surface expression; raises ExpressionSyntaxError / UnknownFunction."""
    tokens = _tokenize(text)
    state = {"i": 0}

    def peek():
        return tokens[state["i"]]

    def advance():
        tok = tokens[state["i"]]
        state["i"] += 1
        return tok

    def expect_op(op):
        kind, val, pos = peek()
        if kind != "op" or val != op:
            raise ExpressionSyntaxError(f"expected {op!r}", pos)
        advance()

    def parse_expr():
        node = parse_term()
        while True:
            kind, val, _ = peek()
            if kind == "op" and val in "+-":
                advance()
                rhs = parse_term()
                node = (val, node, rhs)
            else:
                return node

    def parse_term():
        node = parse_factor()
        while True:
            kind, val, _ = peek()
            if kind == "op" and val in "*/":
                advance()
                rhs = parse_factor()
                node = (val, node, rhs)
            else:
                return node

    def parse_factor():
        kind, val, pos = peek()
        if kind == "op" and val == "-":
            advance()
            return ("neg", parse_factor())
        if kind == "op" and val == "+":
            advance()
            return parse_factor()
        node = parse_atom()
        kind, val, pos = peek()
        if kind == "op" and val == "^":
            advance()
            sign = 1
            kind, val, pos = peek()
            if kind == "op" and val == "-":
                advance()
                sign = -1
            kind, val, pos = peek()
            if kind != "num" or val != int(val):
                raise ExpressionSyntaxError("exponent must be an integer", pos)
            advance()
            node = ("pow", node, sign * int(val))
        return node

    def parse_atom():
        kind, val, pos = peek()
        if kind == "num":
            advance()
            return ("const", val)
        if kind == "name":
            advance()
            if val in ("x", "y"):
                return ("var", val)
            nkind, nval, npos = peek()
            if nkind == "op" and nval == "(":
                if val not in _FUNCTIONS:
                    raise UnknownFunction(f"unknown function {val!r} at offset {pos}")
                advance()
                arg = parse_expr()
                expect_op(")")
                return ("call", val, arg)
            raise ExpressionSyntaxError(f"unknown name {val!r}", pos)
        if kind == "op" and val == "(":
            advance()
            node = parse_expr()
            expect_op(")")
            return node
        raise ExpressionSyntaxError("expected a number, variable, or '('", pos)

    root = parse_expr()
    kind, _, pos = peek()
    if kind != "end":
        raise ExpressionSyntaxError("trailing input", pos)
    return ExprAst(root, text)


def _eval_node(node, x, y):
    op = node[0]
    if op == "const":
        return node[1]
    if op == "var":
        return x if node[1] == "x" else y
    if op == "neg":
        return -_eval_node(node[1], x, y)
    if op == "+":
        return _eval_node(node[1], x, y) + _eval_node(node[2], x, y)
    if op == "-":
        return _eval_node(node[1], x, y) - _eval_node(node[2], x, y)
    if op == "*":
        return _eval_node(node[1], x, y) * _eval_node(node[2], x, y)
    if op == "/":
        den = _eval_node(node[2], x, y)
        if den == 0.0:
            raise DomainError("division by zero in expression")
        return _eval_node(node[1], x, y) / den
    if op == "pow":
        base = _eval_node(node[1], x, y)
        if node[2] < 0 and base == 0.0:
            raise DomainError("zero raised to a negative power")
        return base ** node[2]
    if op == "call":
        name = node[1]
        arg = _eval_node(node[2], x, y)
        if name == "sqrt":
            return _plain_sqrt(arg)
        if name == "log":
            return _plain_log(arg)
        return _FUNCTIONS[name][1](arg)
    raise ValueError(f"bad node {node!r}")


def _series_node(node, x, y) -> Series:
    op = node[0]
    if op == "const":
        return Series.constant(node[1])
    if op == "var":
        return Series.variable(node[1], x if node[1] == "x" else y)
    if op == "neg":
        return -_series_node(node[1], x, y)
    if op == "+":
        return _series_node(node[1], x, y) + _series_node(node[2], x, y)
    if op == "-":
        return _series_node(node[1], x, y) - _series_node(node[2], x, y)
    if op == "*":
        return _series_node(node[1], x, y) * _series_node(node[2], x, y)
    if op == "/":
        return _series_node(node[1], x, y) / _series_node(node[2], x, y)
    if op == "pow":
        return _series_node(node[1], x, y).pow_int(node[2])
    if op == "call":
        inner = _series_node(node[2], x, y)
        coeff_fn = _FUNCTIONS[node[1]][0]
        return inner.compose_univariate(coeff_fn(inner.c[0, 0]))
    raise ValueError(f"bad node {node!r}")


def jet_of_expression(ast: ExprAst, x: float, y: float) -> Jet4:
    """Exact 4-jet of the expression at (x, y) via truncated Taylor propagation."""
    series = ast.taylor4(float(x), float(y))
    return Jet4.from_taylor(x, y, series.c)


def expression_jet_provider(text_or_ast):
    """Callable (x, y) -> Jet4 for an expression."""
    ast = parse_expression(text_or_ast) if isinstance(text_or_ast, str) else text_or_ast
    return lambda x, y: jet_of_expression(ast, x, y)


# ---------------------------------------------------------------------------
# Scattered fitting
# ---------------------------------------------------------------------------


@dataclass
class ScatterFitConfig:
    """Knobs for the moving polynomial fit.

    k is the neighbor count (the default quartic model has 15 coefficients,
    so k >= 15); bandwidth is bandwidth_factor times the k-th neighbor
    distance; fits whose weighted design exceeds condition_cap raise
    IllConditioned. Setting condition_cap to None (or inf) lets rank
    deficient but consistent systems through via the minimum-norm solution.
    degree > 4 fits a higher polynomial and reads the 4-jet off it, which
    trades some noise robustness for much smaller truncation bias.
    """

    k: int = 36
    bandwidth_factor: float = 1.0
    condition_cap: float | None = 1e8
    use_gradients: bool = True
    degree: int = 4

    def __post_init__(self):
        if self.degree < 4:
            raise ValueError("fit degree must be at least 4 to populate a 4-jet")
        if self.k < self.n_terms():
            raise ValueError(f"degree-{self.degree} fit needs k >= {self.n_terms()}")

    def n_terms(self):
        return (self.degree + 1) * (self.degree + 2) // 2

    def exponents(self):
        return [(i, j) for d in range(self.degree + 1) for i in range(d + 1) for j in (d - i,)]


@dataclass
class FitDiagnostics:
    condition_number: float
    residual_rms: float
    bandwidth: float
    n_neighbors: int


_FIT_EXPS = JET_ORDERS  # same 15 monomials


def fit_jet_scattered(samples, query, cfg: ScatterFitConfig | None = None):
    """Weighted quartic least squares at ``query`` from IsotropicSamples.

    Returns (Jet4, FitDiagnostics). Gradient information from the samples
    enters as Hermite rows unless cfg.use_gradients is False.
    """
    cfg = cfg or ScatterFitConfig()
    qx, qy = float(query[0]), float(query[1])
    xs = np.array([s.x for s in samples])
    ys = np.array([s.y for s in samples])
    if len(xs) < cfg.k:
        raise TooFewSamples(f"{len(xs)} samples < k={cfg.k}")
    d2 = (xs - qx) ** 2 + (ys - qy) ** 2
    order = np.argpartition(d2, cfg.k - 1)[: cfg.k]
    dist = np.sqrt(d2[order])
    bw = cfg.bandwidth_factor * float(dist.max())
    if bw <= 0.0:
        raise IllConditioned(float("inf"), cfg.condition_cap or float("inf"))
    w = np.exp(-((dist / bw) ** 2))

    # offsets are normalized by the bandwidth so the design matrix stays
    # well scaled regardless of how small the neighborhood is
    dx = (xs[order] - qx) / bw
    dy = (ys[order] - qy) / bw
    fs = np.array([samples[i].f for i in order])
    exps = cfg.exponents()

    rows = []
    rhs = []
    for m in range(cfg.k):
        rows.append([dx[m] ** i * dy[m] ** j * w[m] for (i, j) in exps])
        rhs.append(fs[m] * w[m])
    if cfg.use_gradients:
        gxs = np.array([samples[i].fx for i in order])
        gys = np.array([samples[i].fy for i in order])
        for m in range(cfg.k):
            rows.append([(i * dx[m] ** (i - 1) * dy[m] ** j if i > 0 else 0.0) * w[m] for (i, j) in exps])
            rhs.append(gxs[m] * w[m] * bw)
            rows.append([(j * dx[m] ** i * dy[m] ** (j - 1) if j > 0 else 0.0) * w[m] for (i, j) in exps])
            rhs.append(gys[m] * w[m] * bw)

    a = np.array(rows)
    b = np.array(rhs)
    sv = np.linalg.svd(a, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
    cap = cfg.condition_cap
    if cap is not None and math.isfinite(cap) and cond > cap:
        raise IllConditioned(cond, cap)
    sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    resid = a @ sol - b
    rms = float(np.sqrt(np.mean(resid**2)))

    coeffs = np.zeros((5, 5))
    for (i, j), c in zip(exps, sol):
        if i + j <= 4:
            coeffs[i, j] = c / bw ** (i + j)
    jet = Jet4.from_taylor(qx, qy, coeffs)
    return jet, FitDiagnostics(cond, rms, bw, cfg.k)


def scattered_jet_provider(samples, cfg: ScatterFitConfig | None = None):
    """Callable (x, y) -> Jet4 backed by the scattered fit."""
    cfg = cfg or ScatterFitConfig()
    return lambda x, y: fit_jet_scattered(samples, (x, y), cfg)[0]
