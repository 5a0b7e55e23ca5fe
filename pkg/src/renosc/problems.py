"""Declarative problem construction: coefficient expressions, configs, catalog.

Problems are described by small JSON documents (or built-in catalog entries)
holding coefficient formulas as strings in the variable x, boundary frames,
and the spectral interval.  Coefficients depend on x only; lambda enters
through the companion-form structure.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field as dc_field
from typing import List, Optional, Union

import numpy as np

from .errors import (
    ConfigError,
    DegenerateCoefficientError,
    ExpressionEvalError,
    ExpressionSyntaxError,
)
from .maslovbox import SpectralProblem
from .multilinear import Frame
from .propagation import (
    CoefficientField,
    eval_companion_higher_order,
    eval_companion_second_order,
)

FUNCTIONS = ("sin", "cos", "exp", "sqrt")

# ---------------------------------------------------------------------------
# Expression AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    pass  # the single variable x


@dataclass(frozen=True)
class Neg:
    child: "Expression"


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Expression"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expression"
    right: "Expression"


Expression = Union[Num, Var, Neg, Call, BinOp]

_TOKEN_RE = re.compile(r"\s*(?:(\d+\.\d*|\.\d+|\d+)|([a-zA-Z]+)|([-+*/^()]))")


def _tokenize(text: str):
    tokens = []  # (kind, value, offset)
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            stripped = text[pos:].lstrip()
            off = len(text) - len(stripped)
            if not stripped:
                break
            raise ExpressionSyntaxError(f"unexpected character {stripped[0]!r}", off)
        number, name, op = m.groups()
        offset = m.start(1) if number else m.start(2) if name else m.start(3)
        if number:
            tokens.append(("num", number, offset))
        elif name:
            tokens.append(("name", name, offset))
        else:
            tokens.append(("op", op, offset))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    """Recursive descent for:

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := unary ('^' factor)?          # '^' right-associative
    unary  := ('-')? atom
    atom   := number | 'x' | func '(' expr ')' | '(' expr ')'
    """

    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, expected):
        kind, value, offset = self.peek()
        got = value if kind != "end" else "end of input"
        raise ExpressionSyntaxError(
            f"expected {' or '.join(expected)}, got {got!r}", offset, expected
        )

    def parse(self) -> Expression:
        node = self.expr()
        kind, value, offset = self.peek()
        if kind != "end":
            raise ExpressionSyntaxError(
                f"trailing input {value!r}", offset, ("operator", "end")
            )
        return node

    def expr(self) -> Expression:
        node = self.term()
        while self.peek()[:2] in (("op", "+"), ("op", "-")):
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expression:
        node = self.factor()
        while self.peek()[:2] in (("op", "*"), ("op", "/")):
            op = self.advance()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Expression:
        node = self.unary()
        if self.peek()[:2] == ("op", "^"):
            self.advance()
            node = BinOp("^", node, self.factor())
        return node

    def unary(self) -> Expression:
        if self.peek()[:2] == ("op", "-"):
            self.advance()
            return Neg(self.atom())
        return self.atom()

    def atom(self) -> Expression:
        kind, value, offset = self.peek()
        if kind == "num":
            self.advance()
            return Num(float(value))
        if kind == "name":
            if value == "x":
                self.advance()
                return Var()
            if value in FUNCTIONS:
                self.advance()
                if self.peek()[:2] != ("op", "("):
                    self.fail(("'('",))
                self.advance()
                arg = self.expr()
                if self.peek()[:2] != ("op", ")"):
                    self.fail(("')'",))
                self.advance()
                return Call(value, arg)
            raise ExpressionSyntaxError(
                f"unknown name {value!r}", offset, ("x",) + FUNCTIONS
            )
        if kind == "op" and value == "(":
            self.advance()
            node = self.expr()
            if self.peek()[:2] != ("op", ")"):
                self.fail(("')'",))
            self.advance()
            return node
        self.fail(("number", "x", "function", "'('"))


def parse_expression(text: str) -> Expression:
    if not text or not text.strip():
        raise ExpressionSyntaxError("empty expression", 0)
    return _Parser(text).parse()


def eval_expression_array(e: Expression, xs: np.ndarray) -> np.ndarray:
    """Vectorized evaluation over a grid of x values (table building)."""
    if isinstance(e, Num):
        return np.full(xs.shape, e.value)
    if isinstance(e, Var):
        return np.asarray(xs, dtype=float)
    if isinstance(e, Neg):
        return -eval_expression_array(e.child, xs)
    if isinstance(e, Call):
        v = eval_expression_array(e.arg, xs)
        if e.fn == "sqrt":
            if np.any(v < 0):
                raise ExpressionEvalError("sqrt of negative value")
            return np.sqrt(v)
        return getattr(np, e.fn)(v)
    left = eval_expression_array(e.left, xs)
    right = eval_expression_array(e.right, xs)
    if e.op == "/":
        if np.any(right == 0):
            raise ExpressionEvalError("division by zero")
        return left / right
    if e.op == "^":
        out = left ** right
        if np.any(~np.isfinite(out)):
            raise ExpressionEvalError("invalid power")
        return out
    return {"+": np.add, "-": np.subtract, "*": np.multiply}[e.op](left, right)


def eval_expression(e: Expression, x: float) -> float:
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return float(x)
    if isinstance(e, Neg):
        return -eval_expression(e.child, x)
    if isinstance(e, Call):
        v = eval_expression(e.arg, x)
        if e.fn == "sin":
            return float(np.sin(v))
        if e.fn == "cos":
            return float(np.cos(v))
        if e.fn == "exp":
            return float(np.exp(v))
        if v < 0:
            raise ExpressionEvalError(f"sqrt of negative value {v}")
        return float(np.sqrt(v))
    left = eval_expression(e.left, x)
    right = eval_expression(e.right, x)
    if e.op == "+":
        return left + right
    if e.op == "-":
        return left - right
    if e.op == "*":
        return left * right
    if e.op == "/":
        if right == 0:
            raise ExpressionEvalError("division by zero")
        return left / right
    out = left ** right
    if isinstance(out, complex) or not np.isfinite(out):
        raise ExpressionEvalError(f"invalid power {left} ^ {right}")
    return float(out)


def serialize_expression(e: Expression) -> str:
    """Canonical text that re-parses to an equivalent tree."""

    def prec(node):
        if isinstance(node, BinOp):
            return {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}[node.op]
        if isinstance(node, Neg):
            return 3
        return 5

    def render(node, parent_prec, right_side=False):
        p = prec(node)
        if isinstance(node, Num):
            text = repr(node.value)
        elif isinstance(node, Var):
            text = "x"
        elif isinstance(node, Neg):
            text = "-" + render(node.child, p)
        elif isinstance(node, Call):
            text = f"{node.fn}({render(node.arg, 0)})"
        else:
            lp, rp = p, p
            if node.op in ("-", "/"):
                rp = p + 1  # left-associative: parenthesize equal-prec right child
            if node.op == "^":
                lp = p + 1  # right-associative
            text = (
                render(node.left, lp)
                + node.op
                + render(node.right, rp, right_side=True)
            )
        if p < parent_prec or (p == parent_prec and right_side):
            return "(" + text + ")"
        return text

    return render(e, 0)


def _compile(text: str):
    tree = parse_expression(text)
    return lambda x: eval_expression(tree, x)


# ---------------------------------------------------------------------------
# Problem configuration
# ---------------------------------------------------------------------------

_ALLOWED_KEYS = {
    "kind", "n", "l", "m", "alphas", "kappas", "B", "V", "W",
    "P", "Q", "lambda", "x_steps", "lambda_steps",
}
PRESETS = ("dirichlet", "neumann")


@dataclass
class ProblemConfig:
    kind: str
    n: int
    m: int
    lam: tuple
    alphas: Optional[List[str]] = None
    kappas: Optional[List[float]] = None
    B: Optional[List[float]] = None
    V: Optional[List[List[str]]] = None
    W: Optional[List[List[str]]] = None
    P: Union[str, list] = "neumann"
    Q: Union[str, list] = "neumann"
    x_steps: int = 1000
    lambda_steps: int = 600
    extra: dict = dc_field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "m": self.m, "lambda": list(self.lam),
               "x_steps": self.x_steps, "lambda_steps": self.lambda_steps,
               "P": self.P, "Q": self.Q}
        if self.kind == "higher-order":
            out["n"] = self.n
            out["alphas"] = self.alphas
            out["kappas"] = self.kappas
        else:
            out["l"] = self.n // 2
            out["B"] = self.B
            out["V"] = self.V
            out["W"] = self.W
        return out


def config_from_dict(doc: dict) -> ProblemConfig:
    unknown = set(doc) - _ALLOWED_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kind = doc.get("kind")
    if kind == "general":
        raise ConfigError(
            "kind 'general' is API-only: build a CoefficientField and a "
            "SpectralProblem directly"
        )
    if kind not in ("higher-order", "second-order"):
        raise ConfigError(f"kind must be 'higher-order' or 'second-order', got {kind!r}")
    lam = doc.get("lambda")
    if (not isinstance(lam, (list, tuple))) or len(lam) != 2:
        raise ConfigError("'lambda' must be [lambda1, lambda2]")
    lam = (float(lam[0]), float(lam[1]))
    if not lam[0] < lam[1]:
        raise ConfigError("need lambda1 < lambda2")
    x_steps = int(doc.get("x_steps", 1000))
    lambda_steps = int(doc.get("lambda_steps", 600))
    if x_steps < 2 or lambda_steps < 2:
        raise ConfigError("grid resolutions must be at least 2")

    if kind == "higher-order":
        n = doc.get("n")
        alphas = doc.get("alphas")
        kappas = doc.get("kappas")
        if n is None or alphas is None or kappas is None:
            raise ConfigError("higher-order configs need 'n', 'alphas', 'kappas'")
        n = int(n)
        if len(alphas) != n + 1:
            raise ConfigError(f"need {n + 1} alpha expressions, got {len(alphas)}")
        if len(kappas) != n - 1:
            raise ConfigError(f"need {n - 1} kappa values, got {len(kappas)}")
        cfg = ProblemConfig(
            kind=kind, n=n, m=0, lam=lam,
            alphas=[str(a) for a in alphas],
            kappas=[float(k) for k in kappas],
            P=doc.get("P", "neumann"), Q=doc.get("Q", "dirichlet"),
            x_steps=x_steps, lambda_steps=lambda_steps,
        )
    else:
        l = doc.get("l")
        if l is None:
            raise ConfigError("second-order configs need 'l'")
        l = int(l)
        B = doc.get("B", [1.0] * l)
        V = doc.get("V")
        W = doc.get("W")
        if V is None or W is None:
            raise ConfigError("second-order configs need 'V' and 'W'")
        for name, M in (("V", V), ("W", W)):
            if len(M) != l or any(len(row) != l for row in M):
                raise ConfigError(f"'{name}' must be an {l}x{l} matrix of expressions")
        if len(B) != l:
            raise ConfigError(f"'B' must list {l} diagonal entries")
        cfg = ProblemConfig(
            kind=kind, n=2 * l, m=0, lam=lam,
            B=[float(b) for b in B],
            V=[[str(v) for v in row] for row in V],
            W=[[str(w) for w in row] for row in W],
            P=doc.get("P", "neumann"), Q=doc.get("Q", "neumann"),
            x_steps=x_steps, lambda_steps=lambda_steps,
        )

    m = doc.get("m")
    if m is None:
        if isinstance(cfg.P, list):
            m = len(cfg.P[0])
        elif kind == "second-order":
            m = cfg.n // 2
        else:
            raise ConfigError("'m' is required when P is a named preset")
    cfg.m = int(m)
    if not 1 <= cfg.m <= cfg.n - 1:
        raise ConfigError(f"m must be in 1..{cfg.n - 1}")
    return cfg


def load_config_file(path) -> ProblemConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    return config_from_dict(doc)


def preset_frame(name_or_matrix, n: int, cols: int) -> np.ndarray:
    """Resolve a boundary frame: explicit matrix, or 'neumann'/'dirichlet'.

    'neumann' stacks the identity over zeros, 'dirichlet' zeros over the
    identity.  Robin-type spaces are supplied as explicit matrices (see
    robin_frame).
    """
    if isinstance(name_or_matrix, str):
        name = name_or_matrix.lower()
        if name not in PRESETS:
            raise ConfigError(f"unknown frame preset {name_or_matrix!r}")
        out = np.zeros((n, cols))
        if name == "neumann":
            out[:cols, :] = np.eye(cols)
        else:
            out[n - cols:, :] = np.eye(cols)
        return out
    mat = np.asarray(name_or_matrix, dtype=float)
    if mat.shape != (n, cols):
        raise ConfigError(f"frame must be {n}x{cols}, got {mat.shape}")
    return mat


def robin_frame(coupling) -> np.ndarray:
    """Frame (I; Theta) for a Robin-type boundary space."""
    theta = np.asarray(coupling, dtype=float)
    if theta.ndim != 2 or theta.shape[0] != theta.shape[1]:
        raise ConfigError("Robin coupling must be a square matrix")
    return np.vstack([np.eye(theta.shape[0]), theta])


def _higher_order_field(cfg: ProblemConfig) -> CoefficientField:
    n = cfg.n
    trees = [parse_expression(a) for a in cfg.alphas]
    alphas = [(lambda t: (lambda x: eval_expression(t, x)))(t) for t in trees]
    kappas = list(cfg.kappas)
    sample = np.linspace(0.0, 1.0, 1001)
    lead = eval_expression_array(trees[n], sample)
    if np.min(lead) <= 0:
        raise DegenerateCoefficientError(
            f"alpha_n is not positive on [0,1] (min {np.min(lead):.3g})"
        )

    def evaluate(x, lam):
        return eval_companion_higher_order(alphas, kappas, x, lam)

    def base(x):
        return eval_companion_higher_order(alphas, kappas, x, 0.0)

    def base_table(xs):
        xs = np.asarray(xs, dtype=float)
        vals = [eval_expression_array(t, xs) for t in trees]
        scale = [1.0] + [float(k) for k in kappas[:-1]]
        A = np.zeros((len(xs), n, n))
        for i in range(n - 2):
            A[:, i, i + 1] = scale[i] / scale[i + 1]
        A[:, n - 2, n - 1] = scale[n - 2] / vals[n]
        A[:, n - 1, 0] = -vals[0]
        for j in range(1, n - 1):
            A[:, n - 1, j] = -vals[j] / scale[j]
        A[:, n - 1, n - 1] = -vals[n - 1] / vals[n]
        return A

    E = np.zeros((n, n))
    E[n - 1, 0] = 1.0
    return CoefficientField(
        n=n, evaluate=evaluate, base_eval=base, lambda_mat=E,
        base_table=base_table,
        continuous=True, structure_b=True, kind="higher-order",
        meta={"kappas": kappas, "alpha_n": alphas[n], "alphas": alphas},
    )


def _second_order_field(cfg: ProblemConfig) -> CoefficientField:
    l = cfg.n // 2
    B = np.diag(cfg.B)
    if np.any(np.asarray(cfg.B) == 0.0):
        raise ConfigError("B must be invertible (no zero diagonal entries)")
    Binv = np.linalg.inv(B)
    Vtrees = [[parse_expression(v) for v in row] for row in cfg.V]
    Wtrees = [[parse_expression(w) for w in row] for row in cfg.W]

    def Vfun(x):
        return np.array([[eval_expression(t, x) for t in row] for row in Vtrees])

    def Wfun(x):
        return np.array([[eval_expression(t, x) for t in row] for row in Wtrees])

    def evaluate(x, lam):
        return eval_companion_second_order(B, Wfun, Vfun, x, lam)

    def base(x):
        return eval_companion_second_order(B, Wfun, Vfun, x, 0.0)

    def base_table(xs):
        xs = np.asarray(xs, dtype=float)
        N = len(xs)
        Vt = np.empty((N, l, l))
        Wt = np.empty((N, l, l))
        for i in range(l):
            for j in range(l):
                Vt[:, i, j] = eval_expression_array(Vtrees[i][j], xs)
                Wt[:, i, j] = eval_expression_array(Wtrees[i][j], xs)
        A = np.zeros((N, 2 * l, 2 * l))
        A[:, :l, l:] = Binv
        A[:, l:, :l] = Vt
        A[:, l:, l:] = Wt @ Binv
        return A

    E = np.zeros((2 * l, 2 * l))
    for k in range(l):
        E[l + k, k] = -1.0
    return CoefficientField(
        n=2 * l, evaluate=evaluate, base_eval=base, lambda_mat=E,
        base_table=base_table,
        continuous=True, structure_b=True, kind="second-order",
        meta={"B": cfg.B, "l": l},
    )


def load_problem(config: ProblemConfig) -> SpectralProblem:
    """Wire a validated config into a runnable spectral problem."""
    if config.kind == "higher-order":
        field = _higher_order_field(config)
    elif config.kind == "second-order":
        field = _second_order_field(config)
    else:
        raise ConfigError(f"cannot load kind {config.kind!r} from a config")
    n, m = config.n, config.m
    P = preset_frame(config.P, n, m)
    Q = preset_frame(config.Q, n, n - m)
    return SpectralProblem(
        field=field,
        P=Frame(P),
        Q=Frame(Q),
        lambda1=config.lam[0],
        lambda2=config.lam[1],
        x_steps=config.x_steps,
        lambda_steps=config.lambda_steps,
    )


CATALOG = ("example1", "example2", "example3", "harmonic-dirichlet", "harmonic-neumann")

_V_SHARED = [
    ["10*sin(10*x)*cos(10*x)", "25*sin(10*x)"],
    ["x*(1-x)", "10*cos(10*x)"],
]


def builtin_catalog(name: str) -> ProblemConfig:
    """Named problem configurations used throughout the test suite.

    example1: third-order scalar operator, mixed derivative boundary
    conditions, eigenvalue hunt on [-1, 0].
    example2/example3: 2-component second-order systems with Neumann
    conditions at both ends on [-5, 1]; example3 loses interior invariance.
    harmonic-*: constant-coefficient oscillator with closed-form spectrum.
    """
    if name == "example1":
        return config_from_dict({
            "kind": "higher-order",
            "n": 3,
            "m": 1,
            "alphas": [".2*cos(10*x) - .5*cos(x/10)", "2*sin(5*x)", "10", "60"],
            "kappas": [10, 60],
            "P": [[1.0], [0.0], [0.0]],
            "Q": [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]],
            "lambda": [-1.0, 0.0],
            "x_steps": 1000,
            "lambda_steps": 600,
        })
    if name == "example2":
        return config_from_dict({
            "kind": "second-order",
            "l": 2,
            "B": [1.0, 1.0],
            "V": _V_SHARED,
            "W": [["5*x*(1-x)", "0"], ["0", "5*x*(1-x)"]],
            "P": "neumann",
            "Q": "neumann",
            "lambda": [-5.0, 1.0],
            "x_steps": 1000,
            "lambda_steps": 600,
        })
    if name == "example3":
        return config_from_dict({
            "kind": "second-order",
            "l": 2,
            "B": [1.0, 1.0],
            "V": _V_SHARED,
            "W": [["5*x*(1-x)", "10*sin(10*x)"], ["10*cos(10*x)", "5*x*(1-x)"]],
            "P": "neumann",
            "Q": "neumann",
            "lambda": [-5.0, 1.0],
            "x_steps": 1000,
            "lambda_steps": 600,
        })
    if name == "harmonic-dirichlet":
        return config_from_dict({
            "kind": "second-order",
            "l": 1,
            "B": [1.0],
            "V": [["0"]],
            "W": [["0"]],
            "P": "dirichlet",
            "Q": "dirichlet",
            "lambda": [0.0, 50.0],
            "x_steps": 2000,
            "lambda_steps": 600,
        })
    if name == "harmonic-neumann":
        return config_from_dict({
            "kind": "second-order",
            "l": 1,
            "B": [1.0],
            "V": [["0"]],
            "W": [["0"]],
            "P": "neumann",
            "Q": "neumann",
            "lambda": [0.0, 50.0],
            "x_steps": 2000,
            "lambda_steps": 600,
        })
    raise ConfigError(f"unknown catalog problem {name!r}; known: {', '.join(CATALOG)}")
