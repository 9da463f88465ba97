"""Declarative problem files.

The format is line oriented. A ``[kind]`` header opens the problem section;
an optional ``[iteration]`` section sets stopping rules. ``#`` starts a
comment. Values may be wrapped in double quotes. Example::

    [fredholm]
    n_trunc = 1
    kernel = 0.5*t1*s1
    forcing = t1
    delta = 0.5
    gamma = 2
    quadrature = gauss 16

    [iteration]
    eps_res = 1e-12

Kinds and keys (``*`` = required):

``fredholm``
    n_trunc*, kernel* (t1..tN, s1..sN), forcing* (t1..tN), delta*, gamma*,
    quadrature (default ``gauss 16``), seed
``urysohn``
    n_trunc*, integrand* (t1..tN, s1..sN, u), forcing*, tau*, alpha*,
    domain (``a b``, default ``0 1``), quadrature, u_range (``lo hi``),
    lipschitz_samples, seed
``operator-iteration``
    operator* (x1..xk), k, mode (``finite`` | ``infinite``), domain,
    base (comma separated, default: domain midpoint repeated k times),
    metric (``abs``), beta, seed
``contraction-check``
    contraction*, operator* (x1..xk), k, c, beta, domain, samples, seed

``[iteration]`` accepts eps_step, eps_res and max_iter. Unknown keys,
duplicate keys and unknown sections are errors.

Quadrature values: ``gauss M``, ``trapezoid M``, ``montecarlo N [SEED]``.
Beta values: ``constant C``, ``reciprocal``, ``exp``.
Contraction values: ``banach``, ``geraghty``, ``kannan``, ``fisher``,
``kannan-geraghty-self``, ``hk``, ``kannan-geraghty``, ``ext-kannan-geraghty``,
``fisher-geraghty``, ``ext-fisher-geraghty``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

from .contractions import ContractionKind, GeraghtyFn
from .errors import ParseError, ValidationError
from .expr import Expression, parse_expr
from .quadrature import QuadratureRule

__all__ = ["ProblemFile", "parse_problem", "dump_problem", "KINDS"]

KINDS = ("fredholm", "urysohn", "operator-iteration", "contraction-check")

_CONTRACTIONS = (
    "banach", "geraghty", "kannan", "fisher", "kannan-geraghty-self", "hk",
    "kannan-geraghty", "ext-kannan-geraghty", "fisher-geraghty", "ext-fisher-geraghty",
)


@dataclass
class ProblemFile:
    kind: str
    values: Dict[str, Any]
    iteration: Dict[str, Any] = field(default_factory=dict)
    locations: Dict[str, Tuple[int, int]] = field(default_factory=dict, compare=False)

    def get(self, key, default=None):
        return self.values.get(key, default)

    @property
    def seed(self) -> int:
        return self.values.get("seed", 0)


# ---- value coercion -------------------------------------------------------

def _int(text):
    if not re.fullmatch(r"[+-]?\d+", text):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(text)


def _float(text):
    try:
        return float(text)
    except ValueError:
        raise ValueError(f"expected a number, got {text!r}") from None


def _pair(text):
    parts = text.replace(",", " ").split()
    if len(parts) != 2:
        raise ValueError(f"expected two numbers 'lo hi', got {text!r}")
    lo, hi = (_float(p) for p in parts)
    if not lo < hi:
        raise ValueError(f"need lo < hi, got {text!r}")
    return (lo, hi)


def _floats(text):
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    if not parts:
        raise ValueError("expected a list of numbers")
    return tuple(_float(p) for p in parts)


def _quadrature(text):
    parts = text.split()
    if not parts:
        raise ValueError("empty quadrature setting")
    kind = parts[0].lower()
    if kind in ("gauss", "trapezoid") and len(parts) == 2:
        return QuadratureRule(kind, _int(parts[1]))
    if kind == "montecarlo" and len(parts) in (2, 3):
        seed = _int(parts[2]) if len(parts) == 3 else 0
        return QuadratureRule.montecarlo(_int(parts[1]), seed)
    raise ValueError(f"bad quadrature {text!r}; use 'gauss M', 'trapezoid M' or 'montecarlo N [SEED]'")


def _beta(text):
    parts = text.split()
    if parts and parts[0] == "constant" and len(parts) == 2:
        return GeraghtyFn.constant(_float(parts[1]))
    if parts == ["reciprocal"]:
        return GeraghtyFn.reciprocal()
    if parts == ["exp"]:
        return GeraghtyFn.exp_decay()
    raise ValueError(f"bad beta {text!r}; use 'constant C', 'reciprocal' or 'exp'")


def _choice(*options):
    def coerce(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text
    return coerce


def _expr(text):
    return parse_expr(text)


# key -> (coercer, required, default)
_SCHEMAS = {
    "fredholm": {
        "n_trunc": (_int, True, None),
        "kernel": (_expr, True, None),
        "forcing": (_expr, True, None),
        "delta": (_float, True, None),
        "gamma": (_float, True, None),
        "quadrature": (_quadrature, False, QuadratureRule.gauss(16)),
        "seed": (_int, False, 0),
    },
    "urysohn": {
        "n_trunc": (_int, True, None),
        "integrand": (_expr, True, None),
        "forcing": (_expr, True, None),
        "tau": (_float, True, None),
        "alpha": (_float, True, None),
        "domain": (_pair, False, (0.0, 1.0)),
        "quadrature": (_quadrature, False, QuadratureRule.gauss(16)),
        "u_range": (_pair, False, None),
        "lipschitz_samples": (_int, False, 2000),
        "seed": (_int, False, 0),
    },
    "operator-iteration": {
        "operator": (_expr, True, None),
        "k": (_int, False, 1),
        "mode": (_choice("finite", "infinite"), False, "infinite"),
        "domain": (_pair, False, (0.0, 1.0)),
        "base": (_floats, False, None),
        "metric": (_choice("abs"), False, "abs"),
        "beta": (_beta, False, None),
        "seed": (_int, False, 0),
    },
    "contraction-check": {
        "contraction": (_choice(*_CONTRACTIONS), True, None),
        "operator": (_expr, True, None),
        "k": (_int, False, 1),
        "c": (_float, False, None),
        "beta": (_beta, False, None),
        "domain": (_pair, False, (0.0, 1.0)),
        "samples": (_int, False, 10_000),
        "seed": (_int, False, 0),
    },
}

_ITERATION = {
    "eps_step": (_float, False, None),
    "eps_res": (_float, False, None),
    "max_iter": (_int, False, None),
}


def _legal_vars(kind, values):
    if kind == "fredholm":
        n = values["n_trunc"]
        t = {f"t{i}" for i in range(1, n + 1)}
        return {"kernel": t | {f"s{i}" for i in range(1, n + 1)}, "forcing": t}
    if kind == "urysohn":
        n = values["n_trunc"]
        t = {f"t{i}" for i in range(1, n + 1)}
        return {"integrand": t | {f"s{i}" for i in range(1, n + 1)} | {"u"}, "forcing": t}
    k = values["k"]
    return {"operator": {f"x{i}" for i in range(1, k + 1)}}


def _semantic_checks(pf: ProblemFile):
    v, loc = pf.values, pf.locations

    def fail(key, msg):
        line, col = loc.get(key, (None, None))
        raise ValidationError(f"{key}: {msg}", line, col)

    if pf.kind in ("fredholm", "urysohn"):
        if v["n_trunc"] < 1:
            fail("n_trunc", "must be >= 1")
        if v["quadrature"].deterministic and v["n_trunc"] > 4:
            fail("quadrature", "tensor rules support n_trunc <= 4; use montecarlo for more axes")
    if pf.kind == "fredholm":
        if not 0.0 < v["delta"] < 1.0:
            fail("delta", "must lie in (0, 1)")
        if not v["gamma"] > 0.0:
            fail("gamma", "must be positive")
    if pf.kind == "urysohn":
        if not v["tau"] > 0.0:
            fail("tau", "must be positive")
        if not 0.0 < v["alpha"] <= 1.0:
            fail("alpha", "must lie in (0, 1]")
    if pf.kind in ("operator-iteration", "contraction-check") and v["k"] < 1:
        fail("k", "must be >= 1")
    if pf.kind == "operator-iteration" and v["base"] is not None and len(v["base"]) != v["k"]:
        fail("base", f"expected {v['k']} base points, got {len(v['base'])}")
    if pf.kind == "contraction-check":
        try:
            contraction_kind(pf)
        except ValueError as exc:
            fail("contraction", str(exc))
        fam = v["contraction"]
        if fam not in ("banach", "kannan", "fisher") and v["beta"] is None:
            fail("contraction", f"{fam} needs a beta")

    for key, allowed in _legal_vars(pf.kind, v).items():
        extra = sorted(v[key].variables - allowed)
        if extra:
            fail(key, f"illegal variable {extra[0]!r} (allowed: {', '.join(sorted(allowed))})")
    for key in ("eps_step", "eps_res"):
        if key in pf.iteration and not pf.iteration[key] > 0:
            fail(key, "must be positive")
    if "max_iter" in pf.iteration and pf.iteration["max_iter"] < 1:
        fail("max_iter", "must be >= 1")


def contraction_kind(pf: ProblemFile) -> ContractionKind:
    fam, k, c = pf.values["contraction"], pf.values["k"], pf.values.get("c")
    if fam == "kannan-geraghty-self":
        return ContractionKind.kannan_geraghty_self()
    if fam in ("banach", "kannan", "fisher"):
        if c is None:
            raise ValueError(f"{fam} needs a constant c")
        return ContractionKind(fam, 1, c)
    if c is not None:
        raise ValueError(f"{fam} takes no constant c")
    return ContractionKind(fam, k)


_SECTION = re.compile(r"^\[\s*([A-Za-z][A-Za-z0-9_-]*)\s*\]$")
_ASSIGN = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$")


def _strip_comment(line):
    in_quote = False
    for i, ch in enumerate(line):
        if ch == '"':
            in_quote = not in_quote
        elif ch == "#" and not in_quote:
            return line[:i]
    return line


def parse_problem(text) -> ProblemFile:
    """Parse and fully validate a problem file.

    Raises :class:`ParseError` for malformed lines and
    :class:`ValidationError` for schema violations, both with 1-based line
    and column numbers.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not valid UTF-8: {exc}") from None

    kind = None
    section = None
    raw: Dict[str, Dict[str, Tuple[str, int, int, int]]] = {"main": {}, "iteration": {}}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = _strip_comment(line).rstrip()
        stripped = body.strip()
        if not stripped:
            continue
        indent = len(body) - len(body.lstrip())
        m = _SECTION.match(stripped)
        if m:
            name = m.group(1)
            if name == "iteration":
                if kind is None:
                    raise ParseError("missing kind: the [iteration] section must follow a problem section",
                                     lineno, indent + 1)
                section = "iteration"
            elif name in KINDS:
                if kind is not None:
                    raise ParseError(f"second problem section [{name}]", lineno, indent + 1)
                kind, section = name, "main"
            else:
                raise ParseError(f"unknown section [{name}]; expected one of {', '.join(KINDS)}",
                                 lineno, indent + 1)
            continue
        m = _ASSIGN.match(stripped)
        if not m:
            raise ParseError("expected 'key = value'", lineno, indent + 1)
        if section is None:
            raise ParseError("missing kind: start the file with a [kind] section", lineno, indent + 1)
        key, value = m.group(1), m.group(2).strip()
        if len(value) >= 2 and value[0] == value[-1] == '"':
            value = value[1:-1]
        col = indent + m.start(2) + 1
        if key in raw[section]:
            raise ParseError(f"duplicate key {key!r}", lineno, indent + 1)
        raw[section][key] = (value, lineno, indent + 1, col)

    if kind is None:
        raise ParseError("missing kind", 1 if not text.strip() else None, None)

    pf = ProblemFile(kind=kind, values={}, iteration={})
    for section, schema, target in (("main", _SCHEMAS[kind], pf.values), ("iteration", _ITERATION, pf.iteration)):
        for key, (value, line, key_col, col) in raw[section].items():
            if key not in schema:
                raise ValidationError(f"unknown key {key!r} for [{kind if section == 'main' else section}]",
                                      line, key_col)
            pf.locations[key] = (line, col)
            try:
                target[key] = schema[key][0](value)
            except ParseError as exc:
                raise ValidationError(f"{key}: {exc.detail}", line,
                                      col + (exc.column - 1 if exc.column else 0)) from None
            except ValueError as exc:
                raise ValidationError(f"{key}: {exc}", line, col) from None
        for key, (_, required, default) in schema.items():
            if key in target:
                continue
            if required:
                raise ValidationError(f"missing required key {key!r} for [{kind}]", None, None)
            if section == "main":
                target[key] = default
    _semantic_checks(pf)
    return pf


def _fmt(value) -> str:
    if isinstance(value, Expression):
        return value.source
    if isinstance(value, QuadratureRule):
        return value.describe()
    if isinstance(value, GeraghtyFn):
        return f"constant {value.c!r}" if value.family == "constant" else value.family
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    return str(value)


def dump_problem(pf: ProblemFile) -> str:
    """Serialize back to the file format; ``parse_problem(dump_problem(pf)) == pf``."""
    lines = [f"[{pf.kind}]"]
    for key, value in pf.values.items():
        if value is None:
            continue
        lines.append(f"{key} = {_fmt(value)}")
    if pf.iteration:
        lines += ["", "[iteration]"]
        for key, value in pf.iteration.items():
            lines.append(f"{key} = {_fmt(value)}")
    return "\n".join(lines) + "\n"
