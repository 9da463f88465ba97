"""``picardo`` command line: ``solve``, ``check`` and ``iterate``.

Exit status: 0 converged or passed, 1 usage or parse error, 2 hypothesis
violated, 3 diverged, not converged, or counterexample found.

All data goes to files in ``--out`` (``report.json`` and, with ``--trace``,
``trace.csv``) plus a one-line summary on stdout; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from .contractions import SamplerConfig, falsify
from .errors import Diverged, HypothesisViolated, ParseError, PicardoError
from .expr import eval_expr
from .integral import FredholmProblem, UrysohnProblem, solve_fredholm, solve_urysohn
from .metric import AbsDiff, element_at
from .picard import IterationConfig, diagnose, infinite_k_picard, k_picard
from .problem import ProblemFile, contraction_kind, parse_problem

__all__ = ["main", "run", "build_fredholm", "build_urysohn", "build_operator", "EXIT"]

EXIT = {"ok": 0, "usage": 1, "hypothesis": 2, "failed": 3}

TRACE_COLUMNS = ("n", "step_distance", "residual_estimate", "mk_value", "beta_value")

COMMAND_KINDS = {
    "solve": ("fredholm", "urysohn"),
    "check": ("contraction-check",),
    "iterate": ("operator-iteration",),
}


def _coords(prefix, arr, n):
    return {f"{prefix}{i + 1}": arr[..., i] for i in range(n)}


def build_fredholm(pf: ProblemFile):
    n = pf.values["n_trunc"]
    kernel, forcing = pf.values["kernel"], pf.values["forcing"]
    problem = FredholmProblem(
        n_trunc=n,
        kernel=lambda t, s: eval_expr(kernel, {**_coords("t", t, n), **_coords("s", s, n)}),
        forcing=lambda t: eval_expr(forcing, _coords("t", t, n)),
        delta=pf.values["delta"],
        gamma=pf.values["gamma"],
    )
    return problem, pf.values["quadrature"]


def build_urysohn(pf: ProblemFile, seed: Optional[int] = None):
    n = pf.values["n_trunc"]
    integrand, forcing = pf.values["integrand"], pf.values["forcing"]
    a, b = pf.values["domain"]
    problem = UrysohnProblem(
        n_trunc=n,
        integrand=lambda t, s, u: eval_expr(integrand, {**_coords("t", t, n), **_coords("s", s, n), "u": u}),
        forcing=lambda t: eval_expr(forcing, _coords("t", t, n)),
        tau=pf.values["tau"],
        alpha=pf.values["alpha"],
        a=a,
        b=b,
        u_range=pf.values["u_range"],
        lipschitz_samples=pf.values["lipschitz_samples"],
        seed=pf.seed if seed is None else seed,
    )
    return problem, pf.values["quadrature"]


def build_operator(pf: ProblemFile, shape: str):
    """Compile the ``operator`` expression for the requested calling shape.

    ``"tuple"`` gives ``T(x1, ..., xk)``; ``"hat"`` gives ``T(seq)`` reading
    entries ``1..k`` of a hat sequence.
    """
    expr = pf.values["operator"]
    k = pf.values["k"]
    if shape == "hat":
        return lambda seq: float(eval_expr(expr, {f"x{i}": element_at(seq, i) for i in range(1, k + 1)}))
    return lambda *xs: float(eval_expr(expr, {f"x{i + 1}": x for i, x in enumerate(xs)}))


def _threads() -> int:
    raw = os.environ.get("PICARDO_THREADS", "1").strip() or "1"
    n = int(raw)
    if n < 0:
        raise ValueError("PICARDO_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def _iteration_config(pf: ProblemFile, args, defaults: IterationConfig) -> IterationConfig:
    it = dict(pf.iteration)
    for key in ("eps_step", "eps_res", "max_iter"):
        flag = getattr(args, key, None)
        if flag is not None:
            it[key] = flag
    return IterationConfig(
        eps_step=it.get("eps_step", defaults.eps_step),
        eps_res=it.get("eps_res", defaults.eps_res),
        max_iter=it.get("max_iter", defaults.max_iter),
        record_trace=True,
    )


def _fmt_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_trace_csv(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in rows:
            w.writerow([_fmt_cell(row[c]) for c in TRACE_COLUMNS])


def write_report(path: Path, payload: dict) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True, allow_nan=True)
    path.write_text(text + "\n")


def _run_solve(pf, args):
    seed = args.seed if args.seed is not None else pf.seed
    cfg = _iteration_config(pf, args, IterationConfig(eps_step=1e-13, eps_res=1e-13, max_iter=10_000))
    if pf.kind == "fredholm":
        problem, rule = build_fredholm(pf)
        solver = solve_fredholm
    else:
        problem, rule = build_urysohn(pf, seed)
        solver = solve_urysohn
    try:
        rep = solver(problem, rule, cfg, force=args.force, oracle=args.oracle)
    except HypothesisViolated as exc:
        print(f"picardo: {exc}", file=sys.stderr)
        return EXIT["hypothesis"], {
            "status": "hypothesis_violated",
            "violated": exc.condition,
            "worst": exc.worst,
            "hypothesis_checks": exc.checks,
        }, None
    payload = {"status": "converged" if rep.converged else "not_converged", **rep.to_dict()}
    code = EXIT["ok"] if rep.converged else EXIT["failed"]
    if not rep.converged:
        print(f"picardo: no convergence after {rep.iterations} iterations", file=sys.stderr)
    return code, payload, rep.trace


def _run_check(pf, args):
    kind = contraction_kind(pf)
    lo, hi = pf.values["domain"]
    config = SamplerConfig(
        n_samples=pf.values["samples"],
        seed=args.seed if args.seed is not None else pf.seed,
        low=lo,
        high=hi,
        workers=_threads(),
    )
    shape = "hat" if kind.arity == "hat" else "tuple"
    T = build_operator(pf, shape)
    rep = falsify(kind, T, pf.values["beta"], AbsDiff(), config)
    if not rep.passed:
        print(f"picardo: counterexample at sample {rep.counterexample['index']}", file=sys.stderr)
    status = "pass" if rep.passed else "counterexample"
    return (EXIT["ok"] if rep.passed else EXIT["failed"]), {"status": status, **rep.to_dict()}, None


def _run_iterate(pf, args):
    k = pf.values["k"]
    lo, hi = pf.values["domain"]
    base = list(pf.values["base"]) if pf.values["base"] is not None else [0.5 * (lo + hi)] * k
    cfg = _iteration_config(pf, args, IterationConfig())
    finite = pf.values["mode"] == "finite"
    T = build_operator(pf, "tuple" if finite else "hat")
    engine = k_picard if finite else infinite_k_picard
    res = engine(T, base, AbsDiff(), cfg, beta=pf.values["beta"])
    payload = {
        "status": "converged" if res.converged else "not_converged",
        "point": res.point,
        "residual": res.residual,
        "iterations_used": res.iterations_used,
        "converged": res.converged,
        "monotone_violations": res.monotone_violations,
        "mode": pf.values["mode"],
        "base": base,
    }
    if res.trace is not None and len(res.trace.step_distances) >= 3:
        diag = diagnose(res.trace)
        payload["diagnostics"] = {"violations": diag.violations, "rate": diag.rate,
                                  "rate_defined": diag.rate_defined, "cauchy": diag.cauchy}
    if not res.converged:
        print(f"picardo: no convergence after {res.iterations_used} iterations", file=sys.stderr)
    return (EXIT["ok"] if res.converged else EXIT["failed"]), payload, res.trace


_RUNNERS = {"solve": _run_solve, "check": _run_check, "iterate": _run_iterate}


def run(command: str, file, args) -> int:
    """Execute one command on one problem file and return the exit status."""
    out = Path(args.out)
    try:
        pf = parse_problem(Path(file).read_bytes())
    except OSError as exc:
        print(f"picardo: cannot read {file}: {exc}", file=sys.stderr)
        return EXIT["usage"]
    except ParseError as exc:
        print(f"picardo: {file}: {exc}", file=sys.stderr)
        return EXIT["usage"]
    if pf.kind not in COMMAND_KINDS[command]:
        print(f"picardo: '{command}' cannot run a [{pf.kind}] problem "
              f"(expected {' or '.join(COMMAND_KINDS[command])})", file=sys.stderr)
        return EXIT["usage"]

    trace = None
    try:
        code, payload, trace = _RUNNERS[command](pf, args)
    except Diverged as exc:
        print(f"picardo: diverged: {exc}", file=sys.stderr)
        code, payload = EXIT["failed"], {"status": "diverged", "error": str(exc), "iteration": exc.iteration}
    except (PicardoError, ValueError) as exc:
        print(f"picardo: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT["usage"]

    out.mkdir(parents=True, exist_ok=True)
    report = {"command": command, "kind": pf.kind, "exit_status": code, "report": payload}
    write_report(out / "report.json", report)
    if args.trace and trace is not None:
        write_trace_csv(out / "trace.csv", trace.rows())
    print(json.dumps({"status": payload["status"], "exit_status": code, "report": str(out / "report.json")}))
    return code


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="picardo", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "solve": "solve a [fredholm] or [urysohn] problem by successive approximation",
        "check": "falsification check of a [contraction-check] problem",
        "iterate": "run the (infinite) k-Picard iteration of an [operator-iteration] problem",
    }
    for name, help_text in helps.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("file", help="problem file")
        p.add_argument("--out", default=".", help="directory for report.json / trace.csv (default: .)")
        p.add_argument("--trace", action="store_true", help="also write trace.csv")
        p.add_argument("--oracle", action="store_true", help="cross-check against the dense solve")
        p.add_argument("--force", action="store_true", help="iterate even if a hypothesis fails")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--max-iter", dest="max_iter", type=int, default=None)
        p.add_argument("--eps-step", dest="eps_step", type=float, default=None)
        p.add_argument("--eps-res", dest="eps_res", type=float, default=None)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT["usage"] if exc.code else 0
    return run(args.command, args.file, args)


if __name__ == "__main__":
    sys.exit(main())
