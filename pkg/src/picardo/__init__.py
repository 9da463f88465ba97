"""Fixed-point toolkit for Geraghty-type contractions on hat sequences.

The pieces, bottom up: metric spaces and hat sequences (:mod:`picardo.metric`),
contraction conditions and a sampling falsifier (:mod:`picardo.contractions`),
the k-Picard engines (:mod:`picardo.picard`), Fredholm and Urysohn solvers with
Nystrom oracles (:mod:`picardo.integral`) and the ``picardo`` command line.
"""

from .contractions import (
    ContractionKind,
    FalsificationReport,
    GeraghtyFn,
    SamplerConfig,
    beta_sanity,
    falsify,
    lhs_rhs,
    m_k,
)
from .errors import *  # noqa: F401,F403
from .expr import Expression, eval_expr, parse_expr
from .integral import (
    FredholmProblem,
    SolverReport,
    UrysohnProblem,
    oracle_fredholm_dense,
    oracle_urysohn_newton,
    solve_fredholm,
    solve_urysohn,
)
from .metric import (
    AbsDiff,
    FunctionGrid,
    HatSequence,
    SupNorm,
    UserDistance,
    WeightedSupNorm,
    constant,
    element_at,
    hat,
    rehat,
)
from .picard import IterationConfig, diagnose, infinite_k_picard, k_picard
from .problem import ProblemFile, dump_problem, parse_problem
from .quadrature import QuadratureRule

__version__ = "0.1.0"
