"""Certified a-posteriori error bounds for approximate DE solutions.

Given only the equation structure and the residual of an approximate
solution (a trained network, a series expansion, any surrogate), the
engines in this package compute rigorous pointwise bounds on the true
error for:

* linear ODEs with constant coefficients (closed-form envelope and
  operator-composition bounds),
* first-order linear ODEs with a variable coefficient,
* first-order linear ODE systems (componentwise and norm bounds),
* nonlinear ODEs with a single eps * v^k term via perturbation expansion,
* first-order linear PDEs on rectangles with Dirichlet data (constant
  bound and characteristic-curve bounds).

The ``resbound`` CLI exposes the engines over a JSON problem format and a
``verify`` command that replays the built-in manufactured-solution
catalog.
"""

from .errors import (
    CoefficientVanishes,
    DegreeTooLarge,
    DomainError,
    ExpressionSyntaxError,
    InvalidDomain,
    NeedExplicitJordan,
    NoBoundaryHit,
    NotOnDirichletBoundary,
    OutOfDomain,
    OutOfValidityWarning,
    ProblemFormatError,
    ResboundError,
    SingularMatrix,
    StagnationPoint,
    StepUnderflow,
    UnboundVariable,
    UnknownIdentifier,
    UnstableSystem,
)
from .expr import DualValue, Expression, eval_dual, parse
from .nonlinear import (
    ComponentBounds,
    EpsQuery,
    PerturbationProblem,
    component_bounds,
    nl_bound,
    nl_term,
    reconstruct,
)
from .ode import (
    BoundSeries,
    LinearODEProblem,
    LooseBoundReport,
    first_order_variable_bound,
    loose_bound,
    tight_bound,
)
from .operators import (
    CharacteristicRoots,
    Grid,
    SampledFunction,
    apply_I,
    apply_I_variable,
    char_roots,
    cumtrapz,
    interp_linear,
    linspace,
    max_abs,
)
from .pde import (
    CharCurve,
    GammaSegment,
    PDEProblem,
    constant_bound,
    curve_bound,
    trace_characteristic,
)
from .problems import ParsedProblem, load_problem, parse_problem
from .systems import (
    JordanSpec,
    SystemProblem,
    VectorBoundSeries,
    componentwise_bound,
    cond2,
    jordan_from_matrix,
    norm_bound,
    operator_block_apply,
)

__version__ = "0.1.0"
