"""Lower and upper expected hitting times and hitting probabilities of
imprecise Markov chains."""

from .core import (
    ImpreciseChain,
    IntervalRow,
    RowCredalSet,
    StateSpace,
    VertexRow,
    lower_transition_apply,
    possible_support,
    power_transition,
    row_vertices,
    select_extremal_matrix,
    upper_transition_apply,
    validate_chain,
)
from .errors import (
    BoundOrderError,
    DimensionMismatch,
    ImcError,
    IntervalInfeasible,
    LambdaOutOfRange,
    NotConverged,
    ParseError,
    PolicyCycle,
    PreconditionError,
    RowSumError,
    SingularSystem,
    TreeTooLarge,
    UnknownStateInTarget,
    ValidationError,
    VertexExplosion,
    WitnessVerificationFailed,
)
from .iteration import (
    HittingResult,
    IterationTrace,
    emit_trace,
    fixed_point_residual,
    infinite_states_hitting_time,
    iterate_hitting_prob,
    iterate_hitting_time,
    solve,
    solve_exact,
)
from .modelio import parse_model, write_model
from .oracle import (
    EnvelopeReport,
    backward_induction_truncated,
    brute_force_envelope,
    enumerate_vertex_chains,
    monte_carlo_envelope_check,
    random_chain,
)
from .precise import (
    check_minimal_solution,
    precise_hitting_prob,
    precise_hitting_time,
    precise_solve,
)
from .structure import (
    ClassificationReport,
    LambdaWitness,
    a_inert_modification,
    build_lambda_base,
    classify_states,
    extract_witness,
    lambda_chain,
    lower_finite_region,
)

__version__ = "0.1.0"
