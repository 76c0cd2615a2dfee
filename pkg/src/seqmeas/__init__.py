"""Sequential quantum measurement toolkit.

Constructs and verifies sequential implementations of jointly measurable
observables: POVMs, Kraus channels, Naimark dilations, the universal
measurement channel of an observable, and a convex feasibility engine for
joint-measurability and channel-decomposition questions.
"""

from __future__ import annotations

from .channels import (
    ChoiMatrix,
    KrausChannel,
    StinespringForm,
    apply,
    branch_observable,
    choi,
    classical_channel,
    conjugate,
    heisenberg_apply,
    identity_channel,
    is_trace_preserving,
    luders,
    nondisturbing,
    stinespring,
)
from .dilation import (
    NaimarkDilation,
    connecting_isometry,
    is_minimal,
    naimark_canonical,
    naimark_minimal,
    verify_dilation,
)
from .feasibility import (
    FEASIBLE,
    INFEASIBLE,
    UNDECIDED,
    FeasibilityError,
    FeasibilityOutcome,
    NecessaryConditionError,
    SolverOptions,
    busch_criterion,
    busch_value,
    conjugate_is_b_channel,
    decompose_psd,
    find_joint_observable,
    is_a_channel,
    orthogonal_joint_observable,
    recover_b_prime,
    witness_povm,
)
from .povm import (
    AXIS_X,
    AXIS_Y,
    AXIS_Z,
    Povm,
    bloch_vector,
    effects_close,
    four_outcome_refinement,
    is_sharp,
    marginal,
    marginals,
    noisy_spin_triplet,
    post_process,
    qubit_binary,
    refinement_joint,
    trivial,
    validate,
)
from .sequential import (
    SequentialScheme,
    compensating_channel,
    implemented_joint,
    modified_observable,
    sequential_scheme,
    universal_channel,
    verify_sequential,
)

__version__ = "0.1.0"

__all__ = [
    "AXIS_X",
    "AXIS_Y",
    "AXIS_Z",
    "ChoiMatrix",
    "FEASIBLE",
    "FeasibilityError",
    "FeasibilityOutcome",
    "INFEASIBLE",
    "KrausChannel",
    "NaimarkDilation",
    "NecessaryConditionError",
    "Povm",
    "SequentialScheme",
    "SolverOptions",
    "StinespringForm",
    "UNDECIDED",
    "apply",
    "bloch_vector",
    "branch_observable",
    "busch_criterion",
    "busch_value",
    "choi",
    "classical_channel",
    "compensating_channel",
    "conjugate",
    "conjugate_is_b_channel",
    "connecting_isometry",
    "decompose_psd",
    "effects_close",
    "find_joint_observable",
    "four_outcome_refinement",
    "heisenberg_apply",
    "identity_channel",
    "implemented_joint",
    "is_a_channel",
    "is_minimal",
    "is_sharp",
    "is_trace_preserving",
    "luders",
    "marginal",
    "marginals",
    "modified_observable",
    "naimark_canonical",
    "naimark_minimal",
    "noisy_spin_triplet",
    "nondisturbing",
    "orthogonal_joint_observable",
    "post_process",
    "qubit_binary",
    "recover_b_prime",
    "refinement_joint",
    "sequential_scheme",
    "stinespring",
    "trivial",
    "universal_channel",
    "validate",
    "verify_dilation",
    "verify_sequential",
    "witness_povm",
]
