"""Prefix-based controller synthesis for switched linear systems.

Finite-horizon output feedback over a finite set of switching signals, where
the controller may condition only on the mode prefix observed so far
(optionally with delay).  Synthesis runs over closed-loop response maps:
expected quadratic cost becomes a QP, worst-case peak state amplification
becomes an LP, and the optimal prefix-based controller is recovered exactly.
"""

from .blockmat import (
    BlockDiagMatrix,
    BlockGrid,
    BlockLTMatrix,
    StructureError,
    blkdiag,
    downshift,
    invert_unit_lower,
)
from .io import (
    ConfigError,
    Scenario,
    load_scenario,
    read_solution,
    write_solution,
)
from .language import (
    PrefixTree,
    SwitchingLanguage,
    SwitchingSignal,
    UnknownSignal,
    build_prefix_tree,
    fault_language,
    fault_time,
    prefixes_equal,
    uniform,
)
from .sim import (
    SimTrace,
    bounded_noise,
    monte_carlo,
    noise_rng,
    sample_noise,
    simulate,
    worst_case_state_norm,
)
from .sls import (
    PrefixController,
    PrefixLayout,
    SynthesisConsistencyError,
    SystemResponse,
    check_affine,
    closed_loop_response,
    realize_online,
    recover_controller,
    response_from_uy_param,
)
from .solver import (
    BadProblem,
    DenseLP,
    EqQP,
    Infeasible,
    SolverError,
    Unbounded,
    solve_eq_qp,
    solve_lp,
)
from .synth import (
    SynthesisSolution,
    closed_loop_family,
    evaluate_h2_objective,
    evaluate_l1_objective,
    induced_inf_norm,
    memoryless_l1_baseline,
    nominal_h2_baseline,
    synth_h2,
    synth_l1,
)
from .system import (
    CostSpec,
    NoiseSpec,
    SwitchedModel,
    admire_model,
    check_psd,
    psd_sqrt,
)

__version__ = "0.1.0"

__all__ = [
    "BadProblem",
    "BlockDiagMatrix",
    "BlockGrid",
    "BlockLTMatrix",
    "ConfigError",
    "CostSpec",
    "DenseLP",
    "EqQP",
    "Infeasible",
    "NoiseSpec",
    "PrefixController",
    "PrefixLayout",
    "PrefixTree",
    "Scenario",
    "SimTrace",
    "SolverError",
    "StructureError",
    "SwitchedModel",
    "SwitchingLanguage",
    "SwitchingSignal",
    "SynthesisConsistencyError",
    "SynthesisSolution",
    "SystemResponse",
    "Unbounded",
    "UnknownSignal",
    "admire_model",
    "blkdiag",
    "bounded_noise",
    "build_prefix_tree",
    "check_affine",
    "check_psd",
    "closed_loop_family",
    "closed_loop_response",
    "downshift",
    "evaluate_h2_objective",
    "evaluate_l1_objective",
    "fault_language",
    "fault_time",
    "induced_inf_norm",
    "invert_unit_lower",
    "load_scenario",
    "memoryless_l1_baseline",
    "monte_carlo",
    "noise_rng",
    "nominal_h2_baseline",
    "prefixes_equal",
    "psd_sqrt",
    "read_solution",
    "realize_online",
    "recover_controller",
    "response_from_uy_param",
    "sample_noise",
    "simulate",
    "solve_eq_qp",
    "solve_lp",
    "synth_h2",
    "synth_l1",
    "uniform",
    "worst_case_state_norm",
    "write_solution",
]
