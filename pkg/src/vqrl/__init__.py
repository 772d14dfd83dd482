"""Gene-encoded parameterized quantum circuits for policy-gradient RL.

The toolkit covers the full desk-scale pipeline: genomes decode to circuit
IRs (:mod:`vqrl.genome`), which run on a dense statevector simulator with
shot sampling and trajectory noise (:mod:`vqrl.sim`), form softmax policies
(:mod:`vqrl.policy`), and train against a self-contained CartPole
(:mod:`vqrl.cartpole`) via hardware-corrected REINFORCE
(:mod:`vqrl.reinforce`).  Architectures are searched with NSGA-II
(:mod:`vqrl.nsga2`), lowered and costed for linear-coupling hardware
(:mod:`vqrl.transpile`), and executed on exact, emulated, or remote
backends (:mod:`vqrl.backend`).
"""
from .backend import (
    BackendDescriptor,
    EmulatedBackend,
    ExactBackend,
    Job,
    JobNotFoundError,
    RemoteBackend,
    RemoteJobError,
    execute,
    make_backend,
    parse_circuit,
    poll,
    serialize_circuit,
)
from .cartpole import CartPoleEnv, CartState, StepResult, step_dynamics
from .genome import (
    ALT5_GENOME,
    EQAS_GENOME,
    SEARCHED_GENOME,
    BoundCircuit,
    CircuitComponent,
    CircuitIR,
    ComponentKind,
    GateOp,
    Gene,
    Genome,
    bind_parameters,
    decode_genome,
    random_genome,
)
from .mockserver import MockQuantumServer
from .nsga2 import Individual, SearchConfig, SearchResult, crowding_distance, evolve, non_dominated_sort
from .policy import (
    PolicyGradient,
    PolicyParams,
    action_probs,
    init_params,
    log_prob_gradient,
    sample_action,
    weighted_expectations,
)
from .reinforce import (
    EpisodeMetrics,
    TrainConfig,
    TrainResult,
    Trajectory,
    apply_update,
    collect_trajectory,
    compute_update,
    discounted_return,
    load_checkpoint,
    run_inference,
    save_checkpoint,
    train,
    write_metrics_csv,
)
from .sim import (
    Counts,
    NoiseModel,
    PauliZString,
    estimate_expectation,
    expectation,
    parameter_shift_gradient,
    sample_counts,
    simulate,
)
from .transpile import CompiledCircuit, CompileStats, CouplingMap, lower, stats

__version__ = "0.1.0"
