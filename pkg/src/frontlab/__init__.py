"""frontlab: desk-scale experiments on u_t = u_xx + f(u) over the real line.

Simulates the truncated Cauchy problem with far-field Dirichlet data driven
by the limit ODE, classifies steady-state orbits in the phase plane, audits
zero numbers of solution differences, tracks critical points, and issues
quasiconvergence/convergence verdicts for the extracted limit profiles.
"""

__version__ = "0.1.0"

from .nonlinearity import (
    DegenerateNonlinearityError,
    DomainError,
    NonlinearitySpec,
    eval_F,
    eval_df,
    eval_f,
    lipschitz_bound,
)
from .phase_plane import (
    Equilibrium,
    Heteroclinic,
    Homoclinic,
    OrbitClass,
    Periodic,
    PhasePoint,
    PreconditionError,
    RootInfo,
    Unresolved,
    classify_orbit,
    find_equilibria,
    hamiltonian,
    minimal_period,
    orbit_profile,
    orbit_samples,
    turning_points,
)
from .solver import (
    Bump,
    Front,
    Grid,
    InitialFamily,
    Plateaus,
    Profile,
    RunResult,
    Samples,
    SolverConfig,
    SolverState,
    StepError,
    family_limits,
    make_initial,
    run,
    snapshot_times,
    solve_theta,
    step,
)
from .diagnostics import (
    CaseTag,
    CriticalTrack,
    DegenerateProfileError,
    Segment,
    ZeroHistory,
    ZeroReport,
    classify_case,
    count_zeros,
    energy_window,
    reflect_diff,
    track_critical_points,
    vlambda_decay,
    zero_history,
)
from .omega_limit import (
    Classification,
    Constant,
    GroundStateShift,
    NonSteady,
    OmegaProfile,
    OmegaReport,
    PeriodicNonconstant,
    StandingWaveShift,
    analyze,
    classify_profile,
    extract_omega,
    verdict,
)
from .experiment import (
    ConfigError,
    ExperimentConfig,
    config_from_dict,
    config_to_dict,
    load_config_file,
    load_run,
    run_experiment,
)
