"""Message-scheduling GAMP for joint activity detection and channel estimation."""

__version__ = "0.1.0"

from .scenario import (  # noqa: F401
    Scenario,
    SystemConfig,
    generate_pilots,
    load_scenario,
    sample_activity,
    sample_channels,
    save_scenario,
    scenario_hash,
    synthesize,
)
from .denoisers import (  # noqa: F401
    PosteriorMoments,
    PseudoPrior,
    cn_pdf,
    input_denoise,
    output_denoise,
    scaled_residual,
)
from .scheduling import (  # noqa: F401
    Policy,
    ScheduleSet,
    compute_residuals,
    full_schedule,
    update_count,
    update_grbp,
    update_grbpp,
    update_rbp,
)
from .engine import (  # noqa: F401
    GampState,
    RunRecord,
    aggregate_activity,
    gamp_sweep,
    init_state,
    run,
    sparsity_update,
    stopping_tol,
)
from .baselines import (  # noqa: F401
    EstimatorResult,
    hygamp,
    mmse_estimate,
    msgamp,
    oracle_mmse_estimate,
    plain_gamp,
)
from .metrics import (  # noqa: F401
    activity_error_rate,
    bootstrap_ci,
    nmse_active_db,
    nmse_all_db,
)
from .harness import (  # noqa: F401
    ESTIMATORS,
    ExperimentSpec,
    ResultTable,
    emit_convergence,
    load_experiment_spec,
    run_experiment,
    write_result_files,
)
