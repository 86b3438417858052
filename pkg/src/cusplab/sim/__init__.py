"""Semi-Lagrangian blow-up laboratory for CH / HS / Burgers.

The submodules split along the run lifecycle: :mod:`initial_data` builds and
verifies admissible seeds, :mod:`steppers` advances marker ensembles one step,
:mod:`runner` integrates to the gradient threshold with snapshot/conservation
logging, and :mod:`frames` extracts modulation variables and self-similar
profiles from snapshots.
"""

from .state import FieldState, MarkerCrossingError
from .initial_data import (
    InitialDataSpec,
    InitialDataReport,
    ConditionCheck,
    InitialDataError,
    build_initial_data,
)
from .steppers import (
    step_hs,
    step_ch,
    step_burgers,
    step,
    stable_dt,
    hs_qx,
    ch_pressure,
    burgers_oracle,
)
from .runner import (
    RunConfig,
    RunResult,
    ConservationLog,
    BlowupSeed,
    run_to_blowup,
    save_run,
    load_run,
)
from .frames import (
    ModulationState,
    SelfSimilarFrame,
    ModulationError,
    track_modulation,
    to_self_similar,
    d3u_origin_self_similar,
)

__all__ = [
    "FieldState", "MarkerCrossingError",
    "InitialDataSpec", "InitialDataReport", "ConditionCheck",
    "InitialDataError", "build_initial_data",
    "step_hs", "step_ch", "step_burgers", "step", "stable_dt",
    "hs_qx", "ch_pressure", "burgers_oracle",
    "RunConfig", "RunResult", "ConservationLog", "BlowupSeed",
    "run_to_blowup", "save_run", "load_run",
    "ModulationState", "SelfSimilarFrame", "ModulationError",
    "track_modulation", "to_self_similar", "d3u_origin_self_similar",
]
