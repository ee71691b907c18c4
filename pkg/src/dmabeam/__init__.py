"""Statistical-CSI beamforming simulator for DMA-enabled multiuser MISO."""

from .channel import (StackedStat, UserStat, correlation, sample_channel,
                      stat_matrices, upa_steering)
from .dma import (DmaState, MicrostripModel, assemble_views, lorentzian,
                  microstrip_propagation, project_weight, random_lorentzian)
from .downlink import (PddResult, RelaxedAoResult, al_objective,
                       assemble_downlink_quadratic, fp_auxiliaries,
                       fp_objective, pdd_run, power_constrained_solve,
                       relaxed_ao_run, update_V, update_W)
from .ewr import QuadraticProblem, ewr_solve, ewr_step, quad_objective, uc_solve
from .harness import (ExperimentResult, run_experiment, sweep, write_csv,
                      write_trace_csv)
from .rates import (RateReport, energy_efficiency, mc_rate, surrogate_rate,
                    total_power)
from .scenario import (ConfigError, Scenario, UserGeometry, load_scenario,
                       place_users, rng_stream)
from .uplink import (SolverError, WmmseResult, assemble_uplink_quadratic,
                     update_receiver_and_weight, wmmse_objective, wmmse_run)

__all__ = [
    "ConfigError", "DmaState", "ExperimentResult", "MicrostripModel",
    "PddResult", "QuadraticProblem", "RateReport", "RelaxedAoResult",
    "Scenario", "SolverError", "StackedStat", "UserGeometry", "UserStat",
    "WmmseResult", "al_objective", "assemble_downlink_quadratic",
    "assemble_uplink_quadratic", "assemble_views", "correlation",
    "energy_efficiency", "ewr_solve", "ewr_step", "fp_auxiliaries",
    "fp_objective", "load_scenario", "lorentzian", "mc_rate",
    "microstrip_propagation", "pdd_run", "place_users",
    "power_constrained_solve", "project_weight", "quad_objective",
    "random_lorentzian", "relaxed_ao_run", "rng_stream", "run_experiment",
    "sample_channel", "stat_matrices", "surrogate_rate", "sweep",
    "total_power", "uc_solve", "upa_steering", "update_V", "update_W",
    "update_receiver_and_weight", "wmmse_objective", "wmmse_run", "write_csv",
    "write_trace_csv",
]
