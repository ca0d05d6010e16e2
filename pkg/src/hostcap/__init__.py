"""Dynamic solar hosting capacity for balanced radial distribution feeders.

Computes per-node injection envelopes (hyperrectangles) that are guaranteed
admissible under the nonlinear branch-flow physics, tracks them over time
against varying demand, enforces and measures fairness of the allocation,
and prices the curtailment / carbon consequences of exceeding static limits.
"""

from hostcap.net_model import Network, CompactMatrices, build_network, compact_matrices
from hostcap.loadflow import (
    OperatingPoint,
    AdmissibilityReport,
    solve_loadflow,
    check_admissible,
    sweep_admissible_set,
)
from hostcap.conic import ConicProblem, ConicSolution
from hostcap.fairness import (
    FairnessSpec,
    FairnessReport,
    ScenarioPreset,
    SCENARIOS,
    epsilon_constraint,
    jfi,
    jfi_lower_bound,
    fairness_report,
)
from hostcap.cia import (
    Linearization,
    Hyperrectangle,
    DhcSeries,
    linearize,
    build_p1,
    solve_hc,
    envelope_mae,
    dhc_timeseries,
)
from hostcap.economics import (
    PvScenario,
    EconomicsReport,
    static_limits,
    base_profile,
    curtailment_curves,
    carbon_and_profit,
)

__version__ = "0.1.0"
