"""Unit-wise influence diagnostics for linear fixed-effects panel regressions.

Typical use::

    from panelinfluence import PanelSchema, load_csv, analyze

    data = load_csv("panel.csv", PanelSchema("country", "year", "rer", ("tfp",)))
    report = analyze(data)
    report.classification, report.cook, report.conditional_effect
"""

__version__ = "0.1.0"

from .deletion import (
    DeletionResult,
    DeletionSweep,
    brute_force_refit,
    deletion_sweep,
    leave_one_out,
    leave_two_out,
)
from .dgp import Contamination, ContaminationSpec, DgpConfig, generate, preset
from .errors import PanelInfluenceError, SingularBlockError, SingularityError, ValidationError
from .estimator import FixedEffectsFit, HatBlocks, fit, hat_blocks
from .influence import (
    Cutoffs,
    InfluenceReport,
    analyze,
    classify_units,
    conditional_effect,
    conditional_influence,
    f_median_cutoff,
    joint_effect,
    joint_influence,
    normalized_residuals,
    unit_leverage,
    unit_outlyingness,
)
from .panel import DemeanedPanel, PanelDataset, PanelSchema, load_csv, within_group_transform
from .plots import PlotArtifact, emit_influence_heat_plots, emit_leverage_residual_plot
from .report import AnalysisConfig, report_from_json, report_to_json, run_analysis

__all__ = [name for name in dir() if not name.startswith("_")]
