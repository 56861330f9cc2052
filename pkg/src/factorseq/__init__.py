"""Static and dynamic low-rank approximation of large time-series panels.

The Jacobi eigen-solver runs in a compiled extension when it is built and
falls back to NumPy otherwise; ``factorseq.BACKEND`` reports which one.
"""
from ._kernels import BACKEND
from .errors import DataError, FactorSeqError, NumericalError
from .forecast import ForecastResult, ForecastSpec, aic_lag_select, fit_ols, run_forecast_models
from .harness import (
    Diagnosis,
    ExperimentConfig,
    ExperimentReport,
    amse,
    diagnose_panel,
    lagged_corr_diagnostic,
    run_amse_experiment,
    run_forecast_experiment,
)
from .lowrank import DlraFit, SlraFit, apply_filter, dlra_filter, fit_dlra, fit_slra
from .panel import Panel, apply_tcode, apply_tcodes, load_panel_csv, sample_autocov, standardize, write_panel_csv
from .spectra import (
    EigenSystem,
    FrequencyGrid,
    SpectralDensity,
    bartlett_weight,
    default_bandwidth,
    estimate_spectrum,
    hermitian_eig,
)
from .statespace import (
    IdioSpec,
    SimulatedPanel,
    StateSpaceModel,
    lyapunov_solve,
    make_paper_dgp,
    miniphase_check,
    pbh_observable,
    simulate_ss,
)
from .structure import (
    ThreeWayDecomposition,
    extract_weak_factors,
    innovations_from_factors,
    recover_innovations_blockwise,
    three_way_decompose,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "DataError", "FactorSeqError", "NumericalError",
    "ForecastResult", "ForecastSpec", "aic_lag_select", "fit_ols", "run_forecast_models",
    "Diagnosis", "ExperimentConfig", "ExperimentReport", "amse", "diagnose_panel",
    "lagged_corr_diagnostic", "run_amse_experiment", "run_forecast_experiment",
    "DlraFit", "SlraFit", "apply_filter", "dlra_filter", "fit_dlra", "fit_slra",
    "Panel", "apply_tcode", "apply_tcodes", "load_panel_csv", "sample_autocov", "standardize",
    "write_panel_csv",
    "EigenSystem", "FrequencyGrid", "SpectralDensity", "bartlett_weight", "default_bandwidth",
    "estimate_spectrum", "hermitian_eig",
    "IdioSpec", "SimulatedPanel", "StateSpaceModel", "lyapunov_solve", "make_paper_dgp",
    "miniphase_check", "pbh_observable", "simulate_ss",
    "ThreeWayDecomposition", "extract_weak_factors", "innovations_from_factors",
    "recover_innovations_blockwise", "three_way_decompose",
]
