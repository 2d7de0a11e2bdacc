from .classification import RocCurve, auc_report, classification_metrics, roc_auc, signal_scores
from .precip import (
    ComDisplacement,
    CuCsiGrid,
    ZeroMassError,
    active_area_mae,
    center_of_mass,
    center_of_mass_displacement,
    csi,
    csi_avg,
    csi_bin,
    csi_counts,
    cucsi,
    differential_trend,
    displacement_mae_curve,
    mae,
    mean_intensity,
    shift_frame,
)
from .regression import (
    ErrorPair,
    UnlabeledFrameError,
    energy_error_series,
    energy_mae,
    error_scatter,
    flag_excursions,
    force_mae,
)
from .stability import PredictorRunError, StabilityEntry, StabilityResult, stability_analysis
from .stats import CorrelationResult, histogram, pearson_linfit, tukey_outliers

__all__ = [name for name in dir() if not name.startswith("_")]
