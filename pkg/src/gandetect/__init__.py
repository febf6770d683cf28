"""GAN discriminators as unsupervised anomaly detectors for repeated-inspection time series."""

from .detector import DetectionReport, KdeConfig, detect
from .evaluation import EvalReport, aggregate, match_and_score
from .motif import kmeans_fit, motif_detect, motif_train
from .selection import grid_search_lr, na_ratio, select_discriminator
from .synth import SineSpec, TrackSpec, gen_line_set, gen_sine_set, gen_track
from .timeseries import LabeledAnomalies, TimeSeries, WindowMatrix, extract_windows, load_series
from .training import GanConfig, train_gan

__version__ = "0.1.0"

__all__ = [
    "DetectionReport", "KdeConfig", "detect", "EvalReport", "aggregate", "match_and_score",
    "kmeans_fit", "motif_detect", "motif_train", "grid_search_lr", "na_ratio", "select_discriminator",
    "SineSpec", "TrackSpec", "gen_line_set", "gen_sine_set", "gen_track", "LabeledAnomalies",
    "TimeSeries", "WindowMatrix", "extract_windows", "load_series", "GanConfig", "train_gan",
]
