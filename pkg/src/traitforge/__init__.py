"""Speech/text personality recognition with homogeneous models and group normalization."""

from .corpus import Corpus, SpeakerProfile, TimedToken, Turn, load_corpus, segment_turns
from .evaluation import ArmResult, ExperimentReport, render_report, sig_vs_baseline, sig_vs_chance
from .features import FeatureMatrix, FeatureVector, assemble, build_matrix
from .labeling import NormThresholds, TraitLabel, label_corpus, label_score
from .modeling import SVMParams, fit_svm, route_and_predict, train_bank, upsample
from .normalization import apply_stats, fit_group_stats, normalize_by_speaker

__version__ = "0.1.0"
