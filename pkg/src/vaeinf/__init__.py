"""Two-stage VAE anomaly detection with calibrated Type-I error control."""

from .calibration import CalibratedRule, calibrate_for_type2, calibrate_threshold, coverage_simulation, decide
from .data import MAJORITY, MINORITY, LabeledDataset, SyntheticSpec, generate_synthetic, load_csv, stratified_split
from .finetune import Stage2Config, grid_search_alpha_beta, margin_reg_loss, train_stage2
from .projection import DirectionSet, anomaly_score, draw_direction_set, projection_statistic, score_batch
from .reference import ReferenceModel, barycenter, w2_sq_diag
from .vae import DiagGaussian, Stage1Config, VaeModel, encode, init_vae, train_stage1

__version__ = "0.1.0"
