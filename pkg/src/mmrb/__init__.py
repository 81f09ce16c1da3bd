"""Robustness benchmark for multi-modal semantic segmentation.

Corrupts per-modality inputs under three failure regimes (entire-missing,
random-missing, noisy), scores predictions by mIoU, and aggregates
per-combination scores into probability-weighted robustness metrics.
"""

from .aggregation import (MetricRecord, NoiseSummary, RegimeSummary,
                          RobustnessReport, avg_miou, build_report,
                          expected_miou, record_from_labels,
                          subset_probability)
from .corruption import (TensorBuffer, add_gaussian, add_salt_pepper,
                         apply_nm, corruption_severity, validate_range,
                         zero_full, zero_random)
from .dataset import (Manifest, Sample, SyntheticConfig, decode_tensor,
                      encode_labels, generate_synthetic, parse_manifest,
                      read_label, read_tensor, write_label, write_manifest,
                      write_tensor)
from .errors import (ConfigError, ManifestError, MetricError,
                     MissingCombinationError, MmrbError, ParameterError,
                     PredictorError, ScenarioError, TensorFormatError)
from .harness import (BenchmarkConfig, NM_LEVELS, PredictorRef,
                      emm_scenarios, invoke_predictor, materialize_scenario,
                      nm_scenario, predict_degraded_oracle, rmm_scenarios,
                      run_benchmark, run_scenario)
from .metrics import (ConfusionMatrix, LabelMap, accumulate_confusion,
                      class_iou, mean_iou, merge_confusion)
from .modality import (DELIVER_PROFILES, FailureModel, ModalityProfile,
                       ModalitySubset, NoiseLevel, NoiseParams, ScenarioSpec,
                       combination_label, enumerate_corrupted_subsets,
                       intact_subsets_in_table_order)
from .report import read_report, round_half_up, summary_lines, write_report
from .rng import SeedContext, derive_stream_seed

__version__ = "0.1.0"

__all__ = [
    "BenchmarkConfig", "ConfigError", "ConfusionMatrix", "DELIVER_PROFILES",
    "FailureModel", "LabelMap", "Manifest", "ManifestError", "MetricError",
    "MetricRecord", "MissingCombinationError", "MmrbError", "ModalityProfile",
    "ModalitySubset", "NM_LEVELS", "NoiseLevel", "NoiseParams", "NoiseSummary",
    "ParameterError", "PredictorError", "PredictorRef", "RegimeSummary",
    "RobustnessReport", "Sample", "ScenarioError", "ScenarioSpec",
    "SeedContext", "SyntheticConfig", "TensorBuffer", "TensorFormatError",
    "accumulate_confusion", "add_gaussian", "add_salt_pepper", "apply_nm",
    "avg_miou", "build_report", "class_iou", "combination_label",
    "corruption_severity", "decode_tensor", "derive_stream_seed",
    "emm_scenarios", "encode_labels", "enumerate_corrupted_subsets",
    "expected_miou", "generate_synthetic", "intact_subsets_in_table_order",
    "invoke_predictor", "materialize_scenario", "mean_iou", "merge_confusion",
    "nm_scenario", "parse_manifest", "predict_degraded_oracle", "read_label",
    "read_report", "read_tensor", "record_from_labels", "rmm_scenarios",
    "round_half_up", "run_benchmark", "run_scenario", "subset_probability",
    "summary_lines", "validate_range", "write_label", "write_manifest",
    "write_report", "write_tensor", "zero_full", "zero_random",
]
