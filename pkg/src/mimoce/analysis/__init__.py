"""Complexity accounting, attention-map statistics, experiment orchestration and output writers."""

from .attention import (DEFAULT_SINE_BUCKETS, SATURATION_TOL, AttentionAnalysis, AttentionMapRecord,
                        attention_analysis, capture_attention_maps)
from .complexity import (ALGORITHMS, FULL_SCALE_CONSTANTS, REFERENCE_COMPLEXITY, ComplexityError, ComplexityReport,
                         complexity_report, reference_reports)
from .experiment import SCALES, ConfigError, load_config, point_hash, run_experiment, validate_config
from .outputs import FIGURE_AXES, RESULT_COLUMNS, emit_outputs, figure_tables, read_results_csv, write_results_csv

__all__ = [
    "DEFAULT_SINE_BUCKETS", "SATURATION_TOL", "AttentionAnalysis", "AttentionMapRecord", "attention_analysis",
    "capture_attention_maps", "ALGORITHMS", "FULL_SCALE_CONSTANTS", "REFERENCE_COMPLEXITY", "ComplexityError",
    "ComplexityReport", "complexity_report", "reference_reports", "SCALES", "ConfigError", "load_config", "point_hash",
    "run_experiment", "validate_config", "FIGURE_AXES", "RESULT_COLUMNS", "emit_outputs", "figure_tables",
    "read_results_csv", "write_results_csv",
]
