"""Convolutional modulation classifiers trained on raw I/Q datasets."""

from .errors import ConfigError, DataError, DlnetError, TrainError
from .nets import (
    IqClassifier,
    NetSpec,
    REFERENCE_PARAM_TOTALS,
    build,
    calibration_table,
    param_count,
    shape_chain,
)
from .rscd import RscdFile, load_arrays, open_rscd, read_manifest, split_indices
from .trainloop import (
    TrainConfig,
    TrainState,
    accuracy_by_snr,
    cross_entropy,
    fit,
    freeze_trunk,
    load_checkpoint,
    parameter_checksums,
    predict,
    save_checkpoint,
    transfer_finetune,
    write_confusion_csv,
    write_curve_csv,
)

__all__ = [
    "ConfigError", "DataError", "DlnetError", "TrainError",
    "IqClassifier", "NetSpec", "REFERENCE_PARAM_TOTALS", "build",
    "calibration_table", "param_count", "shape_chain",
    "RscdFile", "load_arrays", "open_rscd", "read_manifest", "split_indices",
    "TrainConfig", "TrainState", "accuracy_by_snr", "cross_entropy", "fit",
    "freeze_trunk", "load_checkpoint", "parameter_checksums", "predict",
    "save_checkpoint", "transfer_finetune", "write_confusion_csv",
    "write_curve_csv",
]

__version__ = "0.1.0"
