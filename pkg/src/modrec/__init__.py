"""modrec: synthetic radio dataset forge and modulation classifier.

Generates labeled complex-baseband examples for 24 modulation classes under
parameterized channel impairments, extracts higher-order-statistics feature
vectors, and trains a from-scratch gradient-boosted-tree baseline, with
accuracy-vs-SNR curves and confusion matrices as evaluation artifacts.
"""

from .channel import (ChannelParams, ImpairmentProfile, apply_awgn,
                      apply_cfo_phase, apply_fading, apply_sro_timing,
                      draw_fading_taps, draw_params, impair)
from .dataio import (DatasetManifest, read_dataset, read_dataset_arrays,
                     read_features, read_manifest, split, write_dataset,
                     write_features)
from .errors import (ConfigError, DataError, DegenerateExampleError,
                     InsufficientLengthError, ModrecError, NumericError)
from .features import (FEATURE_NAMES, AnalogStats, FeatureVector,
                       analog_stats, cumulant, cumulants, featurize,
                       featurize_batch, hom)
from .gbtree import (GbtConfig, GbtModel, best_split, load_model, predict,
                     predict_margin, predict_proba, save_model, train)
from .harness import (build_manifest, evaluate, featurize_dataset,
                      generate_dataset, generate_example, sweep,
                      train_baseline)
from .metrics import (ConfusionMatrix, SnrCurve, accuracy_by_snr,
                      confusion_matrix)
from .modem import (CLASS_SETS, DIFFICULT_CLASSES, NORMAL_CLASSES,
                    AnalogSourceConfig, Constellation, ModulationScheme,
                    ShapingConfig, constellation_for, modulate_analog,
                    modulate_gmsk, modulate_linear, modulate_offset_qpsk,
                    rrc_taps, scheme_for)
from .sigcore import (IqExample, RandomStream, measure_snr, normalize,
                      normalize_power, power)

__version__ = "0.1.0"
