"""Video saliency with top-down key object selection and bottom-up feature weighting.

Subpackages mirror the pipeline stages:

* :mod:`ksora.tensor` -- dense (channels, height, width) feature-map ops
* :mod:`ksora.wfe` -- channel weighting and two-level pyramid fusion
* :mod:`ksora.kos` -- class ranking, proposal scoring and roi enhancement
* :mod:`ksora.convlstm` -- peephole convLSTM head with readout
* :mod:`ksora.metrics` -- CC, SIM, EMD, AUC-Judd and PR curves
* :mod:`ksora.harness` -- codecs, synthetic scenes, pipeline driver, CLI
"""

from ksora.errors import (
    CodecError,
    ConfigurationError,
    DimensionError,
    IngestionError,
    KsoraError,
    SizeError,
    UndefinedMetricError,
)

__version__ = "0.1.0"

__all__ = [
    "CodecError",
    "ConfigurationError",
    "DimensionError",
    "IngestionError",
    "KsoraError",
    "SizeError",
    "UndefinedMetricError",
]
