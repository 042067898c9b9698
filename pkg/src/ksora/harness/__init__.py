"""Pipeline driver, file codecs, synthetic scenes and the ``ksora`` CLI."""

from ksora.harness.bundle import SequenceBundle, read_bundle, write_bundle
from ksora.harness.config import PipelineConfig, read_config, write_config
from ksora.harness.pipeline import Model, PipelineResult, run_pipeline
from ksora.harness.synth import SceneSpec, synth_scene

__all__ = [
    "Model",
    "PipelineConfig",
    "PipelineResult",
    "SceneSpec",
    "SequenceBundle",
    "read_bundle",
    "read_config",
    "run_pipeline",
    "synth_scene",
    "write_bundle",
    "write_config",
]
