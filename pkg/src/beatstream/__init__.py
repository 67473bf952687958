"""Streaming beat tracking with a particle filter over a position/tempo
lattice, plus synthesis, evaluation, and benchmarking harnesses."""

from .errors import BeatstreamError, ConfigError, StreamFormatError
from .evaluation import (BeatAnnotations, DatasetItem, DatasetReport,
                         ScoreReport, SweepReport, evaluate_dataset,
                         load_annotations, match_beats, particle_sweep,
                         score)
from .forward import ForwardFilterResult, forward_filter
from .frontend import (ActivationFrame, ActivationStream, AudioFrameSpec,
                       FeaturePipeline, FilterbankSpec, FluxActivation,
                       compute_features, flux_activations,
                       open_activation_stream, read_wav,
                       write_activations_bact, write_activations_text)
from .state_space import (ConstantCount, Fractional, GaussianSoft,
                          StateSpace, StateSpaceConfig, TempoRow,
                          build_state_space, is_beat_state,
                          tempo_to_interval, tempo_transition_distribution)
from .synth import TempoScript, generate, standard_suite
from .tracker import (BeatEvent, BeatTracker, Particle, ParticleSet,
                      TrackerConfig, TrackerState, advance, decide_beat,
                      effective_sample_size, init_particles,
                      inject_tempo_hypotheses, observation_weight,
                      resample_sus, step, track_activations, weigh)

__version__ = "0.1.0"

__all__ = [
    "BeatstreamError", "ConfigError", "StreamFormatError",
    "StateSpaceConfig", "StateSpace", "TempoRow",
    "Fractional", "ConstantCount", "GaussianSoft",
    "tempo_to_interval", "build_state_space", "is_beat_state",
    "tempo_transition_distribution",
    "TrackerConfig", "Particle", "ParticleSet", "BeatEvent", "TrackerState",
    "BeatTracker", "track_activations",
    "init_particles", "advance", "observation_weight", "weigh",
    "effective_sample_size", "resample_sus", "inject_tempo_hypotheses",
    "decide_beat", "step",
    "ForwardFilterResult", "forward_filter",
    "ActivationFrame", "ActivationStream", "AudioFrameSpec",
    "FilterbankSpec", "FeaturePipeline", "FluxActivation",
    "open_activation_stream", "write_activations_text",
    "write_activations_bact", "read_wav", "compute_features",
    "flux_activations",
    "TempoScript", "generate", "standard_suite",
    "BeatAnnotations", "load_annotations", "ScoreReport", "match_beats",
    "score", "DatasetItem", "DatasetReport", "evaluate_dataset",
    "SweepReport", "particle_sweep",
    "__version__",
]
