"""Synthetic activation streams with exactly known beat times.

A tempo script lays beats down by integrating a piecewise-constant tempo
curve, optionally perturbing each beat with timing jitter and suppressing
some activation bumps (dropouts never remove the reference beat). Every
beat contributes a Gaussian bump to the activation curve on top of a
constant noise floor. Used as ground truth for tests and benchmarks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

__all__ = ["TempoScript", "generate", "standard_suite"]


@dataclass(frozen=True)
class TempoScript:
    """Recipe for one synthetic activation stream.

    ``segments`` is a sequence of (start_s, tempo_bpm) breakpoints with
    strictly increasing start times beginning at 0; the tempo is constant
    between breakpoints. ``pulse_width_frames`` is the standard deviation
    of the activation bump around each beat. The default width keeps
    neighbouring bumps separate even at the fastest supported tempi.
    """

    segments: tuple[tuple[float, float], ...]
    duration_s: float
    pulse_width_frames: float = 1.5
    peak: float = 0.9
    noise_floor: float = 0.02
    jitter_s: float = 0.0
    dropout_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.segments:
            raise ConfigError("at least one tempo segment is required")
        starts = [s for s, _ in self.segments]
        tempi = [t for _, t in self.segments]
        if starts[0] != 0.0:
            raise ConfigError(
                f"first segment must start at 0 s, got {starts[0]}")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ConfigError("segment start times must strictly increase")
        if any(t <= 0 for t in tempi):
            raise ConfigError("tempi must be positive")
        if self.duration_s <= 0:
            raise ConfigError(
                f"duration_s must be > 0, got {self.duration_s}")
        if self.pulse_width_frames <= 0:
            raise ConfigError("pulse_width_frames must be > 0")
        if not 0.0 < self.peak <= 1.0:
            raise ConfigError(f"peak must be in (0, 1], got {self.peak}")
        if not 0.0 <= self.noise_floor < self.peak:
            raise ConfigError(
                "noise_floor must be in [0, peak), got "
                f"{self.noise_floor} vs peak {self.peak}")
        if not 0.0 <= self.dropout_prob <= 1.0:
            raise ConfigError("dropout_prob must be in [0, 1]")
        if self.jitter_s < 0:
            raise ConfigError("jitter_s must be >= 0")

    def tempo_at(self, t: float) -> float:
        """Tempo in BPM at time ``t`` (piecewise constant)."""
        tempo = self.segments[0][1]
        for start, value in self.segments:
            if start <= t:
                tempo = value
            else:
                break
        return tempo

    @staticmethod
    def constant(tempo_bpm: float, duration_s: float,
                 **kwargs) -> "TempoScript":
        return TempoScript(((0.0, tempo_bpm),), duration_s, **kwargs)


def generate(script: TempoScript,
             frame_rate: float) -> tuple[np.ndarray, np.ndarray]:
    """Render a script into (activations, reference beat times).

    The first beat falls at t = 0; each next beat follows after the
    current period. Jitter perturbs the true beat instants (bumps and
    references alike); dropouts suppress only the bump evidence. Returns
    the activation curve sampled at ``frame_rate`` and the sorted
    reference times in seconds.
    """
    rng = np.random.default_rng(script.seed)

    times = []
    t = 0.0
    while t < script.duration_s:
        times.append(t)
        t += 60.0 / script.tempo_at(t)
    beat_times = np.asarray(times)

    if script.jitter_s > 0 and beat_times.size:
        beat_times = beat_times + rng.normal(
            0.0, script.jitter_s, beat_times.size)
        beat_times = np.sort(
            np.clip(beat_times, 0.0, np.nextafter(script.duration_s, 0.0)))

    dropped = (rng.random(beat_times.size) < script.dropout_prob
               if script.dropout_prob > 0
               else np.zeros(beat_times.size, dtype=bool))

    n_frames = int(round(script.duration_s * frame_rate))
    bumps = np.zeros(n_frames)
    width = script.pulse_width_frames
    reach = int(np.ceil(4.0 * width))
    for beat_t, is_dropped in zip(beat_times, dropped):
        if is_dropped:
            continue
        center = beat_t * frame_rate
        lo = max(0, int(np.floor(center)) - reach)
        hi = min(n_frames, int(np.ceil(center)) + reach + 1)
        frames = np.arange(lo, hi)
        bumps[lo:hi] += script.peak * np.exp(
            -((frames - center) ** 2) / (2.0 * width ** 2))

    activations = np.clip(script.noise_floor + bumps, 0.0, 1.0)
    return activations, beat_times


def standard_suite() -> dict[str, TempoScript]:
    """The ten-item synthetic benchmark suite used by the evaluation and
    sweep harnesses: constant tempi across the supported range, tempo
    steps, a slow drift, timing jitter, and dropouts."""
    drift = tuple((round(i * 1.8, 2), 100.0 + 2 * i) for i in range(11))
    return {
        "const080": TempoScript.constant(80.0, 20.0, seed=101),
        "const100": TempoScript.constant(100.0, 20.0, seed=102),
        "const120": TempoScript.constant(120.0, 20.0, seed=103),
        "const144": TempoScript.constant(144.0, 20.0, seed=104),
        "const180": TempoScript.constant(180.0, 20.0, seed=105),
        "step_up": TempoScript(((0.0, 120.0), (10.0, 144.0)), 20.0, seed=106),
        "step_down": TempoScript(((0.0, 100.0), (10.0, 90.0)), 20.0, seed=107),
        "drift": TempoScript(drift, 20.0, seed=108),
        "jitter": TempoScript.constant(120.0, 20.0, jitter_s=0.01, seed=109),
        "dropout": TempoScript.constant(120.0, 20.0, dropout_prob=0.1,
                                        seed=110),
    }
