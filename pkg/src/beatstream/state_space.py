"""Beat-level position/tempo state space.

The state space is a stack of tempo rows. The row for tempo ``T`` (in BPM)
is a lattice of ``M = round(60 / (T * frame_period))`` positions; a
hypothesis walks one position per frame and wraps back to the row start
after ``M`` frames, so wrap instants are beat hypotheses. The leading
positions of each row form the beat-state region where the observation
model listens for activation energy and where tempo changes are sampled.

Three boundary models (discriminators) define how much of a row counts as
beat states: a fraction of the row length, a constant number of positions,
or a soft Gaussian profile anchored at the row start.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

__all__ = [
    "Fractional",
    "ConstantCount",
    "GaussianSoft",
    "StateSpaceConfig",
    "TempoRow",
    "StateSpace",
    "tempo_to_interval",
    "build_state_space",
    "is_beat_state",
    "tempo_transition_distribution",
]


@dataclass(frozen=True)
class Fractional:
    """Beat/non-beat boundary at a fixed fraction of each row.

    A row of length M gets ``max(1, ceil(alpha * M))`` beat states, so
    every row keeps at least one beat state.
    """

    alpha: float = 1.0 / 60.0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in (0, 1], got {self.alpha}")

    def beat_state_count(self, m: int) -> int:
        return max(1, math.ceil(self.alpha * m))

    def boundary_fraction(self, m_median: float) -> float:
        return self.alpha


@dataclass(frozen=True)
class ConstantCount:
    """Beat/non-beat boundary with a constant number of beat states per row,
    clamped to the row length."""

    count: int = 1

    def __post_init__(self):
        if self.count < 1:
            raise ConfigError(f"count must be >= 1, got {self.count}")

    def beat_state_count(self, m: int) -> int:
        return min(self.count, m)

    def boundary_fraction(self, m_median: float) -> float:
        return self.count / m_median


@dataclass(frozen=True)
class GaussianSoft:
    """Soft beat/non-beat boundary: per-position weights fall off as a
    Gaussian from the row start, with sigma a fixed fraction of the row
    length. Hard beat-state membership is the row start only."""

    sigma_frac: float = 0.05

    def __post_init__(self):
        if not 0.0 < self.sigma_frac <= 1.0:
            raise ConfigError(
                f"sigma_frac must be in (0, 1], got {self.sigma_frac}")

    def beat_state_count(self, m: int) -> int:
        return 1

    def boundary_fraction(self, m_median: float) -> float:
        return 1.0 / m_median

    def profile(self, m: int) -> np.ndarray:
        offsets = np.arange(m, dtype=np.float64)
        sigma = self.sigma_frac * m
        return np.exp(-(offsets ** 2) / (2.0 * sigma ** 2))


Discriminator = Fractional | ConstantCount | GaussianSoft


@dataclass(frozen=True)
class StateSpaceConfig:
    """Tunables defining the position/tempo lattice.

    Attributes
    ----------
    frame_period_s : float
        Hop period between activation frames in seconds (100 Hz default).
    tempo_min_bpm, tempo_max_bpm : float
        Inclusive tempo range covered by the rows.
    discriminator : Fractional | ConstantCount | GaussianSoft
        Beat/non-beat boundary model.
    """

    frame_period_s: float = 0.01
    tempo_min_bpm: float = 55.0
    tempo_max_bpm: float = 215.0
    discriminator: Discriminator = field(default_factory=Fractional)

    def __post_init__(self):
        if self.frame_period_s <= 0:
            raise ConfigError(
                f"frame_period_s must be > 0, got {self.frame_period_s}")
        if not 0 < self.tempo_min_bpm < self.tempo_max_bpm:
            raise ConfigError(
                "tempo range must satisfy 0 < tempo_min < tempo_max, got "
                f"[{self.tempo_min_bpm}, {self.tempo_max_bpm}]")
        if not isinstance(
                self.discriminator, (Fractional, ConstantCount, GaussianSoft)):
            raise ConfigError(
                f"unknown discriminator: {self.discriminator!r}")


@dataclass(frozen=True)
class TempoRow:
    """One tempo row: a lattice of ``m`` positions walked once per frame.

    ``soft_profile`` is only set for the Gaussian discriminator; it holds
    the per-position observation weight measured from the row start.
    """

    m: int
    tempo_bpm: float
    beat_state_count: int
    soft_profile: np.ndarray | None = None


def tempo_to_interval(tempo_bpm: float, frame_period_s: float) -> int:
    """Frames per beat for a tempo: ``round(60 / (tempo * period))``, at
    least 1."""
    if tempo_bpm <= 0:
        raise ValueError(f"tempo_bpm must be > 0, got {tempo_bpm}")
    if frame_period_s <= 0:
        raise ValueError(
            f"frame_period_s must be > 0, got {frame_period_s}")
    return max(1, round(60.0 / (tempo_bpm * frame_period_s)))


class StateSpace:
    """Immutable stack of tempo rows plus precomputed lookup arrays.

    Rows are sorted by ascending frame-per-beat interval (descending
    tempo) and cover every integer interval in the configured range.
    Flattened state indexing is row-major: state ``offsets[r] + (phi - 1)``
    is position ``phi`` of row ``r``.
    """

    def __init__(self, config: StateSpaceConfig, rows: list[TempoRow]):
        self.config = config
        self.rows = rows
        self.frame_period_s = config.frame_period_s
        self.m_values = np.array([row.m for row in rows], dtype=np.int64)
        self.m_min = int(self.m_values[0])
        self.m_max = int(self.m_values[-1])
        self.beat_counts = np.array(
            [row.beat_state_count for row in rows], dtype=np.int64)
        self.offsets = np.concatenate(
            ([0], np.cumsum(self.m_values)[:-1])).astype(np.int64)
        self.total_states = int(self.m_values.sum())
        self.profile_flat = self._build_profile_flat()
        self._transition_cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def _build_profile_flat(self) -> np.ndarray:
        # Per-state observation bump in [0, 1]: likelihood interpolates
        # between the activation value (bump 1) and the floor (bump 0).
        chunks = []
        for row in self.rows:
            if row.soft_profile is not None:
                chunks.append(row.soft_profile)
            else:
                hard = np.zeros(row.m)
                hard[: row.beat_state_count] = 1.0
                chunks.append(hard)
        return np.concatenate(chunks)

    def row_index(self, m: int) -> int:
        """Index of the row with interval ``m``."""
        if not self.m_min <= m <= self.m_max:
            raise ValueError(
                f"interval {m} outside row range [{self.m_min}, {self.m_max}]")
        return int(m) - self.m_min

    def nearest_row_index(self, target_m: float) -> int:
        """Index of the row whose interval is nearest ``target_m``, clamped
        into the row range."""
        m = min(max(round(target_m), self.m_min), self.m_max)
        return int(m) - self.m_min

    def state_index(self, row_index: int, position: int) -> int:
        """Flattened index of 1-based ``position`` within a row."""
        return int(self.offsets[row_index]) + int(position) - 1

    def transition_matrix(self, transition_lambda: float) -> np.ndarray:
        """Row-stochastic tempo transition matrix (source row -> new row),
        cached per lambda."""
        return self._transition(transition_lambda)[0]

    def transition_cum(self, transition_lambda: float) -> np.ndarray:
        """Row-wise cumulative sums of :meth:`transition_matrix` for
        inverse-CDF sampling."""
        return self._transition(transition_lambda)[1]

    def _transition(self, lam: float) -> tuple[np.ndarray, np.ndarray]:
        cached = self._transition_cache.get(lam)
        if cached is None:
            matrix = np.stack([
                tempo_transition_distribution(row, lam, self)
                for row in self.rows
            ])
            cum = np.cumsum(matrix, axis=1)
            cum[:, -1] = 1.0
            cached = (matrix, cum)
            self._transition_cache[lam] = cached
        return cached


def build_state_space(config: StateSpaceConfig) -> StateSpace:
    """Construct the state space for a configuration.

    One row per integer interval between the fastest and slowest tempo;
    beat-state extent per row follows the configured discriminator.
    """
    m_lo = tempo_to_interval(config.tempo_max_bpm, config.frame_period_s)
    m_hi = tempo_to_interval(config.tempo_min_bpm, config.frame_period_s)
    if m_lo > m_hi:
        raise ConfigError(
            f"empty tempo range: fastest interval {m_lo} exceeds slowest {m_hi}")
    disc = config.discriminator
    rows = []
    for m in range(m_lo, m_hi + 1):
        profile = disc.profile(m) if isinstance(disc, GaussianSoft) else None
        rows.append(TempoRow(
            m=m,
            tempo_bpm=60.0 / (m * config.frame_period_s),
            beat_state_count=disc.beat_state_count(m),
            soft_profile=profile,
        ))
    return StateSpace(config, rows)


def is_beat_state(row: TempoRow, position: int) -> bool:
    """Whether 1-based ``position`` is a beat state of ``row``."""
    if not 1 <= position <= row.m:
        raise ValueError(
            f"position {position} outside row of length {row.m}")
    return position <= row.beat_state_count


def tempo_transition_distribution(
    from_row: TempoRow,
    transition_lambda: float,
    space: StateSpace,
) -> np.ndarray:
    """Probability of landing on each row when tempo is resampled at a wrap.

    Mass decays exponentially with the relative interval change
    ``|m_to / m_from - 1|`` at rate ``transition_lambda``; the result is
    normalized over all rows of ``space``.
    """
    if transition_lambda <= 0:
        raise ValueError(
            f"transition_lambda must be > 0, got {transition_lambda}")
    if not space.m_min <= from_row.m <= space.m_max:
        raise ValueError(
            f"row with interval {from_row.m} is not part of this space")
    ratios = space.m_values.astype(np.float64) / from_row.m
    mass = np.exp(-transition_lambda * np.abs(ratios - 1.0))
    return mass / mass.sum()
