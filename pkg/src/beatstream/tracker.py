"""Per-frame sequential Monte Carlo beat tracking engine.

Each frame runs one motion/correction cycle over a fixed population of
particles living on the position/tempo lattice:

1. motion: every particle shifts one position along its row; particles at
   the row end wrap to the row start and resample their tempo row.
2. correction: weights are multiplied by the observation likelihood of the
   frame's beat activation and renormalized, then the population is
   regenerated by stochastic universal sampling.
3. on wrap frames a small quota of offspring is redirected to the rows at
   double and half the median beat period to probe octave errors.
4. decision: the frame is declared a beat when the median row-normalized
   position falls inside the beat boundary and the previous beat is more
   than half the median period away.

The engine never looks ahead: frame ``k``'s decision uses only activations
up to frame ``k``, and a beat can be emitted from the very first frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .state_space import StateSpace, StateSpaceConfig, build_state_space

__all__ = [
    "LIKELIHOOD_FLOOR",
    "RESAMPLE_EVERY_FRAME",
    "RESAMPLE_ESS_HALF",
    "TrackerConfig",
    "Particle",
    "ParticleSet",
    "BeatEvent",
    "TrackerState",
    "init_particles",
    "advance",
    "observation_weight",
    "state_likelihoods",
    "weigh",
    "effective_sample_size",
    "resample_sus",
    "inject_tempo_hypotheses",
    "decide_beat",
    "step",
    "BeatTracker",
    "track_activations",
]

# Observation likelihoods never drop below this, so a weak activation
# inside the beat region cannot permanently zero out a particle.
LIKELIHOOD_FLOOR = 1e-6

RESAMPLE_EVERY_FRAME = "every"
RESAMPLE_ESS_HALF = "ess"


@dataclass(frozen=True)
class TrackerConfig:
    """All tracker tunables.

    Defaults follow the reference operating point: 1000 particles, tempo
    transition sharpness 30, non-beat likelihood floor 0.03, fractional
    beat boundary of 1/60 over a 55-215 BPM range at 100 frames/s.
    """

    n_particles: int = 1000
    transition_lambda: float = 30.0
    gamma: float = 0.03
    state_space: StateSpaceConfig = field(default_factory=StateSpaceConfig)
    tempo_injection_fraction: float = 0.02
    seed: int = 0
    resample_policy: str = RESAMPLE_EVERY_FRAME

    def __post_init__(self):
        if self.n_particles < 2:
            raise ConfigError(
                f"n_particles must be >= 2, got {self.n_particles}")
        if self.transition_lambda <= 0:
            raise ConfigError(
                f"transition_lambda must be > 0, got {self.transition_lambda}")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError(f"gamma must be in (0, 1), got {self.gamma}")
        if not 0.0 <= self.tempo_injection_fraction <= 0.2:
            raise ConfigError(
                "tempo_injection_fraction must be in [0, 0.2], got "
                f"{self.tempo_injection_fraction}")
        if self.resample_policy not in (
                RESAMPLE_EVERY_FRAME, RESAMPLE_ESS_HALF):
            raise ConfigError(
                f"unknown resample_policy: {self.resample_policy!r}")


@dataclass(frozen=True)
class Particle:
    """A single hypothesis: (row, 1-based position, importance weight)."""

    row_index: int
    position: int
    weight: float


@dataclass
class ParticleSet:
    """Fixed-size particle population stored as parallel arrays.

    Operations mutate the arrays in place; the population size never
    changes. ``rng`` is the single seeded generator behind every random
    choice, which makes runs reproducible.
    """

    row: np.ndarray        # (N,) int64 row indices
    position: np.ndarray   # (N,) int64, 1-based position within the row
    weights: np.ndarray    # (N,) float64 normalized importance weights
    rng: np.random.Generator

    @property
    def n(self) -> int:
        return self.row.size

    def copy(self) -> "ParticleSet":
        """Deep copy sharing nothing; the RNG state is cloned too."""
        rng = np.random.default_rng()
        rng.bit_generator.state = self.rng.bit_generator.state
        return ParticleSet(
            self.row.copy(), self.position.copy(), self.weights.copy(), rng)

    def particle(self, i: int) -> Particle:
        return Particle(
            int(self.row[i]), int(self.position[i]), float(self.weights[i]))


@dataclass(frozen=True)
class BeatEvent:
    """An emitted beat: time in seconds, frame index, and the tempo
    estimate from the median particle row at emission."""

    time_s: float
    frame_index: int
    tempo_bpm_estimate: float


@dataclass
class TrackerState:
    """Mutable per-stream tracking state consumed by :func:`step`."""

    particles: ParticleSet
    space: StateSpace
    config: TrackerConfig
    frame_index: int = 0
    last_beat_frame: int | None = None
    degeneracy_frames: int = 0


def init_particles(config: TrackerConfig, space: StateSpace) -> ParticleSet:
    """Draw N particles uniformly over all (row, position) states.

    Uniform over states, not over rows: longer (slower) rows receive
    proportionally more particles. Weights start at 1/N. Deterministic
    given ``config.seed``.
    """
    rng = np.random.default_rng(config.seed)
    n = config.n_particles
    flat = rng.integers(0, space.total_states, size=n)
    row = np.searchsorted(space.offsets, flat, side="right") - 1
    position = flat - space.offsets[row] + 1
    weights = np.full(n, 1.0 / n)
    return ParticleSet(row.astype(np.int64), position.astype(np.int64),
                       weights, rng)


def advance(pset: ParticleSet, space: StateSpace,
            transition_lambda: float) -> np.ndarray:
    """Motion step, in place. Returns the boolean mask of wrapped particles.

    Particles mid-row shift right by one position deterministically.
    Particles at the row end wrap to position 1 and draw a new row from
    the tempo transition distribution of their current row; no other
    noise is injected anywhere.
    """
    m = space.m_values[pset.row]
    wrapped = pset.position >= m
    pset.position += 1
    idx = np.nonzero(wrapped)[0]
    if idx.size:
        pset.position[idx] = 1
        cum = space.transition_cum(transition_lambda)
        u = pset.rng.random(idx.size)
        src = pset.row[idx]
        pset.row[idx] = np.sum(cum[src] <= u[:, None], axis=1)
    return wrapped


def state_likelihoods(space: StateSpace, b: float, gamma: float) -> np.ndarray:
    """Observation likelihood of activation ``b`` for every flattened state."""
    lik = gamma + (b - gamma) * space.profile_flat
    return np.maximum(lik, LIKELIHOOD_FLOOR)


def _likelihoods(space: StateSpace, row: np.ndarray, position: np.ndarray,
                 b: float, gamma: float) -> np.ndarray:
    flat = space.offsets[row] + position - 1
    lik = gamma + (b - gamma) * space.profile_flat[flat]
    return np.maximum(lik, LIKELIHOOD_FLOOR, out=lik)


def observation_weight(space: StateSpace, row_index: int, position: int,
                       b: float, gamma: float) -> float:
    """Likelihood of activation ``b`` for one (row, position) state.

    Hard discriminators yield ``b`` on beat states and ``gamma``
    elsewhere; the Gaussian discriminator interpolates between them along
    the row's soft profile. Results are floored at ``LIKELIHOOD_FLOOR``.
    """
    if not 0.0 <= b <= 1.0:
        raise ValueError(f"activation must be in [0, 1], got {b}")
    row = space.rows[row_index]
    if not 1 <= position <= row.m:
        raise ValueError(
            f"position {position} outside row of length {row.m}")
    return float(_likelihoods(
        space, np.array([row_index]), np.array([position]), b, gamma)[0])


def weigh(pset: ParticleSet, b: float, gamma: float,
          space: StateSpace) -> bool:
    """Correction step, in place: multiply weights by the observation
    likelihood and renormalize.

    Returns True when the weights degenerated (total mass underflowed to
    zero) and were reset to uniform; streaming never halts on degeneracy.
    """
    if not 0.0 <= b <= 1.0:
        raise ValueError(f"activation must be in [0, 1], got {b}")
    pset.weights *= _likelihoods(space, pset.row, pset.position, b, gamma)
    total = pset.weights.sum()
    if total <= 0.0 or not np.isfinite(total):
        pset.weights.fill(1.0 / pset.n)
        return True
    pset.weights /= total
    return False


def effective_sample_size(weights: np.ndarray) -> float:
    """ESS = 1 / sum(w^2) for normalized weights."""
    return 1.0 / float(np.sum(np.square(weights)))


def resample_sus(pset: ParticleSet) -> np.ndarray:
    """Stochastic universal resampling, in place. Returns parent indices.

    One uniform draw in [0, 1/N) places N evenly spaced pointers on the
    cumulative weight axis; offspring counts per parent can differ from
    N*weight by less than one. Offspring weights reset to 1/N.
    """
    n = pset.n
    cum = np.cumsum(pset.weights)
    cum[-1] = 1.0
    u0 = pset.rng.random() / n
    pointers = u0 + np.arange(n) / n
    parents = np.searchsorted(cum, pointers, side="right")
    pset.row = pset.row[parents]
    pset.position = pset.position[parents]
    pset.weights.fill(1.0 / n)
    return parents


def inject_tempo_hypotheses(
    pset: ParticleSet,
    space: StateSpace,
    fraction: float,
    parent_weights: np.ndarray | None = None,
) -> int:
    """Redirect a small quota of particles to double/half the median period.

    Meant to run right after resampling on frames where a wrap occurred:
    ``floor(fraction * N / 2)`` particles are sent to the row nearest
    twice the median interval and the same number to the row nearest half
    of it (targets clamp into the row range, positions reset to 1, weights
    untouched). Victims are the offspring with the lowest-weight parents,
    ties broken by index, so the least posterior mass is sacrificed.
    Returns the number of redirected particles; a zero fraction is the
    identity.
    """
    if not 0.0 <= fraction <= 0.2:
        raise ValueError(
            f"injection fraction must be in [0, 0.2], got {fraction}")
    half_quota = int(fraction * pset.n / 2)
    if half_quota == 0:
        return 0
    ranking = parent_weights if parent_weights is not None else pset.weights
    order = np.argsort(ranking, kind="stable")
    chosen = order[: 2 * half_quota]
    m_median = float(np.median(space.m_values[pset.row]))
    double_row = space.nearest_row_index(2.0 * m_median)
    half_row = space.nearest_row_index(m_median / 2.0)
    pset.row[chosen[:half_quota]] = double_row
    pset.row[chosen[half_quota:]] = half_row
    pset.position[chosen] = 1
    return 2 * half_quota


def decide_beat(state: TrackerState) -> BeatEvent | None:
    """Median-based beat decision for the current frame.

    Positions are normalized per row (eta = (phi - 1) / M) so hypotheses
    at different tempi are comparable; a beat is emitted when the median
    eta falls inside the discriminator's boundary fraction and the
    previous beat is more than half the median interval away.
    """
    pset = state.particles
    space = state.space
    m = space.m_values[pset.row]
    eta_median = float(np.median((pset.position - 1) / m))
    m_median = float(np.median(m))
    boundary = space.config.discriminator.boundary_fraction(m_median)
    if eta_median >= boundary:
        return None
    if (state.last_beat_frame is not None
            and state.frame_index - state.last_beat_frame <= m_median / 2.0):
        return None
    state.last_beat_frame = state.frame_index
    dt = space.frame_period_s
    return BeatEvent(
        time_s=state.frame_index * dt,
        frame_index=state.frame_index,
        tempo_bpm_estimate=60.0 / (m_median * dt),
    )


def step(state: TrackerState, b: float) -> BeatEvent | None:
    """Process one activation frame and return the beat event, if any.

    Pipeline: advance -> weigh -> resample (per policy) -> tempo
    hypothesis injection (wrap frames only) -> beat decision. The decision
    is made at the current frame with no lookahead or buffering.
    """
    cfg = state.config
    pset = state.particles
    wrapped = advance(pset, state.space, cfg.transition_lambda)
    if weigh(pset, b, cfg.gamma, state.space):
        state.degeneracy_frames += 1

    if cfg.resample_policy == RESAMPLE_EVERY_FRAME:
        do_resample = True
    else:
        do_resample = effective_sample_size(pset.weights) < pset.n / 2.0

    parent_weights = None
    if do_resample:
        pre_weights = pset.weights.copy()
        parents = resample_sus(pset)
        parent_weights = pre_weights[parents]

    if cfg.tempo_injection_fraction > 0.0 and wrapped.any():
        inject_tempo_hypotheses(
            pset, state.space, cfg.tempo_injection_fraction, parent_weights)

    event = decide_beat(state)
    state.frame_index += 1
    return event


class BeatTracker:
    """Streaming tracker tying the state space and the particle filter
    together for one activation stream.

    >>> tracker = BeatTracker()
    >>> events = tracker.process(activations)   # doctest: +SKIP

    ``process_frame`` consumes one activation at a time for true streaming
    use. Instances are not thread-safe; run one stream per instance.
    """

    def __init__(self, config: TrackerConfig | None = None):
        self.config = config if config is not None else TrackerConfig()
        self.space = build_state_space(self.config.state_space)
        # warm the transition cache so the first wrap frame pays no setup
        self.space.transition_cum(self.config.transition_lambda)
        self.state = self._fresh_state()

    def _fresh_state(self) -> TrackerState:
        return TrackerState(
            particles=init_particles(self.config, self.space),
            space=self.space,
            config=self.config,
        )

    def reset(self) -> None:
        """Restart from the seeded initial distribution."""
        self.state = self._fresh_state()

    def process_frame(self, b: float) -> BeatEvent | None:
        return step(self.state, float(b))

    def process(self, activations) -> list[BeatEvent]:
        """Run a whole activation sequence and collect the beat events."""
        events = []
        for b in activations:
            event = step(self.state, float(b))
            if event is not None:
                events.append(event)
        return events

    @property
    def degeneracy_frames(self) -> int:
        """Frames on which weight degeneracy forced a uniform reset."""
        return self.state.degeneracy_frames


def track_activations(activations, config: TrackerConfig | None = None,
                      ) -> list[BeatEvent]:
    """Convenience wrapper: track one activation sequence from scratch."""
    return BeatTracker(config).process(activations)
