"""Activation stream ingestion and the fallback audio front-end.

The tracker consumes one beat-activation value in [0, 1] per frame.
Normally those come from a precomputed stream (text: one float per line;
binary: ``BACT`` magic, u32 LE frame rate, f32 LE values). When only raw
audio is available, a causal spectral-flux activation is computed from a
log-filterbank feature pipeline: Hann-windowed magnitude spectra, 30 Hz to
17 kHz triangular filters at 12 bands per octave, log compression, and a
first-order temporal difference.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import StreamFormatError

__all__ = [
    "AudioFrameSpec",
    "FilterbankSpec",
    "ActivationFrame",
    "ActivationStream",
    "open_activation_stream",
    "write_activations_text",
    "write_activations_bact",
    "read_wav",
    "FeaturePipeline",
    "compute_features",
    "half_wave_flux",
    "FluxActivation",
    "flux_activations",
]

BACT_MAGIC = b"BACT"
DEFAULT_FRAME_RATE = 100.0


@dataclass(frozen=True)
class AudioFrameSpec:
    """Framing of the raw audio stream: 46 ms Hann windows, 10 ms hop."""

    sample_rate: int
    window_s: float = 0.046
    hop_s: float = 0.010

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise StreamFormatError(
                f"sample_rate must be > 0, got {self.sample_rate}")
        if not 0 < self.hop_s <= self.window_s:
            raise StreamFormatError(
                f"need 0 < hop_s <= window_s, got hop {self.hop_s} "
                f"window {self.window_s}")

    @property
    def window_length(self) -> int:
        return round(self.window_s * self.sample_rate)

    @property
    def hop_length(self) -> int:
        return round(self.hop_s * self.sample_rate)

    @property
    def frame_rate(self) -> float:
        return self.sample_rate / self.hop_length


@dataclass(frozen=True)
class FilterbankSpec:
    """Log-spaced triangular filterbank, semitone resolution by default."""

    f_min: float = 30.0
    f_max: float = 17000.0
    bands_per_octave: int = 12
    with_first_order_diff: bool = True

    def __post_init__(self):
        if not 0 < self.f_min < self.f_max:
            raise StreamFormatError(
                f"need 0 < f_min < f_max, got [{self.f_min}, {self.f_max}]")
        if self.bands_per_octave < 1:
            raise StreamFormatError("bands_per_octave must be >= 1")


@dataclass(frozen=True)
class ActivationFrame:
    """One activation value in [0, 1] at its frame index."""

    b: float
    frame_index: int


class ActivationStream:
    """Iterator of :class:`ActivationFrame` with source metadata.

    Values outside [0, 1] are clamped; ``clamp_warnings`` counts them so
    callers can report a summary. ``frame_rate`` is taken from the binary
    header when present, else from the caller's default.
    """

    def __init__(self, frames, frame_rate: float):
        self._frames = frames
        self.frame_rate = frame_rate
        self.clamp_warnings = 0

    def __iter__(self):
        return self

    def __next__(self) -> ActivationFrame:
        return next(self._frames)

    def values(self):
        """Iterate bare activation values."""
        for frame in self:
            yield frame.b


def _clamp(value: float, stream: ActivationStream) -> float:
    if value < 0.0:
        stream.clamp_warnings += 1
        return 0.0
    if value > 1.0:
        stream.clamp_warnings += 1
        return 1.0
    return value


def _iter_text(lines, stream: ActivationStream):
    index = 0
    for lineno, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text or text.startswith("#"):
            continue
        try:
            value = float(text)
        except ValueError:
            raise StreamFormatError(
                f"line {lineno}: cannot parse activation value {text!r}")
        if not np.isfinite(value):
            raise StreamFormatError(
                f"line {lineno}: non-finite activation value {text!r}")
        yield ActivationFrame(_clamp(value, stream), index)
        index += 1


def _iter_bact_body(fileobj, stream: ActivationStream):
    index = 0
    leftover = b""
    while True:
        chunk = fileobj.read(4096)
        if not chunk:
            break
        data = leftover + chunk
        usable = len(data) - (len(data) % 4)
        values = np.frombuffer(data[:usable], dtype="<f4")
        leftover = data[usable:]
        for value in values:
            if not np.isfinite(value):
                raise StreamFormatError(
                    f"frame {index}: non-finite activation value")
            yield ActivationFrame(_clamp(float(value), stream), index)
            index += 1
    if leftover:
        raise StreamFormatError(
            f"truncated stream: {len(leftover)} trailing bytes after "
            f"frame {index - 1}")


def _open_bact(fileobj) -> ActivationStream:
    header = fileobj.read(8)
    if len(header) < 8 or header[:4] != BACT_MAGIC:
        raise StreamFormatError("missing BACT header")
    (rate,) = struct.unpack("<I", header[4:8])
    if rate == 0:
        raise StreamFormatError("BACT frame rate must be > 0")
    stream = ActivationStream(None, float(rate))
    stream._frames = _iter_bact_body(fileobj, stream)
    return stream


def _open_text(lines, frame_rate: float) -> ActivationStream:
    stream = ActivationStream(None, frame_rate)
    stream._frames = _iter_text(lines, stream)
    return stream


def open_activation_stream(source, frame_rate: float = DEFAULT_FRAME_RATE,
                           fmt: str | None = None) -> ActivationStream:
    """Open an activation source for streaming.

    ``source`` is a path or an open file object. The format is sniffed
    from the leading bytes (binary streams start with ``BACT``) unless
    ``fmt`` forces ``"text"`` or ``"bact"``. Text sources run at the
    caller-provided ``frame_rate``; binary sources carry their own.
    """
    if fmt not in (None, "text", "bact"):
        raise ValueError(f"unknown activation format: {fmt!r}")
    if isinstance(source, (str, Path)):
        path = Path(source)
        fileobj = path.open("rb")
        if fmt is None:
            fmt = "bact" if fileobj.peek(4)[:4] == BACT_MAGIC else "text"
        if fmt == "bact":
            return _open_bact(fileobj)
        return _open_text(
            (line.decode("utf-8") for line in fileobj), frame_rate)
    if fmt == "bact":
        return _open_bact(source)
    # file object in text mode (e.g. stdin): treat as the text format
    return _open_text(iter(source), frame_rate)


def write_activations_text(path, values) -> None:
    """Write the one-float-per-line text format."""
    with open(path, "w", encoding="utf-8") as out:
        for value in values:
            out.write(f"{float(value):.8f}\n")


def write_activations_bact(path, values, frame_rate: float) -> None:
    """Write the binary format: BACT magic, u32 LE rate, f32 LE values."""
    rate = int(round(frame_rate))
    if rate <= 0:
        raise ValueError(f"frame_rate must be > 0, got {frame_rate}")
    with open(path, "wb") as out:
        out.write(BACT_MAGIC)
        out.write(struct.pack("<I", rate))
        out.write(np.asarray(values, dtype="<f4").tobytes())


def read_wav(path) -> tuple[int, np.ndarray]:
    """Read a PCM WAV file as (sample_rate, mono float array in [-1, 1]).

    16-bit and 32-bit integer PCM are rescaled; float data passes
    through. Multi-channel audio is downmixed by channel averaging.
    """
    from scipy.io import wavfile

    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        raise StreamFormatError(f"cannot read WAV file {path}: {exc}")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    elif data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    else:
        raise StreamFormatError(
            f"unsupported WAV sample format: {data.dtype}")
    if samples.ndim > 1:
        samples = samples.mean(axis=1)
    return int(rate), samples


class FeaturePipeline:
    """Stateful per-frame feature extractor.

    Each block is Hann-windowed, transformed to a magnitude spectrum,
    collapsed through the log-spaced filterbank, log-compressed with
    log(1 + x), and concatenated with the first-order difference against
    the previous frame (zeros on the first frame). Output dimension is
    ``2 * n_bands`` (``n_bands`` without the difference half).
    """

    def __init__(self, spec: AudioFrameSpec, fb: FilterbankSpec):
        self.spec = spec
        self.fb = fb
        win = spec.window_length
        self.n_fft = 1 << (win - 1).bit_length()
        self.window = np.hanning(win)
        nyquist = spec.sample_rate / 2.0
        f_max = fb.f_max
        if f_max > nyquist:
            warnings.warn(
                f"filterbank f_max {f_max:g} Hz exceeds Nyquist "
                f"{nyquist:g} Hz; clamping")
            f_max = nyquist
        self.filterbank = _triangular_filterbank(
            fb.f_min, f_max, fb.bands_per_octave,
            spec.sample_rate, self.n_fft)
        self.n_bands = self.filterbank.shape[0]
        self._prev_energies: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return 2 * self.n_bands if self.fb.with_first_order_diff \
            else self.n_bands

    def reset(self) -> None:
        self._prev_energies = None

    def process_block(self, block: np.ndarray) -> np.ndarray:
        """Features for one window-length block of samples."""
        if block.shape[0] != self.spec.window_length:
            raise ValueError(
                f"block length {block.shape[0]} != window length "
                f"{self.spec.window_length}")
        spectrum = np.abs(np.fft.rfft(block * self.window, self.n_fft))
        energies = np.log1p(self.filterbank @ spectrum)
        if not self.fb.with_first_order_diff:
            self._prev_energies = energies
            return energies
        if self._prev_energies is None:
            diff = np.zeros_like(energies)
        else:
            diff = energies - self._prev_energies
        self._prev_energies = energies
        return np.concatenate([energies, diff])


def _triangular_filterbank(f_min, f_max, bands_per_octave,
                           sample_rate, n_fft) -> np.ndarray:
    """Triangular responses on log-spaced centers; empty bands dropped."""
    n_octaves = np.log2(f_max / f_min)
    n_centers = int(np.floor(n_octaves * bands_per_octave)) + 1
    factor = 2.0 ** (1.0 / bands_per_octave)
    centers = f_min * factor ** np.arange(-1, n_centers + 1)
    freqs = np.fft.rfftfreq(n_fft, d=1.0 / sample_rate)
    rows = []
    for left, center, right in zip(centers, centers[1:], centers[2:]):
        rising = (freqs >= left) & (freqs < center)
        falling = (freqs >= center) & (freqs < right)
        response = np.zeros(freqs.size)
        if center > left:
            response[rising] = (freqs[rising] - left) / (center - left)
        if right > center:
            response[falling] = (right - freqs[falling]) / (right - center)
        if response.any():
            rows.append(response)
    if not rows:
        raise StreamFormatError(
            "filterbank is empty; sample rate too low for the band range")
    return np.stack(rows)


def iter_blocks(samples: np.ndarray, spec: AudioFrameSpec):
    """Causal framing: frame k's block ends at sample (k + 1) * hop.

    The stream start is zero-padded so the first block is full length;
    the final partial block is zero-padded at the end.
    """
    win = spec.window_length
    hop = spec.hop_length
    n_frames = int(np.ceil(samples.size / hop))
    padded = np.concatenate([
        np.zeros(win - hop), samples,
        np.zeros(max(0, n_frames * hop - samples.size))])
    for k in range(n_frames):
        yield padded[k * hop: k * hop + win]


def compute_features(samples: np.ndarray, spec: AudioFrameSpec,
                     fb: FilterbankSpec) -> np.ndarray:
    """Feature matrix (frames, dim) for a whole sample array."""
    pipeline = FeaturePipeline(spec, fb)
    frames = [pipeline.process_block(block)
              for block in iter_blocks(samples, spec)]
    if not frames:
        return np.empty((0, pipeline.dim))
    return np.stack(frames)


def half_wave_flux(features_t: np.ndarray, features_prev: np.ndarray | None,
                   n_bands: int | None = None) -> float:
    """Half-wave-rectified sum of band-energy increases between frames."""
    if features_prev is None:
        return 0.0
    if n_bands is None:
        n_bands = features_t.shape[0]
    delta = features_t[:n_bands] - features_prev[:n_bands]
    return float(np.maximum(delta, 0.0).sum())


class FluxActivation:
    """Causal flux-to-activation normalizer.

    Divides the spectral flux by a running maximum that decays with a
    5-second half-life, producing a bounded activation in [0, 1]; the
    frame that attains the running maximum maps to exactly 1.
    """

    def __init__(self, n_bands: int, frame_rate: float,
                 half_life_s: float = 5.0):
        self.n_bands = n_bands
        self._decay = 0.5 ** (1.0 / (half_life_s * frame_rate))
        self._prev: np.ndarray | None = None
        self._running_max = 0.0
        self._index = 0

    def process(self, features: np.ndarray) -> ActivationFrame:
        flux = half_wave_flux(features, self._prev, self.n_bands)
        self._prev = features[: self.n_bands].copy()
        self._running_max = max(flux, self._running_max * self._decay)
        b = flux / self._running_max if self._running_max > 0.0 else 0.0
        frame = ActivationFrame(b, self._index)
        self._index += 1
        return frame


def flux_activations(samples: np.ndarray, spec: AudioFrameSpec,
                     fb: FilterbankSpec | None = None) -> np.ndarray:
    """Activation curve for raw audio via the flux fallback front-end."""
    fb = fb if fb is not None else FilterbankSpec()
    pipeline = FeaturePipeline(spec, fb)
    flux = FluxActivation(pipeline.n_bands, spec.frame_rate)
    return np.array([
        flux.process(pipeline.process_block(block)).b
        for block in iter_blocks(samples, spec)])
