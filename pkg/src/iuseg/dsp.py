"""Audio loading, resampling, log-mel features, Butterworth filtering, and
anonymization masking.

Feature extraction mirrors the pretrained STT convention this pipeline
feeds: 16 kHz mono input padded to 30 s, 80 mel channels over 0-8000 Hz
(Slaney-style triangular filters, area normalized), 25 ms Hann windows with
10 ms hop, FFT length 512, log10 floored at 1e-10, then a per-chunk min-max
rescale to [0, 1] giving an 80x3000 matrix.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.io import wavfile
from scipy.signal import butter, get_window, resample_poly, sosfilt, sosfiltfilt

from .chat import TimeInterval
from .errors import DataError, IOFailure

TARGET_SAMPLE_RATE = 16_000
SOURCE_SAMPLE_RATE = 22_050
MEL_BINS = 80
FRAMES = 3_000
WINDOW_SAMPLES = 400  # 25 ms at 16 kHz
HOP_SAMPLES = 160  # 10 ms at 16 kHz
FFT_SIZE = 512
PAD_SAMPLES = 480_000  # 30 s at 16 kHz
LOG_FLOOR = 1e-10
ANON_CUTOFF_HZ = 400.0
ANON_FADE_MS = 45
SWEEP_CUTOFFS_HZ = (200.0, 400.0, 800.0, 1600.0, 3200.0)

_FEATURE_MAGIC = b"IUFM"
_FEATURE_VERSION = 1


@dataclass
class AudioBuffer:
    samples: np.ndarray  # mono, float64
    sample_rate: int

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise DataError(f"sample rate must be positive, got {self.sample_rate}")
        self.samples = np.asarray(self.samples, dtype=np.float64)

    @property
    def duration_ms(self) -> int:
        return int(len(self.samples) * 1000 // self.sample_rate)

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class FilterSpec:
    kind: str  # lowpass | highpass
    cutoff_hz: float
    order: int = 4
    zero_phase: bool = False

    def __post_init__(self):
        if self.kind not in ("lowpass", "highpass"):
            raise DataError(f"filter kind must be lowpass or highpass, got {self.kind!r}")
        if self.cutoff_hz <= 0:
            raise DataError(f"cutoff must be positive, got {self.cutoff_hz}")
        if self.order < 1:
            raise DataError(f"order must be >= 1, got {self.order}")

    @property
    def label(self) -> str:
        cutoff = self.cutoff_hz
        text = str(int(cutoff)) if cutoff == int(cutoff) else f"{cutoff:g}"
        return f"{self.kind}_{text}hz"


def sweep_specs(order: int = 4, zero_phase: bool = False) -> list[FilterSpec]:
    """The 2x5 filter grid: low/high-pass at 200/400/800/1600/3200 Hz."""
    return [
        FilterSpec(kind, cutoff, order, zero_phase)
        for kind in ("lowpass", "highpass")
        for cutoff in SWEEP_CUTOFFS_HZ
    ]


def load_wav(path: Path) -> AudioBuffer:
    """PCM or float WAV -> mono AudioBuffer with samples scaled to [-1, 1]."""
    try:
        rate, data = wavfile.read(str(path))
    except FileNotFoundError:
        raise IOFailure(f"audio file not found: {path}") from None
    except Exception as e:
        raise IOFailure(f"cannot read WAV {path}: {e}") from None
    if data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise IOFailure(f"unsupported WAV sample format {data.dtype} in {path}")
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    return AudioBuffer(samples, int(rate))


def save_wav(path: Path, buf: AudioBuffer) -> None:
    """Write as 32-bit float WAV (filtered signals can exceed 16-bit range)."""
    wavfile.write(str(path), buf.sample_rate, buf.samples.astype(np.float32))


def wav_duration_ms(path: Path) -> int:
    """Audio duration without loading sample data into memory."""
    try:
        rate, data = wavfile.read(str(path), mmap=True)
    except Exception:
        rate, data = wavfile.read(str(path))
    return int(data.shape[0] * 1000 // rate)


def resample(buf: AudioBuffer, target_hz: int) -> AudioBuffer:
    """Polyphase band-limited resampling; output length round(n*target/source)."""
    if target_hz <= 0:
        raise DataError(f"target rate must be positive, got {target_hz}")
    if target_hz == buf.sample_rate:
        return AudioBuffer(buf.samples.copy(), target_hz)
    g = np.gcd(target_hz, buf.sample_rate)
    up, down = target_hz // g, buf.sample_rate // g
    out = resample_poly(buf.samples, up, down)
    want = round(len(buf.samples) * target_hz / buf.sample_rate)
    if len(out) > want:
        out = out[:want]
    elif len(out) < want:
        out = np.pad(out, (0, want - len(out)))
    return AudioBuffer(out, target_hz)


def slice_buffer(buf: AudioBuffer, span: TimeInterval) -> AudioBuffer:
    """Samples in [floor(start*sr/1000), floor(end*sr/1000))."""
    start = span.start_ms * buf.sample_rate // 1000
    end = span.end_ms * buf.sample_rate // 1000
    if end > len(buf.samples):
        raise DataError(
            f"span [{span.start_ms}, {span.end_ms}] ms exceeds buffer of "
            f"{buf.duration_ms} ms"
        )
    return AudioBuffer(buf.samples[start:end].copy(), buf.sample_rate)


def _hz_to_mel(freq_hz: np.ndarray, scale: str) -> np.ndarray:
    freq_hz = np.asarray(freq_hz, dtype=np.float64)
    if scale == "htk":
        return 2595.0 * np.log10(1.0 + freq_hz / 700.0)
    # Slaney: linear below 1 kHz, logarithmic above.
    mel = freq_hz / (200.0 / 3.0)
    log_region = freq_hz >= 1000.0
    logstep = np.log(6.4) / 27.0
    mel = np.where(log_region, 15.0 + np.log(np.maximum(freq_hz, 1e-12) / 1000.0) / logstep, mel)
    return mel


def _mel_to_hz(mel: np.ndarray, scale: str) -> np.ndarray:
    mel = np.asarray(mel, dtype=np.float64)
    if scale == "htk":
        return 700.0 * (10.0 ** (mel / 2595.0) - 1.0)
    hz = mel * (200.0 / 3.0)
    log_region = mel >= 15.0
    logstep = np.log(6.4) / 27.0
    hz = np.where(log_region, 1000.0 * np.exp(logstep * (mel - 15.0)), hz)
    return hz


def mel_filterbank(
    n_mels: int = MEL_BINS,
    sample_rate_hz: int = TARGET_SAMPLE_RATE,
    n_fft: int = FFT_SIZE,
    fmin_hz: float = 0.0,
    fmax_hz: float = 8000.0,
    scale: str = "slaney",
    area_normalize: bool = True,
) -> np.ndarray:
    """Triangular mel filterbank, shape (n_mels, n_fft//2 + 1)."""
    if scale not in ("slaney", "htk"):
        raise DataError(f"mel scale must be slaney or htk, got {scale!r}")
    mel_points = np.linspace(
        _hz_to_mel(np.array(fmin_hz), scale),
        _hz_to_mel(np.array(fmax_hz), scale),
        n_mels + 2,
    )
    hz_points = _mel_to_hz(mel_points, scale)
    fft_freqs = np.fft.rfftfreq(n_fft, d=1.0 / sample_rate_hz)
    bank = np.zeros((n_mels, len(fft_freqs)))
    for i in range(n_mels):
        lo, mid, hi = hz_points[i], hz_points[i + 1], hz_points[i + 2]
        rising = (fft_freqs - lo) / max(mid - lo, 1e-12)
        falling = (hi - fft_freqs) / max(hi - mid, 1e-12)
        bank[i] = np.maximum(0.0, np.minimum(rising, falling))
        if area_normalize:
            bank[i] *= 2.0 / (hi - lo)
    return bank


def mel_center_frequencies(
    n_mels: int = MEL_BINS,
    fmin_hz: float = 0.0,
    fmax_hz: float = 8000.0,
    scale: str = "slaney",
) -> np.ndarray:
    """Peak frequency (Hz) of each triangular filter."""
    mel_points = np.linspace(
        _hz_to_mel(np.array(fmin_hz), scale),
        _hz_to_mel(np.array(fmax_hz), scale),
        n_mels + 2,
    )
    return _mel_to_hz(mel_points, scale)[1:-1]


@dataclass
class FeatureMatrix:
    values: np.ndarray  # (MEL_BINS, FRAMES) float32 in [0, 1]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.shape != (MEL_BINS, FRAMES):
            raise DataError(
                f"feature matrix must be {MEL_BINS}x{FRAMES}, got {self.values.shape}"
            )


def log_mel(
    buf: AudioBuffer,
    scale: str = "slaney",
    area_normalize: bool = True,
) -> FeatureMatrix:
    """80x3000 log-mel matrix, min-max rescaled to [0, 1].

    Audio is zero-padded (or truncated) to 30 s before the STFT; frames are
    centered via reflect padding so the frame count is exactly 3000.
    Constant matrices (silence) rescale to all zeros.
    """
    if buf.sample_rate != TARGET_SAMPLE_RATE:
        raise DataError(
            f"log_mel expects {TARGET_SAMPLE_RATE} Hz input, got "
            f"{buf.sample_rate} Hz; resample first"
        )
    x = buf.samples
    if len(x) >= PAD_SAMPLES:
        x = x[:PAD_SAMPLES]
    else:
        x = np.pad(x, (0, PAD_SAMPLES - len(x)))
    half = WINDOW_SAMPLES // 2
    x = np.pad(x, (half, half), mode="reflect")

    window = get_window("hann", WINDOW_SAMPLES, fftbins=True)
    frames = np.lib.stride_tricks.sliding_window_view(x, WINDOW_SAMPLES)[::HOP_SAMPLES]
    frames = frames[:FRAMES]  # drops the trailing boundary frame
    spectrum = np.fft.rfft(frames * window, n=FFT_SIZE, axis=1)
    power = np.abs(spectrum) ** 2

    bank = mel_filterbank(scale=scale, area_normalize=area_normalize)
    mel_power = power @ bank.T  # (frames, mels)
    log_spec = np.log10(np.maximum(mel_power, LOG_FLOOR)).T

    lo, hi = log_spec.min(), log_spec.max()
    if hi > lo:
        log_spec = (log_spec - lo) / (hi - lo)
    else:
        log_spec = np.zeros_like(log_spec)
    return FeatureMatrix(log_spec.astype(np.float32))


def butterworth(buf: AudioBuffer, spec: FilterSpec) -> AudioBuffer:
    """Apply a Butterworth filter (cascaded second-order sections).

    zero_phase runs the filter forward and backward, squaring the magnitude
    response and cancelling phase. Output length equals input length.
    """
    nyquist = buf.sample_rate / 2.0
    if spec.cutoff_hz >= nyquist:
        raise DataError(
            f"cutoff {spec.cutoff_hz} Hz >= Nyquist {nyquist} Hz at "
            f"{buf.sample_rate} Hz"
        )
    sos = butter(spec.order, spec.cutoff_hz, btype=spec.kind, fs=buf.sample_rate, output="sos")
    if spec.zero_phase:
        out = sosfiltfilt(sos, buf.samples)
    else:
        out = sosfilt(sos, buf.samples)
    return AudioBuffer(out, buf.sample_rate)


def crossfade_weights(
    n_samples: int,
    start_idx: int,
    end_idx: int,
    fade_len: int,
) -> np.ndarray:
    """Mixing weight of the filtered signal per sample: 1 inside
    [start_idx, end_idx), linear ramps of fade_len samples on either side,
    0 elsewhere. The ramp hits exactly k/fade_len at the k-th sample in."""
    w = np.zeros(n_samples)
    w[start_idx:end_idx] = 1.0
    k = np.arange(1, fade_len)
    ramp_in = start_idx - fade_len + k
    ok = (ramp_in >= 0) & (ramp_in < n_samples)
    w[ramp_in[ok]] = k[ok] / fade_len
    ramp_out = end_idx - 1 + k
    ok = (ramp_out >= 0) & (ramp_out < n_samples)
    w[ramp_out[ok]] = (fade_len - k[ok]) / fade_len
    return w


def anonymize(
    buf: AudioBuffer,
    spans: Sequence[TimeInterval],
    cutoff_hz: float = ANON_CUTOFF_HZ,
    fade_ms: int = ANON_FADE_MS,
    order: int = 4,
) -> AudioBuffer:
    """Mask regions with a low-pass filter, crossfading over fade_ms before
    and after each so the edits have no audible seam."""
    sr = buf.sample_rate
    fade_len = round(fade_ms * sr / 1000)
    w = np.zeros(len(buf.samples))
    for span in spans:
        start = span.start_ms * sr // 1000
        end = span.end_ms * sr // 1000
        if end > len(buf.samples) or start > len(buf.samples):
            raise DataError(
                f"anonymization span [{span.start_ms}, {span.end_ms}] ms exceeds "
                f"buffer of {buf.duration_ms} ms"
            )
        w = np.maximum(w, crossfade_weights(len(buf.samples), start, end, fade_len))
    filtered = butterworth(buf, FilterSpec("lowpass", cutoff_hz, order)).samples
    return AudioBuffer((1.0 - w) * buf.samples + w * filtered, sr)


def save_features(path: Path, matrix: FeatureMatrix) -> None:
    """Flat binary block: magic, version, dims, then row-major float32 LE."""
    header = struct.pack(
        "<4sIII", _FEATURE_MAGIC, _FEATURE_VERSION, *matrix.values.shape
    )
    data = np.ascontiguousarray(matrix.values, dtype="<f4").tobytes()
    Path(path).write_bytes(header + data)


def load_features(path: Path) -> FeatureMatrix:
    blob = Path(path).read_bytes()
    if len(blob) < 16 or blob[:4] != _FEATURE_MAGIC:
        raise DataError(f"not a feature file: {path}")
    magic, version, rows, cols = struct.unpack("<4sIII", blob[:16])
    if version != _FEATURE_VERSION:
        raise DataError(f"unsupported feature file version {version} in {path}")
    values = np.frombuffer(blob[16:], dtype="<f4")
    if values.size != rows * cols:
        raise DataError(f"feature file {path} truncated")
    return FeatureMatrix(values.reshape(rows, cols))
