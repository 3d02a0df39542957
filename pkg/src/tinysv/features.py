"""Log-Mel filterbank front end.

Frames are 20 ms Hamming windows every 10 ms, zero-padded to a 512-point
FFT; power spectra are projected on an HTK-scale triangular filterbank and
the log is floored. No padding is applied at either end of the signal, so a
signal of ``n`` samples yields ``(n - win) // hop + 1`` frames.

Feature matrices are plain ``float32`` arrays of shape ``(frames, channels)``.
"""

import wave

import numpy as np

from .config import FeatureConfig
from .errors import IoError, SignalTooShort, UnsupportedFormat, UnsupportedMode

MVN_EPS = 1e-8


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_edges_hz(cfg):
    """Filter edge frequencies: ``n_mels + 2`` points equally spaced in mel."""
    mels = np.linspace(hz_to_mel(cfg.fmin_hz), hz_to_mel(cfg.upper_hz), cfg.n_mels + 2)
    return mel_to_hz(mels)


def mel_filterbank(cfg):
    """Triangular filters of unit peak, shape ``(n_mels, n_fft // 2 + 1)``."""
    edges = mel_edges_hz(cfg)
    freqs = np.arange(cfg.n_fft // 2 + 1) * cfg.sample_rate_hz / cfg.n_fft
    lo, center, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lo) / (center - lo)
    falling = (hi - freqs) / (hi - center)
    return np.maximum(0.0, np.minimum(rising, falling))


def _window(cfg):
    if cfg.window == "hamming":
        return np.hamming(cfg.win_length)
    return np.hanning(cfg.win_length)


def _as_float_pcm(pcm):
    pcm = np.asarray(pcm)
    if pcm.ndim != 1:
        raise UnsupportedFormat(f"expected mono 1-D samples, got shape {pcm.shape}")
    if np.issubdtype(pcm.dtype, np.integer):
        return pcm.astype(np.float64) / 32768.0
    return pcm.astype(np.float64)


class _Analyzer:
    """Per-config cache of window and filterbank."""

    def __init__(self, cfg):
        cfg.validate()
        self.cfg = cfg
        self.window = _window(cfg)
        self.fbank = mel_filterbank(cfg)

    def frames(self, x):
        """Log-Mel energies for every complete window in ``x`` (float64 samples)."""
        cfg = self.cfg
        win, hop = cfg.win_length, cfg.hop_length
        if len(x) < win:
            return np.zeros((0, cfg.n_mels), dtype=np.float32)
        view = np.lib.stride_tricks.sliding_window_view(x, win)[::hop]
        spec = np.fft.rfft(view * self.window, n=cfg.n_fft, axis=1)
        power = spec.real ** 2 + spec.imag ** 2
        energies = power @ self.fbank.T
        return np.log(np.maximum(energies, cfg.log_floor)).astype(np.float32)


def compute_log_mel(pcm, cfg=None, sample_rate=None):
    """Log-Mel features of a mono signal.

    Integer input is treated as 16-bit PCM and scaled to [-1, 1); float
    input is used as is.
    """
    cfg = cfg or FeatureConfig()
    if sample_rate is not None and sample_rate != cfg.sample_rate_hz:
        raise UnsupportedFormat(
            f"sample rate {sample_rate} Hz, expected {cfg.sample_rate_hz} Hz (no resampling)")
    x = _as_float_pcm(pcm)
    if len(x) < cfg.win_length:
        raise SignalTooShort(f"{len(x)} samples is shorter than one {cfg.win_length}-sample window")
    return _Analyzer(cfg).frames(x)


class CausalMVN:
    """Running per-channel mean/variance; frame t uses frames 0..t."""

    def __init__(self, n_channels):
        self.count = 0
        self.sum = np.zeros(n_channels, dtype=np.float64)
        self.sumsq = np.zeros(n_channels, dtype=np.float64)

    def __call__(self, feat):
        x = np.asarray(feat, dtype=np.float64)
        if len(x) == 0:
            return np.zeros_like(feat, dtype=np.float32)
        csum = self.sum + np.cumsum(x, axis=0)
        csq = self.sumsq + np.cumsum(x * x, axis=0)
        n = (self.count + np.arange(1, len(x) + 1))[:, None]
        mean = csum / n
        var = np.maximum(csq / n - mean * mean, 0.0)
        self.count += len(x)
        self.sum = csum[-1]
        self.sumsq = csq[-1]
        return ((x - mean) / np.sqrt(np.maximum(var, MVN_EPS))).astype(np.float32)


def apply_mvn(feat, mode="utterance", mean=None, var=None):
    """Mean and variance normalization.

    ``mode`` is ``"utterance"`` (statistics of the whole matrix), ``"causal"``
    (running statistics of frames 0..t) or ``"precomputed"`` (``mean`` and
    ``var`` supplied). Variance is the population variance floored at 1e-8.
    """
    x = np.asarray(feat, dtype=np.float64)
    if x.ndim != 2 or len(x) < 1:
        raise SignalTooShort("MVN needs at least one frame")
    if mode == "utterance":
        mu = x.mean(axis=0)
        sigma2 = x.var(axis=0)
    elif mode == "causal":
        return CausalMVN(x.shape[1])(x)
    elif mode == "precomputed":
        if mean is None or var is None:
            raise UnsupportedMode("precomputed MVN needs mean and var")
        mu = np.asarray(mean, dtype=np.float64)
        sigma2 = np.asarray(var, dtype=np.float64)
    else:
        raise UnsupportedMode(f"unknown MVN mode {mode!r}")
    return ((x - mu) / np.sqrt(np.maximum(sigma2, MVN_EPS))).astype(np.float32)


class FeatureStreamState:
    """Chunked front end whose output matches the batch path for any chunking.

    Only ``causal`` and ``precomputed`` MVN can be streamed.
    """

    def __init__(self, cfg=None, mvn="causal", mean=None, var=None):
        self.cfg = cfg or FeatureConfig()
        if mvn == "utterance":
            raise UnsupportedMode("utterance-level MVN needs the whole utterance; use causal")
        if mvn not in ("causal", "precomputed"):
            raise UnsupportedMode(f"unknown MVN mode {mvn!r}")
        if mvn == "precomputed" and (mean is None or var is None):
            raise UnsupportedMode("precomputed MVN needs mean and var")
        self.mvn = mvn
        self._stats = (mean, var)
        self._analyzer = _Analyzer(self.cfg)
        self._causal = CausalMVN(self.cfg.n_mels)
        self._pending = np.zeros(0, dtype=np.float64)
        self.samples_seen = 0
        self.frames_emitted = 0

    def push(self, pcm_chunk):
        x = _as_float_pcm(pcm_chunk)
        self.samples_seen += len(x)
        buf = np.concatenate([self._pending, x])
        raw = self._analyzer.frames(buf)
        self._pending = buf[len(raw) * self.cfg.hop_length:]
        self.frames_emitted += len(raw)
        return self._normalize(raw)

    def flush(self):
        # Batch framing does not pad the tail, so nothing is left to emit.
        self._pending = self._pending[:0]
        return np.zeros((0, self.cfg.n_mels), dtype=np.float32)

    def _normalize(self, raw):
        if len(raw) == 0:
            return raw
        if self.mvn == "causal":
            return self._causal(raw)
        return apply_mvn(raw, "precomputed", *self._stats)


def feature_stream_push(state, pcm_chunk):
    return state.push(pcm_chunk)


def read_wav(path, cfg=None):
    """Read a RIFF PCM 16-bit mono WAV at the configured rate as int16."""
    cfg = cfg or FeatureConfig()
    try:
        with wave.open(str(path), "rb") as w:
            channels, width, rate = w.getnchannels(), w.getsampwidth(), w.getframerate()
            data = w.readframes(w.getnframes())
    except FileNotFoundError:
        raise IoError(f"no such file: {path}") from None
    except (wave.Error, EOFError) as exc:
        raise UnsupportedFormat(f"{path}: not a PCM WAV file ({exc})") from None
    if width != 2:
        raise UnsupportedFormat(f"{path}: {8 * width}-bit samples, expected 16-bit PCM")
    if channels != 1:
        raise UnsupportedFormat(f"{path}: {channels} channels, expected mono")
    if rate != cfg.sample_rate_hz:
        raise UnsupportedFormat(f"{path}: {rate} Hz, expected {cfg.sample_rate_hz} Hz")
    return np.frombuffer(data, dtype="<i2").copy()


def write_wav(path, pcm, sample_rate=16000):
    pcm = np.asarray(pcm)
    if not np.issubdtype(pcm.dtype, np.integer):
        pcm = np.clip(np.round(pcm * 32767.0), -32768, 32767)
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(sample_rate)
        w.writeframes(pcm.astype("<i2").tobytes())
