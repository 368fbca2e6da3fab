"""Per-node signal processing: conditioning, filtering, picking, correlation.

All operations are pure functions of their inputs and safe to evaluate in
parallel across traces.
"""

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .errors import InvalidArgumentError
from .forward import Trace

__all__ = [
    "Pick",
    "CorrelationFunction",
    "condition",
    "bandpass",
    "wiener",
    "detect_event_window",
    "pick_arrival",
    "cross_correlate",
]

TAPER_FRAC = 0.05


@dataclass(frozen=True)
class Pick:
    """Estimated body-wave onset; quality is the picker's CF peak value."""

    station_id: int
    arrival_time: float
    method: str
    quality: float


@dataclass(frozen=True)
class CorrelationFunction:
    """Cross-correlation between a station pair on a symmetric lag axis."""

    station_a: int
    station_b: int
    lags: np.ndarray  # seconds, symmetric about 0
    values: np.ndarray

    def __post_init__(self):
        if len(self.lags) != len(self.values):
            raise InvalidArgumentError("lags and values must have equal length")
        if not np.allclose(self.lags, -self.lags[::-1]):
            raise InvalidArgumentError("lag axis must be symmetric about 0")

    @property
    def dt(self):
        return float(self.lags[1] - self.lags[0])

    def folded(self):
        """Average of the +t and -t branches on the nonnegative-lag axis."""
        mid = len(self.lags) // 2
        pos = self.values[mid:]
        neg = self.values[mid::-1]
        return self.lags[mid:], 0.5 * (pos + neg)


def _taper_window(n, frac=TAPER_FRAC):
    m = max(2, int(np.ceil(frac * n)))
    w = np.ones(n)
    ramp = 0.5 * (1.0 - np.cos(np.pi * np.arange(m) / m))
    w[:m] = ramp
    w[n - m :] = ramp[::-1]
    return w, m


def condition(trace, resample_to=None):
    """Demean, detrend and 5% cosine-taper a trace; optionally resample.

    The line fit and mean are estimated over the untapered interior so the
    operation is idempotent there (re-running changes only the taper zones).
    """
    if trace.n < 8:
        raise InvalidArgumentError("trace too short to condition (need >= 8 samples)")
    samples = np.asarray(trace.samples, dtype=float)
    rate = trace.sampling_rate
    if resample_to is not None and resample_to != rate:
        if resample_to <= 0:
            raise InvalidArgumentError("resample_to must be > 0")
        t_old = np.arange(len(samples)) / rate
        t_new = np.arange(int(np.floor(t_old[-1] * resample_to)) + 1) / resample_to
        samples = np.interp(t_new, t_old, samples)
        rate = resample_to
    n = len(samples)
    w, m = _taper_window(n)
    interior = slice(m, n - m)
    idx = np.arange(n, dtype=float)
    coeffs = np.polyfit(idx[interior], samples[interior], 1)
    detrended = samples - np.polyval(coeffs, idx)
    out = detrended * w
    return Trace(
        station_id=trace.station_id,
        start_time=trace.start_time,
        sampling_rate=rate,
        samples=out,
    )


def bandpass(trace, f_lo, f_hi, order=4):
    """Zero-phase (forward-backward) Butterworth bandpass."""
    nyq = trace.sampling_rate / 2.0
    if not 0 < f_lo < f_hi < nyq:
        raise InvalidArgumentError("need 0 < f_lo < f_hi < Nyquist")
    if order not in (2, 4, 8):
        raise InvalidArgumentError("order must be one of {2, 4, 8}")
    sos = sps.butter(order, [f_lo / nyq, f_hi / nyq], btype="bandpass", output="sos")
    out = sps.sosfiltfilt(sos, trace.samples)
    return trace.with_samples(out)


def wiener(trace, noise_window):
    """Frequency-domain Wiener gain H = max(0, 1 - N/X).

    N is a Welch spectrum of the declared noise-only window, X of the full
    trace with identical estimator settings, so a trace that is all noise
    is suppressed to ~zero and a clean trace passes unchanged.
    """
    t0, t1 = noise_window
    i0 = int(round((t0 - trace.start_time) * trace.sampling_rate))
    i1 = int(round((t1 - trace.start_time) * trace.sampling_rate))
    if i0 < 0 or i1 > trace.n or i1 - i0 < 128:
        raise InvalidArgumentError("noise_window must lie inside the trace, >= 128 samples")
    noise = trace.samples[i0:i1]
    nperseg = min(256, len(noise))
    freqs, n_psd = sps.welch(noise, fs=trace.sampling_rate, nperseg=nperseg)
    _, x_psd = sps.welch(trace.samples, fs=trace.sampling_rate, nperseg=nperseg)
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = 1.0 - np.where(x_psd > 0, n_psd / np.where(x_psd > 0, x_psd, 1.0), 0.0)
    gain = np.clip(gain, 0.0, 1.0)
    spec = np.fft.rfft(trace.samples)
    f_full = np.fft.rfftfreq(trace.n, d=trace.dt)
    h = np.interp(f_full, freqs, gain)
    out = np.fft.irfft(spec * h, n=trace.n)
    return trace.with_samples(out)


def detect_event_window(trace, threshold, min_gap, short_window=0.05):
    """Time spans where short-window RMS exceeds threshold x trailing median RMS.

    The trace is scanned in non-overlapping short windows; the baseline for
    each block is the median RMS of the trailing blocks.  Windows closer
    than ``min_gap`` are merged.
    """
    if threshold <= 1:
        raise InvalidArgumentError("threshold must be > 1")
    ns = max(4, int(round(short_window * trace.sampling_rate)))
    n_blocks = trace.n // ns
    if n_blocks < 4:
        return []
    x2 = trace.samples[: n_blocks * ns] ** 2
    rms = np.sqrt(x2.reshape(n_blocks, ns).mean(axis=1))
    trail = max(8, int(round(2.0 / short_window / 4)))  # ~0.5 s of blocks
    active = np.zeros(n_blocks, dtype=bool)
    for i in range(n_blocks):
        past = rms[max(0, i - trail) : i]
        base = np.median(past) if len(past) >= 4 else np.median(rms)
        active[i] = rms[i] > threshold * base
    windows = []
    i = 0
    while i < n_blocks:
        if active[i]:
            j = i
            while j + 1 < n_blocks and active[j + 1]:
                j += 1
            t_start = trace.start_time + i * ns / trace.sampling_rate - short_window
            t_end = trace.start_time + (j + 1) * ns / trace.sampling_rate + short_window
            windows.append([t_start, t_end])
            i = j + 1
        else:
            i += 1
    merged = []
    for w in windows:
        if merged and w[0] - merged[-1][1] < min_gap:
            merged[-1][1] = w[1]
        else:
            merged.append(w)
    return [tuple(w) for w in merged]


def _trailing_mean_energy(x2, width):
    """Trailing mean with warm-up: early samples average what is available."""
    c = np.concatenate([[0.0], np.cumsum(x2)])
    k = np.arange(len(x2))
    lo = np.maximum(0, k + 1 - width)
    return (c[k + 1] - c[lo]) / (k + 1 - lo)


def _pick_sta_lta(samples, rate, params):
    short = params.get("short", 0.05)
    long = params.get("long", 0.5)
    threshold = params.get("threshold", 4.0)
    ns = int(round(short * rate))
    nl = int(round(long * rate))
    if not 1 < ns < nl < len(samples):
        raise InvalidArgumentError("window lengths must satisfy 1 < short < long < trace")
    x2 = samples**2
    sta = _trailing_mean_energy(x2, ns)
    lta = _trailing_mean_energy(x2, nl)
    floor = 1e-10 * float(np.max(x2)) if np.any(x2 > 0) else 1.0
    ratio = sta / np.maximum(lta, floor)
    ratio[:ns] = 0.0  # short window not yet filled
    above = np.nonzero(ratio > threshold)[0]
    if len(above) == 0:
        return None, float(np.max(ratio))
    return int(above[0]), float(np.max(ratio))


def _pick_mer(samples, rate, params):
    window = params.get("window", 0.05)
    ns = int(round(window * rate))
    n = len(samples)
    if not 1 < ns < n // 2:
        raise InvalidArgumentError("MER window must fit twice in the trace")
    x2 = samples**2
    c = np.concatenate([[0.0], np.cumsum(x2)])
    k = np.arange(ns, n - ns)
    pre = c[k + 1] - c[k + 1 - ns]
    post = c[k + 1 + ns] - c[k + 1]
    floor = 1e-12 * float(c[-1]) if c[-1] > 0 else 1.0
    er3 = (post / np.maximum(pre, floor)) ** 3 * np.abs(samples[k])
    best = int(np.argmax(er3))
    return int(k[best]), float(er3[best])


def _pick_aic(samples, rate, params):
    n = len(samples)
    w0 = int(round(params.get("t0", 0.0) * rate))
    w1 = int(round(params.get("t1", n / rate) * rate))
    w0, w1 = max(0, w0), min(n, w1)
    seg = samples[w0:w1]
    m = len(seg)
    if m < 8:
        raise InvalidArgumentError("AIC window too short")
    total_var = float(np.var(seg))
    floor = 1e-12 * total_var if total_var > 0 else 1.0
    ks = np.arange(2, m - 2)
    c1 = np.cumsum(seg)
    c2 = np.cumsum(seg**2)
    var1 = c2[ks - 1] / ks - (c1[ks - 1] / ks) ** 2
    m2 = m - ks
    s1 = c1[-1] - c1[ks - 1]
    s2 = c2[-1] - c2[ks - 1]
    var2 = s2 / m2 - (s1 / m2) ** 2
    aic = ks * np.log(np.maximum(var1, floor)) + (m - ks - 1) * np.log(
        np.maximum(var2, floor)
    )
    best = int(np.argmin(aic))
    quality = float(np.max(aic) - np.min(aic))
    return int(w0 + ks[best]), quality


_PICKERS = {"STA_LTA": _pick_sta_lta, "MER": _pick_mer, "AIC": _pick_aic}


def pick_arrival(trace, method, params=None):
    """Onset pick; returns None (no-pick) when STA/LTA never crosses.

    STA_LTA fires at the first sample whose trailing short/long energy
    ratio exceeds the threshold; MER maximizes the cubed post/pre energy
    ratio weighted by |amplitude|; AIC minimizes the two-segment variance
    information criterion.  Earliest index wins ties.
    """
    if method not in _PICKERS:
        raise InvalidArgumentError(f"unknown picker {method!r}")
    idx, quality = _PICKERS[method](
        np.asarray(trace.samples, dtype=float), trace.sampling_rate, params or {}
    )
    if idx is None:
        return None
    return Pick(
        station_id=trace.station_id,
        arrival_time=trace.start_time + idx / trace.sampling_rate,
        method=method,
        quality=quality,
    )


def _overlap(a, b):
    offset = (b.start_time - a.start_time) * a.sampling_rate
    k = int(round(offset))
    if abs(offset - k) > 1e-6:
        raise InvalidArgumentError("trace start times differ by a non-integer sample offset")
    # b starts k samples after a
    a0, b0 = max(0, k), max(0, -k)
    n = min(a.n - a0, b.n - b0)
    if n <= 1:
        raise InvalidArgumentError("traces do not overlap")
    return a.samples[a0 : a0 + n], b.samples[b0 : b0 + n]


def cross_correlate(a, b, max_lag, normalized=False):
    """C_ab(t) = sum_tau a(tau) b(t+tau) on lags [-max_lag, +max_lag].

    If b is a delayed copy of a, the peak sits at a positive lag equal to
    the delay.  Inputs are evaluated in a canonical station order so that
    cross_correlate(a, b) and cross_correlate(b, a) are exact mirrors.
    """
    if a.sampling_rate != b.sampling_rate:
        raise InvalidArgumentError("sampling rates must match")
    swapped = b.station_id < a.station_id
    first, second = (b, a) if swapped else (a, b)
    xa, xb = _overlap(first, second)
    n = len(xa)
    nlag = int(round(max_lag * a.sampling_rate))
    if nlag < 1 or nlag >= n:
        raise InvalidArgumentError("max_lag must be positive and shorter than the overlap")
    full = sps.fftconvolve(xb, xa[::-1], mode="full")  # index n-1 is lag 0
    values = full[n - 1 - nlag : n + nlag]
    if normalized:
        denom = np.sqrt(float(np.sum(xa**2)) * float(np.sum(xb**2)))
        values = values / denom if denom > 0 else values
    if swapped:
        values = values[::-1]
    lags = np.arange(-nlag, nlag + 1) / a.sampling_rate
    return CorrelationFunction(
        station_a=a.station_id,
        station_b=b.station_id,
        lags=lags,
        values=np.ascontiguousarray(values),
    )
