"""Recurrence-time estimation from an autocorrelation trace |C(t)|^2.

Two estimators are provided.  The classical period is the mean spacing of the
first few dominant peaks.  The revival time is the centre of the peak of the
smoothed upper envelope of |C|^2 inside a window anchored on a theoretical
prediction;
the window keeps fractional revivals (T2/2, T2/3 ...) out of reach.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.ndimage import maximum_filter1d
from scipy.signal import find_peaks, peak_widths

from .wavepacket import AutocorrSignal

DEFAULT_WINDOW_FRAC = 0.3
#: Levels (fractions of the envelope prominence above the window median) whose
#: centroids are averaged into the revival estimate.
REVIVAL_LEVELS = (0.3, 0.4, 0.5, 0.6, 0.7)


class RevivalDetectionError(RuntimeError):
    pass


class InsufficientSignalError(RevivalDetectionError):
    pass


class Estimate(NamedTuple):
    value: float
    uncertainty: float


class Peak(NamedTuple):
    time: float
    height: float
    width: float


@dataclass(frozen=True)
class RevivalReport:
    classical_period: Estimate
    revival_time: Estimate
    search_window: tuple[float, float]
    peaks: list[Peak] = field(default_factory=list)

    def __post_init__(self):
        lo, hi = self.search_window
        if not lo <= self.revival_time.value <= hi:
            raise ValueError("revival time outside the search window")


def _parabolic_vertex(t: np.ndarray, y: np.ndarray, i: int) -> tuple[float, float]:
    """Vertex of the parabola through samples i-1, i, i+1 (uniform spacing assumed)."""
    if i <= 0 or i >= len(y) - 1:
        return float(t[i]), float(y[i])
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    denom = y0 - 2.0 * y1 + y2
    if denom == 0:
        return float(t[i]), float(y1)
    shift = 0.5 * (y0 - y2) / denom
    step = 0.5 * (t[i + 1] - t[i - 1])
    return float(t[i] + shift * step), float(y1 - 0.25 * (y0 - y2) * shift)


def dominant_peaks(signal: AutocorrSignal, max_peaks: int = 5,
                   prominence_frac: float = 0.1, height_frac: float = 0.5) -> list[Peak]:
    """The earliest run of peaks at least ``height_frac`` of the tallest one."""
    t = signal.times
    y = signal.magnitude2
    span = float(y.max() - y.min())
    if span <= 0:
        return []
    idx, _ = find_peaks(y, prominence=prominence_frac * span)
    if idx.size == 0:
        return []
    heights = y[idx]
    keep = idx[heights >= height_frac * heights.max()]
    keep = keep[:max_peaks]
    widths = peak_widths(y, keep, rel_height=0.5)[0] * signal.sample_spacing if keep.size else []
    peaks = []
    for i, width in zip(keep, widths):
        tp, yp = _parabolic_vertex(t, y, int(i))
        peaks.append(Peak(tp, yp, float(width)))
    return peaks


def detect_classical_period(signal: AutocorrSignal, max_peaks: int = 5, min_peaks: int = 3) -> Estimate:
    """Mean spacing of the first dominant recurrence peaks and its standard error."""
    peaks = dominant_peaks(signal, max_peaks=max_peaks)
    if len(peaks) < min_peaks:
        raise InsufficientSignalError(f"found {len(peaks)} dominant peaks, need at least {min_peaks}")
    spacings = np.diff([p.time for p in peaks])
    value = float(spacings.mean())
    err = float(spacings.std(ddof=1) / np.sqrt(spacings.size)) if spacings.size > 1 else 0.0
    return Estimate(value, err)


def envelope(signal: AutocorrSignal, width: float) -> np.ndarray:
    """Upper envelope of |C|^2: running maximum over ``width``, then a moving average over ``width``.

    A plain one-period average of |C|^2 is nearly constant in time (it tends
    to sum |c_n|^4 whether or not the packet has re-formed), so the peak
    heights are tracked first.  Near the ends of the record the windows are
    clipped to the available data.
    """
    t = signal.times
    size = max(1, int(round(width / signal.sample_spacing)))
    y = maximum_filter1d(signal.magnitude2, size=size, mode="nearest")
    cumulative = np.concatenate(([0.0], np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))))
    lo = np.clip(t - 0.5 * width, t[0], t[-1])
    hi = np.clip(t + 0.5 * width, t[0], t[-1])
    area = np.interp(hi, t, cumulative) - np.interp(lo, t, cumulative)
    return area / (hi - lo)


def detect_revival(signal: AutocorrSignal, predicted_T2: float, window_frac: float = DEFAULT_WINDOW_FRAC,
                   classical_period: Optional[float] = None) -> Estimate:
    """Revival time as the centre of the envelope peak within predicted_T2 * (1 +- window_frac).

    The envelope (see :func:`envelope`) uses one classical period, estimated
    from the early signal unless given.  Near a full revival the envelope is a
    broad plateau whose top ripples as individual recurrence peaks slide past
    the exact rephasing time, so its argmax jumps by whole periods.  The
    estimate is therefore the mean of the centroids of the envelope above
    several levels between the window median and the maximum
    (``REVIVAL_LEVELS``, as fractions of that prominence).  The uncertainty is
    the half-width of the region where the envelope stays above 95% of its
    maximum.
    """
    if not predicted_T2 > 0:
        raise ValueError("predicted revival time must be positive")
    if not 0 < window_frac < 1:
        raise ValueError("window_frac must lie in (0, 1)")
    lo = predicted_T2 * (1.0 - window_frac)
    hi = predicted_T2 * (1.0 + window_frac)
    t = signal.times
    if t[0] > lo or t[-1] < hi:
        raise RevivalDetectionError(
            f"signal [{t[0]:.6g}, {t[-1]:.6g}] does not cover the search window [{lo:.6g}, {hi:.6g}]")
    if classical_period is None:
        classical_period = detect_classical_period(signal).value
    env = envelope(signal, classical_period)
    inside = (t >= lo) & (t <= hi)
    tw, ew = t[inside], env[inside]
    i = int(np.argmax(ew))
    if i == 0 or i == ew.size - 1:
        raise RevivalDetectionError(
            f"envelope maximum sits at the search-window edge t={tw[i]:.6g}; revival not resolved")
    peak = float(ew[i])
    base = float(np.median(ew))
    if not peak > base:
        raise RevivalDetectionError("envelope is flat inside the search window; revival not resolved")
    centres = []
    for frac in REVIVAL_LEVELS:
        left, right = _region_above(ew, i, base + frac * (peak - base))
        if left == 0 or right == ew.size - 1:
            raise RevivalDetectionError(
                f"revival peak at t={tw[i]:.6g} is not contained in the search window")
        weight = ew[left:right + 1] - (base + frac * (peak - base))
        centres.append(float(np.sum(tw[left:right + 1] * weight) / np.sum(weight)))
    left, right = _region_above(ew, i, 0.95 * peak)
    t_left = _crossing(tw, ew, left - 1, left, 0.95 * peak) if left > 0 else tw[left]
    t_right = _crossing(tw, ew, right, right + 1, 0.95 * peak) if right < ew.size - 1 else tw[right]
    return Estimate(float(np.mean(centres)), 0.5 * float(t_right - t_left))


def _region_above(y: np.ndarray, i: int, level: float) -> tuple[int, int]:
    """Index range of the connected run around ``i`` with y >= level."""
    left = i
    while left > 0 and y[left - 1] >= level:
        left -= 1
    right = i
    while right < y.size - 1 and y[right + 1] >= level:
        right += 1
    return left, right


def _crossing(t, y, i, j, level) -> float:
    if y[j] == y[i]:
        return float(t[i])
    frac = (level - y[i]) / (y[j] - y[i])
    return float(t[i] + frac * (t[j] - t[i]))


def analyze(signal: AutocorrSignal, predicted_T2: float, window_frac: float = DEFAULT_WINDOW_FRAC,
            classical_period: Optional[float] = None) -> RevivalReport:
    """Classical period and revival time of one signal."""
    if classical_period is None:
        period = detect_classical_period(signal)
    else:
        period = Estimate(classical_period, 0.0)
    revival = detect_revival(signal, predicted_T2, window_frac, period.value)
    window = (predicted_T2 * (1 - window_frac), predicted_T2 * (1 + window_frac))
    return RevivalReport(period, revival, window, dominant_peaks(signal))
