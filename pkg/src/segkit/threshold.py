"""Gray-level histograms and histogram-based binarization.

Two threshold selectors are provided: an explicit valley search between the
two dominant histogram peaks, and Otsu's between-class-variance maximizer.
Otsu scores are compared in exact integer arithmetic so the reported level
never depends on floating-point rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyHistogram, EvenWindow, NoTwoPeaks
from .raster import GrayImage, LabelMap

BINS = 256

DEFAULT_SMOOTH_WINDOW = 5
DEFAULT_MIN_SEPARATION = 16


@dataclass(frozen=True)
class Histogram:
    """256 per-level counts. Counts are integers for image histograms but
    may be real-valued after smoothing."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.shape != (BINS,):
            raise ValueError("histogram needs exactly 256 bins")
        if c.min() < 0:
            raise ValueError("counts must be nonnegative")
        object.__setattr__(self, "counts", c)

    @property
    def total(self):
        return self.counts.sum()


@dataclass(frozen=True)
class ThresholdReport:
    """Chosen gray level plus the method that produced it.

    peaks is the (low bin, high bin) pair bracketing the valley; it is set
    only by the valley method. The level always lies strictly between them.
    """

    level: int
    method: str
    peaks: tuple[int, int] | None = None


def gray_histogram(image: GrayImage) -> Histogram:
    counts = np.bincount(image.pixels.ravel(), minlength=BINS).astype(np.int64)
    return Histogram(counts)


def smooth_histogram(h: Histogram, window: int) -> Histogram:
    """Moving average over bins with edge replication at bins 0 and 255.

    window must be odd; window 1 returns the histogram unchanged. Mass is
    preserved exactly for histograms whose support stays at least
    window//2 bins away from both ends; replication inflates mass that
    sits on the extreme bins for windows of 5 and up.
    """
    if window < 1 or window % 2 == 0:
        raise EvenWindow(f"window must be odd and >= 1, got {window}")
    if window == 1:
        return Histogram(np.asarray(h.counts, dtype=np.float64).copy())
    r = window // 2
    padded = np.pad(np.asarray(h.counts, dtype=np.float64), r, mode="edge")
    kernel = np.ones(window) / window
    smoothed = np.convolve(padded, kernel, mode="valid")
    return Histogram(smoothed)


def _local_maxima(counts: np.ndarray) -> list[int]:
    """Bins that are >= both existing neighbors and > at least one of them.

    Plateau edges qualify; plateau interiors and constant histograms do not.
    """
    maxima = []
    for b in range(BINS):
        left = counts[b - 1] if b > 0 else None
        right = counts[b + 1] if b < BINS - 1 else None
        ge_left = left is None or counts[b] >= left
        ge_right = right is None or counts[b] >= right
        gt_some = (left is not None and counts[b] > left) or (
            right is not None and counts[b] > right
        )
        if ge_left and ge_right and gt_some:
            maxima.append(b)
    return maxima


def valley_threshold(
    h: Histogram,
    smooth_window: int = DEFAULT_SMOOTH_WINDOW,
    min_separation: int = DEFAULT_MIN_SEPARATION,
) -> ThresholdReport:
    """Threshold at the deepest point between the two dominant peaks.

    The histogram is smoothed, its local maxima are found, and among all
    maxima pairs at least min_separation bins apart the pair with the
    largest values wins (compared by higher value, then lower value, then
    lower bins). The level is the argmin strictly between the two peak
    bins; all ties resolve to the lowest bin.

    Raises NoTwoPeaks when no sufficiently separated pair exists.
    """
    smoothed = smooth_histogram(h, smooth_window).counts
    maxima = _local_maxima(smoothed)
    best = None
    for i in range(len(maxima)):
        for j in range(i + 1, len(maxima)):
            lo, hi = maxima[i], maxima[j]
            if hi - lo < min_separation:
                continue
            v_hi, v_lo = sorted((smoothed[lo], smoothed[hi]), reverse=True)
            # prefer larger values, then lower bins
            key = (-v_hi, -v_lo, lo, hi)
            if best is None or key < best[0]:
                best = (key, lo, hi)
    if best is None:
        raise NoTwoPeaks(
            f"no two local maxima separated by >= {min_separation} bins"
        )
    _, p_lo, p_hi = best
    between = smoothed[p_lo + 1 : p_hi]
    level = p_lo + 1 + int(np.argmin(between))
    return ThresholdReport(level=level, method="valley", peaks=(p_lo, p_hi))


def otsu_threshold(h: Histogram) -> ThresholdReport:
    """Threshold maximizing between-class variance w0*w1*(mu0-mu1)^2.

    Class 0 holds bins [0..t], class 1 bins [t+1..255]. Thresholds leaving
    a class empty score 0, and ties go to the smallest t. With counts n0,
    n1 and intensity sums s0, s1, the variance is proportional to
    (s0*n1 - s1*n0)^2 / (n0*n1); candidates are compared exactly by
    cross-multiplying these integers.
    """
    counts = np.asarray(h.counts)
    if counts.sum() <= 0:
        raise EmptyHistogram("histogram has no mass")
    if not np.issubdtype(counts.dtype, np.integer):
        raise ValueError("otsu_threshold needs integer counts")
    c = counts.astype(np.int64)
    n0 = np.cumsum(c)
    s0 = np.cumsum(c * np.arange(BINS, dtype=np.int64))
    n_total = int(n0[-1])
    s_total = int(s0[-1])

    best_t = 0
    best_num = 0  # (s0*n1 - s1*n0)^2 as a Python int
    best_den = 1  # n0*n1
    for t in range(BINS):
        a0 = int(n0[t])
        a1 = n_total - a0
        if a0 == 0 or a1 == 0:
            continue  # score 0, never beats a positive score; level 0 default
        b0 = int(s0[t])
        b1 = s_total - b0
        num = (b0 * a1 - b1 * a0) ** 2
        den = a0 * a1
        # num/den > best_num/best_den, exact
        if num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den
    return ThresholdReport(level=best_t, method="otsu")


def binarize(image: GrayImage, level: int) -> LabelMap:
    """Label 1 where pixel > level, 0 otherwise."""
    if not 0 <= level <= 255:
        raise ValueError(f"level must be in [0, 255], got {level}")
    labels = (image.pixels > level).astype(np.int32)
    return LabelMap(labels=labels, k=2, complete=True)
