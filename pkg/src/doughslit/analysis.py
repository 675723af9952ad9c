"""Distribution similarity, fringe-peak analysis, moment signatures, and
proximity-graph closeness-centrality sweeps."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import shortest_path

from .errors import InvalidParameterError


@dataclass(frozen=True)
class Distribution1D:
    """Nonnegative values over uniformly spaced ordered positions."""

    values: np.ndarray
    spacing: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))


def similarity(p, q) -> float:
    """Normalized overlap of two distributions as a percentage in [0, 100].

    Element-wise absolute values are applied first; the score is
    100 * sum(sqrt(|p| |q|)) / (0.5 * (sum|p| + sum|q|)). 100 means the
    absolute distributions are identical; disjoint supports give 0.
    """
    if isinstance(p, Distribution1D):
        p = p.values
    if isinstance(q, Distribution1D):
        q = q.values
    p = np.abs(np.asarray(p, dtype=float).ravel())
    q = np.abs(np.asarray(q, dtype=float).ravel())
    if p.shape != q.shape:
        raise InvalidParameterError(f"length mismatch: {p.size} vs {q.size}")
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
        raise InvalidParameterError("distributions must be finite")
    denom = 0.5 * (float(p.sum()) + float(q.sum()))
    if denom == 0.0:
        raise InvalidParameterError("both distributions are all-zero")
    s = 100.0 * float(np.sqrt(p * q).sum()) / denom
    return min(s, 100.0)  # guard 1-ulp overshoot of the exact-equality case


@dataclass(frozen=True)
class ScreenHistogram:
    """Uniform-width binned counts; bins are half-open [left, right)."""

    bin_edges: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=float)
        counts = np.asarray(self.counts)
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "counts", counts)
        if counts.size == 0:
            if edges.size not in (0, 1):
                raise InvalidParameterError("empty histogram cannot carry bin edges")
            return
        if edges.size != counts.size + 1:
            raise InvalidParameterError("bin_edges must have one more entry than counts")
        widths = np.diff(edges)
        if not np.all(widths > 0):
            raise InvalidParameterError("bin edges must be strictly increasing")
        if not np.allclose(widths, widths[0], rtol=1e-9, atol=0):
            raise InvalidParameterError("bins must have constant width")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def n_bins(self) -> int:
        return int(self.counts.size)

    @property
    def bin_size(self) -> float:
        if self.counts.size == 0:
            raise InvalidParameterError("empty histogram has no bin size")
        return float(self.bin_edges[1] - self.bin_edges[0])

    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])


def histogram(positions, bin_size: float, anchor: float = 0.0, pad_bins: int = 0) -> ScreenHistogram:
    """Bin positions into uniform half-open bins with an edge at `anchor`.

    pad_bins adds that many empty bins on each end (0 by default). Empty
    input yields an empty histogram.
    """
    if not bin_size > 0:
        raise InvalidParameterError(f"bin_size must be positive, got {bin_size}")
    positions = np.asarray(positions, dtype=float).ravel()
    if positions.size == 0:
        return ScreenHistogram(np.empty(0), np.empty(0, dtype=np.int64))
    if not np.all(np.isfinite(positions)):
        raise InvalidParameterError("positions must be finite")
    k = np.floor((positions - anchor) / bin_size).astype(np.int64)
    k0 = int(k.min()) - pad_bins
    k1 = int(k.max()) + pad_bins
    counts = np.bincount(k - k0, minlength=k1 - k0 + 1).astype(np.int64)
    edges = anchor + bin_size * np.arange(k0, k1 + 2, dtype=float)
    return ScreenHistogram(edges, counts)


def moving_average(values, window: int) -> np.ndarray:
    """Centered moving average; edge windows are shortened, not zero-padded."""
    if window < 1 or window % 2 == 0:
        raise InvalidParameterError(f"window must be a positive odd integer, got {window}")
    values = np.asarray(values, dtype=float)
    if window == 1:
        return values.copy()
    kernel = np.ones(window)
    sums = np.convolve(values, kernel, mode="same")
    norms = np.convolve(np.ones_like(values), kernel, mode="same")
    return sums / norms


@dataclass(frozen=True)
class Peak:
    """One detected histogram peak with its flanking valley heights."""

    center: float
    height: float
    left_valley: float
    right_valley: float

    @property
    def prominence(self) -> float:
        return self.height - max(self.left_valley, self.right_valley)


def _candidate_regions(heights: np.ndarray) -> list[list[int]]:
    """Interior plateau runs strictly higher than both neighbors, as [lo, hi]."""
    n = heights.size
    regions = []
    i = 1
    while i < n - 1:
        j = i
        while j + 1 < n and heights[j + 1] == heights[i]:
            j += 1
        if j < n - 1 and heights[i - 1] < heights[i] and heights[j + 1] < heights[i]:
            regions.append([i, j])
        i = j + 1
    return regions


def detect_peaks(
    h: ScreenHistogram, min_prominence: float = 0.1, smooth_window: int | None = None
) -> list[Peak]:
    """Find prominent interior peaks of a histogram.

    A candidate is any interior local maximum (plateaus report their center).
    Adjacent candidates separated by a valley shallower than
    min_prominence * max height merge into one region reported at the
    midpoint of its top-value span; surviving regions must clear the same
    prominence threshold against their flanking valleys.
    """
    if not (0.0 <= min_prominence < 1.0):
        raise InvalidParameterError(f"min_prominence must be in [0, 1), got {min_prominence}")
    if h.n_bins < 3:
        raise InvalidParameterError(f"need at least 3 bins to detect peaks, got {h.n_bins}")
    heights = np.asarray(h.counts, dtype=float)
    if smooth_window is not None:
        heights = moving_average(heights, smooth_window)
    top = float(heights.max())
    if top <= 0.0:
        return []
    threshold = min_prominence * top
    centers = h.centers()

    regions = [(lo, hi, float(heights[lo])) for lo, hi in _candidate_regions(heights)]

    def gap_min(a_hi: int, b_lo: int) -> float:
        return float(heights[a_hi + 1 : b_lo].min())

    changed = True
    while changed and regions:
        changed = False
        # merge adjacent regions across too-shallow valleys
        merged = [regions[0]]
        for lo, hi, h_top in regions[1:]:
            p_lo, p_hi, p_top = merged[-1]
            if min(p_top, h_top) - gap_min(p_hi, lo) < threshold:
                merged[-1] = (p_lo, hi, max(p_top, h_top))
                changed = True
            else:
                merged.append((lo, hi, h_top))
        regions = merged
        # drop regions that still lack prominence against their surroundings
        kept = []
        for idx, (lo, hi, h_top) in enumerate(regions):
            left_lo = regions[idx - 1][1] + 1 if idx > 0 else 0
            right_hi = regions[idx + 1][0] if idx + 1 < len(regions) else heights.size
            lv = float(heights[left_lo:lo].min())
            rv = float(heights[hi + 1 : right_hi].min())
            if h_top - max(lv, rv) >= threshold:
                kept.append((lo, hi, h_top))
            else:
                changed = True
        regions = kept

    peaks = []
    for idx, (lo, hi, h_top) in enumerate(regions):
        span = np.flatnonzero(heights[lo : hi + 1] == h_top) + lo
        center = 0.5 * (centers[span[0]] + centers[span[-1]])
        left_lo = regions[idx - 1][1] + 1 if idx > 0 else 0
        right_hi = regions[idx + 1][0] if idx + 1 < len(regions) else heights.size
        peaks.append(
            Peak(
                center=float(center),
                height=h_top,
                left_valley=float(heights[left_lo:lo].min()),
                right_valley=float(heights[hi + 1 : right_hi].min()),
            )
        )
    return peaks


@dataclass(frozen=True)
class FringeMetrics:
    """Spacing statistics and visibility of a detected peak train."""

    n_peaks: int
    mean_spacing: float | None
    spacing_cv: float | None
    visibility: float
    fringed: bool


def fringe_metrics(
    peaks: list[Peak], cv_threshold: float = 0.15, min_peaks_for_fringe: int = 5
) -> FringeMetrics:
    """Summarize peak spacings and contrast.

    Spacing statistics need >= 2 peaks and are None otherwise; visibility is
    (max - v) / (max + v) with v the lower adjacent valley of the tallest
    peak. The pattern counts as fringed when at least `min_peaks_for_fringe`
    peaks are spaced regularly (coefficient of variation below cv_threshold).
    """
    if not peaks:
        raise InvalidParameterError("fringe metrics need at least one peak")
    tallest = max(peaks, key=lambda p: p.height)
    v = min(tallest.left_valley, tallest.right_valley)
    visibility = (tallest.height - v) / (tallest.height + v)
    if len(peaks) < 2:
        return FringeMetrics(len(peaks), None, None, visibility, False)
    centers = np.array(sorted(p.center for p in peaks))
    spacings = np.diff(centers)
    mean = float(spacings.mean())
    cv = float(spacings.std() / mean)
    fringed = len(peaks) >= min_peaks_for_fringe and cv < cv_threshold
    return FringeMetrics(len(peaks), mean, cv, visibility, fringed)


def autocorrelation(values) -> np.ndarray:
    """Mean-removed autocorrelation normalized to the zero-lag value."""
    x = np.asarray(values, dtype=float)
    x = x - x.mean()
    c = np.correlate(x, x, mode="full")[x.size - 1 :]
    if c[0] <= 0.0:
        return np.zeros_like(c)
    return c / c[0]


@dataclass
class ProximityGraph:
    """Undirected graph linking points within Euclidean distance `radius`."""

    points: np.ndarray
    radius: float
    adjacency: np.ndarray

    def edges(self) -> set[tuple[int, int]]:
        i, j = np.nonzero(np.triu(self.adjacency, k=1))
        return set(zip(i.tolist(), j.tolist()))

    @property
    def n_nodes(self) -> int:
        return int(self.points.shape[0])


def proximity_graph(points, radius: float) -> ProximityGraph:
    """Connect every pair of points at Euclidean distance <= radius."""
    if radius < 0:
        raise InvalidParameterError(f"radius must be nonnegative, got {radius}")
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    if not np.all(np.isfinite(points)):
        raise InvalidParameterError("point coordinates must be finite")
    delta = points[:, None, :] - points[None, :, :]
    dist2 = np.einsum("ijk,ijk->ij", delta, delta)
    adjacency = dist2 <= radius * radius
    np.fill_diagonal(adjacency, False)
    return ProximityGraph(points=points, radius=float(radius), adjacency=adjacency)


@dataclass(frozen=True)
class CentralityResult:
    values: np.ndarray
    max_value: float
    argmax: tuple[int, ...]


def closeness_centrality(g: ProximityGraph, weighted: bool = False) -> CentralityResult:
    """Component-normalized closeness (n_comp - 1) / sum of distances.

    Distances are hop counts by default, or Euclidean edge lengths when
    weighted=True. Isolated nodes score 0. Also reports the maximum value
    and every node attaining it.
    """
    n = g.n_nodes
    if n == 0:
        return CentralityResult(np.empty(0), 0.0, ())
    if weighted:
        delta = g.points[:, None, :] - g.points[None, :, :]
        w = np.sqrt(np.einsum("ijk,ijk->ij", delta, delta)) * g.adjacency
        graph = sp.csr_matrix(w)
        dist = shortest_path(graph, directed=False, unweighted=False)
    else:
        graph = sp.csr_matrix(g.adjacency.astype(float))
        dist = shortest_path(graph, directed=False, unweighted=True)
    values = np.zeros(n)
    for v in range(n):
        reachable = np.isfinite(dist[v])
        n_comp = int(reachable.sum())
        total = float(dist[v][reachable].sum())
        if n_comp > 1 and total > 0.0:
            values[v] = (n_comp - 1) / total
    max_value = float(values.max())
    argmax = tuple(int(i) for i in np.flatnonzero(np.isclose(values, max_value, rtol=1e-12, atol=0.0)))
    return CentralityResult(values, max_value, argmax)


@dataclass(frozen=True)
class RadiusSweepResult:
    radii: np.ndarray
    max_centrality: np.ndarray
    argmax_count: np.ndarray
    selected_radius: float
    selected_index: int
    selected_nodes: tuple[int, ...]


def sweep_radius(points, radii, weighted: bool = False) -> RadiusSweepResult:
    """Scan connection radii for the sparsest set of most-central nodes.

    For each radius, records the maximum closeness and how many nodes attain
    it; selects the radius with the fewest argmax nodes, breaking ties by
    higher maximum closeness, then by smaller radius. The argmax nodes at the
    selected radius are the candidate source points.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    if points.shape[0] == 0:
        raise InvalidParameterError("radius sweep needs at least one point")
    radii = np.asarray(radii, dtype=float).ravel()
    if radii.size == 0:
        raise InvalidParameterError("radius grid must be nonempty")
    max_c = np.zeros(radii.size)
    counts = np.zeros(radii.size, dtype=np.int64)
    argmaxes: list[tuple[int, ...]] = []
    for i, r in enumerate(radii):
        result = closeness_centrality(proximity_graph(points, r), weighted=weighted)
        max_c[i] = result.max_value
        counts[i] = len(result.argmax)
        argmaxes.append(result.argmax)
    order = sorted(range(radii.size), key=lambda i: (counts[i], -max_c[i], radii[i]))
    best = order[0]
    return RadiusSweepResult(
        radii=radii,
        max_centrality=max_c,
        argmax_count=counts,
        selected_radius=float(radii[best]),
        selected_index=best,
        selected_nodes=argmaxes[best],
    )


@dataclass(frozen=True)
class MomentSignature:
    """Population mean/variance/skewness/kurtosis of a grayscale value set.

    Components that are undefined for the input (variance with fewer than two
    values; skewness/kurtosis at zero variance) are None.
    """

    mean: float
    variance: float | None
    skewness: float | None
    kurtosis: float | None


def moment_signature(values) -> MomentSignature:
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise InvalidParameterError("moment signature needs at least one value")
    if not np.all(np.isfinite(values)):
        raise InvalidParameterError("values must be finite")
    mean = float(values.mean())
    if values.size < 2:
        return MomentSignature(mean, None, None, None)
    centered = values - mean
    m2 = float(np.mean(centered**2))
    scale = float(np.max(np.abs(values)))
    if m2 <= (64.0 * np.finfo(float).eps * max(scale, 1e-300)) ** 2:
        return MomentSignature(mean, 0.0, None, None)
    m3 = float(np.mean(centered**3))
    m4 = float(np.mean(centered**4))
    return MomentSignature(mean, m2, m3 / m2**1.5, m4 / m2**2)


def signature_distance(a: MomentSignature, b: MomentSignature) -> float:
    """Euclidean distance over the moment components defined in both signatures."""
    total = 0.0
    for x, y in (
        (a.mean, b.mean),
        (a.variance, b.variance),
        (a.skewness, b.skewness),
        (a.kurtosis, b.kurtosis),
    ):
        if x is not None and y is not None:
            total += (x - y) ** 2
    return math.sqrt(total)
