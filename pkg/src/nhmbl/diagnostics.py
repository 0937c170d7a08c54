"""Chaos and localization indicators for spectra and vectors.

Covers the singular form factor, real and complex gap ratios, inverse
participation ratio, half-chain entanglement entropy, spectral windows and
the reference ratio distributions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .basis import BipartitionMap

# Mean gap ratio, large-matrix GOE value and exact Poisson value.
GOE_MEAN_R = 0.5307
POISSON_MEAN_R = 2 * math.log(2) - 1
# Mean of the 3x3 GOE surmise, 4 - 2 sqrt(3); slightly above the large-D value.
GOE_SURMISE_MEAN_R = 4 - 2 * math.sqrt(3)

# Complex spacing ratio averages <r> and -<cos theta>.
COMPLEX_RATIO_REFERENCE = {
    "poisson": {"mean_r": 2 / 3, "minus_mean_cos": 0.0},
    "ginue": {"mean_r": 0.73810, "minus_mean_cos": 0.24051},
    "tue": {"mean_r": (0.7315, 0.73491), "minus_mean_cos": (0.15322, 0.1938)},
}

NORM_TOL = 1e-10


# -- spectral windows -------------------------------------------------------

@dataclass(frozen=True)
class WindowPolicy:
    """Which part of an ascending spectrum to keep.

    ``kind`` is ``"smallest"`` (the lowest values) or ``"middle"`` (centred at
    ``D / 2``). The window holds ``ceil(fraction * D)`` values. A spectrum
    with at most ``min_size`` values is used whole.
    """

    kind: str = "smallest"
    fraction: float = 0.1
    min_size: int = 20

    def __post_init__(self):
        if self.kind not in ("smallest", "middle"):
            raise ValueError(f"unknown window kind {self.kind!r}")
        if not 0 < self.fraction <= 1:
            raise ValueError(f"window fraction must be in (0, 1], got {self.fraction}")
        if self.min_size < 1:
            raise ValueError("min_size must be positive")

    def describe(self) -> str:
        return f"{self.kind}_fraction({self.fraction:g})"


def smallest_fraction(fraction: float = 0.1) -> WindowPolicy:
    return WindowPolicy("smallest", fraction)


def middle_fraction(fraction: float = 0.1) -> WindowPolicy:
    return WindowPolicy("middle", fraction)


def window_size(n: int, policy: WindowPolicy) -> int:
    # the epsilon keeps 0.1 * 100 from rounding up to 11
    if n <= policy.min_size:
        return n
    return max(1, math.ceil(policy.fraction * n - 1e-9))


def select_window(values, policy: WindowPolicy) -> range:
    """Positions (in ascending order) covered by ``policy``.

    ``values`` is the ascending spectrum, or just its length.
    """
    n = values if isinstance(values, (int, np.integer)) else len(values)
    if n < 1:
        raise ValueError("cannot select a window from an empty spectrum")
    size = window_size(n, policy)
    if size > n:
        raise ValueError(f"window of {size} exceeds spectrum of {n}")
    if policy.kind == "smallest":
        return range(0, size)
    start = min(max(n // 2 - size // 2, 0), n - size)
    return range(start, start + size)


# -- singular form factor ---------------------------------------------------

@dataclass(frozen=True)
class FormFactorCurve:
    times: np.ndarray
    values: np.ndarray


def log_time_grid(dim: int, t_min: float = 0.1, t_max_factor: float = 100.0,
                  n_points: int = 400) -> np.ndarray:
    """Logarithmic grid from ``t_min`` to ``t_max_factor * dim`` (units of 1/J)."""
    return np.geomspace(t_min, t_max_factor * dim, n_points)


def singular_form_factor(sigma, times, chunk: int = 64) -> FormFactorCurve:
    """``|mean_n exp(-i sigma_n t)|^2`` evaluated on ``times``."""
    sigma = np.asarray(sigma, dtype=float)
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        raise ValueError("time grid is empty")
    if sigma.size == 0 or not np.all(np.isfinite(sigma)):
        raise ValueError("singular values must be finite and non-empty")
    values = np.empty(times.shape)
    for start in range(0, times.size, chunk):
        t = times[start:start + chunk]
        amp = np.exp(-1j * np.outer(t, sigma)).mean(axis=1)
        values[start:start + chunk] = amp.real ** 2 + amp.imag ** 2
    return FormFactorCurve(times=times, values=values)


def default_plateau_window(dim: int) -> tuple[float, float]:
    return (10.0 * dim, 100.0 * dim)


def log_smooth(times, values, decades: float) -> np.ndarray:
    """Running mean of ``values`` over a window ``decades`` wide in ``log10(t)``."""
    y = np.asarray(values, dtype=float)
    if decades <= 0:
        return y.copy()
    lt = np.log10(np.asarray(times, dtype=float))
    if np.any(np.diff(lt) < 0):
        raise ValueError("times must be ascending")
    csum = np.concatenate([[0.0], np.cumsum(y)])
    lo = np.searchsorted(lt, lt - decades / 2, side="left")
    hi = np.searchsorted(lt, lt + decades / 2, side="right")
    return (csum[hi] - csum[lo]) / (hi - lo)


def dip_metrics(curve: FormFactorCurve, plateau_window: tuple[float, float],
                dip_start: float | None = None,
                smooth_decades: float = 0.5) -> tuple[float, float]:
    """Depth of the correlation hole relative to the late-time plateau.

    Returns ``(dip_depth, plateau)``. ``plateau`` is the mean of the raw
    curve inside ``plateau_window``. ``dip_depth`` is the minimum of
    ``value / plateau`` over ``dip_start <= t < plateau_window[0]``. A value
    near 1 means there is no hole.

    The curve is first passed through :func:`log_smooth`, because a
    finite-ensemble average scatters point to point by roughly
    ``1/sqrt(realizations)``. The hole itself spans decades, so the
    smoothing leaves it intact while keeping the minimum from picking up
    noise. Pass ``smooth_decades=0`` for the pointwise minimum. By default
    the search starts where the smoothed early decay first reaches twice
    the plateau.
    """
    t, y = np.asarray(curve.times), np.asarray(curve.values)
    lo, hi = plateau_window
    if lo >= hi:
        raise ValueError(f"empty plateau window {plateau_window}")
    in_plateau = (t >= lo) & (t <= hi)
    if not in_plateau.any():
        raise ValueError(f"no curve points inside plateau window {plateau_window}")
    plateau = float(y[in_plateau].mean())
    ys = log_smooth(t, y, smooth_decades)
    if dip_start is None:
        below = np.flatnonzero(ys <= 2 * plateau)
        dip_start = t[below[0]] if below.size else lo
    search = (t >= dip_start) & (t < lo)
    if not search.any():
        return 1.0, plateau
    return float(np.min(ys[search]) / plateau), plateau


# -- real gap ratios --------------------------------------------------------

@dataclass(frozen=True)
class RatioSample:
    ratios: np.ndarray
    mean_r: float
    n_degenerate: int = 0
    window: str = ""


def gap_ratios(values, atol: float = 0.0) -> tuple[np.ndarray, int]:
    """Consecutive-spacing ratios ``min(s_n, s_n+1) / max(s_n, s_n+1)``.

    ``values`` must already be sorted. Spacings ``<= atol`` count as zero;
    a pair of zero spacings has no defined ratio and is dropped and tallied.
    """
    s = np.diff(np.asarray(values, dtype=float))
    s = np.where(s <= atol, 0.0, s)
    a, b = s[:-1], s[1:]
    hi = np.maximum(a, b)
    ok = hi > 0
    r = np.minimum(a, b)[ok] / hi[ok]
    return r, int(np.count_nonzero(~ok))


def ratio_statistics(values, window: WindowPolicy | None = None,
                     rtol: float = 1e-12) -> RatioSample:
    """Gap-ratio sample of a real spectrum after sorting ascending.

    Ratios are scale free, so no unfolding is needed.
    """
    x = np.sort(np.asarray(values, dtype=float))
    desc = "all"
    if window is not None:
        rng = select_window(x, window)
        x = x[rng.start:rng.stop]
        desc = window.describe()
    if x.size < 3:
        raise ValueError(f"need at least 3 values for gap ratios, got {x.size}")
    atol = rtol * float(np.max(np.abs(x))) if x.size else 0.0
    r, n_deg = gap_ratios(x, atol)
    mean_r = float(r.mean()) if r.size else float("nan")
    return RatioSample(ratios=r, mean_r=mean_r, n_degenerate=n_deg, window=desc)


def reference_ratio_pdf(ensemble: str, r):
    """Density of the min-ratio on ``[0, 1]`` for ``"poisson"`` or ``"goe"`` (surmise)."""
    r_arr = np.asarray(r, dtype=float)
    if np.any((r_arr < 0) | (r_arr > 1)):
        raise ValueError("r must lie in [0, 1]")
    key = ensemble.lower()
    if key == "poisson":
        out = 2.0 / (1.0 + r_arr) ** 2
    elif key == "goe":
        out = 27 / 4 * (r_arr + r_arr ** 2) / (1 + r_arr + r_arr ** 2) ** 2.5
    else:
        raise ValueError(f"unknown ensemble {ensemble!r}; expected 'poisson' or 'goe'")
    return float(out) if np.ndim(r) == 0 else out


# -- complex gap ratios -----------------------------------------------------

@dataclass(frozen=True)
class ComplexRatioSample:
    z: np.ndarray
    mean_r: float
    mean_cos_theta: float
    n_skipped: int = 0


def complex_gap_ratios(eigenvalues, window=None) -> ComplexRatioSample:
    """``z_n = (E_nn - E_n) / (E_nnn - E_n)`` with neighbours by distance in the plane.

    Neighbours are searched among all eigenvalues; ``window`` (a range or
    index array into the given order) restricts which ``n`` enter the sample. Points whose
    nearest or next-nearest neighbour coincides with them are skipped.
    """
    E = np.asarray(eigenvalues, dtype=np.complex128).ravel()
    if np.unique(E).size < 3:
        raise ValueError("need at least 3 distinct eigenvalues")
    idx = np.arange(E.size) if window is None else np.asarray(window, dtype=np.intp)
    pts = np.column_stack([E.real, E.imag])
    dist, nbr = cKDTree(pts).query(pts[idx], k=3)
    # column 0 is normally the point itself; duplicates can swap places with it
    keep = (dist[:, 1] > 0) & (dist[:, 2] > 0)
    e = E[idx][keep]
    z = (E[nbr[keep, 1]] - e) / (E[nbr[keep, 2]] - e)
    mag = np.abs(z)
    return ComplexRatioSample(
        z=z,
        mean_r=float(mag.mean()) if z.size else float("nan"),
        mean_cos_theta=float((z.real / mag).mean()) if z.size else float("nan"),
        n_skipped=int(np.count_nonzero(~keep)),
    )


# -- vector indicators ------------------------------------------------------

def _check_normalized(vectors: np.ndarray) -> None:
    norms = np.linalg.norm(vectors, axis=0)
    if np.any(np.abs(norms - 1) > NORM_TOL):
        raise ValueError("vector(s) must have unit norm")


def ipr(vector) -> float | np.ndarray:
    """``sum_k |c_k|^4``; a 2-D input is treated as a set of column vectors."""
    v = np.asarray(vector)
    _check_normalized(v)
    p = np.abs(v) ** 2
    out = np.sum(p * p, axis=0)
    return float(out) if v.ndim == 1 else out


def _von_neumann(schmidt: np.ndarray) -> np.ndarray:
    lam = schmidt ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(lam > 0, -lam * np.log(lam), 0.0)
    return terms.sum(axis=-1)


def entanglement_entropy(vector, bipartition: BipartitionMap) -> float | np.ndarray:
    """Half-chain von Neumann entropy in nats.

    Amplitudes are scattered into the ``(A, B)`` coefficient matrix whose
    squared singular values are the eigenvalues of the reduced density
    matrix. A 2-D input is treated as column vectors.
    """
    v = np.asarray(vector)
    _check_normalized(v)
    cols = v[:, None] if v.ndim == 1 else v
    M = np.zeros((cols.shape[1],) + bipartition.shape, dtype=np.complex128)
    M[:, bipartition.rows, bipartition.cols] = cols.T
    schmidt = np.linalg.svd(M, compute_uv=False)
    S = np.maximum(_von_neumann(schmidt), 0.0)
    return float(S[0]) if v.ndim == 1 else S


@dataclass(frozen=True)
class LocalizationIndicators:
    ipr: float
    entanglement_entropy: float


def localization_indicators(vectors, bipartition: BipartitionMap) -> LocalizationIndicators:
    """Window averages of IPR and entanglement entropy over column vectors."""
    return LocalizationIndicators(
        ipr=float(np.mean(ipr(vectors))),
        entanglement_entropy=float(np.mean(entanglement_entropy(vectors, bipartition))),
    )


@dataclass
class RatioHistogram:
    """Fixed-bin counts of gap ratios on ``[0, 1]``."""

    bins: int = 50
    counts: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.counts is None:
            self.counts = np.zeros(self.bins, dtype=np.int64)

    def add(self, ratios) -> None:
        c, _ = np.histogram(ratios, bins=self.bins, range=(0.0, 1.0))
        self.counts += c

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.bins + 1)

    def density(self) -> np.ndarray:
        total = self.counts.sum()
        if total == 0:
            return np.zeros(self.bins)
        return self.counts / (total / self.bins)
