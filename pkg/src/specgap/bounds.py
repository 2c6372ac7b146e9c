"""Error bounds and estimates for the Lanczos approximation of ``x^T h_mu(A) x``.

Three kinds of quantities live here:

* parameter selectors (``epsilon_from_delta``, ``sample_count``,
  ``required_iterations``) derived from the chi-squared small-jump bound and
  the polynomial approximation bound for the sign function;
* per-``mu`` error radii, either the a posteriori bound built from the
  residue function ``g_m`` or the consecutive-difference estimate;
* the monotone refinement of ``q +/- r`` and its combination over a set of
  Lanczos steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .estimator import MuGrid, QuadFormCurve
from .sparse import SpectralInterval
from .trideig import TridiagEigen

__all__ = [
    "ClusteredRitzValuesError",
    "AprioriParams",
    "epsilon_from_delta",
    "epsilon_for_samples",
    "small_jump_prob_bound",
    "sample_count",
    "apriori_bound",
    "required_iterations",
    "GmCoefficients",
    "gm_coefficients",
    "gm_eval",
    "aposteriori_bound",
    "aposteriori_bounds",
    "consec_diff_estimate",
    "refine_upper",
    "refine_lower",
    "monotone_refine",
    "MemberBounds",
    "member_bounds",
    "BoundCurves",
    "combine_over_M",
]

CLUSTER_TOL = 1e-14


class ClusteredRitzValuesError(ArithmeticError):
    """Ritz values too close together for a stable ``gamma``."""


# -- parameter selection ----------------------------------------------------


@dataclass(frozen=True)
class AprioriParams:
    """Constants of the a priori bound for relative gap width ``theta``."""

    theta: float

    def __post_init__(self):
        if not 0 < self.theta < 1:
            raise ValueError(f"theta must lie in (0, 1), got {self.theta}")

    @property
    def c_theta(self) -> float:
        return 1.0 + (1.0 - self.theta) / math.sqrt(math.pi * self.theta)

    @property
    def rate(self) -> float:
        return (1.0 - self.theta) / (1.0 + self.theta)


def epsilon_from_delta(delta: float) -> float:
    """Jump threshold ``e^{-1} delta^2`` for which one sample suffices."""
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    return delta * delta / math.e


def small_jump_prob_bound(s: int, epsilon: float) -> float:
    """Chernoff bound ``(epsilon e^{1-epsilon})^{s/2}`` on ``P(chi2_s <= s epsilon)``."""
    if s < 1:
        raise ValueError("s must be >= 1")
    if not 0 < epsilon <= 1:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    return math.exp(0.5 * s * (math.log(epsilon) + 1.0 - epsilon))


def sample_count(delta: float, epsilon: float) -> int:
    """Smallest ``s`` for which a jump is ``epsilon``-small with probability <= ``delta``."""
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    raw = 2.0 * math.log(1.0 / delta) / (math.log(1.0 / epsilon) + epsilon - 1.0)
    return max(1, math.ceil(round(raw, 9)))


def epsilon_for_samples(delta: float, s: int) -> float:
    """Threshold to use with ``s`` samples.

    ``s = 1`` gives ``e^{-1} delta^2``; larger ``s`` gives the largest
    ``epsilon`` with ``sample_count(delta, epsilon) <= s``.
    """
    if s < 1:
        raise ValueError("s must be >= 1")
    if s == 1:
        return epsilon_from_delta(delta)
    target = 2.0 * math.log(1.0 / delta) / s
    if target == 0.0:
        return epsilon_from_delta(delta)
    eps = brentq(lambda e: -math.log(e) + e - 1.0 - target, 1e-300, 1.0 - 1e-15,
                 xtol=1e-300, rtol=1e-15)
    eps *= 1.0 - 1e-12  # stay on the safe side of the root
    while sample_count(delta, eps) > s:
        eps *= 1.0 - 1e-9
    return eps


def apriori_bound(params: AprioriParams, m: int, x_norm_sq: float) -> float:
    """Bound ``C_theta ||x||^2 rate^{m-1} / sqrt(m-1)`` on the quadrature error at a gap center."""
    if m < 2:
        raise ValueError("m must be >= 2")
    return params.c_theta * x_norm_sq * params.rate ** (m - 1) / math.sqrt(m - 1)


def required_iterations(theta: float, epsilon: float, x_norm_sq_mean: float,
                        halve_theta: bool = False) -> int:
    """Lanczos steps that push the a priori bound below ``epsilon / 2``.

    Parameters
    ----------
    theta : float
        Target relative gap width.
    epsilon : float
        Jump threshold; the factor 2 of the ``epsilon / 2`` split is applied here.
    x_norm_sq_mean : float
        Expected ``||x||^2`` (``n`` for standard Gaussian vectors).
    halve_theta : bool
        Use ``theta / 2``, which still covers gaps holding one Ritz value.
    """
    if not 0 < theta < 1:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if not x_norm_sq_mean > 0:
        raise ValueError("x_norm_sq_mean must be positive")
    if halve_theta:
        theta = theta / 2
    c_theta = AprioriParams(theta).c_theta
    raw = 1.0 + math.log(2.0 * c_theta * x_norm_sq_mean / epsilon) / math.log((1 + theta) / (1 - theta))
    return max(2, math.ceil(round(raw, 9)))


# -- a posteriori bound -----------------------------------------------------


@dataclass(frozen=True, eq=False)
class GmCoefficients:
    """Pole data of the residue function ``g_m``.

    ``alpha = t_{m+1,m} U[m-1, :]``, ``beta = U[0, :]`` and
    ``gamma_j = sum_{k != j} alpha_k beta_k / (theta_j - theta_k)``.
    """

    thetas: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray

    @property
    def m(self) -> int:
        return int(self.thetas.shape[0])


def gm_coefficients(eig: TridiagEigen, t_off: float, block: int = 512) -> GmCoefficients:
    """Compute ``alpha``, ``beta`` and ``gamma`` (direct O(m^2) sum).

    Raises
    ------
    ClusteredRitzValuesError
        If two Ritz values are closer than ``1e-14`` times their spread.
    """
    th = eig.thetas
    m = th.shape[0]
    alpha = t_off * eig.last_row
    beta = eig.first_row.copy()
    if m > 1:
        spread = float(th[-1] - th[0])
        gap = float(np.min(np.diff(th)))
        if gap <= CLUSTER_TOL * spread:
            raise ClusteredRitzValuesError(
                f"Ritz values {gap:.3e} apart (spread {spread:.3e}); gamma is unstable")
    ab = alpha * beta
    gamma = np.empty(m)
    for start in range(0, m, block):
        stop = min(start + block, m)
        diff = th[start:stop, None] - th[None, :]
        diff[np.arange(stop - start), np.arange(start, stop)] = np.inf
        gamma[start:stop] = (ab[None, :] / diff).sum(axis=1)
    return GmCoefficients(thetas=th, alpha=alpha, beta=beta, gamma=gamma)


def gm_eval(coeffs: GmCoefficients, mu: float, z) -> np.ndarray:
    """Evaluate ``g_m(z)`` from its definition (vectorized over ``z``)."""
    z = np.atleast_1d(np.asarray(z, dtype=np.float64))
    th = coeffs.thetas
    ab = coeffs.alpha * coeffs.beta
    out = np.zeros(z.shape)
    for i, zi in enumerate(z):
        if zi < mu:
            sel = th > mu
            sign = 1.0
        elif zi > mu:
            sel = th < mu
            sign = -1.0
        else:
            out[i] = np.nan
            continue
        inv = 1.0 / (zi - th[sel])
        out[i] = sign * np.sum(ab[sel] ** 2 * inv**2 + 2.0 * ab[sel] * coeffs.gamma[sel] * inv)
    return out


def _pole_terms(coeffs: GmCoefficients, z: np.ndarray) -> np.ndarray:
    # (len(z), m) matrix of alpha^2 beta^2/(z-theta)^2 + 2 alpha beta gamma/(z-theta)
    ab = coeffs.alpha * coeffs.beta
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / (z[:, None] - coeffs.thetas[None, :])
        return (ab * ab)[None, :] * inv * inv + (2.0 * ab * coeffs.gamma)[None, :] * inv


def aposteriori_bounds(coeffs: GmCoefficients, mus, interval: SpectralInterval,
                       L: int = 1000, x_norm_sq: float = 1.0, block: int = 256) -> np.ndarray:
    """A posteriori error bound at every ``mu`` in ``mus``.

    ``|g_m|`` is maximized over ``L`` equispaced points of the interval on
    each side of ``mu`` plus the one-sided limits at ``mu``.  The branch for
    ``z < mu`` only has poles above ``mu`` and vice versa, so both branches
    are smooth on their half-interval.

    Cumulative sums over the ascending Ritz values give the branch value for
    every ``mu`` at once, so the cost is O(L m + m N_f) rather than
    O(L m N_f).
    """
    if L < 2:
        raise ValueError("L must be >= 2")
    mus = np.atleast_1d(np.asarray(mus, dtype=np.float64))
    lo, hi = interval.lo, interval.hi
    slack = 1e-12 * max(abs(lo), abs(hi), 1.0)
    if np.any(mus < lo - slack) or np.any(mus > hi + slack):
        raise ValueError("every mu must lie inside the spectral interval")
    th = coeffs.thetas
    m = th.shape[0]
    z = np.linspace(lo, hi, L)

    P = _pole_terms(coeffs, z)
    with np.errstate(invalid="ignore"):
        # suffix[:, k] = sum_{j >= k} P[:, j];  prefix[:, k] = sum_{j < k} P[:, j]
        suffix = np.zeros((L, m + 1))
        suffix[:, :m] = np.cumsum(P[:, ::-1], axis=1)[:, ::-1]
        prefix = np.zeros((L, m + 1))
        prefix[:, 1:] = np.cumsum(P, axis=1)
    del P

    k_above = np.searchsorted(th, mus, side="right")  # poles theta > mu are j >= k_above
    k_below = np.searchsorted(th, mus, side="left")   # poles theta < mu are j < k_below
    n_left = np.searchsorted(z, mus, side="left")     # z[:n_left] < mu
    first_right = np.searchsorted(z, mus, side="right")  # z[first_right:] > mu

    best = np.zeros(mus.shape)
    for k in np.unique(k_above):
        sel = np.nonzero(k_above == k)[0]
        run = np.maximum.accumulate(np.abs(suffix[:, k]))
        idx = n_left[sel]
        best[sel] = np.maximum(best[sel], np.where(idx > 0, run[np.maximum(idx - 1, 0)], 0.0))
    for k in np.unique(k_below):
        sel = np.nonzero(k_below == k)[0]
        run = np.maximum.accumulate(np.abs(prefix[::-1, k]))[::-1]
        idx = first_right[sel]
        best[sel] = np.maximum(best[sel], np.where(idx < L, run[np.minimum(idx, L - 1)], 0.0))

    # one-sided limits z -> mu
    j = np.arange(m)
    for start in range(0, mus.shape[0], block):
        stop = min(start + block, mus.shape[0])
        mu_b = mus[start:stop]
        Pm = _pole_terms(coeffs, mu_b)
        upper_poles = j[None, :] >= k_above[start:stop, None]
        lower_poles = j[None, :] < k_below[start:stop, None]
        left_lim = np.where(upper_poles, Pm, 0.0).sum(axis=1)
        right_lim = np.where(lower_poles, Pm, 0.0).sum(axis=1)
        left_lim = np.where(mu_b > lo, np.abs(left_lim), 0.0)
        right_lim = np.where(mu_b < hi, np.abs(right_lim), 0.0)
        best[start:stop] = np.maximum(best[start:stop], np.maximum(left_lim, right_lim))
    return x_norm_sq * best


def aposteriori_bound(coeffs: GmCoefficients, mu: float, interval: SpectralInterval,
                      L: int = 1000, x_norm_sq: float = 1.0) -> float:
    """Scalar version of :func:`aposteriori_bounds`."""
    return float(aposteriori_bounds(coeffs, [mu], interval, L, x_norm_sq)[0])


# -- consecutive differences and refinement ---------------------------------


def consec_diff_estimate(q_m: QuadFormCurve, q_m1: QuadFormCurve, c: float = 2.0) -> np.ndarray:
    """Error estimate ``c |q_m - q_{m+1}|`` on the common grid."""
    if c < 1:
        raise ValueError("safety factor c must be >= 1")
    if not q_m.grid.same_as(q_m1.grid):
        raise ValueError("curves live on different grids")
    if q_m.sample_id != q_m1.sample_id:
        raise ValueError("curves come from different samples")
    return c * np.abs(q_m.values - q_m1.values)


def refine_upper(upper) -> np.ndarray:
    """Suffix minimum: ``min_{mu' >= mu} upper(mu')``."""
    upper = np.asarray(upper, dtype=np.float64)
    return np.minimum.accumulate(upper[::-1])[::-1]


def refine_lower(lower) -> np.ndarray:
    """Prefix maximum: ``max_{mu' <= mu} lower(mu')``."""
    return np.maximum.accumulate(np.asarray(lower, dtype=np.float64))


def monotone_refine(q, r):
    """Monotone envelopes ``(upper, lower)`` of ``q + r`` and ``q - r``."""
    q = np.asarray(q, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    return refine_upper(q + r), refine_lower(q - r)


@dataclass(frozen=True, eq=False)
class MemberBounds:
    """Refined envelopes for one Lanczos step ``m``."""

    m: int
    q: np.ndarray
    radius: np.ndarray
    upper: np.ndarray
    lower: np.ndarray
    method: str = "consec_diff"

    @property
    def raw_upper(self) -> np.ndarray:
        return self.q + self.radius

    @property
    def raw_lower(self) -> np.ndarray:
        return self.q - self.radius


def member_bounds(m: int, q, radius, method: str = "consec_diff") -> MemberBounds:
    q = np.asarray(q, dtype=np.float64)
    radius = np.asarray(radius, dtype=np.float64)
    upper, lower = monotone_refine(q, radius)
    return MemberBounds(m=m, q=q, radius=radius, upper=upper, lower=lower, method=method)


@dataclass(frozen=True, eq=False)
class BoundCurves:
    """Combined envelopes on a grid.

    Attributes
    ----------
    grid : MuGrid
    q : ndarray
        Central values at the largest step of ``m_set``.
    upper, lower : ndarray
        Refined and combined envelopes, both nondecreasing.
    raw_upper, raw_lower : ndarray
        ``q +/- r`` before refinement, combined the same way.
    method : {"consec_diff", "posteriori"}
    variant : {"safe", "robust"}
    m_set : tuple of int
    methods_used : tuple of str
        Per-member method; a member falls back to ``consec_diff`` when its
        Ritz values are too clustered for the a posteriori bound.
    """

    grid: MuGrid
    q: np.ndarray
    upper: np.ndarray
    lower: np.ndarray
    raw_upper: np.ndarray
    raw_lower: np.ndarray
    method: str
    variant: str
    m_set: tuple
    methods_used: tuple = field(default=())

    @property
    def crossing(self) -> bool:
        """True when ``lower > upper`` somewhere (possible only for estimates)."""
        return bool(np.any(self.lower > self.upper))


def combine_over_M(grid: MuGrid, members, variant: str = "safe",
                   method: str = "consec_diff") -> BoundCurves:
    """Combine per-step envelopes.

    ``robust`` keeps the tightest envelope at each point, ``safe`` the
    loosest one.
    """
    members = sorted(members, key=lambda b: b.m)
    if not members:
        raise ValueError("the set of Lanczos steps is empty")
    if variant == "robust":
        up_op, lo_op = np.min, np.max
    elif variant == "safe":
        up_op, lo_op = np.max, np.min
    else:
        raise ValueError(f"unknown variant {variant!r}")
    for b in members:
        if b.q.shape != grid.values.shape:
            raise ValueError("member bounds do not match the grid")

    def stack(attr):
        return np.stack([getattr(b, attr) for b in members])

    return BoundCurves(
        grid=grid,
        q=members[-1].q,
        upper=up_op(stack("upper"), axis=0),
        lower=lo_op(stack("lower"), axis=0),
        raw_upper=up_op(stack("raw_upper"), axis=0),
        raw_lower=lo_op(stack("raw_lower"), axis=0),
        method=method,
        variant=variant,
        m_set=tuple(b.m for b in members),
        methods_used=tuple(b.method for b in members),
    )
