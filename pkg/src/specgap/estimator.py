"""Lanczos quadrature for ``x^T h_mu(A) x`` on a grid of ``mu`` values.

With ``T_m = U_m D_m U_m^T`` and ``w = ||x|| U_m^T e_1`` the approximation is

    q_m(mu) = w^T h_mu(D_m) w = ||x||^2 * sum_k h_mu(theta_k) U_m[0, k]^2,

a nondecreasing staircase in ``mu`` with a jump of ``||x||^2 U_m[0, k]^2``
at every Ritz value ``theta_k``.  Cumulative weights turn the evaluation on
the whole grid into a sorted lookup.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .trideig import TridiagEigen

__all__ = [
    "heaviside",
    "MuGrid",
    "make_grid",
    "QuadFormCurve",
    "quadform_curve",
    "hutchinson_average",
    "gaussian_sample_count",
]

AGGREGATE = "mean"


def heaviside(mu, x):
    """Step function ``h_mu(x)``: 1 below ``mu``, 1/2 at ``mu``, 0 above.

    Broadcasts over array arguments.
    """
    out = np.where(np.asarray(x) < mu, 1.0, np.where(np.asarray(x) == mu, 0.5, 0.0))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class MuGrid:
    """Strictly increasing grid of test parameters.

    Attributes
    ----------
    values : ndarray
    scale : {"linear", "log"}
    source : str
        Where the range came from, ``"interval"`` (the working spectral
        interval) or ``"user"``.
    """

    values: np.ndarray
    scale: str = "linear"
    source: str = "user"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.shape[0] < 1:
            raise ValueError("grid must be a non-empty 1-d array")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid values must be finite")
        if v.shape[0] > 1 and not np.all(np.diff(v) > 0):
            raise ValueError("grid values must be strictly increasing")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return int(self.values.shape[0])

    @property
    def lo(self) -> float:
        return float(self.values[0])

    @property
    def hi(self) -> float:
        return float(self.values[-1])

    def same_as(self, other: "MuGrid") -> bool:
        return self is other or np.array_equal(self.values, other.values)


def make_grid(lo: float, hi: float, count: int = 10000, scale: str = "auto",
              source: str = "user") -> MuGrid:
    """Evenly spaced grid on ``[lo, hi]``, endpoints included.

    ``scale="auto"`` picks logarithmic spacing when ``lo > 0`` and linear
    spacing otherwise.
    """
    if count < 2:
        raise ValueError("grid needs at least 2 points")
    if not (np.isfinite(lo) and np.isfinite(hi)) or not lo < hi:
        raise ValueError(f"empty mu range [{lo}, {hi}]")
    if scale == "auto":
        scale = "log" if lo > 0 else "linear"
    if scale == "log":
        if lo <= 0:
            raise ValueError("log-spaced grid needs lo > 0")
        values = np.geomspace(lo, hi, count)
    elif scale == "linear":
        values = np.linspace(lo, hi, count)
    else:
        raise ValueError(f"unknown grid scale {scale!r}")
    # pin the endpoints exactly; geomspace can drift in the last bit
    values[0], values[-1] = lo, hi
    return MuGrid(values, scale=scale, source=source)


@dataclass(frozen=True, eq=False)
class QuadFormCurve:
    """Values ``q_m(mu_j)`` of the Lanczos approximation on a grid."""

    grid: MuGrid
    values: np.ndarray
    m: int
    sample_id: object = 0
    x_norm_sq: float = float("nan")


def quadform_curve(eig: TridiagEigen, x_norm_sq: float, grid: MuGrid,
                   sample_id=0) -> QuadFormCurve:
    """Evaluate ``q_m`` at every grid point.

    Ritz values equal to a grid point contribute half their weight.
    """
    mu = grid.values
    cw = np.concatenate(([0.0], np.cumsum(eig.weights)))
    below = np.searchsorted(eig.thetas, mu, side="left")     # theta < mu
    not_above = np.searchsorted(eig.thetas, mu, side="right")  # theta <= mu
    frac = cw[below] + 0.5 * (cw[not_above] - cw[below])
    values = x_norm_sq * np.clip(frac, 0.0, 1.0)
    return QuadFormCurve(grid=grid, values=values, m=eig.m, sample_id=sample_id,
                         x_norm_sq=float(x_norm_sq))


def hutchinson_average(curves) -> QuadFormCurve:
    """Pointwise mean of per-sample curves taken at the same ``m``."""
    curves = list(curves)
    if not curves:
        raise ValueError("need at least one curve")
    first = curves[0]
    if len(curves) == 1:
        return first
    for c in curves[1:]:
        if not c.grid.same_as(first.grid):
            raise ValueError("curves live on different grids")
        if c.m != first.m:
            raise ValueError(f"curves taken at different m ({first.m} vs {c.m})")
    values = np.mean([c.values for c in curves], axis=0)
    x2 = float(np.mean([c.x_norm_sq for c in curves]))
    return QuadFormCurve(grid=first.grid, values=values, m=first.m,
                         sample_id=AGGREGATE, x_norm_sq=x2)


def gaussian_sample_count(eigcount_estimate: float, epsilon: float, delta: float) -> int:
    """Gaussian Hutchinson samples for ``|tr - tr_s| < epsilon`` w.p. ``1 - delta``.

    Evaluates ``ceil(4 / epsilon**2 * (nu + epsilon) * log(2 / delta))`` with
    ``nu`` the (estimated) trace of the projector.
    """
    if not 0 < epsilon < 1 or not 0 < delta < 1:
        raise ValueError("epsilon and delta must lie in (0, 1)")
    raw = 4.0 / epsilon**2 * (eigcount_estimate + epsilon) * math.log(2.0 / delta)
    # round off last-bit noise so exact integers are not pushed up by one
    return max(1, math.ceil(round(raw, 9)))
