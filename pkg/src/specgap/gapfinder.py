"""Gap detection pipeline.

A single Gaussian vector (or a few) probes ``mu -> x^T P_mu x``, which is a
staircase rising by a chi-squared distributed amount at every eigenvalue.
Lanczos quadrature approximates it on a grid of ``mu`` values, error radii
give monotone envelopes, and every grid interval over which the envelopes
rise by at most ``epsilon`` is reported as a gap.  An eigenvalue inside such
an interval would need a jump below ``epsilon``, which happens with
probability at most ``delta``.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .bounds import (
    BoundCurves,
    ClusteredRitzValuesError,
    aposteriori_bounds,
    combine_over_M,
    consec_diff_estimate,
    epsilon_for_samples,
    gm_coefficients,
    member_bounds,
    required_iterations,
)
from .estimator import MuGrid, make_grid, quadform_curve
from .lanczos import lanczos_run
from .sparse import SparseSymMatrix, SpectralInterval, spectral_interval
from .trideig import tridiag_eigen

__all__ = [
    "GapFinderConfig",
    "Gap",
    "GapReport",
    "find_gaps",
    "estimate_eigcount_below",
    "relative_gap_width",
    "run_pipeline",
    "write_curves_csv",
]

METHODS = ("consec_diff", "posteriori")
VARIANTS = ("safe", "robust")
METHOD_ALIASES = {"diff": "consec_diff", "consec_diff": "consec_diff", "posteriori": "posteriori"}


@dataclass(frozen=True)
class GapFinderConfig:
    """Parameters of :func:`run_pipeline`.

    Attributes
    ----------
    delta : float
        Failure probability per reported gap.
    theta : float or None
        Target relative gap width; sets the number of Lanczos steps unless
        ``m_override`` is given.
    grid_count, grid_range, grid_scale
        The ``mu`` grid; the range defaults to the spectral interval and
        ``"auto"`` scale means logarithmic for a positive range.
    m_override : int or None
        Fixed number of Lanczos steps.
    samples : int
        Number of Gaussian probe vectors.
    method : {"consec_diff", "posteriori"}
    variant : {"safe", "robust"}
    c : float
        Safety factor of the consecutive-difference estimate.
    d : int
        Number of consecutive Lanczos steps combined.
    L : int
        Points used to maximize ``|g_m|`` for the a posteriori bound.
    halve_theta : bool
        Size ``m`` for ``theta / 2`` so a gap holding one Ritz value is
        still resolved.
    seed : int or None
    interval : (float, float) or None
        Known spectral interval; estimated from Ritz values when omitted.
    """

    delta: float = 0.01
    theta: float | None = None
    grid_count: int = 10000
    grid_range: tuple | None = None
    grid_scale: str = "auto"
    m_override: int | None = None
    samples: int = 1
    method: str = "consec_diff"
    variant: str = "safe"
    c: float = 2.0
    d: int = 3
    L: int = 1000
    halve_theta: bool = True
    seed: int | None = None
    interval: tuple | None = None
    probe_iters: int = 100
    margin: float = 0.01
    reorth: str = "auto"

    def __post_init__(self):
        object.__setattr__(self, "method", METHOD_ALIASES.get(self.method, self.method))
        if self.grid_range is not None:
            object.__setattr__(self, "grid_range", tuple(float(v) for v in self.grid_range))
        if self.interval is not None:
            object.__setattr__(self, "interval", tuple(float(v) for v in self.interval))
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.theta is not None and not 0 < self.theta < 1:
            raise ValueError(f"theta must lie in (0, 1), got {self.theta}")
        if self.theta is None and self.m_override is None:
            raise ValueError("give either theta or m_override")
        if self.m_override is not None and self.m_override < 2:
            raise ValueError("m_override must be >= 2")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.c < 1:
            raise ValueError("safety factor c must be >= 1")
        if self.L < 2:
            raise ValueError("L must be >= 2")
        if self.grid_count < 2:
            raise ValueError("grid_count must be >= 2")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.grid_scale not in ("auto", "log", "linear"):
            raise ValueError(f"unknown grid scale {self.grid_scale!r}")
        if self.grid_range is not None and not self.grid_range[0] < self.grid_range[1]:
            raise ValueError(f"empty mu range {self.grid_range}")

    def to_dict(self):
        d = asdict(self)
        for key in ("grid_range", "interval"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass(frozen=True)
class Gap:
    """Grid interval ``[a, b]`` over which the envelopes stay within ``epsilon``.

    Attributes
    ----------
    a, b : float
        Grid points bounding the gap.
    eigcount_below : int
        Rounded estimate of the number of eigenvalues below ``a``.
    certified : bool
        ``upper(b) - lower(a) <= epsilon``.
    constancy_ok : bool
        ``lower(b) <= upper(a)``; otherwise the envelopes rule out a
        constant ``x^T P_mu x`` on the interval.
    relative_width : float or None
        Relative width against the working spectral interval.
    exterior : bool
        The gap touches the end of the grid, so it may extend beyond it
        (typically above the largest or below the smallest eigenvalue).
    rise : float
        ``upper(b) - lower(a)``.
    """

    a: float
    b: float
    eigcount_below: int
    certified: bool
    constancy_ok: bool
    relative_width: float | None = None
    exterior: bool = False
    rise: float = 0.0
    ia: int = -1
    ib: int = -1

    def to_dict(self):
        return {
            "a": self.a, "b": self.b, "eigcount_below": self.eigcount_below,
            "certified": self.certified, "constancy_ok": self.constancy_ok,
            "relative_width": self.relative_width, "exterior": self.exterior,
            "rise": self.rise,
        }

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})

    def overlaps(self, lo: float, hi: float) -> bool:
        return self.a < hi and lo < self.b


def relative_gap_width(lambda_lo: float, lambda_hi: float, gap_lo: float, gap_hi: float) -> float:
    """Half-width of the gap over the distance from its center to the farthest spectral end."""
    if not (lambda_lo < lambda_hi and lambda_lo <= gap_lo <= gap_hi <= lambda_hi):
        raise ValueError(
            f"need lambda_lo <= gap_lo <= gap_hi <= lambda_hi, got "
            f"{lambda_lo}, {gap_lo}, {gap_hi}, {lambda_hi}")
    mu = 0.5 * (gap_lo + gap_hi)
    a = min(mu - gap_lo, gap_hi - mu)
    b = max(mu - lambda_lo, lambda_hi - mu)
    return a / b


def estimate_eigcount_below(gap: Gap, curves: BoundCurves) -> int:
    """Round the central curve at the gap's left endpoint."""
    i = gap.ia if gap.ia >= 0 else int(np.searchsorted(curves.grid.values, gap.a))
    return int(np.rint(curves.q[i]))


def find_gaps(curves: BoundCurves, epsilon: float,
              interval: SpectralInterval | None = None) -> list[Gap]:
    """Grid intervals ``[mu_i, mu_j]`` with ``upper(mu_j) - lower(mu_i) <= epsilon``.

    Because both envelopes are nondecreasing, the farthest admissible ``j``
    for each ``i`` comes from a sorted search, and the maximal windows are
    those where it increases.  Maximal windows that share grid points are
    collapsed into the widest one (in ``mu``), so every reported gap meets
    the ``epsilon`` condition on its own.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    U, Lo, mu = curves.upper, curves.lower, curves.grid.values
    N = mu.shape[0]
    if np.any(np.diff(U) < 0) or np.any(np.diff(Lo) < 0):
        raise ValueError("envelopes must be refined (nondecreasing) before searching for gaps")
    reach = np.searchsorted(U, Lo + epsilon, side="right") - 1
    start = np.arange(N)
    prev = np.concatenate(([-1], reach[:-1]))
    maximal = np.nonzero((reach > start) & (reach > prev))[0]

    clusters: list[list[int]] = []
    for i in maximal:
        if clusters and i <= reach[clusters[-1][-1]]:
            clusters[-1].append(i)
        else:
            clusters.append([i])

    gaps = []
    for members in clusters:
        widths = [mu[reach[i]] - mu[i] for i in members]
        i = members[int(np.argmax(widths))]
        j = int(reach[i])
        rise = float(U[j] - Lo[i])
        rel = None
        if interval is not None:
            try:
                rel = relative_gap_width(interval.lo, interval.hi, float(mu[i]), float(mu[j]))
            except ValueError:
                rel = None
        gaps.append(Gap(
            a=float(mu[i]), b=float(mu[j]),
            eigcount_below=int(np.rint(curves.q[i])),
            certified=bool(rise <= epsilon),
            constancy_ok=bool(Lo[j] <= U[i]),
            relative_width=rel,
            exterior=bool(i == 0 or j == N - 1),
            rise=rise, ia=int(i), ib=j,
        ))
    return gaps


@dataclass
class GapReport:
    """Result of :func:`run_pipeline`.

    ``timings`` is kept out of the JSON form so that reruns with the same
    seed serialize identically.
    """

    gaps: list
    config: GapFinderConfig
    epsilon: float
    m: int
    spectral_interval: SpectralInterval
    curves: BoundCurves | None = None
    n: int = 0
    m_theta: int | None = None
    m_half_theta: int | None = None
    m_set: tuple = ()
    reorth: str = "none"
    x_norm_sq: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    @property
    def certified_gaps(self):
        return [g for g in self.gaps if g.certified]

    @property
    def interior_gaps(self):
        return [g for g in self.gaps if g.certified and not g.exterior]

    def to_dict(self, curves_ref: str | None = None):
        return {
            "config": self.config.to_dict(),
            "epsilon": self.epsilon,
            "m": self.m,
            "m_theta": self.m_theta,
            "m_half_theta": self.m_half_theta,
            "m_set": list(self.m_set),
            "n": self.n,
            "reorth": self.reorth,
            "spectral_interval": self.spectral_interval.to_dict(),
            "x_norm_sq": list(self.x_norm_sq),
            "notes": list(self.notes),
            "gaps": [g.to_dict() for g in self.gaps],
            "curves_ref": curves_ref,
        }

    def to_json(self, curves_ref: str | None = None) -> str:
        return json.dumps(self.to_dict(curves_ref), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d):
        si = d["spectral_interval"]
        return cls(
            gaps=[Gap.from_dict(g) for g in d["gaps"]],
            config=GapFinderConfig.from_dict(d["config"]),
            epsilon=d["epsilon"],
            m=d["m"],
            spectral_interval=SpectralInterval(si["lo"], si["hi"], si["certified"]),
            n=d.get("n", 0),
            m_theta=d.get("m_theta"),
            m_half_theta=d.get("m_half_theta"),
            m_set=tuple(d.get("m_set", ())),
            reorth=d.get("reorth", "none"),
            x_norm_sq=list(d.get("x_norm_sq", [])),
            notes=list(d.get("notes", [])),
        )

    @classmethod
    def from_json(cls, text: str):
        return cls.from_dict(json.loads(text))


def write_curves_csv(curves: BoundCurves, path) -> None:
    """Write columns ``mu, q, upper, lower`` at full precision."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mu", "q", "upper", "lower"])
        for row in zip(curves.grid.values, curves.q, curves.upper, curves.lower):
            w.writerow([repr(float(v)) for v in row])


# -- pipeline ---------------------------------------------------------------


def _working_interval(A, config, seed_seq) -> SpectralInterval:
    if config.interval is not None:
        return SpectralInterval(config.interval[0], config.interval[1], certified=True)
    return spectral_interval(A, probe_iters=config.probe_iters, margin=config.margin,
                             seed=seed_seq)


def _build_grid(config, interval) -> MuGrid:
    if config.grid_range is None:
        return make_grid(interval.lo, interval.hi, config.grid_count, config.grid_scale,
                         source="interval")
    lo, hi = config.grid_range
    if lo < interval.lo or hi > interval.hi:
        raise ValueError(
            f"mu range [{lo}, {hi}] leaves the spectral interval [{interval.lo}, {interval.hi}]")
    return make_grid(lo, hi, config.grid_count, config.grid_scale, source="user")


def run_pipeline(A: SparseSymMatrix, config: GapFinderConfig, vectors=None) -> GapReport:
    """Detect spectral gaps of ``A``.

    Parameters
    ----------
    A : SparseSymMatrix
    config : GapFinderConfig
    vectors : array_like, shape (s, n), optional
        Probe vectors to use instead of seeded Gaussian draws.
    """
    t0 = time.perf_counter()
    timings = {}
    seeds = np.random.SeedSequence(config.seed).spawn(2)
    notes = []

    interval = _working_interval(A, config, seeds[0])
    timings["interval"] = time.perf_counter() - t0
    epsilon = epsilon_for_samples(config.delta, config.samples)

    if interval.degenerate:
        notes.append("degenerate spectrum: the spectral interval has no interior, no grid to search")
        m = config.m_override or 0
        return GapReport(gaps=[], config=config, epsilon=epsilon, m=m,
                         spectral_interval=interval, n=A.n, notes=notes, timings=timings)

    grid = _build_grid(config, interval)

    if vectors is None:
        rng = np.random.default_rng(seeds[1])
        vectors = rng.standard_normal((config.samples, A.n))
    else:
        vectors = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
        if vectors.shape[1] != A.n:
            raise ValueError("probe vectors do not match the matrix dimension")
    x_norm_sq = [float(v @ v) for v in vectors]
    x2_mean = float(np.mean(x_norm_sq))

    m_theta = m_half = None
    if config.theta is not None:
        m_theta = required_iterations(config.theta, epsilon, x2_mean)
        m_half = required_iterations(config.theta, epsilon, x2_mean, halve_theta=True)
    if config.m_override is not None:
        m = int(config.m_override)
    else:
        m = m_half if config.halve_theta else m_theta
    if m > A.n:
        notes.append(f"m = {m} exceeds n = {A.n}; clamped")
        m = A.n
    d = min(config.d, m)
    m_set = list(range(m - d + 1, m + 1))

    members_per_sample = []
    reorth_used = "none"
    t_lanczos = t_bounds = 0.0
    for sid, x in enumerate(vectors):
        t1 = time.perf_counter()
        dec = lanczos_run(A, x, m + 1, reorth=config.reorth)
        reorth_used = dec.reorth
        t2 = time.perf_counter()
        steps = dec.m  # < m + 1 only after a breakdown, in which case T is exact
        if dec.breakdown:
            notes.append(f"sample {sid}: invariant subspace after {steps} steps, quadrature is exact")
        curves = {}

        def curve_at(k):
            k = min(k, steps)
            if k not in curves:
                eig = tridiag_eigen(dec.alphas[:k], dec.betas[: k - 1])
                curves[k] = (eig, quadform_curve(eig, dec.x_norm_sq, grid, sample_id=sid))
            return curves[k]

        members = {}
        for mp in m_set:
            if dec.breakdown:
                # the exact curve is known, so every member collapses onto it
                members[mp] = (curve_at(steps)[1].values, np.zeros(len(grid)), "exact")
                continue
            eig, cur = curve_at(mp)
            if config.method == "posteriori":
                try:
                    coeffs = gm_coefficients(eig, float(dec.betas[mp - 1]))
                    r = aposteriori_bounds(coeffs, grid.values, interval, config.L, dec.x_norm_sq)
                    members[mp] = (cur.values, r, "posteriori")
                    continue
                except ClusteredRitzValuesError as exc:
                    notes.append(f"sample {sid}, m = {mp}: {exc}; using consecutive differences")
            _, nxt = curve_at(mp + 1)
            members[mp] = (cur.values, consec_diff_estimate(cur, nxt, config.c), "consec_diff")
        members_per_sample.append(members)
        t_lanczos += t2 - t1
        t_bounds += time.perf_counter() - t2

    combined = []
    for mp in m_set:
        qs = [ms[mp][0] for ms in members_per_sample]
        rs = [ms[mp][1] for ms in members_per_sample]
        used = {ms[mp][2] for ms in members_per_sample}
        method = used.pop() if len(used) == 1 else "mixed"
        q = qs[0] if len(qs) == 1 else np.mean(qs, axis=0)
        r = rs[0] if len(rs) == 1 else np.mean(rs, axis=0)
        combined.append(member_bounds(mp, q, r, method=method))
    curves = combine_over_M(grid, combined, variant=config.variant, method=config.method)
    gaps = find_gaps(curves, epsilon, interval)
    if curves.crossing:
        notes.append("lower envelope exceeds upper envelope somewhere; error estimates are not bounds there")
    timings.update(lanczos=t_lanczos, bounds=t_bounds, total=time.perf_counter() - t0)
    return GapReport(
        gaps=gaps, config=config, epsilon=epsilon, m=m, spectral_interval=interval,
        curves=curves, n=A.n, m_theta=m_theta, m_half_theta=m_half, m_set=tuple(m_set),
        reorth=reorth_used, x_norm_sq=x_norm_sq, notes=notes, timings=timings,
    )
