"""Asymptotic variation, Mather invariants, and cocycle drift.

V_inf(f) = lim var(log Df^n)/n  (subadditive, hence the limit exists and is
the infimum of the sequence).  The Mather invariant of a fixed-point-free
interval map compares the flows generated at the two ends; it is trivial
exactly when the map embeds in a C^1 flow of the closed interval.  The drift
of the affine-derivative cocycle c(f) = D^2f/Df in L^1 recovers V_inf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gridfn import DEFAULT_CONFIG, GridFunction, ToleranceConfig
from .diffeo import (
    ActionTuple,
    CircleGrid,
    IntervalDiffeo,
    fixed_point_analysis,
    iterate,
)
from .szekeres import SzekeresField

__all__ = [
    "VarEstimate",
    "asymptotic_variation",
    "MatherInvariant",
    "mather_invariant",
    "mather_inequality_check",
    "coboundary_drift",
]


DEFAULT_SCHEDULE = (1, 2, 4, 8, 16, 32, 64, 128, 256)


@dataclass(frozen=True)
class VarEstimate:
    pairs: tuple            # (n, var(log Df^n)/n)
    limit: float            # monotone envelope extrapolation (min of var/n)
    uncertainty: float      # |last - second-to-last| along the schedule
    lower_bound: float      # |log Df(0)| + |log Df(1)| for interval maps


def _orbit_sample_points(f, n_max: int, base: int, circle: bool) -> np.ndarray:
    """Union of the forward iterates of a base grid: a dynamics-adapted
    sample set on which var(log Df^n) is measured."""
    x0 = np.linspace(0.0, 1.0, base + 1)
    pts = [x0]
    y = x0.copy()
    for _ in range(min(n_max, 64)):
        y = np.mod(f.lift(y), 1.0) if circle else f.value(y)
        pts.append(y)
    allpts = np.unique(np.concatenate(pts))
    return allpts


def asymptotic_variation(f, schedule=DEFAULT_SCHEDULE,
                         cfg: ToleranceConfig = DEFAULT_CONFIG) -> VarEstimate:
    """var(log Df^n)/n along the schedule, with the subadditivity-backed
    monotone-envelope extrapolation (no model fitting)."""
    schedule = tuple(sorted(set(int(n) for n in schedule)))
    if not schedule or schedule[0] < 1:
        raise ValueError("schedule must contain positive integers")
    circle = getattr(f, "kind", "interval") == "circle"
    n_max = schedule[-1]
    pts = _orbit_sample_points(f, n_max, 256, circle)
    pairs = []
    fast = getattr(f, "_iterate_fast", None)
    if fast is not None and not circle:
        # maps with closed-form powers (flow time maps): evaluate log Df^n
        # in one shot per schedule entry
        for n in schedule:
            ld = fast(n).log_deriv(pts)
            if not np.all(np.isfinite(ld)):
                raise OverflowError(f"derivative accumulation blew up at n={n}")
            pairs.append((n, float(np.abs(np.diff(ld)).sum()) / n))
    else:
        acc = np.zeros_like(pts)
        y = pts.copy()
        want = set(schedule)
        for step in range(1, n_max + 1):
            if circle:
                acc = acc + f.log_deriv(y)
                y = np.mod(f.lift(y), 1.0)
            else:
                acc = acc + f.log_deriv(y)
                y = f.value(y)
            if not np.all(np.isfinite(acc)):
                raise OverflowError(f"derivative accumulation blew up at n={step}")
            if step in want:
                var_n = float(np.abs(np.diff(acc)).sum())
                if circle:
                    var_n += float(abs(acc[0] - acc[-1]))
                pairs.append((step, var_n / step))
    vals = [v for _, v in pairs]
    envelope = np.minimum.accumulate(vals)
    limit = float(envelope[-1])
    uncertainty = abs(vals[-1] - vals[-2]) if len(vals) >= 2 else math.inf
    if circle:
        lower = 0.0
    else:
        lower = abs(float(f.log_deriv(np.array(0.0)))) + abs(float(f.log_deriv(np.array(1.0))))
    return VarEstimate(tuple(pairs), limit, float(uncertainty), float(lower))


# ---------------------------------------------------------------------------
# Mather invariant


def _reflected_contraction(f: IntervalDiffeo) -> IntervalDiffeo:
    """r o f^{-1} o r with r(x) = 1-x: the contraction seen from the other
    endpoint (used to generate the right-end flow).  Built structurally so
    that maps with closed-form reflections keep full relative precision in
    the tails."""
    return f.inverse_map().reflect()


@dataclass(frozen=True)
class MatherInvariant:
    circle_map: CircleGrid
    var_logDM: float
    m: int
    n: int
    seam_residual: float    # |M(1) - M(0) - 1| before seam enforcement
    inverted: bool          # True when f > id and f^{-1} was analyzed


def _check_no_interior_fixed_point(f: IntervalDiffeo):
    rep = fixed_point_analysis(ActionTuple((f,)))
    interior = [p for p in rep.points if 1e-9 < p.location < 1 - 1e-9]
    interior += [iv for iv in rep.global_fixed_intervals
                 if iv[1] > 1e-9 and iv[0] < 1 - 1e-9]
    if interior:
        raise ValueError(f"map has interior fixed structure: {interior}")


def mather_invariant(f: IntervalDiffeo, cfg: ToleranceConfig = DEFAULT_CONFIG,
                     m: int = 8, n: int = 8, samples: int = 1024) -> MatherInvariant:
    """The circle map M_f = T_{-m} o psi1^{-1} o f^{m+n} o psi0 o T_{-n}
    comparing the two end flows (anchors a = b = 1/2).

    var(log DM_f) is computed by sweeping one fundamental interval with the
    direct derivative formula

        DM_f(t) = X(p) Df^k(p) / Y(f^k p),   p = psi0(t - n),  k = m + n,

    which is parametrization-invariant (no time-coordinate error enters)."""
    inverted = False
    half = np.array(0.5)
    if float(f.value(half)) == 0.5:
        raise ValueError("f fixes the anchor 1/2; not fixed-point-free")
    if float(f.value(half)) > 0.5:
        f = f.inverse_map()
        inverted = True
    _check_no_interior_fixed_point(f)

    X = SzekeresField(f, cfg, anchor=0.5)
    g = _reflected_contraction(f)
    Xg = SzekeresField(g, cfg, anchor=0.5)
    k = m + n

    # sweep p over the fundamental interval [f(x0), x0], x0 = f^{-n}(1/2)
    x0 = float(iterate(f, -n).value(half))
    fx0 = float(f.value(np.array(x0)))
    ps = np.linspace(fx0, x0, samples + 1)
    acc = np.zeros_like(ps)
    y = ps.copy()
    for _ in range(k):
        acc = acc + f.log_deriv(y)
        y = f.value(y)
    q = y  # = f^k(p), deep near 0
    V = np.log(-X.X(ps)) + acc - np.log(-Xg.X(1.0 - q))
    var_logDM = float(np.abs(np.diff(V)).sum())

    # the circle map itself, via the time coordinates of both flows
    tgrid = np.linspace(0.0, 1.0, 513)
    p_t = X.tau_inv(tgrid)                       # psi0(t), in [f(1/2), 1/2]
    z = p_t.copy()
    for _ in range(m):
        z = f.value(z)
    M = -Xg.tau(1.0 - z) - m
    seam = float(abs((M[-1] - M[0]) - 1.0))
    disp = M - tgrid
    disp[-1] = disp[0]
    circle_map = CircleGrid(GridFunction(disp))
    return MatherInvariant(circle_map, var_logDM, m, n, seam, inverted)


def mather_inequality_check(f: IntervalDiffeo,
                            cfg: ToleranceConfig = DEFAULT_CONFIG) -> dict:
    """| var(log DM_f) - V_inf(f) |  <=  |log Df(0)| + |log Df(1)|."""
    mi = mather_invariant(f, cfg)
    ve = asymptotic_variation(f, cfg=cfg)
    bound = ve.lower_bound
    gap = abs(mi.var_logDM - ve.limit)
    slack = bound - gap
    return {
        "var_logDM": mi.var_logDM,
        "vinf": ve.limit,
        "vinf_uncertainty": ve.uncertainty,
        "bound": bound,
        "slack": slack,
        "holds": bool(slack >= -(ve.uncertainty + cfg.abs_tol + 1e-4)),
    }


# ---------------------------------------------------------------------------
# cocycle drift


def _l1_norm(samples: np.ndarray, x: np.ndarray) -> float:
    return float(np.trapezoid(np.abs(samples), x))


def _graded_grid(N: int, breakpoints=(0.0, 1.0)) -> np.ndarray:
    """[0,1] grid with geometric refinement into a layer around every
    breakpoint (common fixed points of the action), where iterated
    affine-derivative cocycles concentrate with ~1/dist densities down to
    the multiplier scale."""
    bp = sorted(set(float(b) for b in breakpoints) | {0.0, 1.0})
    cells = list(zip(bp[:-1], bp[1:]))
    m = max(N // (2 * len(cells)), 16)
    left = np.geomspace(1e-13, 0.5, m)
    unit = np.concatenate(([0.0], left, (1.0 - left[::-1])[1:], [1.0]))
    pieces = [np.array([0.0])]
    for a, b in cells:
        pieces.append(a + (b - a) * unit[1:])
    return np.unique(np.concatenate(pieces))


def coboundary_drift(t: ActionTuple, f_index: int = 0, n: int = 32,
                     cfg: ToleranceConfig = DEFAULT_CONFIG,
                     cocycle=None) -> dict:
    """Drift of the affine-derivative cocycle c(f) = D^2f/Df in L^1, and the
    coboundary defect of the box average

        psi_n = (1/n^d) sum_{g in B(n)} c(g),
        defect = || c(f) - (psi_n - U(f) psi_n) ||_{L1},

    with U(f)(phi) = (phi o f) Df.  The defect bounds the drift from above
    in the limit; for a single generator the box sum telescopes and the
    defect equals ||c(f^n)||/n exactly.

    `cocycle` optionally overrides the generator cocycle values: a sequence
    of GridFunction (one per generator); extension to words always uses the
    cocycle relation c(f g) = c(g) + U(g) c(f)."""
    gens = t.generators
    d = len(gens)
    if n**d > 10**6:
        raise ValueError("box budget n^d <= 1e6 exceeded")
    N = min(cfg.grid_N, 2048)
    bps = {0.0, 1.0}
    for g in gens:
        for a, b in getattr(g, "intervals", ()):
            bps.update((float(a), float(b)))
    x = _graded_grid(N, sorted(bps))

    def gen_c(i, y):
        if cocycle is not None:
            return cocycle[i](y)
        return gens[i].affine_deriv(y)

    # enumerate the box incrementally: state = (word value, word log-deriv,
    # word cocycle), all sampled at x
    words = [(x.copy(), np.zeros_like(x), np.zeros_like(x))]
    for i in range(d):
        new_words = []
        for (y, ld, c) in words:
            yy, ldd, cc = y, ld, c
            for _ in range(n):
                new_words.append((yy, ldd, cc))
                # left-multiply by f_i: c(f_i w) = c(w) + (c(f_i) o w) Dw
                cc = cc + gen_c(i, yy) * np.exp(ldd)
                ldd = ldd + gens[i].log_deriv(yy)
                yy = gens[i].value(yy)
        words = new_words

    psi = np.mean([c for (_, _, c) in words], axis=0)

    f = gens[f_index]
    cf = gen_c(f_index, x)
    fx = np.clip(f.value(x), 0.0, 1.0)
    u_psi = np.interp(fx, x, psi) * f.deriv(x)
    defect = _l1_norm(cf - (psi - u_psi), x)

    # direct drift estimate ||c(f^n)||/n via the same cocycle extension.
    # ||c(f^n)|| is subadditive, so a_n/n converges to the drift from above
    # and may still overshoot at finite n; the increment (a_{2n} - a_n)/n
    # removes the O(1) offset and is the estimate the defect is tested
    # against.
    # With the default cocycle c(f^m) = (log Df^m)', so ||c(f^m)||_L1 is the
    # total variation of the accumulated log-derivative -- computable from
    # node values alone, immune to the 2^m spike at repelling ends that no
    # fixed grid can resolve in x.  A cocycle override has no antiderivative,
    # so it falls back to direct quadrature.
    y = x.copy()
    ld = np.zeros_like(x)
    c = np.zeros_like(x)

    def _a_norm():
        if cocycle is None:
            return float(np.abs(np.diff(ld)).sum())
        return _l1_norm(c, x)

    # a_m/m converges to the drift from above (subadditivity); the orbit is
    # a single vectorized iteration, so burn in well past the box size and
    # refine with the last doubling increment.
    # direct quadrature of an override cocycle accumulates Df^m factors that
    # overflow past m ~ 1024, so that path stops at one doubling
    m_max = 2 * n if cocycle is not None else max(8 * n, 512)
    marks = []
    m = n
    while m <= m_max:
        marks.append(m)
        m *= 2
    a = {}
    for k in range(marks[-1]):
        if cocycle is not None:
            c = c + gen_c(f_index, y) * np.exp(ld)
        ld = ld + f.log_deriv(y)
        y = f.value(y)
        if k + 1 in marks:
            a[k + 1] = _a_norm()
    drift = a[n] / n
    drift_refined = (a[marks[-1]] - a[marks[-2]]) / (marks[-1] - marks[-2]) \
        if len(marks) > 1 else drift

    tol = 10.0 * max(cfg.abs_tol, 1.0 / N)
    return {
        "n": n,
        "defect": defect,
        "drift": drift,
        "drift_refined": drift_refined,
        "defect_minus_drift": defect - drift,
        "lower_bound_holds": bool(defect >= drift_refined - tol),
    }
