"""Backward integration of the coupled quadratic terminal-value system.

The value-curvature equation (alpha1) and the decoupling equation (beta1)
form a coupled quadratic pair that is integrated first; the slope pair
(alpha2, beta2) is linear once (alpha1, beta1) are known; the offset alpha3
is a quadrature whose terminal value depends on the initial decoupling
values, so it is computed last.

All integrators are classical fourth-order Runge-Kutta with a fixed step,
run backward from the terminal condition.  Quadratic terminal-value problems
only admit local solutions in general; a finite-time escape is detected by a
magnitude threshold, the solution is truncated, and the surviving backward
span eta is reported.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BlowUpBeforeTerminal, MissingPrerequisite, NonFiniteValue
from .model import ProblemSpec

__all__ = [
    "RiccatiSolution",
    "MatrixKSolution",
    "solve_alpha1_beta1",
    "solve_alpha2_beta2",
    "solve_alpha3",
    "solve",
    "solve_matrix_K",
    "partial_from_matrix",
    "existence_interval",
    "export_riccati_csv",
    "DEFAULT_BLOWUP_THRESHOLD",
]

DEFAULT_BLOWUP_THRESHOLD = 1e8


@dataclass
class RiccatiSolution:
    """Backward solution sampled on a uniform grid t_0 = 0 .. t_N = T.

    Truncated entries (before an escape time) are NaN.  ``eta`` is the
    largest backward span such that the solution exists on [T - eta, T],
    measured on the solver grid.
    """

    grid: np.ndarray
    alpha1: Optional[np.ndarray] = None
    alpha2: Optional[np.ndarray] = None
    alpha3: Optional[np.ndarray] = None
    beta1: Optional[np.ndarray] = None
    beta2: Optional[np.ndarray] = None
    exists_on_full_interval: bool = False
    eta: float = 0.0
    step_h: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_steps(self) -> int:
        return self.grid.size - 1

    def is_complete(self) -> bool:
        return all(
            arr is not None for arr in (self.alpha1, self.alpha2, self.alpha3, self.beta1, self.beta2)
        )


@dataclass
class MatrixKSolution:
    """Solution of the equivalent 2x2 diagonal matrix flow."""

    grid: np.ndarray
    K: np.ndarray
    exists_on_full_interval: bool
    eta: float
    step_h: float
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# coefficient tables
#
# Every integrator below evaluates instance coefficients only at grid points,
# interval midpoints and (for the nested half-steps) quarter points.  The
# tables hold all primitive coefficients and the state-independent derived
# coefficients on that refined lattice, so the per-step work is pure float
# arithmetic.


class _Tables:
    MULT = 4  # lattice points per solver step

    def __init__(self, spec: ProblemSpec, n_steps: int):
        self.n_steps = n_steps
        self.h = spec.T / n_steps
        times = np.linspace(0.0, spec.T, self.MULT * n_steps + 1)
        self.times = times
        self.theta = spec.theta
        p = {}
        for name in ("A1", "B1", "C1", "D1", "b", "sigma", "A2", "B2", "C2", "D2", "g",
                     "R11", "R12", "R13", "R14", "R22", "R23", "R24", "R33", "R34", "R44"):
            p[name] = np.asarray(getattr(spec, name)(times), dtype=float)
        self.p = p

        inv44 = 1.0 / p["R44"]
        th = spec.theta
        sig = p["sigma"]
        d1 = p["D1"]
        d2 = p["D2"]
        self.inv44 = inv44
        # state-independent derived coefficients
        self.tc1 = p["A1"] - inv44 * d1 * p["R14"]
        self.tc2 = p["R12"] - inv44 * p["R14"] * p["R24"]
        self.tc3 = p["B1"] - inv44 * d1 * p["R24"]
        self.tc4 = th * sig * sig - inv44 * d1 * d1
        self.tc5 = p["R22"] - inv44 * p["R24"] * p["R24"]
        self.tc6 = p["R11"] - inv44 * p["R14"] * p["R14"]
        self.tc11 = p["A1"] + p["B2"] - inv44 * (d1 * p["R14"] + d2 * p["R24"])
        self.tc12 = inv44 * d1 * d2
        self.tc13 = inv44 * d1 * d1
        self.tc14 = p["B1"] - inv44 * d1 * p["R24"]
        self.tc15 = p["A2"] - inv44 * d2 * p["R14"]


def _pair_rhs(tab: _Tables, i, a, b):
    """Time derivative of (alpha1, beta1) at lattice index i (vectorizable)."""
    da = -(
        2.0 * tab.tc1[i] * a
        + 2.0 * tab.tc2[i] * b
        + 2.0 * tab.tc3[i] * a * b
        + tab.tc4[i] * a * a
        + tab.tc5[i] * b * b
        + tab.tc6[i]
    )
    db = -(
        tab.tc11[i] * b
        - tab.tc12[i] * a
        - tab.tc13[i] * a * b
        + tab.tc14[i] * b * b
        + tab.tc15[i]
    )
    return da, db


def _slope_coeffs(tab: _Tables, i, a1, b1):
    """State-dependent coefficients of the linear (alpha2, beta2) pair."""
    p = tab.p
    inv44 = tab.inv44[i]
    sig = p["sigma"][i]
    d1 = p["D1"][i]
    d2 = p["D2"][i]
    gain_x = d1 * a1 + p["R14"][i] + p["R24"][i] * b1
    lever = d1 * b1 + d2
    e7 = p["A1"][i] + p["B1"][i] * b1 + tab.theta * sig * sig * a1 - inv44 * d1 * gain_x
    e8 = p["B1"][i] * a1 + p["R12"][i] + p["R22"][i] * b1 - inv44 * p["R24"][i] * gain_x
    e9 = (
        p["C1"][i] * sig * a1 * b1
        + a1 * p["b"][i]
        + p["R13"][i] * sig * b1
        + p["R23"][i] * sig * b1 * b1
        - inv44 * p["R34"][i] * sig * gain_x * b1
    )
    e16 = p["B1"][i] * b1 + p["B2"][i] - inv44 * p["R24"][i] * lever
    e17 = inv44 * d1 * lever
    e18 = (
        (p["C1"][i] * b1 + p["C2"][i]) * sig * b1
        + p["b"][i] * b1
        + p["g"][i]
        - inv44 * p["R34"][i] * sig * b1 * lever
    )
    return e7, e8, e9, e16, e17, e18


def _offset_integrand(tab: _Tables, i, a1, a2, b1, b2):
    """Drift of the value offset alpha3 (the pure-quadrature term)."""
    p = tab.p
    sig = p["sigma"][i]
    gain_0 = a2 * p["D1"][i] + p["R24"][i] * b2 + p["R34"][i] * b1 * sig
    return (
        0.5 * a1 * sig * sig
        + a2 * (p["B1"][i] * b2 + p["C1"][i] * b1 * sig + p["b"][i])
        + 0.5 * p["R22"][i] * b2 * b2
        + p["R23"][i] * sig * b1 * b2
        + 0.5 * p["R33"][i] * sig * sig * b1 * b1
        + 0.5 * tab.theta * sig * sig * a2 * a2
        - 0.5 * tab.inv44[i] * gain_0 * gain_0
    )


# ---------------------------------------------------------------------------
# component-form solvers


def solve_alpha1_beta1(
    spec: ProblemSpec,
    n_steps: int,
    threshold: float = DEFAULT_BLOWUP_THRESHOLD,
) -> RiccatiSolution:
    """Integrate the coupled quadratic pair backward from (S1, G).

    On escape (non-finite value or magnitude above ``threshold``) the arrays
    are truncated with NaN below the escape time and ``eta`` reports the
    surviving span.  Escape within the first step raises
    :class:`BlowUpBeforeTerminal`.
    """
    if n_steps < 2:
        raise ValueError("n_steps must be at least 2")
    tab = _Tables(spec, n_steps)
    n = n_steps
    h = tab.h
    m = _Tables.MULT
    a = np.full(n + 1, np.nan)
    bb = np.full(n + 1, np.nan)
    a[n] = spec.S1
    bb[n] = spec.G
    ya, yb = float(spec.S1), float(spec.G)
    cut = -1
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n - 1, -1, -1):
            i1 = m * (k + 1)
            im = m * k + m // 2
            i0 = m * k
            try:
                k1a, k1b = _pair_rhs(tab, i1, ya, yb)
                k2a, k2b = _pair_rhs(tab, im, ya - 0.5 * h * k1a, yb - 0.5 * h * k1b)
                k3a, k3b = _pair_rhs(tab, im, ya - 0.5 * h * k2a, yb - 0.5 * h * k2b)
                k4a, k4b = _pair_rhs(tab, i0, ya - h * k3a, yb - h * k3b)
                ya = ya - (h / 6.0) * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
                yb = yb - (h / 6.0) * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
            except OverflowError:
                ya = math.inf
                yb = math.inf
            if not (math.isfinite(ya) and math.isfinite(yb)) or max(abs(ya), abs(yb)) > threshold:
                cut = k + 1
                break
            a[k] = ya
            bb[k] = yb
    exists = cut < 0
    eta = spec.T if exists else spec.T - tab.times[m * cut]
    if not exists and cut == n:
        raise BlowUpBeforeTerminal(
            f"backward pair escaped within one step of the terminal time (h={h:g})", eta=0.0
        )
    return RiccatiSolution(
        grid=np.linspace(0.0, spec.T, n + 1),
        alpha1=a,
        beta1=bb,
        exists_on_full_interval=exists,
        eta=eta,
        step_h=h,
        diagnostics={"method": "rk4", "n_steps": n, "threshold": threshold,
                     "truncated_at_index": cut if not exists else None},
    )


def _require_pair(partial: RiccatiSolution) -> None:
    if partial.alpha1 is None or partial.beta1 is None:
        raise MissingPrerequisite("solution lacks (alpha1, beta1)")
    if not partial.exists_on_full_interval:
        raise MissingPrerequisite("(alpha1, beta1) truncated before t=0; cannot continue")


def _pair_midpoints(tab: _Tables, a1: np.ndarray, b1: np.ndarray):
    """(alpha1, beta1) at interval midpoints via one vectorized forward half-step.

    The grid values are fourth-order accurate, and a single RK4 half-step has
    fifth-order local error, so the reconstructed midpoints keep the scheme's
    global order.
    """
    n = tab.n_steps
    m = _Tables.MULT
    hh = 0.5 * tab.h
    i0 = m * np.arange(n)
    iq = i0 + m // 4
    ih = i0 + m // 2
    a = a1[:-1].copy()
    b = b1[:-1].copy()
    k1a, k1b = _pair_rhs(tab, i0, a, b)
    k2a, k2b = _pair_rhs(tab, iq, a + 0.5 * hh * k1a, b + 0.5 * hh * k1b)
    k3a, k3b = _pair_rhs(tab, iq, a + 0.5 * hh * k2a, b + 0.5 * hh * k2b)
    k4a, k4b = _pair_rhs(tab, ih, a + hh * k3a, b + hh * k3b)
    am = a + (hh / 6.0) * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
    bm = b + (hh / 6.0) * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
    return am, bm


def solve_alpha2_beta2(spec: ProblemSpec, partial: RiccatiSolution) -> RiccatiSolution:
    """Integrate the linear slope pair backward from (0, 0).

    The pair's coefficients are evaluated from the supplied (alpha1, beta1);
    midpoint values are reconstructed by local half-steps of the quadratic
    pair so the fourth-order accuracy carries over.
    """
    _require_pair(partial)
    n = partial.n_steps
    tab = _Tables(spec, n)
    m = _Tables.MULT
    h = tab.h
    a1g = np.asarray(partial.alpha1, dtype=float)
    b1g = np.asarray(partial.beta1, dtype=float)
    a1m, b1m = _pair_midpoints(tab, a1g, b1g)

    # stage lattice: even entries are grid points, odd entries midpoints
    idx_grid = m * np.arange(n + 1)
    idx_mid = m * np.arange(n) + m // 2
    sa1 = np.empty(2 * n + 1)
    sb1 = np.empty(2 * n + 1)
    sa1[0::2], sa1[1::2] = a1g, a1m
    sb1[0::2], sb1[1::2] = b1g, b1m
    sidx = np.empty(2 * n + 1, dtype=int)
    sidx[0::2], sidx[1::2] = idx_grid, idx_mid
    e7, e8, e9, e16, e17, e18 = _slope_coeffs(tab, sidx, sa1, sb1)

    def rhs(j, x, y):
        dx = -(e7[j] * x + e8[j] * y + e9[j])
        dy = -(e16[j] * y - e17[j] * x + e18[j])
        return dx, dy

    a2 = np.empty(n + 1)
    b2 = np.empty(n + 1)
    a2[n] = 0.0
    b2[n] = 0.0
    x, y = 0.0, 0.0
    for k in range(n - 1, -1, -1):
        j1 = 2 * (k + 1)
        jm = 2 * k + 1
        j0 = 2 * k
        k1x, k1y = rhs(j1, x, y)
        k2x, k2y = rhs(jm, x - 0.5 * h * k1x, y - 0.5 * h * k1y)
        k3x, k3y = rhs(jm, x - 0.5 * h * k2x, y - 0.5 * h * k2y)
        k4x, k4y = rhs(j0, x - h * k3x, y - h * k3y)
        x = x - (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        y = y - (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        if not (math.isfinite(x) and math.isfinite(y)):
            raise NonFiniteValue(f"slope pair became non-finite at t={tab.times[m * k]:g}")
        a2[k] = x
        b2[k] = y
    return RiccatiSolution(
        grid=partial.grid.copy(),
        alpha1=a1g.copy(),
        beta1=b1g.copy(),
        alpha2=a2,
        beta2=b2,
        exists_on_full_interval=True,
        eta=spec.T,
        step_h=h,
        diagnostics=dict(partial.diagnostics),
    )


def _joint_midpoints(tab: _Tables, a1g, b1g, a2g, b2g):
    """Midpoints of all four backward quantities via one vectorized half-step."""
    n = tab.n_steps
    m = _Tables.MULT
    hh = 0.5 * tab.h
    i0 = m * np.arange(n)
    iq = i0 + m // 4
    ih = i0 + m // 2

    def rhs(i, a1, b1, a2, b2):
        da1, db1 = _pair_rhs(tab, i, a1, b1)
        e7, e8, e9, e16, e17, e18 = _slope_coeffs(tab, i, a1, b1)
        da2 = -(e7 * a2 + e8 * b2 + e9)
        db2 = -(e16 * b2 - e17 * a2 + e18)
        return da1, db1, da2, db2

    y = (a1g[:-1].copy(), b1g[:-1].copy(), a2g[:-1].copy(), b2g[:-1].copy())
    k1 = rhs(i0, *y)
    k2 = rhs(iq, *(yc + 0.5 * hh * kc for yc, kc in zip(y, k1)))
    k3 = rhs(iq, *(yc + 0.5 * hh * kc for yc, kc in zip(y, k2)))
    k4 = rhs(ih, *(yc + hh * kc for yc, kc in zip(y, k3)))
    return tuple(
        yc + (hh / 6.0) * (a + 2.0 * b + 2.0 * c + d)
        for yc, a, b, c, d in zip(y, k1, k2, k3, k4)
    )


def solve_alpha3(spec: ProblemSpec, partial: RiccatiSolution) -> RiccatiSolution:
    """Accumulate the value offset backward by Simpson quadrature on the grid.

    The terminal value couples to the initial decoupling values, which is why
    this runs after the other four quantities are known.
    """
    _require_pair(partial)
    if partial.alpha2 is None or partial.beta2 is None:
        raise MissingPrerequisite("solution lacks (alpha2, beta2)")
    n = partial.n_steps
    tab = _Tables(spec, n)
    m = _Tables.MULT
    h = tab.h
    a1g = np.asarray(partial.alpha1, dtype=float)
    b1g = np.asarray(partial.beta1, dtype=float)
    a2g = np.asarray(partial.alpha2, dtype=float)
    b2g = np.asarray(partial.beta2, dtype=float)
    a1m, b1m, a2m, b2m = _joint_midpoints(tab, a1g, b1g, a2g, b2g)

    idx_grid = m * np.arange(n + 1)
    idx_mid = m * np.arange(n) + m // 2
    f_grid = _offset_integrand(tab, idx_grid, a1g, a2g, b1g, b2g)
    f_mid = _offset_integrand(tab, idx_mid, a1m, a2m, b1m, b2m)

    terminal = 0.5 * spec.S2 * (b1g[0] * spec.x0 + b2g[0]) ** 2
    a3 = np.empty(n + 1)
    a3[n] = terminal
    acc = terminal
    for k in range(n - 1, -1, -1):
        acc += (h / 6.0) * (f_grid[k] + 4.0 * f_mid[k] + f_grid[k + 1])
        a3[k] = acc
    if not np.all(np.isfinite(a3)):
        raise NonFiniteValue("value offset accumulated a non-finite value")
    out = RiccatiSolution(
        grid=partial.grid.copy(),
        alpha1=a1g.copy(),
        beta1=b1g.copy(),
        alpha2=a2g.copy(),
        beta2=b2g.copy(),
        alpha3=a3,
        exists_on_full_interval=True,
        eta=spec.T,
        step_h=h,
        diagnostics=dict(partial.diagnostics),
    )
    return out


def solve(
    spec: ProblemSpec,
    n_steps: int = 2048,
    threshold: float = DEFAULT_BLOWUP_THRESHOLD,
) -> RiccatiSolution:
    """Full pipeline: quadratic pair, then slope pair, then offset.

    Returns a truncated partial solution when the quadratic pair escapes
    before t = 0 (the remaining stages need the full interval).
    """
    part = solve_alpha1_beta1(spec, n_steps, threshold=threshold)
    if not part.exists_on_full_interval:
        return part
    part = solve_alpha2_beta2(spec, part)
    return solve_alpha3(spec, part)


# ---------------------------------------------------------------------------
# matrix-form solver
#
# An independent route to (alpha1, beta1): the pair is embedded as the
# diagonal of a 2x2 matrix flow built from diagonal blocks and swap
# conjugations.  All products below are honest 2x2 matrix products, so this
# shares no algebra with the component solver beyond the coefficient tables.

_J2 = ((0.0, 1.0), (1.0, 0.0))


def _mm(A, B):
    return (
        (A[0][0] * B[0][0] + A[0][1] * B[1][0], A[0][0] * B[0][1] + A[0][1] * B[1][1]),
        (A[1][0] * B[0][0] + A[1][1] * B[1][0], A[1][0] * B[0][1] + A[1][1] * B[1][1]),
    )


def _madd(*ms):
    return (
        (sum(m[0][0] for m in ms), sum(m[0][1] for m in ms)),
        (sum(m[1][0] for m in ms), sum(m[1][1] for m in ms)),
    )


def matrix_flow_rhs(dblocks, K):
    """The 2x2 field G(t, K); the time derivative of K is -G(t, K).

    ``dblocks`` is the tuple (D1, D2, D3, D4, D5, D6) of 2x2 matrices as
    nested tuples.
    """
    D1, D2, D3, D4, D5, D6 = dblocks
    KJ = _mm(K, _J2)
    JKJ = _mm(_J2, KJ)
    return _madd(
        _mm(D1, K),
        _mm(K, D1),
        _mm(D2, JKJ),
        _mm(_mm(KJ, D3), KJ),
        _mm(_mm(K, D4), K),
        _mm(_mm(JKJ, D5), JKJ),
        D6,
    )


def _dblocks_at(tab: _Tables, i: int):
    return (
        ((tab.tc1[i], 0.0), (0.0, 0.5 * tab.tc11[i])),
        ((2.0 * tab.tc2[i], 0.0), (0.0, -tab.tc12[i])),
        ((-tab.tc13[i], 0.0), (0.0, 2.0 * tab.tc3[i])),
        ((tab.tc4[i], 0.0), (0.0, tab.tc14[i])),
        ((tab.tc5[i], 0.0), (0.0, 0.0)),
        ((tab.tc6[i], 0.0), (0.0, tab.tc15[i])),
    )


def solve_matrix_K(
    spec: ProblemSpec,
    n_steps: int,
    threshold: float = DEFAULT_BLOWUP_THRESHOLD,
) -> MatrixKSolution:
    """Integrate the 2x2 matrix flow backward from diag(S1, G)."""
    if n_steps < 2:
        raise ValueError("n_steps must be at least 2")
    tab = _Tables(spec, n_steps)
    n = n_steps
    h = tab.h
    m = _Tables.MULT
    K = np.full((n + 1, 2, 2), np.nan)
    K[n] = np.diag([spec.S1, spec.G])
    y = ((float(spec.S1), 0.0), (0.0, float(spec.G)))
    cut = -1
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n - 1, -1, -1):
            i1 = m * (k + 1)
            im = m * k + m // 2
            i0 = m * k
            try:
                d_1 = _dblocks_at(tab, i1)
                d_m = _dblocks_at(tab, im)
                d_0 = _dblocks_at(tab, i0)
                k1 = matrix_flow_rhs(d_1, y)
                k2 = matrix_flow_rhs(d_m, _axpy(y, k1, 0.5 * h))
                k3 = matrix_flow_rhs(d_m, _axpy(y, k2, 0.5 * h))
                k4 = matrix_flow_rhs(d_0, _axpy(y, k3, h))
                y = tuple(
                    tuple(
                        y[r][c] + (h / 6.0) * (k1[r][c] + 2.0 * k2[r][c] + 2.0 * k3[r][c] + k4[r][c])
                        for c in range(2)
                    )
                    for r in range(2)
                )
            except OverflowError:
                y = ((math.inf, 0.0), (0.0, math.inf))
            flat = (y[0][0], y[0][1], y[1][0], y[1][1])
            if not all(math.isfinite(v) for v in flat) or max(abs(v) for v in flat) > threshold:
                cut = k + 1
                break
            K[k] = np.array(y)
    exists = cut < 0
    eta = spec.T if exists else spec.T - tab.times[m * cut]
    if not exists and cut == n:
        raise BlowUpBeforeTerminal(
            f"matrix flow escaped within one step of the terminal time (h={h:g})", eta=0.0
        )
    return MatrixKSolution(
        grid=np.linspace(0.0, spec.T, n + 1),
        K=K,
        exists_on_full_interval=exists,
        eta=eta,
        step_h=h,
        diagnostics={"method": "rk4-matrix", "n_steps": n, "threshold": threshold},
    )


def _axpy(y, g, s):
    # stages carry G = -dK/dt, and the flow runs backward, so states advance by +s*G
    return tuple(tuple(y[r][c] + s * g[r][c] for c in range(2)) for r in range(2))


def partial_from_matrix(mk: MatrixKSolution) -> RiccatiSolution:
    """View the matrix solution's diagonal as a partial component solution."""
    return RiccatiSolution(
        grid=mk.grid.copy(),
        alpha1=mk.K[:, 0, 0].copy(),
        beta1=mk.K[:, 1, 1].copy(),
        exists_on_full_interval=mk.exists_on_full_interval,
        eta=mk.eta,
        step_h=mk.step_h,
        diagnostics=dict(mk.diagnostics),
    )


# ---------------------------------------------------------------------------
# existence interval


def existence_interval(
    spec: ProblemSpec,
    n_steps: int,
    threshold: float = DEFAULT_BLOWUP_THRESHOLD,
) -> tuple[float, bool]:
    """Largest grid-resolved backward span with a bounded solution.

    A bounded coarse solve settles the question immediately; otherwise the
    solve is repeated at doubled resolution so the escape time is located to
    within one fine step.
    """
    if threshold <= 0.0:
        raise ValueError("threshold must be positive")
    try:
        coarse = solve_alpha1_beta1(spec, n_steps, threshold=threshold)
    except BlowUpBeforeTerminal:
        coarse = None
    if coarse is not None and coarse.exists_on_full_interval:
        return spec.T, True
    try:
        fine = solve_alpha1_beta1(spec, 2 * n_steps, threshold=threshold)
    except BlowUpBeforeTerminal as exc:
        return float(exc.eta), False
    if fine.exists_on_full_interval:
        return spec.T, True
    return fine.eta, False


def export_riccati_csv(sol: RiccatiSolution, path) -> None:
    """Write the grid and all five backward quantities, full precision."""
    if not sol.is_complete():
        raise MissingPrerequisite("cannot export an incomplete solution")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "alpha1", "alpha2", "alpha3", "beta1", "beta2"])
        for i, t in enumerate(sol.grid):
            w.writerow(
                [
                    f"{t:.17g}",
                    f"{sol.alpha1[i]:.17g}",
                    f"{sol.alpha2[i]:.17g}",
                    f"{sol.alpha3[i]:.17g}",
                    f"{sol.beta1[i]:.17g}",
                    f"{sol.beta2[i]:.17g}",
                ]
            )
