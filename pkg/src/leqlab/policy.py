"""Feedback synthesis and deterministic evaluation of affine policies.

The optimal control is affine in the state with gains built from the
backward solution.  For an arbitrary affine policy u = Kx(t) X + k0(t) the
closed-loop system stays linear, so its backward decoupling fields
(eta1, eta0) and the exponent fields (p, q, r) of the exponential cost solve
scalar ODEs; that gives a Monte-Carlo-free evaluation of any such policy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import BlowUpBeforeTerminal, MissingPrerequisite
from .model import CoefficientFunction, ProblemSpec
from .riccati import DEFAULT_BLOWUP_THRESHOLD, RiccatiSolution, _joint_midpoints, _Tables

__all__ = [
    "LinearPolicy",
    "PolicyFields",
    "GammaKappaAnsatz",
    "optimal_feedback",
    "decoupling_fields",
    "policy_fbsde_fields",
    "policy_cost_fields",
    "evaluate_linear_policy",
    "closed_form_optimal_cost",
    "gamma_kappa",
    "export_gains_csv",
    "export_policy_fields_csv",
]


@dataclass(frozen=True, eq=False)
class LinearPolicy:
    """Affine state feedback u(t, x) = Kx(t) x + k0(t)."""

    Kx: CoefficientFunction
    k0: CoefficientFunction

    def perturbed(self, gain_scale: float = 1.0, offset_shift: float = 0.0) -> "LinearPolicy":
        """Scale the gain and shift the offset; nodes are preserved."""
        horizon = self.Kx.horizon
        return LinearPolicy(
            Kx=CoefficientFunction(self.Kx.values * gain_scale, horizon),
            k0=CoefficientFunction(self.k0.values + offset_shift, horizon),
        )


@dataclass
class PolicyFields:
    """Backward fields of one affine policy on a uniform grid.

    eta1/eta0 decouple the policy's backward component, Y = eta1 X + eta0.
    p/q/r (present after a cost evaluation) are the quadratic exponent fields
    of the policy's exponential cost.
    """

    grid: np.ndarray
    eta1: np.ndarray
    eta0: np.ndarray
    p: Optional[np.ndarray] = None
    q: Optional[np.ndarray] = None
    r: Optional[np.ndarray] = None

    def y0(self, x0: float) -> float:
        """Deterministic initial backward value eta1(0) x0 + eta0(0)."""
        return float(self.eta1[0] * x0 + self.eta0[0])


@dataclass(frozen=True, eq=False)
class GammaKappaAnsatz:
    """Quadratic rule for the log-transformed value process along the optimum.

    gamma(t, x) = 0.5 a1(t) x^2 + a2(t) x + a3(t);  kappa(t, x) is the
    diffusion coefficient obtained by matching the martingale parts,
    kappa = sigma (a1 x + a2).
    """

    grid: np.ndarray
    alpha1: np.ndarray
    alpha2: np.ndarray
    alpha3: np.ndarray
    sigma_grid: np.ndarray

    def gamma(self, t, x):
        a1 = np.interp(t, self.grid, self.alpha1)
        a2 = np.interp(t, self.grid, self.alpha2)
        a3 = np.interp(t, self.grid, self.alpha3)
        return 0.5 * a1 * np.asarray(x) ** 2 + a2 * np.asarray(x) + a3

    def kappa(self, t, x):
        a1 = np.interp(t, self.grid, self.alpha1)
        a2 = np.interp(t, self.grid, self.alpha2)
        sg = np.interp(t, self.grid, self.sigma_grid)
        return sg * (a1 * np.asarray(x) + a2)


def _require_complete(sol: RiccatiSolution) -> None:
    if not sol.exists_on_full_interval:
        raise MissingPrerequisite("backward solution truncated before t=0")
    if not sol.is_complete():
        raise MissingPrerequisite("backward solution is incomplete")


def optimal_feedback(spec: ProblemSpec, sol: RiccatiSolution) -> LinearPolicy:
    """Optimal affine feedback sampled on the solver lattice.

    Gain and offset are
        Kx = -(a1 D1 + R14 + R24 b1) / R44,
        k0 = -(a2 D1 + R24 b2 + R34 b1 sigma) / R44,
    sampled at grid points and interval midpoints so that downstream
    fixed-step integrators see exact nodal values at every stage time.
    """
    _require_complete(sol)
    n = sol.n_steps
    tab = _Tables(spec, n)
    m = _Tables.MULT
    a1m, b1m, a2m, b2m = _joint_midpoints(tab, sol.alpha1, sol.beta1, sol.alpha2, sol.beta2)

    idx = np.empty(2 * n + 1, dtype=int)
    idx[0::2] = m * np.arange(n + 1)
    idx[1::2] = m * np.arange(n) + m // 2
    a1 = np.empty(2 * n + 1)
    b1 = np.empty(2 * n + 1)
    a2 = np.empty(2 * n + 1)
    b2 = np.empty(2 * n + 1)
    a1[0::2], a1[1::2] = sol.alpha1, a1m
    b1[0::2], b1[1::2] = sol.beta1, b1m
    a2[0::2], a2[1::2] = sol.alpha2, a2m
    b2[0::2], b2[1::2] = sol.beta2, b2m

    p = tab.p
    inv44 = 1.0 / p["R44"][idx]
    kx = -inv44 * (a1 * p["D1"][idx] + p["R14"][idx] + p["R24"][idx] * b1)
    k0 = -inv44 * (a2 * p["D1"][idx] + p["R24"][idx] * b2 + p["R34"][idx] * b1 * p["sigma"][idx])
    return LinearPolicy(
        Kx=CoefficientFunction(kx, spec.T),
        k0=CoefficientFunction(k0, spec.T),
    )


def decoupling_fields(
    sol: RiccatiSolution, spec: ProblemSpec
) -> tuple[Callable, Callable]:
    """Evaluation rules for the optimal backward pair.

    Returns (ybar, zbar) with ybar(t, x) = b1(t) x + b2(t) and
    zbar(t) = b1(t) sigma(t).
    """
    _require_complete(sol)
    grid = sol.grid
    beta1 = sol.beta1
    beta2 = sol.beta2

    def ybar(t, x):
        return np.interp(t, grid, beta1) * np.asarray(x) + np.interp(t, grid, beta2)

    def zbar(t):
        return np.interp(t, grid, beta1) * spec.sigma(t)

    return ybar, zbar


def _policy_lattice(spec: ProblemSpec, pol: LinearPolicy, tab: _Tables):
    """Per-lattice-point closed-loop and running-cost coefficients."""
    p = tab.p
    kx = np.asarray(pol.Kx(tab.times), dtype=float)
    k0 = np.asarray(pol.k0(tab.times), dtype=float)
    return p, kx, k0


def running_quadratic(r, e1, e0, z, u1, u0):
    """Coefficients (Q, L, C) of the running cost along an affine closed loop.

    Substituting Y = e1 x + e0, Z = z, u = u1 x + u0 into the symmetric
    four-way quadratic gives 0.5 Q x^2 + L x + C.  ``r`` maps weight names to
    values; scalars and aligned arrays both work.
    """
    q = (
        r["R11"]
        + 2.0 * r["R12"] * e1
        + 2.0 * r["R14"] * u1
        + r["R22"] * e1 * e1
        + 2.0 * r["R24"] * e1 * u1
        + r["R44"] * u1 * u1
    )
    lin = (
        r["R12"] * e0
        + r["R13"] * z
        + r["R14"] * u0
        + e1 * (r["R22"] * e0 + r["R23"] * z + r["R24"] * u0)
        + u1 * (r["R24"] * e0 + r["R34"] * z + r["R44"] * u0)
    )
    const = 0.5 * (
        r["R22"] * e0 * e0
        + r["R33"] * z * z
        + r["R44"] * u0 * u0
        + 2.0 * r["R23"] * e0 * z
        + 2.0 * r["R24"] * e0 * u0
        + 2.0 * r["R34"] * z * u0
    )
    return q, lin, const


def _solve_policy_system(
    spec: ProblemSpec,
    pol: LinearPolicy,
    n_steps: int,
    with_cost: bool,
    threshold: float = DEFAULT_BLOWUP_THRESHOLD,
):
    """Joint backward RK4 for (eta1, eta0) and optionally (p, q, r).

    The system is triangular: eta1 feeds eta0, both feed the exponent
    fields.  One joint pass keeps every component at full fourth order.
    """
    tab = _Tables(spec, n_steps)
    p, kx, k0 = _policy_lattice(spec, pol, tab)
    th = spec.theta
    n = n_steps
    h = tab.h
    m = _Tables.MULT

    A1, B1, C1, D1 = p["A1"], p["B1"], p["C1"], p["D1"]
    bv, sg = p["b"], p["sigma"]
    A2, B2, C2, D2, gv = p["A2"], p["B2"], p["C2"], p["D2"], p["g"]
    rnames = ("R11", "R12", "R13", "R14", "R22", "R23", "R24", "R33", "R34", "R44")

    def rhs(i, e1, e0, pp, qq, rr):
        u1 = kx[i]
        u0 = k0[i]
        abar = A1[i] + B1[i] * e1 + D1[i] * u1
        bbar = B1[i] * e0 + C1[i] * e1 * sg[i] + D1[i] * u0 + bv[i]
        de1 = -(e1 * abar + A2[i] + B2[i] * e1 + D2[i] * u1)
        de0 = -(e1 * bbar + B2[i] * e0 + C2[i] * e1 * sg[i] + D2[i] * u0 + gv[i])
        if not with_cost:
            return de1, de0, 0.0, 0.0, 0.0
        z = e1 * sg[i]
        ri = {name: p[name][i] for name in rnames}
        Q, L, Cc = running_quadratic(ri, e1, e0, z, u1, u0)
        s2 = sg[i] * sg[i]
        dp = -(2.0 * abar * pp + th * s2 * pp * pp + Q)
        dq = -((abar + th * s2 * pp) * qq + bbar * pp + L)
        dr = -(bbar * qq + 0.5 * s2 * pp + 0.5 * th * s2 * qq * qq + Cc)
        return de1, de0, dp, dq, dr

    eta1 = np.empty(n + 1)
    eta0 = np.empty(n + 1)
    parr = np.empty(n + 1) if with_cost else None
    qarr = np.empty(n + 1) if with_cost else None
    rarr = np.empty(n + 1) if with_cost else None
    eta1[n], eta0[n] = spec.G, 0.0
    if with_cost:
        parr[n], qarr[n], rarr[n] = spec.S1, 0.0, 0.0
    y = (float(spec.G), 0.0, float(spec.S1), 0.0, 0.0)

    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n - 1, -1, -1):
            i1 = m * (k + 1)
            im = m * k + m // 2
            i0 = m * k
            try:
                k1 = rhs(i1, *y)
                k2 = rhs(im, *(yc - 0.5 * h * kc for yc, kc in zip(y, k1)))
                k3 = rhs(im, *(yc - 0.5 * h * kc for yc, kc in zip(y, k2)))
                k4 = rhs(i0, *(yc - h * kc for yc, kc in zip(y, k3)))
                y = tuple(
                    yc - (h / 6.0) * (a + 2.0 * b + 2.0 * c + d)
                    for yc, a, b, c, d in zip(y, k1, k2, k3, k4)
                )
            except OverflowError:
                y = (math.inf,) * 5
            watched = y if with_cost else y[:2]
            if not all(math.isfinite(v) for v in watched) or max(abs(v) for v in watched) > threshold:
                eta = spec.T - tab.times[m * (k + 1)]
                what = "exponent fields" if with_cost else "decoupling fields"
                raise BlowUpBeforeTerminal(
                    f"{what} escaped at backward span eta={eta:g} under this policy", eta=eta
                )
            eta1[k], eta0[k] = y[0], y[1]
            if with_cost:
                parr[k], qarr[k], rarr[k] = y[2], y[3], y[4]

    return PolicyFields(
        grid=np.linspace(0.0, spec.T, n + 1),
        eta1=eta1,
        eta0=eta0,
        p=parr,
        q=qarr,
        r=rarr,
    )


def policy_fbsde_fields(spec: ProblemSpec, pol: LinearPolicy, n_steps: int) -> PolicyFields:
    """Backward decoupling fields (eta1, eta0) of the closed loop under ``pol``.

    eta1 solves a quadratic equation of its own, so an aggressive policy can
    make it escape; that is reported as :class:`BlowUpBeforeTerminal`.
    """
    return _solve_policy_system(spec, pol, n_steps, with_cost=False)


def policy_cost_fields(spec: ProblemSpec, pol: LinearPolicy, n_steps: int) -> PolicyFields:
    """Decoupling plus exponent fields (p, q, r) for the policy's cost."""
    return _solve_policy_system(spec, pol, n_steps, with_cost=True)


def evaluate_linear_policy(
    spec: ProblemSpec, pol: LinearPolicy, n_steps: int
) -> tuple[float, float]:
    """Exponential cost and certainty equivalent of an affine policy.

    Substitutes the policy's decoupling fields into the running quadratic and
    solves the exponent ODEs; no sampling is involved.  A policy (or a risk
    parameter) whose exponential moment does not exist makes the p-equation
    escape, which surfaces as :class:`BlowUpBeforeTerminal` rather than a
    clipped number.
    """
    fields = policy_cost_fields(spec, pol, n_steps)
    ce = (
        0.5 * fields.p[0] * spec.x0**2
        + fields.q[0] * spec.x0
        + fields.r[0]
        + 0.5 * spec.S2 * fields.y0(spec.x0) ** 2
    )
    try:
        j = math.exp(spec.theta * ce)
    except OverflowError:
        j = math.inf
    return j, float(ce)


def closed_form_optimal_cost(
    sol: RiccatiSolution, x0: float, theta: float
) -> tuple[float, float]:
    """Optimal cost from the backward solution alone.

    CE = 0.5 a1(0) x0^2 + a2(0) x0 + a3(0);  J = exp(theta * CE).
    """
    _require_complete(sol)
    ce = 0.5 * sol.alpha1[0] * x0 * x0 + sol.alpha2[0] * x0 + sol.alpha3[0]
    try:
        j = math.exp(theta * ce)
    except OverflowError:
        j = math.inf
    return j, float(ce)


def gamma_kappa(sol: RiccatiSolution, spec: ProblemSpec) -> GammaKappaAnsatz:
    """Quadratic evaluation rules for the log-value process and its diffusion."""
    _require_complete(sol)
    return GammaKappaAnsatz(
        grid=sol.grid.copy(),
        alpha1=sol.alpha1.copy(),
        alpha2=sol.alpha2.copy(),
        alpha3=sol.alpha3.copy(),
        sigma_grid=np.asarray(spec.sigma(sol.grid), dtype=float),
    )


def export_gains_csv(pol: LinearPolicy, path) -> None:
    """Write the policy's node times and gain samples, full precision."""
    import csv

    nodes = pol.Kx.values.size
    horizon = pol.Kx.horizon
    times = np.linspace(0.0, horizon, nodes) if nodes > 1 else np.array([0.0])
    kx = pol.Kx(times)
    k0 = pol.k0(times)
    kx = np.atleast_1d(kx)
    k0 = np.atleast_1d(k0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "Kx", "k0"])
        for t, a, b in zip(np.atleast_1d(times), kx, k0):
            w.writerow([f"{t:.17g}", f"{a:.17g}", f"{b:.17g}"])


def export_policy_fields_csv(fields: PolicyFields, path) -> None:
    """Write t, eta1, eta0, p, q, r (exponent fields required)."""
    import csv

    if fields.p is None:
        raise MissingPrerequisite("exponent fields absent; evaluate the policy cost first")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "eta1", "eta0", "p", "q", "r"])
        for i, t in enumerate(fields.grid):
            w.writerow(
                [
                    f"{t:.17g}",
                    f"{fields.eta1[i]:.17g}",
                    f"{fields.eta0[i]:.17g}",
                    f"{fields.p[i]:.17g}",
                    f"{fields.q[i]:.17g}",
                    f"{fields.r[i]:.17g}",
                ]
            )
