"""Independent reference solutions used to check the main solvers.

Nothing here shares code with the Runge-Kutta path: the constant-coefficient
results are closed forms, and the risk-neutral reference is a fresh
transcription of the backward system integrated by scipy's adaptive DOP853.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .model import ProblemSpec

__all__ = [
    "ConstantRiccati",
    "constant_riccati_blowup_span",
    "risk_neutral_value",
]


@dataclass(frozen=True)
class ConstantRiccati:
    """Closed-form solution of  y' + c y^2 + 2 a y + q = 0,  y(T) = yT.

    Written in time-to-go tau = T - t, the flow is dy/dtau = c y^2 + 2 a y + q
    and splits by the sign of the discriminant a^2 - c q:

      * c = 0:       affine/exponential flow, never escapes in finite time;
      * a^2 > c q:   hyperbolic flow between the two real equilibria;
      * a^2 = c q:   algebraic approach to the double root;
      * a^2 < c q:   tangent flow, always escapes at a finite time-to-go.
    """

    c: float
    a: float
    q: float
    yT: float
    T: float

    def value_tau(self, tau):
        """Evaluate at time-to-go tau >= 0 (scalar or array)."""
        tau = np.asarray(tau, dtype=float)
        c, a, q, yT = self.c, self.a, self.q, self.yT
        if c == 0.0:
            if a == 0.0:
                out = yT + q * tau
            else:
                out = (yT + q / (2.0 * a)) * np.exp(2.0 * a * tau) - q / (2.0 * a)
            return out if out.ndim else float(out)
        disc = a * a - c * q
        if disc > 0.0:
            delta = math.sqrt(disc)
            yp = (-a + delta) / c
            ym = (-a - delta) / c
            if yT == ym:
                out = np.full_like(tau, ym)
                return out if out.ndim else float(out)
            rho = (yT - yp) / (yT - ym)
            # divide through by exp(2 delta tau); decaying exponentials only
            e = np.exp(-2.0 * delta * tau)
            out = (yp * e - ym * rho) / (e - rho)
            return out if out.ndim else float(out)
        if disc == 0.0:
            ystar = -a / c
            w = yT - ystar
            out = ystar + w / (1.0 - c * w * tau)
            return out if out.ndim else float(out)
        delta = math.sqrt(-disc)
        phi = math.atan2(c * (yT + a / c), delta)
        out = -a / c + (delta / c) * np.tan(phi + delta * tau)
        return out if out.ndim else float(out)

    def value_t(self, t):
        return self.value_tau(self.T - np.asarray(t, dtype=float))


def constant_riccati_blowup_span(c: float, a: float, q: float, yT: float) -> float:
    """Backward span tau* at which the constant-coefficient flow escapes.

    Returns ``math.inf`` when the solution exists for every tau >= 0.
    """
    if c == 0.0:
        return math.inf
    disc = a * a - c * q
    if disc > 0.0:
        delta = math.sqrt(disc)
        yp = (-a + delta) / c
        ym = (-a - delta) / c
        if yT == ym:
            return math.inf
        rho = (yT - yp) / (yT - ym)
        if 0.0 < rho < 1.0:
            return -math.log(rho) / (2.0 * delta)
        return math.inf
    if disc == 0.0:
        ystar = -a / c
        w = yT - ystar
        if c * w > 0.0:
            return 1.0 / (c * w)
        return math.inf
    delta = math.sqrt(-disc)
    phi = math.atan2(c * (yT + a / c), delta)
    return (0.5 * math.pi - phi) / delta


def risk_neutral_value(spec: ProblemSpec, rtol: float = 1e-11, atol: float = 1e-12) -> float:
    """Classical (risk-neutral) value of the same data, theta set to zero.

    Integrates the backward five-quantity system with the risk term removed,
    as one adaptive DOP853 solve of a freshly transcribed right-hand side.
    Returns the certainty-equivalent-style value
    0.5*a1(0)*x0^2 + a2(0)*x0 + a3(0).
    """

    def rhs(t, y):
        a1v, b1v, a2v, b2v, _ = y
        A1 = spec.A1(t)
        B1 = spec.B1(t)
        C1 = spec.C1(t)
        D1 = spec.D1(t)
        bv = spec.b(t)
        sg = spec.sigma(t)
        A2 = spec.A2(t)
        B2 = spec.B2(t)
        C2 = spec.C2(t)
        D2 = spec.D2(t)
        gv = spec.g(t)
        R11 = spec.R11(t)
        R12 = spec.R12(t)
        R13 = spec.R13(t)
        R14 = spec.R14(t)
        R22 = spec.R22(t)
        R23 = spec.R23(t)
        R24 = spec.R24(t)
        R33 = spec.R33(t)
        R34 = spec.R34(t)
        R44 = spec.R44(t)
        gx = D1 * a1v + R14 + R24 * b1v
        g0 = a2v * D1 + R24 * b2v + R34 * b1v * sg
        lv = D1 * b1v + D2
        da1 = -(
            2.0 * (A1 - D1 * R14 / R44) * a1v
            + 2.0 * (R12 - R14 * R24 / R44) * b1v
            + 2.0 * (B1 - D1 * R24 / R44) * a1v * b1v
            + (-D1 * D1 / R44) * a1v * a1v
            + (R22 - R24 * R24 / R44) * b1v * b1v
            + (R11 - R14 * R14 / R44)
        )
        db1 = -(
            (A1 + B2 - (D1 * R14 + D2 * R24) / R44) * b1v
            - (D1 * D2 / R44) * a1v
            - (D1 * D1 / R44) * a1v * b1v
            + (B1 - D1 * R24 / R44) * b1v * b1v
            + (A2 - D2 * R14 / R44)
        )
        da2 = -(
            (A1 + B1 * b1v - D1 * gx / R44) * a2v
            + (B1 * a1v + R12 + R22 * b1v - R24 * gx / R44) * b2v
            + (
                C1 * sg * a1v * b1v
                + a1v * bv
                + R13 * sg * b1v
                + R23 * sg * b1v * b1v
                - R34 * sg * gx * b1v / R44
            )
        )
        db2 = -(
            (B1 * b1v + B2 - R24 * lv / R44) * b2v
            - (D1 * lv / R44) * a2v
            + ((C1 * b1v + C2) * sg * b1v + bv * b1v + gv - R34 * sg * b1v * lv / R44)
        )
        da3 = -(
            0.5 * a1v * sg * sg
            + a2v * (B1 * b2v + C1 * b1v * sg + bv)
            + 0.5 * R22 * b2v * b2v
            + R23 * sg * b1v * b2v
            + 0.5 * R33 * sg * sg * b1v * b1v
            - 0.5 * g0 * g0 / R44
        )
        return [da1, db1, da2, db2, da3]

    sol = solve_ivp(
        rhs,
        (spec.T, 0.0),
        [spec.S1, spec.G, 0.0, 0.0, 0.0],
        method="DOP853",
        rtol=rtol,
        atol=atol,
        dense_output=False,
    )
    if not sol.success:
        raise RuntimeError(f"risk-neutral reference solve failed: {sol.message}")
    a1_0, b1_0, a2_0, b2_0, a3_shift = sol.y[:, -1]
    a3_0 = a3_shift + 0.5 * spec.S2 * (b1_0 * spec.x0 + b2_0) ** 2
    return 0.5 * a1_0 * spec.x0**2 + a2_0 * spec.x0 + a3_0
