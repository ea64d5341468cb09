"""Problem definition for the risk-sensitive linear-exponential-quadratic model.

A problem instance couples a scalar forward diffusion with a scalar backward
equation through linear dynamics,

    dX = (A1 X + B1 Y + C1 Z + D1 u + b) dt + sigma dW,
   -dY = (A2 X + B2 Y + C2 Z + D2 u + g) dt - Z dW,
    X(0) = x0,  Y(T) = G X(T),

and scores a control through the exponential of a quadratic functional,

    J(u) = E exp{ (theta/2) [ S1 X(T)^2 + S2 Y(0)^2
                  + int_0^T (X,Y,Z,u) R(t) (X,Y,Z,u)^T dt ] },

with R(t) the symmetric 4x4 running-weight matrix.  This module holds the
validated instance type, the configuration-document loader, and the derived
coefficient bundles consumed by the backward solvers.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, fields
from typing import Any, Mapping

import numpy as np

from .errors import ConfigParseError, NonFiniteValue, ValidationError

__all__ = [
    "CoefficientFunction",
    "ProblemSpec",
    "CVector",
    "DMatrices",
    "RunSettings",
    "build_problem",
    "run_settings",
    "parse_config_text",
    "assemble_c",
    "assemble_matrix_form",
    "SWAP",
]

# Fixed 2x2 swap used by the matrix form of the backward system.
SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])

_COEFF_NAMES = ("A1", "B1", "C1", "D1", "b", "sigma", "A2", "B2", "C2", "D2", "g")
_WEIGHT_NAMES = ("R11", "R12", "R13", "R14", "R22", "R23", "R24", "R33", "R34", "R44")
_TERMINAL_NAMES = ("G", "S1", "S2")
_MC_NAMES = ("n_paths", "dt", "seed")
_TOP_NAMES = ("horizon", "x0", "theta", "grid_n", "terminal", "weights", "mc") + _COEFF_NAMES


@dataclass(frozen=True, eq=False)
class CoefficientFunction:
    """Deterministic bounded coefficient on [0, horizon].

    Either a constant or the piecewise-linear interpolant of samples on a
    uniform grid.  Evaluation outside [0, horizon] clamps to the endpoint
    values.
    """

    values: np.ndarray
    horizon: float

    def __post_init__(self):
        vals = np.atleast_1d(np.asarray(self.values, dtype=float))
        if not np.all(np.isfinite(vals)):
            raise ValidationError("coefficient samples must be finite")
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, value: float, horizon: float) -> "CoefficientFunction":
        return cls(np.array([float(value)]), horizon)

    @classmethod
    def from_samples(cls, samples, horizon: float) -> "CoefficientFunction":
        samples = np.asarray(samples, dtype=float)
        if samples.ndim != 1 or samples.size < 2:
            raise ValidationError("sample list needs at least two values")
        return cls(samples, horizon)

    @property
    def kind(self) -> str:
        return "constant" if self.values.size == 1 else "piecewise-linear"

    @property
    def grid_n(self) -> int:
        return self.values.size - 1

    def __call__(self, t):
        if self.values.size == 1:
            out = np.full_like(np.asarray(t, dtype=float), self.values[0])
            return float(out) if np.ndim(t) == 0 else out
        tgrid = np.linspace(0.0, self.horizon, self.values.size)
        out = np.interp(t, tgrid, self.values)
        return float(out) if np.ndim(t) == 0 else out


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Validated problem instance.

    ``A1..D1, b, sigma`` drive the forward equation, ``A2..D2, g`` the
    backward one.  ``R11..R44`` are the upper-triangle entries of the running
    weight; the matrix is completed symmetrically.  ``G`` couples the terminal
    backward value to the state, ``S1``/``S2`` weight the terminal state and
    the initial backward value in the cost.
    """

    T: float
    x0: float
    theta: float
    A1: CoefficientFunction
    B1: CoefficientFunction
    C1: CoefficientFunction
    D1: CoefficientFunction
    b: CoefficientFunction
    sigma: CoefficientFunction
    A2: CoefficientFunction
    B2: CoefficientFunction
    C2: CoefficientFunction
    D2: CoefficientFunction
    g: CoefficientFunction
    G: float
    S1: float
    S2: float
    R11: CoefficientFunction
    R12: CoefficientFunction
    R13: CoefficientFunction
    R14: CoefficientFunction
    R22: CoefficientFunction
    R23: CoefficientFunction
    R24: CoefficientFunction
    R33: CoefficientFunction
    R34: CoefficientFunction
    R44: CoefficientFunction

    def weight_matrix(self, t: float) -> np.ndarray:
        """Symmetric 4x4 running weight at time t, rows/cols order (X, Y, Z, u)."""
        r = {name: getattr(self, name)(t) for name in _WEIGHT_NAMES}
        m = np.array(
            [
                [r["R11"], r["R12"], r["R13"], r["R14"]],
                [r["R12"], r["R22"], r["R23"], r["R24"]],
                [r["R13"], r["R23"], r["R33"], r["R34"]],
                [r["R14"], r["R24"], r["R34"], r["R44"]],
            ]
        )
        return m


@dataclass(frozen=True)
class RunSettings:
    """Solver and Monte Carlo budgets carried by the configuration document."""

    grid_n: int
    n_paths: int
    dt: float
    seed: int


@dataclass(frozen=True)
class CVector:
    """Derived coefficients at one time point.

    c1..c6 and c11..c15 are pure functions of the instance at t; c7..c10 and
    c16..c18 additionally depend on the backward quantities (alpha1, alpha2,
    beta1, beta2) supplied by the caller.
    """

    c1: float
    c2: float
    c3: float
    c4: float
    c5: float
    c6: float
    c7: float
    c8: float
    c9: float
    c10: float
    c11: float
    c12: float
    c13: float
    c14: float
    c15: float
    c16: float
    c17: float
    c18: float


@dataclass(frozen=True, eq=False)
class DMatrices:
    """Diagonal blocks of the 2x2 matrix form of the coupled backward pair.

    With K = diag(alpha1, beta1) and J the swap matrix, the matrix flow

        K' + D1 K + K D1 + D2 J K J + K J D3 K J + K D4 K
           + J K J D5 J K J + D6 = 0,   K(T) = K_T,

    reproduces the two scalar quadratic equations on its diagonal.  The swap
    conjugation inside the D3 term exchanges the diagonal slots, so D3 carries
    (-c13, 2*c3) in that order, and the quadratic D4 term appears once (no
    symmetrized halving), so D4 carries (c4, c14).
    """

    D1: np.ndarray
    D2: np.ndarray
    D3: np.ndarray
    D4: np.ndarray
    D5: np.ndarray
    D6: np.ndarray
    J: np.ndarray
    K_T: np.ndarray


def parse_config_text(text: str) -> dict:
    """Parse a YAML configuration document into a mapping."""
    import yaml

    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigParseError(f"malformed configuration document: {exc}") from exc
    if not isinstance(doc, Mapping):
        raise ConfigParseError("configuration document must be a mapping")
    return dict(doc)


def _as_coefficient(name: str, raw: Any, horizon: float) -> CoefficientFunction:
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        return CoefficientFunction.constant(float(raw), horizon)
    if isinstance(raw, (list, tuple)):
        return CoefficientFunction.from_samples(raw, horizon)
    if isinstance(raw, Mapping):
        keys = set(raw)
        if keys == {"constant"}:
            return CoefficientFunction.constant(float(raw["constant"]), horizon)
        if keys == {"samples"}:
            return CoefficientFunction.from_samples(raw["samples"], horizon)
        raise ConfigParseError(f"coefficient block '{name}' must give 'constant' or 'samples', got {sorted(keys)}")
    raise ConfigParseError(f"coefficient block '{name}' must be a number, a sample list, or a block")


def _require_number(doc: Mapping, key: str) -> float:
    if key not in doc:
        raise ConfigParseError(f"missing required field '{key}'")
    val = doc[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigParseError(f"field '{key}' must be a number")
    return float(val)


def _check_known(section: str, doc: Mapping, allowed) -> None:
    unknown = sorted(set(doc) - set(allowed))
    if unknown:
        raise ConfigParseError(f"unknown field(s) in {section}: {', '.join(map(str, unknown))}")


def build_problem(config: Mapping) -> ProblemSpec:
    """Validate a parsed configuration document and return the instance.

    Rejects unknown fields anywhere, non-positive running control weight
    (R44 must stay uniformly positive), and theta == 0.  theta < 0 is
    accepted with a warning: the machinery is unchanged, but the standard
    assumptions fix theta > 0.
    """
    _check_known("configuration", config, _TOP_NAMES)
    T = _require_number(config, "horizon")
    if T <= 0.0:
        raise ValidationError("horizon must be positive")
    x0 = _require_number(config, "x0")
    theta = _require_number(config, "theta")
    if theta == 0.0:
        raise ValidationError("theta must be nonzero")
    if theta < 0.0:
        warnings.warn("theta < 0 selects the risk-seeking regime; proceeding", UserWarning)

    coeffs = {}
    for name in _COEFF_NAMES:
        raw = config.get(name, 0.0)
        coeffs[name] = _as_coefficient(name, raw, T)

    terminal = config.get("terminal", {})
    if not isinstance(terminal, Mapping):
        raise ConfigParseError("'terminal' must be a mapping")
    _check_known("terminal", terminal, _TERMINAL_NAMES)
    term = {k: float(terminal.get(k, 0.0)) for k in _TERMINAL_NAMES}

    weights_doc = config.get("weights", {})
    if not isinstance(weights_doc, Mapping):
        raise ConfigParseError("'weights' must be a mapping")
    _check_known("weights", weights_doc, _WEIGHT_NAMES)
    weights = {}
    for name in _WEIGHT_NAMES:
        raw = weights_doc.get(name, 0.0)
        weights[name] = _as_coefficient(name, raw, T)

    mc_doc = config.get("mc", {})
    if not isinstance(mc_doc, Mapping):
        raise ConfigParseError("'mc' must be a mapping")
    _check_known("mc", mc_doc, _MC_NAMES)

    r44 = weights["R44"]
    if float(np.min(r44.values)) <= 0.0:
        raise ValidationError("R44 not uniformly positive")

    for name, cf in {**coeffs, **weights}.items():
        if not np.all(np.isfinite(cf.values)):
            raise ValidationError(f"coefficient '{name}' has non-finite samples")

    return ProblemSpec(
        T=T,
        x0=x0,
        theta=theta,
        **coeffs,
        G=term["G"],
        S1=term["S1"],
        S2=term["S2"],
        **weights,
    )


def run_settings(config: Mapping) -> RunSettings:
    """Extract solver grid size and Monte Carlo budgets, with defaults."""
    T = _require_number(config, "horizon")
    grid_n = int(config.get("grid_n", 2048))
    if grid_n < 2:
        raise ConfigParseError("grid_n must be at least 2")
    mc_doc = config.get("mc", {})
    n_paths = int(mc_doc.get("n_paths", 100_000))
    dt = float(mc_doc.get("dt", T / 1024.0))
    seed = int(mc_doc.get("seed", 0))
    if n_paths < 1:
        raise ConfigParseError("mc.n_paths must be at least 1")
    if dt <= 0.0:
        raise ConfigParseError("mc.dt must be positive")
    return RunSettings(grid_n=grid_n, n_paths=n_paths, dt=dt, seed=seed)


def assemble_c(
    spec: ProblemSpec,
    t: float,
    alpha1: float,
    alpha2: float,
    beta1: float,
    beta2: float,
) -> CVector:
    """Evaluate the eighteen derived coefficients at time t.

    The bundle collects every combination of instance coefficients that the
    backward value-curvature, value-slope, value-offset and decoupling ODEs
    consume, after the control has been eliminated through the R44-weighted
    square.
    """
    a1 = spec.A1(t)
    b1 = spec.B1(t)
    c1v = spec.C1(t)
    d1 = spec.D1(t)
    bv = spec.b(t)
    sig = spec.sigma(t)
    a2 = spec.A2(t)
    b2 = spec.B2(t)
    c2v = spec.C2(t)
    d2 = spec.D2(t)
    gv = spec.g(t)
    r11 = spec.R11(t)
    r12 = spec.R12(t)
    r13 = spec.R13(t)
    r14 = spec.R14(t)
    r22 = spec.R22(t)
    r23 = spec.R23(t)
    r24 = spec.R24(t)
    r33 = spec.R33(t)
    r34 = spec.R34(t)
    r44 = spec.R44(t)
    theta = spec.theta

    inv44 = 1.0 / r44
    gain_x = d1 * alpha1 + r14 + r24 * beta1
    gain_0 = alpha2 * d1 + r24 * beta2 + r34 * beta1 * sig
    lever = d1 * beta1 + d2

    out = CVector(
        c1=a1 - inv44 * d1 * r14,
        c2=r12 - inv44 * r14 * r24,
        c3=b1 - inv44 * d1 * r24,
        c4=theta * sig * sig - inv44 * d1 * d1,
        c5=r22 - inv44 * r24 * r24,
        c6=r11 - inv44 * r14 * r14,
        c7=a1 + b1 * beta1 + theta * sig * sig * alpha1 - inv44 * d1 * gain_x,
        c8=b1 * alpha1 + r12 + r22 * beta1 - inv44 * r24 * gain_x,
        c9=(
            c1v * sig * alpha1 * beta1
            + alpha1 * bv
            + r13 * sig * beta1
            + r23 * sig * beta1 * beta1
            - inv44 * r34 * sig * gain_x * beta1
        ),
        c10=(
            0.5 * alpha1 * sig * sig
            + alpha2 * (b1 * beta2 + c1v * beta1 * sig + bv)
            + 0.5 * r22 * beta2 * beta2
            + r23 * sig * beta1 * beta2
            + 0.5 * r33 * sig * sig * beta1 * beta1
            + 0.5 * theta * sig * sig * alpha2 * alpha2
            - 0.5 * inv44 * gain_0 * gain_0
        ),
        c11=a1 + b2 - inv44 * (d1 * r14 + d2 * r24),
        c12=inv44 * d1 * d2,
        c13=inv44 * d1 * d1,
        c14=b1 - inv44 * d1 * r24,
        c15=a2 - inv44 * d2 * r14,
        c16=b1 * beta1 + b2 - inv44 * r24 * lever,
        c17=inv44 * d1 * lever,
        c18=(c1v * beta1 + c2v) * sig * beta1 + bv * beta1 + gv - inv44 * r34 * sig * beta1 * lever,
    )
    for f in fields(out):
        if not np.isfinite(getattr(out, f.name)):
            raise NonFiniteValue(f"derived coefficient {f.name} is non-finite at t={t}")
    return out


def assemble_matrix_form(spec: ProblemSpec, t: float) -> DMatrices:
    """Diagonal D-blocks of the 2x2 matrix flow at time t.

    Only the backward-state-independent coefficients enter, so the blocks are
    pure functions of the instance at t.
    """
    c = assemble_c(spec, t, 0.0, 0.0, 0.0, 0.0)
    dm = DMatrices(
        D1=np.diag([c.c1, 0.5 * c.c11]),
        D2=np.diag([2.0 * c.c2, -c.c12]),
        # Slot order anticipates the swap conjugation: entry 1 lands in the
        # second diagonal equation and entry 2 in the first.
        D3=np.diag([-c.c13, 2.0 * c.c3]),
        D4=np.diag([c.c4, c.c14]),
        D5=np.diag([c.c5, 0.0]),
        D6=np.diag([c.c6, c.c15]),
        J=SWAP.copy(),
        K_T=np.diag([spec.S1, spec.G]),
    )
    for name in ("D1", "D2", "D3", "D4", "D5", "D6", "K_T"):
        if not np.all(np.isfinite(getattr(dm, name))):
            raise NonFiniteValue(f"matrix block {name} is non-finite at t={t}")
    return dm
