"""Monte Carlo verification: closed-loop simulation and cost estimation.

Paths follow the affine closed loop under a given policy by explicit
Euler-Maruyama.  Exponential costs are accumulated in the log domain and
aggregated with a max-shift, so heavy right tails cannot silently overflow;
paths whose accumulators still leave the representable range are excluded
and counted.

Randomness is counter-based: the normals of path block b come from a Philox
stream keyed by (seed, b) with a fixed block size, so every path's noise is
a pure function of (seed, path index, step index) and results are identical
for any worker count.  All cross-path reductions run over index-ordered
arrays, never over per-worker partials.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import AllPathsOverflowed, GridMismatch, MissingPrerequisite
from .model import ProblemSpec
from .policy import LinearPolicy, PolicyFields, running_quadratic
from .riccati import RiccatiSolution

__all__ = [
    "PathEnsemble",
    "CostEstimate",
    "ResidualStats",
    "simulate",
    "estimate_cost",
    "girsanov_check",
    "bsde_residuals",
    "export_mc_summary_csv",
    "export_path_dump_csv",
    "PATH_BLOCK",
]

# paths per RNG block; fixed so path noise never depends on n_paths or workers
PATH_BLOCK = 4096

_WEIGHT_NAMES = ("R11", "R12", "R13", "R14", "R22", "R23", "R24", "R33", "R34", "R44")


@dataclass
class PathEnsemble:
    """Streaming reductions of one simulation run."""

    n_paths: int
    dt: float
    seed: int
    grid: np.ndarray
    log_cost: np.ndarray
    overflow: np.ndarray
    x_final: np.ndarray
    x_mean: np.ndarray
    log_girsanov: Optional[np.ndarray] = None
    residual_acc: Optional[dict] = None
    meta: dict = field(default_factory=dict)

    @property
    def n_steps(self) -> int:
        return self.grid.size - 1


@dataclass(frozen=True)
class CostEstimate:
    J_hat: float
    stderr_J: float
    CE_hat: float
    n_effective: int
    overflow_count: int
    # reliability diagnostic: share of the estimate carried by the single
    # heaviest path; near 1 the reported stderr is not trustworthy
    max_weight_share: float = 0.0


@dataclass(frozen=True)
class ResidualStats:
    """Per-step and aggregate one-step defect statistics for two families:

    1. the backward-equation increments against the decoupling fields,
    2. the quadratic log-value rule against its drift/diffusion identity.
    """

    step_mean_backward: np.ndarray
    step_rms_backward: np.ndarray
    step_mean_value: np.ndarray
    step_rms_value: np.ndarray
    rms_backward: float
    rms_value: float


def _stride_sample(values: np.ndarray, src_steps: int, dst_steps: int, what: str) -> np.ndarray:
    if src_steps % dst_steps != 0:
        raise GridMismatch(
            f"{what}: solver grid ({src_steps} steps) is not an integer multiple "
            f"of the simulation grid ({dst_steps} steps)"
        )
    stride = src_steps // dst_steps
    return np.asarray(values, dtype=float)[::stride]


def _sde_steps(T: float, dt: float) -> int:
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-12 * max(1.0, T):
        raise GridMismatch(f"dt={dt!r} does not divide the horizon T={T!r}")
    return n


def simulate(
    spec: ProblemSpec,
    pol: LinearPolicy,
    fields: PolicyFields,
    n_paths: int,
    dt: float,
    seed: int,
    sol: Optional[RiccatiSolution] = None,
    workers: int = 1,
) -> PathEnsemble:
    """Euler-Maruyama ensemble of the closed loop under ``pol``.

    Accumulates per path the log exponential cost (running quadratic with the
    policy's decoupling substitution, terminal state weight, and the
    deterministic initial-backward-value weight).  When ``sol`` is given, the
    change-of-measure log weight and both one-step defect families are
    accumulated as well; those quantities are built from ``sol``'s own
    backward data, independent of the simulated policy's fields.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    n = _sde_steps(spec.T, dt)
    grid = np.arange(n + 1) * dt
    theta = spec.theta

    # policy and instance coefficients at grid times
    p = {name: np.asarray(getattr(spec, name)(grid), dtype=float)
         for name in ("A1", "B1", "C1", "D1", "b", "sigma", "A2", "B2", "C2", "D2", "g")
         + _WEIGHT_NAMES}
    kx = np.asarray(pol.Kx(grid), dtype=float)
    k0 = np.asarray(pol.k0(grid), dtype=float)
    e1 = _stride_sample(fields.eta1, fields.grid.size - 1, n, "policy fields")
    e0 = _stride_sample(fields.eta0, fields.grid.size - 1, n, "policy fields")

    abar = p["A1"] + p["B1"] * e1 + p["D1"] * kx
    bbar = p["B1"] * e0 + p["C1"] * e1 * p["sigma"] + p["D1"] * k0 + p["b"]
    zsub = e1 * p["sigma"]
    rW = {name: p[name] for name in _WEIGHT_NAMES}
    Q, L, C = running_quadratic(rW, e1, e0, zsub, kx, k0)
    y0 = float(e1[0] * spec.x0 + e0[0])
    terminal_offset = 0.5 * spec.S2 * y0 * y0

    with_sol = sol is not None
    if with_sol:
        if not sol.is_complete() or not sol.exists_on_full_interval:
            raise MissingPrerequisite("reference backward solution must be complete")
        sn = sol.n_steps
        a1 = _stride_sample(sol.alpha1, sn, n, "backward solution")
        a2 = _stride_sample(sol.alpha2, sn, n, "backward solution")
        a3 = _stride_sample(sol.alpha3, sn, n, "backward solution")
        b1 = _stride_sample(sol.beta1, sn, n, "backward solution")
        b2 = _stride_sample(sol.beta2, sn, n, "backward solution")
        inv44 = 1.0 / p["R44"]
        kx_opt = -inv44 * (a1 * p["D1"] + p["R14"] + p["R24"] * b1)
        k0_opt = -inv44 * (a2 * p["D1"] + p["R24"] * b2 + p["R34"] * b1 * p["sigma"])
        zbar = b1 * p["sigma"]
        Qo, Lo, Co = running_quadratic(rW, b1, b2, zbar, kx_opt, k0_opt)

    log_cost = np.empty(n_paths)
    x_final = np.empty(n_paths)
    log_gir = np.empty(n_paths) if with_sol else None
    n_blocks = (n_paths + PATH_BLOCK - 1) // PATH_BLOCK
    sqdt = math.sqrt(dt)

    def run_block(bidx: int):
        lo = bidx * PATH_BLOCK
        hi = min(lo + PATH_BLOCK, n_paths)
        rows = hi - lo
        rng = np.random.Generator(np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, bidx]))
        Z = rng.standard_normal((rows, n))
        x = np.full(rows, spec.x0)
        run = np.zeros(rows)
        lg = np.zeros(rows) if with_sol else None
        xsum = np.empty(n + 1)
        xsum[0] = x.sum()
        if with_sol:
            r1_sum = np.empty(n)
            r1_sq = np.empty(n)
            r2_sum = np.empty(n)
            r2_sq = np.empty(n)
        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(n):
                dw = sqdt * Z[:, k]
                run += (0.5 * Q[k] * x * x + L[k] * x + C[k]) * dt
                x_next = x + (abar[k] * x + bbar[k]) * dt + p["sigma"][k] * dw
                if with_sol:
                    gk = theta * p["sigma"][k] * (a1[k] * x + a2[k])
                    lg += gk * dw - 0.5 * gk * gk * dt
                    y_old = b1[k] * x + b2[k]
                    y_new = b1[k + 1] * x_next + b2[k + 1]
                    u_opt = kx_opt[k] * x + k0_opt[k]
                    driver = (
                        p["A2"][k] * x
                        + p["B2"][k] * y_old
                        + p["C2"][k] * zbar[k]
                        + p["D2"][k] * u_opt
                        + p["g"][k]
                    )
                    r1 = y_new - y_old + driver * dt - zbar[k] * dw
                    gam_old = 0.5 * a1[k] * x * x + a2[k] * x + a3[k]
                    gam_new = 0.5 * a1[k + 1] * x_next * x_next + a2[k + 1] * x_next + a3[k + 1]
                    kap = p["sigma"][k] * (a1[k] * x + a2[k])
                    ell = 0.5 * Qo[k] * x * x + Lo[k] * x + Co[k]
                    r2 = gam_new - gam_old + (ell + 0.5 * theta * kap * kap) * dt - kap * dw
                    r1_sum[k] = r1.sum()
                    r1_sq[k] = (r1 * r1).sum()
                    r2_sum[k] = r2.sum()
                    r2_sq[k] = (r2 * r2).sum()
                x = x_next
                xsum[k + 1] = x.sum()
            lc = theta * (run + 0.5 * spec.S1 * x * x + terminal_offset)
        log_cost[lo:hi] = lc
        x_final[lo:hi] = x
        if with_sol:
            log_gir[lo:hi] = lg
            return bidx, xsum, rows, (r1_sum, r1_sq, r2_sum, r2_sq)
        return bidx, xsum, rows, None

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(run_block, range(n_blocks)))
    else:
        results = [run_block(b) for b in range(n_blocks)]
    results.sort(key=lambda item: item[0])

    # fixed block-ordered reduction keeps sums worker-count independent
    x_mean = np.zeros(n + 1)
    res_acc = None
    if with_sol:
        res_acc = {
            "count": 0,
            "r1_sum": np.zeros(n),
            "r1_sq": np.zeros(n),
            "r2_sum": np.zeros(n),
            "r2_sq": np.zeros(n),
        }
    for _, xsum, rows, res in results:
        x_mean += xsum
        if res is not None:
            res_acc["count"] += rows
            res_acc["r1_sum"] += res[0]
            res_acc["r1_sq"] += res[1]
            res_acc["r2_sum"] += res[2]
            res_acc["r2_sq"] += res[3]
    x_mean /= n_paths

    overflow = ~np.isfinite(log_cost)
    return PathEnsemble(
        n_paths=n_paths,
        dt=dt,
        seed=seed,
        grid=grid,
        log_cost=log_cost,
        overflow=overflow,
        x_final=x_final,
        x_mean=x_mean,
        log_girsanov=log_gir,
        residual_acc=res_acc,
        meta={"y0": y0, "workers": int(workers or 1)},
    )


def _shifted_mean_std(values: np.ndarray) -> tuple[float, float, float]:
    """Mean and sample std of exp(values) via a max-shift; returns (shift, m, s).

    Reductions use exact summation, so the result is independent of path
    order (and therefore of any chunking of the ensemble).
    """
    shift = float(np.max(values))
    w = np.exp(values - shift)
    n = w.size
    m = math.fsum(w) / n
    s = math.sqrt(math.fsum((w - m) ** 2) / (n - 1)) if n > 1 else 0.0
    return shift, m, s


def estimate_cost(ens: PathEnsemble, theta: float) -> CostEstimate:
    """Sample estimate of the exponential cost and its certainty equivalent."""
    valid = ~ens.overflow
    n_eff = int(np.count_nonzero(valid))
    if n_eff == 0:
        raise AllPathsOverflowed(f"all {ens.n_paths} paths overflowed")
    lc = ens.log_cost[valid]
    shift, m, s = _shifted_mean_std(lc)
    log_j = shift + math.log(m)
    try:
        j = math.exp(log_j)
    except OverflowError:
        j = math.inf
    try:
        stderr = math.exp(shift) * s / math.sqrt(n_eff)
    except OverflowError:
        stderr = math.inf
    return CostEstimate(
        J_hat=j,
        stderr_J=stderr,
        CE_hat=log_j / theta,
        n_effective=n_eff,
        overflow_count=int(ens.n_paths - n_eff),
        max_weight_share=1.0 / (m * n_eff),
    )


def girsanov_check(ens: PathEnsemble) -> tuple[float, float]:
    """Sample mean of the change-of-measure weights and its standard error.

    The discrete weights form an exact martingale with unit mean, so the
    sample mean must be consistent with 1 at Monte Carlo resolution.
    """
    if ens.log_girsanov is None:
        raise MissingPrerequisite("ensemble carries no change-of-measure accumulators")
    valid = ~ens.overflow & np.isfinite(ens.log_girsanov)
    if not np.any(valid):
        raise MissingPrerequisite("no finite change-of-measure weights")
    shift, m, s = _shifted_mean_std(ens.log_girsanov[valid])
    scale = math.exp(shift)
    n_eff = int(np.count_nonzero(valid))
    return scale * m, scale * s / math.sqrt(n_eff)


def bsde_residuals(ens: PathEnsemble, spec: ProblemSpec, sol: RiccatiSolution) -> ResidualStats:
    """Finalize the streamed one-step defect statistics."""
    if ens.residual_acc is None:
        raise MissingPrerequisite("ensemble was simulated without a reference backward solution")
    acc = ens.residual_acc
    cnt = acc["count"]
    mean1 = acc["r1_sum"] / cnt
    rms1 = np.sqrt(acc["r1_sq"] / cnt)
    mean2 = acc["r2_sum"] / cnt
    rms2 = np.sqrt(acc["r2_sq"] / cnt)
    return ResidualStats(
        step_mean_backward=mean1,
        step_rms_backward=rms1,
        step_mean_value=mean2,
        step_rms_value=rms2,
        rms_backward=float(np.sqrt(np.mean(acc["r1_sq"] / cnt))),
        rms_value=float(np.sqrt(np.mean(acc["r2_sq"] / cnt))),
    )


def mc_summary_text(est: CostEstimate, ens: PathEnsemble,
                    girsanov: Optional[tuple[float, float]] = None) -> str:
    """Summary CSV content, one row per estimator."""
    import io

    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["estimator", "J_hat", "stderr", "CE_hat", "n_paths",
                "n_effective", "overflow_count", "dt", "seed"])
    w.writerow(
        [
            "cost",
            f"{est.J_hat:.17g}",
            f"{est.stderr_J:.17g}",
            f"{est.CE_hat:.17g}",
            ens.n_paths,
            est.n_effective,
            est.overflow_count,
            f"{ens.dt:.17g}",
            ens.seed,
        ]
    )
    if girsanov is not None:
        mw, se = girsanov
        w.writerow(
            [
                "girsanov",
                f"{mw:.17g}",
                f"{se:.17g}",
                "",
                ens.n_paths,
                est.n_effective,
                est.overflow_count,
                f"{ens.dt:.17g}",
                ens.seed,
            ]
        )
    return buf.getvalue()


def export_mc_summary_csv(path, est: CostEstimate, ens: PathEnsemble,
                          girsanov: Optional[tuple[float, float]] = None) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(mc_summary_text(est, ens, girsanov))


def export_path_dump_csv(path, ens: PathEnsemble) -> None:
    """Per-path accumulators (optional diagnostic output)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path_index", "log_cost", "log_girsanov"])
        for i in range(ens.n_paths):
            lg = ens.log_girsanov[i] if ens.log_girsanov is not None else ""
            lgs = f"{lg:.17g}" if lg != "" else ""
            w.writerow([i, f"{ens.log_cost[i]:.17g}", lgs])
