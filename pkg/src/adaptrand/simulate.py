"""Deterministic Monte Carlo over sequential trials.

``run_trial`` is the readable scalar reference: it executes one trial
patient by patient, drawing from a single replayable stream.
``monte_carlo`` replays the same per-replication computation in fixed
blocks of replications with numpy lockstep, which is 1-2 orders of
magnitude faster; replication ``i`` always draws from stream index
``i``, and results are assembled by replication index, so summaries are
bit-identical across parallelism settings and repeated runs.  The two
routes are held together by tests asserting per-replication equality.

Draw discipline per patient: one uniform for the assignment (urn rules:
one per ball draw, so immigration draws consume extras), then the
response draws (one uniform for binary, two for gaussian).  The
discipline is what makes common-random-number comparisons between coin
designs meaningful.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .asymptotics import normal_quantile
from .designs import (
    TIE_EPS,
    CompleteRandomization,
    Dbcd,
    DesignConfig,
    DropTheLoser,
    EfronCoin,
    Erade,
    ModifiedPlayTheWinner,
    PlayTheWinner,
    DesignError,
    burn_in_length,
    burn_in_probability,
    dbcd_probability,
    dl_draw,
    dl_update,
    efron_probability,
    erade_probability,
    estimate_target_proportion,
    format_design,
    rpw_draw,
    rpw_update,
    validate_design_for_model,
)
from .estimators import (
    MEAN_CLAMP,
    VAR_FLOOR_SCALE,
    BinaryEstimates,
    GaussianEstimates,
    shrunk_mean,
)
from .rng import RandomStream, normal_from_uniforms
from .targets import evaluate, format_target, params_from_estimates
from .trial import Bernoulli, ResponseModel, sample_response

# Replications are always processed in blocks of this many streams; the
# block layout is fixed so that the worker count can never change shapes
# (and therefore bits) of any intermediate array.
BLOCK = 512

_Z975 = normal_quantile(0.975)

__all__ = [
    "BLOCK",
    "TrialResult",
    "SimulationSummary",
    "BoxplotSummary",
    "run_trial",
    "monte_carlo",
    "boxplot_data",
]


@dataclass(frozen=True)
class TrialResult:
    """Final state of one simulated trial."""

    n1: int
    n2: int
    failures: int | None
    wald_reject: bool
    rho_final: float
    estimates: BinaryEstimates | GaussianEstimates


# ---------------------------------------------------------------------------
# Scalar reference path
# ---------------------------------------------------------------------------


def _scalar_estimates(
    design: DesignConfig,
    model: ResponseModel,
    counts: list[int],
    sums: list[float],
    sumsq: list[float],
) -> BinaryEstimates | GaussianEstimates:
    if isinstance(model, Bernoulli):
        return BinaryEstimates(
            p1=shrunk_mean(sums[0], counts[0], 0.5),
            p2=shrunk_mean(sums[1], counts[1], 0.5),
        )
    initial = design.initial_gaussian or GaussianEstimates(0.0, 0.0, 1.0, 1.0)
    mu = [initial.mu1, initial.mu2]
    var = [initial.var1, initial.var2]
    for k in (0, 1):
        if counts[k] >= 1:
            m = sums[k] / counts[k]
            raw = sumsq[k] / counts[k] - m * m
            mu[k] = m
            var[k] = max(raw, VAR_FLOOR_SCALE * max(1.0, m * m))
    return GaussianEstimates(mu1=mu[0], mu2=mu[1], var1=var[0], var2=var[1])


def _final_rho(
    design: DesignConfig,
    est: BinaryEstimates | GaussianEstimates,
) -> float:
    return estimate_target_proportion(design, est)


def _wald_reject_binary(s1: float, c1: int, s2: float, c2: int) -> bool:
    if c1 == 0 or c2 == 0:
        return False
    ph1, ph2 = s1 / c1, s2 / c2
    v1, v2 = ph1 * (1.0 - ph1), ph2 * (1.0 - ph2)
    if v1 <= 0.0 or v2 <= 0.0:
        return False
    se = np.sqrt(v1 / c1 + v2 / c2)
    return bool(abs(ph1 - ph2) > _Z975 * se)


def _wald_reject_gaussian(
    sm1: float, sq1: float, c1: int, sm2: float, sq2: float, c2: int
) -> bool:
    if c1 == 0 or c2 == 0:
        return False
    m1, m2 = sm1 / c1, sm2 / c2
    v1 = sq1 / c1 - m1 * m1
    v2 = sq2 / c2 - m2 * m2
    if v1 <= 0.0 or v2 <= 0.0:
        return False
    se = np.sqrt(v1 / c1 + v2 / c2)
    return bool(abs(m1 - m2) > _Z975 * se)


def run_trial(
    design: DesignConfig, model: ResponseModel, n: int, stream: RandomStream
) -> TrialResult:
    """Run one sequential trial of ``n`` patients; fully determined by the stream."""
    validate_design_for_model(design, model)
    burn = burn_in_length(design)
    if burn and n < burn:
        raise DesignError(f"n={n} is smaller than the burn-in of {burn} patients")
    rule = design.rule
    is_binary = isinstance(model, Bernoulli)

    n1 = 0
    counts = [0, 0]
    sums = [0.0, 0.0]
    sumsq = [0.0, 0.0]
    urn = rule.initial_urn() if isinstance(rule, (DropTheLoser, PlayTheWinner)) else None
    held_updates: list[tuple[int, bool]] = []

    for t in range(n):
        if isinstance(rule, DropTheLoser):
            while True:
                drawn, urn = dl_draw(urn, stream)
                if drawn is not None:
                    arm = drawn
                    break
        elif isinstance(rule, (ModifiedPlayTheWinner, PlayTheWinner)) and t >= burn:
            arm = rpw_draw(urn, stream)
        else:
            if isinstance(rule, CompleteRandomization):
                p = rule.p
            elif isinstance(rule, EfronCoin):
                p = efron_probability(rule.alpha, n1, t)
            elif t < burn:
                p = burn_in_probability(design, t, n1)
            else:
                est = _scalar_estimates(design, model, counts, sums, sumsq)
                params, _ = params_from_estimates(design.target, est)
                rho = evaluate(design.target, params)
                if isinstance(rule, Erade):
                    p = erade_probability(rule.alpha, rho, n1, t)
                else:
                    p = dbcd_probability(rule.gamma, rho, n1 / t) if t else rho
            arm = 1 if stream.uniform() < p else 2

        outcome = sample_response(model, arm, stream)
        x = outcome.value
        k = arm - 1
        counts[k] += 1
        sums[k] += x
        sumsq[k] += x * x
        if arm == 1:
            n1 += 1

        if isinstance(rule, DropTheLoser):
            urn = dl_update(urn, arm, outcome.success)
        elif isinstance(rule, (ModifiedPlayTheWinner, PlayTheWinner)):
            if t >= burn:
                urn = rpw_update(urn, arm, outcome.success)
            else:
                held_updates.append((arm, outcome.success))
                if t == burn - 1:
                    for held_arm, held_success in held_updates:
                        urn = rpw_update(urn, held_arm, held_success)

    est = _scalar_estimates(design, model, counts, sums, sumsq)
    if is_binary:
        failures = n - int(sums[0] + sums[1])
        reject = _wald_reject_binary(sums[0], counts[0], sums[1], counts[1])
    else:
        failures = None
        reject = _wald_reject_gaussian(
            sums[0], sumsq[0], counts[0], sums[1], sumsq[1], counts[1]
        )
    return TrialResult(
        n1=n1,
        n2=n - n1,
        failures=failures,
        wald_reject=reject,
        rho_final=_final_rho(design, est),
        estimates=est,
    )


# ---------------------------------------------------------------------------
# Vectorized lockstep blocks
# ---------------------------------------------------------------------------


def _draw_matrix(master_seed: int, start: int, count: int, per: int):
    streams = [RandomStream(master_seed, start + i) for i in range(count)]
    u = np.empty((count, per))
    for i, st in enumerate(streams):
        u[i] = st.uniforms(per)
    return u, streams


def _grow(u: np.ndarray, streams: list[RandomStream], grow: int) -> np.ndarray:
    extra = np.empty((len(streams), grow))
    for i, st in enumerate(streams):
        extra[i] = st.uniforms(grow)
    return np.concatenate([u, extra], axis=1)


def _vec_rho_binary(kind: str, s1, c1, s2, c2, rho0: float | None):
    if kind == "fixed":
        return np.full_like(s1, rho0, dtype=np.float64)
    p1 = (s1 + 0.5) / (c1 + 1.0)
    p2 = (s2 + 0.5) / (c2 + 1.0)
    if kind == "urn":
        return (1.0 - p2) / (2.0 - p1 - p2)
    if kind == "rsihr":
        a = np.sqrt(p1)
        b = np.sqrt(p2)
        return a / (a + b)
    a = np.sqrt(p1 * (1.0 - p1))
    b = np.sqrt(p2 * (1.0 - p2))
    return a / (a + b)


def _vec_rho_gaussian(kind: str, sm1, sq1, c1, sm2, sq2, c2, rho0: float | None):
    if kind == "fixed":
        return np.full_like(sm1, rho0, dtype=np.float64)
    m1 = sm1 / c1
    m2 = sm2 / c2
    v1 = np.maximum(sq1 / c1 - m1 * m1, VAR_FLOOR_SCALE * np.maximum(1.0, m1 * m1))
    v2 = np.maximum(sq2 / c2 - m2 * m2, VAR_FLOOR_SCALE * np.maximum(1.0, m2 * m2))
    t1 = np.sqrt(v1)
    t2 = np.sqrt(v2)
    if kind == "zr-gaussian":
        a = t1 * np.sqrt(np.maximum(m2, MEAN_CLAMP))
        b = t2 * np.sqrt(np.maximum(m1, MEAN_CLAMP))
        return a / (a + b)
    if kind == "neyman-gaussian":
        return t1 / (t1 + t2)
    a = t1 ** (4.0 / 3.0)
    b = t2 ** (4.0 / 3.0)
    return a / (a + b)


def _simulate_block(
    design: DesignConfig, model: ResponseModel, n: int, master_seed: int, start: int, count: int
):
    """Lockstep simulation of replications [start, start+count)."""
    rule = design.rule
    is_binary = isinstance(model, Bernoulli)
    resp_draws = 1 if is_binary else 2
    burn = burn_in_length(design)
    kind = design.target.kind if design.target is not None else None
    rho0 = design.target.rho0 if design.target is not None else None

    variable_draws = isinstance(rule, DropTheLoser)
    per = n * (1 + resp_draws) + (n + 64 if variable_draws else 0)
    u, streams = _draw_matrix(master_seed, start, count, per)

    n1 = np.zeros(count, dtype=np.int64)
    c1 = np.zeros(count, dtype=np.int64)
    c2 = np.zeros(count, dtype=np.int64)
    sm1 = np.zeros(count)
    sm2 = np.zeros(count)
    sq1 = np.zeros(count) if not is_binary else None
    sq2 = np.zeros(count) if not is_binary else None
    rows = np.arange(count)

    if isinstance(rule, (DropTheLoser, PlayTheWinner)):
        b1 = np.full(count, rule.balls1, dtype=np.int64)
        b2 = np.full(count, rule.balls2, dtype=np.int64)
        b0 = (
            np.full(count, rule.immigration, dtype=np.int64)
            if isinstance(rule, DropTheLoser)
            else None
        )
    cursor = np.zeros(count, dtype=np.int64) if variable_draws else None
    held: list[tuple[np.ndarray, np.ndarray]] = []

    for t in range(n):
        # --- assignment -----------------------------------------------
        if variable_draws:
            arm1 = np.zeros(count, dtype=bool)
            active = np.ones(count, dtype=bool)
            while active.any():
                if cursor.max() >= u.shape[1] - 1:
                    u = _grow(u, streams, n)
                idx = np.nonzero(active)[0]
                pick = u[idx, cursor[idx]] * (b1[idx] + b2[idx] + b0[idx])
                cursor[idx] += 1
                is1 = pick < b1[idx]
                is2 = ~is1 & (pick < b1[idx] + b2[idx])
                imm = ~is1 & ~is2
                b1[idx[is1]] -= 1
                b2[idx[is2]] -= 1
                b1[idx[imm]] += 1
                b2[idx[imm]] += 1
                arm1[idx[is1]] = True
                active[idx] = imm
            u_resp = u[rows, cursor]
            cursor += 1
        else:
            col = t * (1 + resp_draws)
            if isinstance(rule, (ModifiedPlayTheWinner, PlayTheWinner)) and t >= burn:
                # Mirrors the scalar draw u * total < balls1 bit for bit.
                arm1 = u[:, col] * (b1 + b2) < b1
                u_resp = u[:, col + 1]
                p = None
            elif isinstance(rule, CompleteRandomization):
                p = np.full(count, rule.p)
            elif isinstance(rule, EfronCoin):
                p = _vec_coin(rule.alpha, np.full(count, 0.5), n1, t)
            elif t < burn:
                p = (design.m0 - n1) / float(burn - t)
            else:
                if is_binary:
                    rho = _vec_rho_binary(kind, sm1, c1, sm2, c2, rho0)
                else:
                    rho = _vec_rho_gaussian(kind, sm1, sq1, c1, sm2, sq2, c2, rho0)
                if isinstance(rule, Erade):
                    p = _vec_coin(rule.alpha, rho, n1, t)
                else:
                    p = _vec_dbcd(rule.gamma, rho, n1, t)
            if p is not None:
                arm1 = u[:, col] < p
                u_resp = u[:, col + 1]

        # --- response --------------------------------------------------
        if is_binary:
            succ = u_resp < np.where(arm1, model.p1, model.p2)
            sm1 += arm1 & succ
            sm2 += ~arm1 & succ
        else:
            u2 = u[:, col + 2]
            z = normal_from_uniforms(u_resp, u2)
            x = np.where(arm1, model.mu1 + model.tau1 * z, model.mu2 + model.tau2 * z)
            sm1 += np.where(arm1, x, 0.0)
            sm2 += np.where(arm1, 0.0, x)
            sq1 += np.where(arm1, x * x, 0.0)
            sq2 += np.where(arm1, 0.0, x * x)
        c1 += arm1
        c2 += ~arm1
        n1 += arm1

        # --- urn bookkeeping -------------------------------------------
        if isinstance(rule, DropTheLoser):
            b1 += arm1 & succ
            b2 += ~arm1 & succ
        elif isinstance(rule, (ModifiedPlayTheWinner, PlayTheWinner)):
            if t >= burn:
                _rpw_vec_update(b1, b2, arm1, succ)
            else:
                held.append((arm1, succ))
                if t == burn - 1:
                    for h_arm1, h_succ in held:
                        _rpw_vec_update(b1, b2, h_arm1, h_succ)

    # --- final summaries ----------------------------------------------
    if isinstance(rule, CompleteRandomization):
        rho_final = np.full(count, rule.p)
    elif isinstance(rule, EfronCoin):
        rho_final = np.full(count, 0.5)
    else:
        final_kind = kind if kind is not None else "urn"
        final_rho0 = rho0
        if is_binary:
            rho_final = _vec_rho_binary(final_kind, sm1, c1, sm2, c2, final_rho0)
        else:
            rho_final = _vec_rho_gaussian(final_kind, sm1, sq1, c1, sm2, sq2, c2, final_rho0)

    if is_binary:
        failures = (n - sm1 - sm2).astype(np.int64)
        rejects = _vec_wald_binary(sm1, c1, sm2, c2)
    else:
        failures = None
        rejects = _vec_wald_gaussian(sm1, sq1, c1, sm2, sq2, c2)
    return n1, failures, rejects, rho_final


def _vec_coin(alpha: float, rho: np.ndarray, n1: np.ndarray, t: int) -> np.ndarray:
    gap = n1 - t * rho
    slack = TIE_EPS * t
    return np.where(
        gap > slack, alpha * rho, np.where(gap < -slack, 1.0 - alpha * (1.0 - rho), rho)
    )


def _vec_dbcd(gamma: float, rho: np.ndarray, n1: np.ndarray, t: int) -> np.ndarray:
    x = n1 / float(t) if t else np.full_like(rho, 0.5)
    xs = np.clip(x, 1e-300, 1.0 - 1e-16)
    num = rho * (rho / xs) ** gamma
    den = num + (1.0 - rho) * ((1.0 - rho) / (1.0 - xs)) ** gamma
    g = num / den
    return np.where(x <= 0.0, 1.0, np.where(x >= 1.0, 0.0, g))


def _rpw_vec_update(b1: np.ndarray, b2: np.ndarray, arm1: np.ndarray, succ: np.ndarray):
    add1 = arm1 == succ
    b1 += add1
    b2 += ~add1


def _vec_wald_binary(s1, c1, s2, c2) -> np.ndarray:
    ok = (c1 > 0) & (c2 > 0)
    c1s = np.maximum(c1, 1)
    c2s = np.maximum(c2, 1)
    ph1 = s1 / c1s
    ph2 = s2 / c2s
    v1 = ph1 * (1.0 - ph1)
    v2 = ph2 * (1.0 - ph2)
    ok &= (v1 > 0.0) & (v2 > 0.0)
    se = np.sqrt(np.maximum(v1 / c1s + v2 / c2s, 1e-300))
    return ok & (np.abs(ph1 - ph2) > _Z975 * se)


def _vec_wald_gaussian(sm1, sq1, c1, sm2, sq2, c2) -> np.ndarray:
    ok = (c1 > 0) & (c2 > 0)
    c1s = np.maximum(c1, 1)
    c2s = np.maximum(c2, 1)
    m1 = sm1 / c1s
    m2 = sm2 / c2s
    v1 = sq1 / c1s - m1 * m1
    v2 = sq2 / c2s - m2 * m2
    ok &= (v1 > 0.0) & (v2 > 0.0)
    se = np.sqrt(np.maximum(v1 / c1s + v2 / c2s, 1e-300))
    return ok & (np.abs(m1 - m2) > _Z975 * se)


# ---------------------------------------------------------------------------
# Replication harness and summaries
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoxplotSummary:
    """Five-number summary with 1.5*IQR outliers; quantiles by linear interpolation."""

    whisker_low: float
    q1: float
    median: float
    q3: float
    whisker_high: float
    outliers: tuple[float, ...]


def boxplot_data(values) -> BoxplotSummary:
    vals = np.asarray(values, dtype=np.float64)
    if vals.size < 1:
        raise ValueError("boxplot_data needs at least one value")
    q1, med, q3 = np.percentile(vals, [25.0, 50.0, 75.0])
    iqr = q3 - q1
    lo_fence = q1 - 1.5 * iqr
    hi_fence = q3 + 1.5 * iqr
    inside = vals[(vals >= lo_fence) & (vals <= hi_fence)]
    outliers = np.sort(vals[(vals < lo_fence) | (vals > hi_fence)])
    return BoxplotSummary(
        whisker_low=float(inside.min()),
        q1=float(q1),
        median=float(med),
        q3=float(q3),
        whisker_high=float(inside.max()),
        outliers=tuple(float(x) for x in outliers),
    )


@dataclass(frozen=True, eq=False)
class SimulationSummary:
    """Per-replication results plus the aggregate statistics reported in tables."""

    design: str
    target: str | None
    n: int
    reps: int
    master_seed: int
    n1: np.ndarray
    failures: np.ndarray | None
    rejects: np.ndarray
    rho_final: np.ndarray

    @property
    def proportions(self) -> np.ndarray:
        return self.n1 / self.n

    @property
    def mean_prop(self) -> float:
        return float(self.proportions.mean())

    @property
    def mean_prop_se(self) -> float:
        return float(self.proportions.std(ddof=1) / np.sqrt(self.reps))

    @property
    def n_var(self) -> float:
        """n times the sample variance of the allocation proportion."""
        return float(self.n * self.proportions.var(ddof=1))

    @property
    def n_var_se(self) -> float:
        # Normal-theory standard error of a sample variance.
        return float(self.n_var * np.sqrt(2.0 / (self.reps - 1)))

    @property
    def power(self) -> float:
        return float(self.rejects.mean())

    @property
    def power_se(self) -> float:
        p = self.power
        return float(np.sqrt(p * (1.0 - p) / self.reps))

    @property
    def mean_n1(self) -> float:
        return float(self.n1.mean())

    @property
    def mean_failures(self) -> float | None:
        if self.failures is None:
            return None
        return float(self.failures.mean())

    @property
    def mean_failures_se(self) -> float | None:
        if self.failures is None:
            return None
        return float(self.failures.std(ddof=1) / np.sqrt(self.reps))

    def quantile_n1(self, q: float) -> float:
        return float(np.percentile(self.n1, 100.0 * q))

    def count_n2_greater(self, threshold: int) -> int:
        return int(((self.n - self.n1) > threshold).sum())

    def count_n2_at_most(self, threshold: int) -> int:
        return int(((self.n - self.n1) <= threshold).sum())

    def count_n2_ge_n1(self) -> int:
        return int(((self.n - self.n1) >= self.n1).sum())

    def coupling_gap(self) -> float:
        """Mean |N1 - n * rho_hat_n| / sqrt(n), the target-tracking residual."""
        return float(np.abs(self.n1 - self.n * self.rho_final).mean() / np.sqrt(self.n))

    def boxplot_n1(self) -> BoxplotSummary:
        return boxplot_data(self.n1)

    def same_results(self, other: "SimulationSummary") -> bool:
        """Exact (bitwise) equality of all per-replication arrays."""
        if (self.failures is None) != (other.failures is None):
            return False
        fail_eq = (
            self.failures is None or np.array_equal(self.failures, other.failures)
        )
        return (
            self.n == other.n
            and self.reps == other.reps
            and np.array_equal(self.n1, other.n1)
            and fail_eq
            and np.array_equal(self.rejects, other.rejects)
            and np.array_equal(self.rho_final, other.rho_final)
        )


def _block_starts(reps: int) -> list[tuple[int, int]]:
    return [(s, min(BLOCK, reps - s)) for s in range(0, reps, BLOCK)]


def _run_block(args) -> tuple[int, tuple]:
    design, model, n, master_seed, start, count = args
    return start, _simulate_block(design, model, n, master_seed, start, count)


def monte_carlo(
    design: DesignConfig,
    model: ResponseModel,
    n: int,
    reps: int,
    master_seed: int = 0,
    parallelism: int = 1,
) -> SimulationSummary:
    """Replicate a trial ``reps`` times; replication i draws from stream i.

    The result is independent of ``parallelism``: work is split into
    fixed blocks of :data:`BLOCK` replications regardless of the worker
    count, and assembled by replication index.
    """
    validate_design_for_model(design, model)
    if reps < 2:
        raise DesignError(f"reps must be at least 2, got {reps}")
    burn = burn_in_length(design)
    if burn and n < burn:
        raise DesignError(f"n={n} is smaller than the burn-in of {burn} patients")

    is_binary = isinstance(model, Bernoulli)
    n1 = np.empty(reps, dtype=np.int64)
    failures = np.empty(reps, dtype=np.int64) if is_binary else None
    rejects = np.empty(reps, dtype=bool)
    rho_final = np.empty(reps)

    tasks = [(design, model, n, master_seed, s, c) for s, c in _block_starts(reps)]
    if parallelism > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            outputs = list(pool.map(_run_block, tasks))
    else:
        outputs = [_run_block(t) for t in tasks]

    for start, (b_n1, b_fail, b_rej, b_rho) in outputs:
        count = len(b_n1)
        n1[start : start + count] = b_n1
        if failures is not None:
            failures[start : start + count] = b_fail
        rejects[start : start + count] = b_rej
        rho_final[start : start + count] = b_rho

    return SimulationSummary(
        design=format_design(design),
        target=format_target(design.target) if design.target is not None else None,
        n=n,
        reps=reps,
        master_seed=master_seed,
        n1=n1,
        failures=failures,
        rejects=rejects,
        rho_final=rho_final,
    )
