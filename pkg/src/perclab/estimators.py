"""
Monte Carlo estimators with standard errors and deterministic seeding.

Sample i of an estimator draws its environment and colouring from streams addressed by
(seed, i, role), so results do not depend on the worker count. Stream tags never depend on p:
colourings at different p share their marks (common random numbers), which makes every
monotone indicator non-decreasing in p sample by sample.
"""

import math
import time
from functools import partial
from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .arms import ArmSpec, arm_event, dense_event, hat_arm_event
from .connectivity import Color, QuadSpec, crossing, disjoint_crossing_count
from .geometry import build_index
from .misc import DEFAULT_EPSILON0, DEFAULT_FILL_SPACING
from .pivotal import (
    EventSpec,
    PivGrid,
    PivMode,
    count_pivotal_points,
    explore_crossing,
    pivotal_grid,
)
from .project_logger import getMainLogger
from .randomness import SeedSpec, StreamRole, derive_stream
from .regions import Region, centered_rectangle
from .runner import SampleRunner
from .sampling import Configuration, Window, sample_coloring, sample_environment

_logger = getMainLogger()

DEFAULT_R_GRID = tuple(round(2 * math.sqrt(2) ** k, 6) for k in range(14))
"""
Geometric grid of ratio sqrt(2) from 2 to 181 for the correlation length
"""


###############
### RESULTS ###
###############


class Estimate(BaseModel):
    """
    Sample mean with its standard error
    """

    model_config = ConfigDict(frozen=True)

    value: float
    stderr: float = Field(ge=0)
    n: int = Field(ge=1)
    seed: SeedSpec
    wall_seconds: float = Field(default=0.0, ge=0)
    truncation_bound: float = Field(default=0.0, ge=0)

    @classmethod
    def from_indicators(cls, hits: Sequence[bool], seed: SeedSpec, **extra) -> "Estimate":
        """Indicator mean, stderr sqrt(v(1-v)/n); counts are exact integers"""
        n = len(hits)
        count = int(sum(bool(h) for h in hits))
        value = count / n
        return cls(value=value, stderr=math.sqrt(value * (1 - value) / n), n=n, seed=seed, **extra)

    @classmethod
    def from_values(cls, values: Sequence[float], seed: SeedSpec, **extra) -> "Estimate":
        """Mean of real values in sample order, stderr = sample std / sqrt(n)"""
        arr = np.asarray(values, dtype=float)
        n = len(arr)
        stderr = float(arr.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return cls(value=float(arr.mean()), stderr=stderr, n=n, seed=seed, **extra)


class NestedEstimate(BaseModel):
    """
    Quenched moments: mean of P^eta, E[(P^eta)^2] and Var(P^eta)
    """

    model_config = ConfigDict(frozen=True)

    mean: float
    second_moment: float
    variance: float
    n_env: int
    n_color: int
    mean_stderr: float
    second_moment_stderr: float
    variance_stderr: float
    seed: SeedSpec
    wall_seconds: float = 0.0


class ExponentFit(BaseModel):
    model_config = ConfigDict(frozen=True)

    slope: float
    slope_stderr: float
    intercept: float
    points: list[tuple[float, float, float]]
    """(log(r/R), log estimate, weight) of every point used"""

    def residuals(self) -> np.ndarray:
        x, y, _ = np.array(self.points).T
        return y - (self.slope * x + self.intercept)


class CorrelationLength(BaseModel):
    model_config = ConfigDict(frozen=True)

    L_hat: float | None
    beyond_grid: bool
    epsilon0: float
    curve: list[tuple[float, Estimate]]


class QuasiMultRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    triple: tuple[float, float, float]
    ratio: float | None
    stderr: float | None
    undefined: bool = False
    estimates: tuple[Estimate, Estimate, Estimate]
    """alpha(r1,r3), alpha(r1,r2), alpha(r2,r3)"""


class RussoReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    finite_diff: Estimate
    pivotal_sum: Estimate
    ratio: float | None


class ArmRatio(BaseModel):
    """
    alpha_{j,p}(1,R) / alpha_{j,1/2}(1,R) for j = 1 and 4; None where the p = 1/2 estimate is 0
    """

    model_config = ConfigDict(frozen=True)

    R: int
    alpha1_ratio: float | None
    alpha4_ratio: float | None


class ScalingRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    p: float
    L_hat: float | None
    beyond_grid: bool
    R: int | None = None
    theta_proxy: Estimate | None = None
    alpha1: Estimate | None = None
    alpha4: Estimate | None = None
    product: float | None = None
    theta_over_alpha1: float | None = None
    ladder: list[ArmRatio] = Field(default_factory=list)

    @property
    def max_alpha1_ratio(self) -> float | None:
        return _max_defined(r.alpha1_ratio for r in self.ladder)

    @property
    def max_alpha4_ratio(self) -> float | None:
        return _max_defined(r.alpha4_ratio for r in self.ladder)


def _max_defined(values) -> float | None:
    defined = [v for v in values if v is not None]
    return max(defined) if defined else None


class Revealment(BaseModel):
    model_config = ConfigDict(frozen=True)

    rho: float
    frequencies: dict[tuple[int, int], float]
    max: Estimate
    argmax: tuple[int, int] | None


class FkgReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    p_a: Estimate
    p_b: Estimate
    p_ab: Estimate
    margin: float
    margin_stderr: float


class BkReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_env: int
    n_color: int
    violations: int
    max_excess: float
    annealed_a: Estimate
    annealed_aa: Estimate

    @property
    def holds(self) -> bool:
        return self.violations == 0

    @property
    def annealed_holds(self) -> bool:
        """Reported only: P[A o A] <= P[A]^2 - 3 sigma is not enforced"""
        return self.annealed_aa.value <= self.annealed_a.value**2 + 3 * self.annealed_aa.stderr


class DenseReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    estimate: Estimate
    failure_bound: float


class PivotalSquares(BaseModel):
    model_config = ConfigDict(frozen=True)

    annealed: Estimate
    quenched_single_point: Estimate


#######################
### SAMPLE PLUMBING ###
#######################


def _check_p(p: float):
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0,1], got {p}")


def _check_n(n: int, name: str = "n"):
    if n < 1:
        raise ValueError(f"{name} must be >= 1, got {n}")


def _draw(seed: SeedSpec, i: int, window: Window, p: float, substream: int = 0) -> Configuration:
    """Sample i: environment from its own stream, colouring from the colour substream"""
    env = sample_environment(window, derive_stream(seed, i, StreamRole.ENVIRONMENT))
    return sample_coloring(env, p, derive_stream(seed, i, StreamRole.COLOR, substream))


def _timed(runner: SampleRunner, task, n: int, label: str) -> tuple[list, float]:
    start = time.perf_counter()
    results = runner.map(task, n, label)
    return results, time.perf_counter() - start


def _crossing_sample(i: int, seed: SeedSpec, window: Window, p: float, quad: QuadSpec) -> bool:
    config = _draw(seed, i, window, p)
    return crossing(config, build_index(config.env), quad).holds


def _arm_sample(i: int, seed: SeedSpec, window: Window, p: float, spec: ArmSpec) -> bool:
    config = _draw(seed, i, window, p)
    return arm_event(config, build_index(config.env), spec)


def _hat_sample(
    i: int, seed: SeedSpec, window: Window, p: float, spec: ArmSpec, inner_trials: int
) -> bool:
    config = _draw(seed, i, window, p)
    stream = derive_stream(seed, i, StreamRole.AUXILIARY)
    return hat_arm_event(config, build_index(config.env), spec, inner_trials, stream)


def _arm_window(spec: ArmSpec) -> Window:
    R = max(spec.R, spec.r)
    cx, cy = spec.center
    return Window.around(centered_rectangle(R, R, (cx, cy)))


##################
### ESTIMATORS ###
##################


def estimate_crossing(
    p: float,
    quad: QuadSpec,
    n: int,
    seed: SeedSpec,
    runner: SampleRunner | None = None,
    window: Window | None = None,
) -> Estimate:
    """
    P_p[crossing of quad] over n independent annealed samples
    """
    _check_p(p)
    _check_n(n)
    window = window or Window.around(quad.region)
    if not window.roi_box.buffer(1e-12).covers(quad.region.polygon):
        raise ValueError("Quad lies outside the ROI")
    task = partial(_crossing_sample, seed=seed, window=window, p=p, quad=quad)
    hits, wall = _timed(runner or SampleRunner(), task, n, f"crossing p={p}")
    return Estimate.from_indicators(
        hits, seed, wall_seconds=wall, truncation_bound=window.truncation_bound
    )


def estimate_arm(
    p: float, spec: ArmSpec, n: int, seed: SeedSpec, runner: SampleRunner | None = None
) -> Estimate:
    """
    alpha_{j,p}(r,R) = P_p[A_j(r,R)]; exactly 1 when r >= R
    """
    _check_p(p)
    _check_n(n)
    if spec.degenerate:
        return Estimate(value=1.0, stderr=0.0, n=n, seed=seed)
    window = _arm_window(spec)
    task = partial(_arm_sample, seed=seed, window=window, p=p, spec=spec)
    hits, wall = _timed(runner or SampleRunner(), task, n, f"A_{spec.j}({spec.r},{spec.R})")
    return Estimate.from_indicators(
        hits, seed, wall_seconds=wall, truncation_bound=window.truncation_bound
    )


def estimate_f_j(
    p: float,
    spec: ArmSpec,
    n: int,
    inner_trials: int,
    seed: SeedSpec,
    runner: SampleRunner | None = None,
) -> Estimate:
    """
    Probability of the conditional-positivity arm event. The completion search is one-sided,
    so this estimate is biased downwards.
    """
    _check_p(p)
    _check_n(n)
    if inner_trials < 0:
        raise ValueError(f"inner_trials must be >= 0, got {inner_trials}")
    if spec.degenerate:
        return Estimate(value=1.0, stderr=0.0, n=n, seed=seed)
    window = _arm_window(spec)
    task = partial(
        _hat_sample, seed=seed, window=window, p=p, spec=spec, inner_trials=inner_trials
    )
    hits, wall = _timed(runner or SampleRunner(), task, n, f"f_{spec.j}({spec.r},{spec.R})")
    return Estimate.from_indicators(
        hits, seed, wall_seconds=wall, truncation_bound=window.truncation_bound
    )


def _nested_sample(
    i: int, seed: SeedSpec, window: Window, p: float, event: EventSpec, n_color: int
) -> int:
    env = sample_environment(window, derive_stream(seed, i, StreamRole.ENVIRONMENT))
    index = build_index(env)
    hits = 0
    for k in range(n_color):
        config = sample_coloring(env, p, derive_stream(seed, i, StreamRole.COLOR, k))
        hits += event.evaluate(config, index)
    return hits


def estimate_nested(
    p: float,
    event: EventSpec,
    n_env: int,
    n_color: int,
    seed: SeedSpec,
    runner: SampleRunner | None = None,
) -> NestedEstimate:
    """
    Quenched mean, second moment and variance of P^eta[event].

    Per environment, S hits among m colourings give S/m for the mean and S(S-1)/(m(m-1)) for the
    second moment (distinct colouring pairs only, hence unbiased before the clamp to mean^2).
    """
    _check_p(p)
    if n_env < 2 or n_color < 2:
        raise ValueError(f"Need n_env >= 2 and n_color >= 2, got {n_env}, {n_color}")
    region = event.region
    if region is None:
        raise ValueError("Nested estimation needs an event with a region")
    window = Window.around(region)
    task = partial(_nested_sample, seed=seed, window=window, p=p, event=event, n_color=n_color)
    counts, wall = _timed(runner or SampleRunner(), task, n_env, "nested")

    s = np.asarray(counts, dtype=float)
    m = n_color
    first = s / m
    pair = s * (s - 1) / (m * (m - 1))
    mean = float(first.mean())
    # the pair estimate can fall below mean^2 at small n; clamp onto mean^2 <= second <= mean
    second = max(float(pair.mean()), mean**2)
    variance = second - mean**2
    # influence function of second - mean^2
    influence = pair - 2 * mean * first
    sqrt_n = math.sqrt(n_env)
    return NestedEstimate(
        mean=mean,
        second_moment=second,
        variance=variance,
        n_env=n_env,
        n_color=n_color,
        mean_stderr=float(first.std(ddof=1) / sqrt_n),
        second_moment_stderr=float(pair.std(ddof=1) / sqrt_n),
        variance_stderr=float(influence.std(ddof=1) / sqrt_n),
        seed=seed,
        wall_seconds=wall,
    )


def cross_2R_R(R: float, center: tuple[float, float] = (0.0, 0.0)) -> QuadSpec:
    """Cross(2R,R): black left-right crossing of [-2R,2R] x [-R,R]"""
    return QuadSpec.left_right(centered_rectangle(2 * R, R, center), Color.BLACK)


def estimate_correlation_length(
    p: float,
    epsilon0: float = DEFAULT_EPSILON0,
    R_grid: Sequence[float] = DEFAULT_R_GRID,
    n: int = 1000,
    seed: SeedSpec = SeedSpec(),
    runner: SampleRunner | None = None,
) -> CorrelationLength:
    """
    First grid scale whose lower 2-sigma bound on P_p[Cross(2R,R)] exceeds 1 - epsilon0, refined by
    log-linear interpolation with the previous grid point. None (beyond grid) if never reached.
    """
    if not p > 0.5:
        raise ValueError(f"Correlation length needs p > 1/2, got {p}")
    if not 0 < epsilon0 < 1:
        raise ValueError(f"epsilon0 must lie in (0,1), got {epsilon0}")
    grid = [float(R) for R in R_grid]
    if not grid:
        raise ValueError("Empty R grid")
    if any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] <= 0:
        raise ValueError(f"R grid must be positive and increasing, got {grid}")

    threshold = 1 - epsilon0
    curve = []
    lower_prev = None
    for k, R in enumerate(grid):
        est = estimate_crossing(p, cross_2R_R(R), n, seed.child(f"R={R:g}"), runner)
        curve.append((R, est))
        lower = est.value - 2 * est.stderr
        if lower > threshold:
            if k == 0:
                L = R
            else:
                t = (threshold - lower_prev) / (lower - lower_prev)
                t = min(max(t, 0.0), 1.0)
                L = math.exp(math.log(grid[k - 1]) + t * (math.log(R) - math.log(grid[k - 1])))
            _logger.info(f"Correlation length at p={p}: L_hat = {L:.4g}")
            return CorrelationLength(L_hat=L, beyond_grid=False, epsilon0=epsilon0, curve=curve)
        lower_prev = lower
    _logger.warning(f"Correlation length at p={p} is beyond the grid (max R={grid[-1]:g})")
    return CorrelationLength(L_hat=None, beyond_grid=True, epsilon0=epsilon0, curve=curve)


def _theta_sample(i: int, seed: SeedSpec, window: Window, p: float, specs: list[ArmSpec]) -> list[bool]:
    config = _draw(seed, i, window, p)
    index = build_index(config.env)
    return [arm_event(config, index, spec) for spec in specs]


def estimate_theta_proxy(
    p: float,
    R_list: Sequence[float],
    n: int,
    seed: SeedSpec,
    runner: SampleRunner | None = None,
) -> list[tuple[float, Estimate]]:
    """
    One-arm probabilities P_p[A_1(1,R)]; theta(p) is their limit as R grows.
    All radii are read off the same samples, so the sequence is non-increasing sample by sample.
    """
    _check_p(p)
    _check_n(n)
    if not R_list:
        raise ValueError("Empty R list")
    specs = [ArmSpec(j=1, r=1.0, R=float(R)) for R in R_list]
    window = _arm_window(max(specs, key=lambda s: s.R))
    task = partial(_theta_sample, seed=seed, window=window, p=p, specs=specs)
    rows, wall = _timed(runner or SampleRunner(), task, n, f"theta proxy p={p}")
    hits = np.array(rows, dtype=bool).reshape(n, len(specs))
    return [
        (
            float(spec.R),
            Estimate.from_indicators(
                hits[:, k], seed, wall_seconds=wall, truncation_bound=window.truncation_bound
            ),
        )
        for k, spec in enumerate(specs)
    ]


def quasi_mult_table(
    j: int,
    triples: Sequence[tuple[float, float, float]],
    p: float,
    n: int,
    seed: SeedSpec,
    runner: SampleRunner | None = None,
) -> list[QuasiMultRecord]:
    """
    alpha(r1,r3) / (alpha(r1,r2) alpha(r2,r3)) per triple, delta-method error.
    Each annulus has its own seed tag, so repeated annuli reuse one estimate.
    """
    cache: dict[tuple[float, float], Estimate] = {}

    def alpha(r: float, R: float) -> Estimate:
        key = (float(r), float(R))
        if key not in cache:
            cache[key] = estimate_arm(
                p, ArmSpec(j=j, r=r, R=R), n, seed.child(f"A({r:g},{R:g})"), runner
            )
        return cache[key]

    records = []
    for triple in triples:
        r1, r2, r3 = (float(v) for v in triple)
        if not 1 <= r1 <= r2 <= r3:
            raise ValueError(f"Need 1 <= r1 <= r2 <= r3, got {triple}")
        a13, a12, a23 = alpha(r1, r3), alpha(r1, r2), alpha(r2, r3)
        if min(a13.value, a12.value, a23.value) <= 0:
            _logger.warning(f"Zero arm estimate for triple {triple}: ratio undefined")
            records.append(
                QuasiMultRecord(
                    triple=(r1, r2, r3), ratio=None, stderr=None, undefined=True,
                    estimates=(a13, a12, a23),
                )
            )
            continue
        ratio = a13.value / (a12.value * a23.value)
        if a13 is a12 or a13 is a23:
            # r1 = r2 or r2 = r3: the ratio is 1 / alpha(r,r) = 1 with no error
            rel = 0.0
        else:
            rel = math.sqrt(sum((e.stderr / e.value) ** 2 for e in (a13, a12, a23)))
        records.append(
            QuasiMultRecord(
                triple=(r1, r2, r3), ratio=ratio, stderr=ratio * rel, estimates=(a13, a12, a23)
            )
        )
    return records


def fit_exponent(points: Sequence[tuple[float, float, Estimate]]) -> ExponentFit:
    """
    Weighted least squares of log alpha against log(r/R); the slope estimates the exponent.

    Nonpositive estimates are dropped with a warning. Points with r/R > 1/4 are dropped when at
    least 4 points remain. Weights are 1/relative-variance; all-zero errors give an unweighted fit.
    """
    usable = []
    for r, R, est in points:
        if est.value <= 0:
            _logger.warning(f"Nonpositive estimate at r={r}, R={R} excluded from the fit")
            continue
        usable.append((float(r), float(R), est))
    close = [u for u in usable if u[0] / u[1] <= 0.25]
    if len(close) >= 4:
        usable = close
    if len(usable) < 3:
        raise ValueError(f"Need at least 3 usable points for a fit, got {len(usable)}")

    x = np.array([math.log(r / R) for r, R, _ in usable])
    y = np.array([math.log(est.value) for _, _, est in usable])
    rel = np.array([est.stderr / est.value for _, _, est in usable])
    if np.all(rel == 0):
        w = np.ones_like(x)
        # residual-scaled covariance needs more points than coefficients + 2
        coef, cov = np.polyfit(x, y, 1, cov=True if len(x) > 3 else "unscaled")
    else:
        rel = np.where(rel > 0, rel, rel[rel > 0].min())
        w = 1 / rel
        coef, cov = np.polyfit(x, y, 1, w=w, cov="unscaled")
    slope, intercept = float(coef[0]), float(coef[1])
    return ExponentFit(
        slope=slope,
        slope_stderr=float(math.sqrt(max(cov[0, 0], 0.0))),
        intercept=intercept,
        points=[(float(a), float(b), float(c**2)) for a, b, c in zip(x, y, w)],
    )


def _russo_sample(
    i: int, seed: SeedSpec, window: Window, p: float, dp: float, quad: QuadSpec
) -> tuple[float, int]:
    config = _draw(seed, i, window, p)
    index = build_index(config.env)
    high = crossing(config.at_p(p + dp), index, quad).holds
    low = crossing(config.at_p(p - dp), index, quad).holds
    return (int(high) - int(low)) / (2 * dp), count_pivotal_points(config, index, quad)


def russo_check(
    p: float,
    R: float,
    dp: float,
    n: int,
    seed: SeedSpec,
    runner: SampleRunner | None = None,
) -> RussoReport:
    """
    Finite difference of P_p[Cross(2R,R)] with common random numbers against the mean number of
    quenched-pivotal points at p
    """
    if dp <= 0 or p - dp < 0 or p + dp > 1:
        raise ValueError(f"Need dp > 0 and 0 <= p - dp, p + dp <= 1, got p={p}, dp={dp}")
    _check_n(n)
    quad = cross_2R_R(R)
    window = Window.around(quad.region)
    task = partial(_russo_sample, seed=seed, window=window, p=p, dp=dp, quad=quad)
    rows, wall = _timed(runner or SampleRunner(), task, n, f"russo R={R}")
    extra = dict(wall_seconds=wall, truncation_bound=window.truncation_bound)
    diff = Estimate.from_values([d for d, _ in rows], seed, **extra)
    piv = Estimate.from_values([c for _, c in rows], seed, **extra)
    return RussoReport(
        finite_diff=diff, pivotal_sum=piv, ratio=diff.value / piv.value if piv.value else None
    )


def scaling_relation_report(
    p_list: Sequence[float],
    epsilon0: float = DEFAULT_EPSILON0,
    n_budget: int = 1000,
    seed: SeedSpec = SeedSpec(),
    R_grid: Sequence[float] = DEFAULT_R_GRID,
    runner: SampleRunner | None = None,
) -> list[ScalingRow]:
    """
    Per p: L_hat, the one-arm proxy at p and alpha_1, alpha_4 at p = 1/2 on A(1, round(L_hat)),
    the product (p - 1/2) L_hat^2 alpha_4 and the ratios alpha_{j,p} / alpha_{j,1/2} over ratio_radii
    """
    for p in p_list:
        if not 0.5 < p <= 0.75:
            raise ValueError(f"Scaling report needs p in (1/2, 3/4], got {p}")
    rows = []
    for p in p_list:
        corr = estimate_correlation_length(
            p, epsilon0, R_grid, n_budget, seed.child("corr-length"), runner
        )
        if corr.L_hat is None:
            rows.append(ScalingRow(p=p, L_hat=None, beyond_grid=True))
            continue
        R = max(2, round(corr.L_hat))
        ladder, (theta, alpha1, alpha4) = arm_ratio_ladder(p, R, n_budget, seed, runner)
        rows.append(
            ScalingRow(
                p=p,
                L_hat=corr.L_hat,
                beyond_grid=False,
                R=R,
                theta_proxy=theta,
                alpha1=alpha1,
                alpha4=alpha4,
                product=(p - 0.5) * corr.L_hat**2 * alpha4.value,
                theta_over_alpha1=theta.value / alpha1.value if alpha1.value else None,
                ladder=ladder,
            )
        )
    return rows


def ratio_radii(R: int) -> list[int]:
    """Doubling ladder 2, 4, 8, ... below [R], closed by R itself"""
    radii = []
    r = 2
    while r < R:
        radii.append(r)
        r *= 2
    return radii + [R]


def arm_ratio_ladder(
    p: float, R: int, n: int, seed: SeedSpec, runner: SampleRunner | None = None
) -> tuple[list[ArmRatio], tuple[Estimate, Estimate, Estimate]]:
    """
    alpha_{j,p}(1,R') / alpha_{j,1/2}(1,R') for j in {1,4} on ratio_radii(R). Also returns
    alpha_{1,p}, alpha_{1,1/2} and alpha_{4,1/2} at R' = R.
    """
    ladder = []
    for radius in ratio_radii(R):
        # same tags at both p: colourings are coupled
        a1_seed, a4_seed = seed.child(f"A1(1,{radius})"), seed.child(f"A4(1,{radius})")
        one, four = ArmSpec(j=1, r=1, R=radius), ArmSpec(j=4, r=1, R=radius)
        a1_p = estimate_arm(p, one, n, a1_seed, runner)
        a1_half = estimate_arm(0.5, one, n, a1_seed, runner)
        a4_p = estimate_arm(p, four, n, a4_seed, runner)
        a4_half = estimate_arm(0.5, four, n, a4_seed, runner)
        ladder.append(
            ArmRatio(
                R=radius,
                alpha1_ratio=a1_p.value / a1_half.value if a1_half.value else None,
                alpha4_ratio=a4_p.value / a4_half.value if a4_half.value else None,
            )
        )
    return ladder, (a1_p, a1_half, a4_half)


def _revealment_sample(
    i: int, seed: SeedSpec, window: Window, p: float, rect: Region, rho: float
) -> list[tuple[int, int]]:
    config = _draw(seed, i, window, p)
    _, queried = explore_crossing(config, build_index(config.env), rect)
    pts = config.env.points[sorted(queried)]
    squares = {(int(math.floor(x / rho)), int(math.floor(y / rho))) for x, y in pts}
    return sorted(squares)


def estimate_revealment(
    p: float,
    rect: Region,
    n: int,
    rho: float,
    seed: SeedSpec,
    runner: SampleRunner | None = None,
) -> Revealment:
    """
    Fraction of samples in which the exploration queries a point of each square
    [rho sx, rho (sx+1)] x [rho sy, rho (sy+1)]. The maximum is taken over squares reaching below
    the horizontal midline of [rect].
    """
    _check_p(p)
    _check_n(n)
    if rho <= 0:
        raise ValueError(f"rho must be > 0, got {rho}")
    window = Window.around(rect)
    task = partial(_revealment_sample, seed=seed, window=window, p=p, rect=rect, rho=rho)
    per_sample, wall = _timed(runner or SampleRunner(), task, n, "revealment")
    counts: dict[tuple[int, int], int] = {}
    for squares in per_sample:
        for sq in squares:
            counts[tuple(sq)] = counts.get(tuple(sq), 0) + 1
    frequencies = {sq: c / n for sq, c in sorted(counts.items())}
    _, y0, _, y1 = rect.bounds
    midline = (y0 + y1) / 2
    lower = {sq: f for sq, f in frequencies.items() if sq[1] * rho <= midline}
    argmax = max(lower, key=lambda sq: (lower[sq], sq)) if lower else None
    top = lower[argmax] if argmax else 0.0
    return Revealment(
        rho=rho,
        frequencies=frequencies,
        max=Estimate(
            value=top, stderr=math.sqrt(top * (1 - top) / n), n=n, seed=seed, wall_seconds=wall,
            truncation_bound=window.truncation_bound,
        ),
        argmax=argmax,
    )


def _fkg_sample(
    i: int, seed: SeedSpec, window: Window, p: float, quads: tuple[QuadSpec, QuadSpec]
) -> tuple[bool, bool]:
    config = _draw(seed, i, window, p)
    index = build_index(config.env)
    return tuple(crossing(config, index, quad).holds for quad in quads)


def fkg_check(
    p: float,
    quad_a: QuadSpec,
    quad_b: QuadSpec,
    n: int,
    seed: SeedSpec,
    runner: SampleRunner | None = None,
) -> FkgReport:
    """
    Annealed positive-correlation check on two crossings: margin P[A and B] - P[A] P[B]
    """
    _check_p(p)
    _check_n(n, "n")
    union = quad_a.region.polygon.union(quad_b.region.polygon)
    window = Window.around(union.envelope)
    task = partial(_fkg_sample, seed=seed, window=window, p=p, quads=(quad_a, quad_b))
    rows, wall = _timed(runner or SampleRunner(), task, n, "fkg")
    a = np.array([r[0] for r in rows], dtype=float)
    b = np.array([r[1] for r in rows], dtype=float)
    extra = dict(wall_seconds=wall, truncation_bound=window.truncation_bound)
    pa, pb = Estimate.from_indicators(a, seed, **extra), Estimate.from_indicators(b, seed, **extra)
    pab = Estimate.from_indicators(a * b, seed, **extra)
    influence = a * b - pb.value * a - pa.value * b
    margin_stderr = float(influence.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return FkgReport(
        p_a=pa,
        p_b=pb,
        p_ab=pab,
        margin=pab.value - pa.value * pb.value,
        margin_stderr=margin_stderr,
    )


def _bk_sample(
    i: int, seed: SeedSpec, window: Window, p: float, quad: QuadSpec, n_color: int
) -> tuple[int, int]:
    env = sample_environment(window, derive_stream(seed, i, StreamRole.ENVIRONMENT))
    index = build_index(env)
    once = twice = 0
    for k in range(n_color):
        config = sample_coloring(env, p, derive_stream(seed, i, StreamRole.COLOR, k))
        count = disjoint_crossing_count(config, index, quad, limit=2)
        once += count >= 1
        twice += count >= 2
    return once, twice


def quenched_bk_check(
    p: float,
    quad: QuadSpec,
    n_env: int,
    n_color: int,
    seed: SeedSpec,
    runner: SampleRunner | None = None,
) -> BkReport:
    """
    Quenched BK check on fixed environments: P^eta[A o A] <= P^eta[A]^2, where A o A means two
    cell-disjoint crossings. An environment violates it when the excess is beyond 3 sigma.
    """
    _check_p(p)
    if n_env < 1 or n_color < 2:
        raise ValueError(f"Need n_env >= 1 and n_color >= 2, got {n_env}, {n_color}")
    window = Window.around(quad.region)
    task = partial(_bk_sample, seed=seed, window=window, p=p, quad=quad, n_color=n_color)
    rows, wall = _timed(runner or SampleRunner(), task, n_env, "quenched BK")
    m = n_color
    violations = 0
    max_excess = -math.inf
    for once, twice in rows:
        pa, paa = once / m, twice / m
        sigma = math.sqrt((paa * (1 - paa) + (2 * pa) ** 2 * pa * (1 - pa)) / m)
        excess = paa - pa**2
        max_excess = max(max_excess, excess)
        if excess > 3 * sigma + 1e-12:
            violations += 1
    if violations:
        _logger.error(f"Quenched BK inequality violated on {violations}/{n_env} environments")
    extra = dict(wall_seconds=wall, truncation_bound=window.truncation_bound)
    return BkReport(
        n_env=n_env,
        n_color=n_color,
        violations=violations,
        max_excess=max_excess,
        annealed_a=Estimate.from_values([o / m for o, _ in rows], seed, **extra),
        annealed_aa=Estimate.from_values([t / m for _, t in rows], seed, **extra),
    )


def _dense_sample(i: int, seed: SeedSpec, window: Window, region: Region, delta: float) -> bool:
    env = sample_environment(window, derive_stream(seed, i, StreamRole.ENVIRONMENT))
    return dense_event(env, region, delta)


def estimate_dense(
    delta: float, R: float, n: int, seed: SeedSpec, runner: SampleRunner | None = None
) -> DenseReport:
    """
    P[Dense_delta(B_R)] and the covering bound delta^-2 exp(-(delta R)^2 / 2) on its complement
    (unit constant)
    """
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0,1), got {delta}")
    _check_n(n)
    region = centered_rectangle(R, R)
    window = Window.around(region)
    task = partial(_dense_sample, seed=seed, window=window, region=region, delta=delta)
    hits, wall = _timed(runner or SampleRunner(), task, n, f"dense R={R}")
    return DenseReport(
        estimate=Estimate.from_indicators(
            hits, seed, wall_seconds=wall, truncation_bound=window.truncation_bound
        ),
        failure_bound=delta**-2 * math.exp(-((delta * R) ** 2) / 2),
    )


def _pivgrid_sample(
    i: int, seed: SeedSpec, window: Window, p: float, R: float, rho: float, fill_spacing: float
) -> tuple[int, int]:
    grid = pivotal_grid_sample(i, seed, window, p, R, rho, fill_spacing)
    return grid.count(PivMode.ANNEALED), grid.count_single_point()


def pivotal_grid_sample(
    i: int, seed: SeedSpec, window: Window, p: float, R: float, rho: float, fill_spacing: float
) -> PivGrid:
    """The pivotal grid of Cross(2R,R) on sample i"""
    config = _draw(seed, i, window, p)
    event = EventSpec(quad=cross_2R_R(R))
    return pivotal_grid(
        config, build_index(config.env), event, rho, PivMode.BOTH, fill_spacing=fill_spacing
    )


def estimate_pivotal_squares(
    p: float,
    R: float,
    rho: float,
    n: int,
    seed: SeedSpec,
    fill_spacing: float = DEFAULT_FILL_SPACING,
    runner: SampleRunner | None = None,
) -> PivotalSquares:
    """
    Mean number of annealed-pivotal grid squares for Cross(2R,R), and of quenched-pivotal
    squares holding exactly one point
    """
    _check_p(p)
    _check_n(n)
    window = Window.around(cross_2R_R(R).region)
    task = partial(
        _pivgrid_sample, seed=seed, window=window, p=p, R=R, rho=rho, fill_spacing=fill_spacing
    )
    rows, wall = _timed(runner or SampleRunner(), task, n, f"pivotal grid R={R}")
    extra = dict(wall_seconds=wall, truncation_bound=window.truncation_bound)
    return PivotalSquares(
        annealed=Estimate.from_values([a for a, _ in rows], seed, **extra),
        quenched_single_point=Estimate.from_values([q for _, q in rows], seed, **extra),
    )
