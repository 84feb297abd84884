"""
Experiment dispatch: run the estimators named by an ExperimentConfig and write
`<output>.csv`, `<output>.meta` and, for curve-valued experiments, `<output>.dat`.
"""

import platform
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Callable

import numpy as np
import scipy
import shapely

from .arms import ArmSpec
from .config_models import (
    ArmParams,
    BkParams,
    CorrLengthParams,
    CrossingParams,
    DenseParams,
    Experiment,
    ExperimentConfig,
    ExponentFitParams,
    FjParams,
    FkgParams,
    NestedParams,
    PivgridParams,
    QuasiMultParams,
    RevealmentParams,
    RussoParams,
    ScalingReportParams,
    SelftestParams,
    ThetaParams,
)
from .connectivity import QuadSpec
from .estimators import (
    DEFAULT_R_GRID,
    Estimate,
    estimate_arm,
    estimate_correlation_length,
    estimate_crossing,
    estimate_dense,
    estimate_f_j,
    estimate_nested,
    estimate_pivotal_squares,
    estimate_revealment,
    estimate_theta_proxy,
    fit_exponent,
    fkg_check,
    pivotal_grid_sample,
    quasi_mult_table,
    quenched_bk_check,
    russo_check,
    scaling_relation_report,
    cross_2R_R,
)
from .misc import APPNAME
from .output import PlotKind, emit_plot_data, write_csv, write_meta
from .pivotal import EventSpec, write_pivgrid_csv
from .process_mgmt import available_memory_mb
from .project_logger import getMainLogger
from .randomness import SeedSpec
from .regions import centered_rectangle, rectangle
from .runner import SampleRunner
from .sampling import Window

_logger = getMainLogger()


@dataclass
class ExperimentResult:
    header: list[str]
    rows: list[list] = field(default_factory=list)
    row_wall_seconds: list[float] = field(default_factory=list)
    plot: tuple[PlotKind, list] | None = None
    summary: dict = field(default_factory=dict)
    passed: bool = True

    def add(self, row: list, wall: float = 0.0):
        self.rows.append(row)
        self.row_wall_seconds.append(round(wall, 6))


_BASE = ["master_seed", "experiment_tag", "n"]
_HANDLERS: dict[Experiment, Callable] = {}


def _handles(experiment: Experiment):
    def register(func):
        _HANDLERS[experiment] = func
        return func

    return register


def _base(seed: SeedSpec, n: int) -> list:
    return [seed.master_seed, seed.experiment_tag, n]


def _est(est: Estimate | None) -> list:
    return [None, None] if est is None else [est.value, est.stderr]


@_handles(Experiment.CROSSING)
def _crossing(params: CrossingParams, seed: SeedSpec, runner: SampleRunner) -> ExperimentResult:
    rect = centered_rectangle(params.rho1, params.rho2)
    quad = (
        QuadSpec.left_right(rect, params.color)
        if params.direction == "left-right"
        else QuadSpec.bottom_top(rect, params.color)
    )
    result = ExperimentResult(
        _BASE + ["p", "rho1", "rho2", "direction", "color", "value", "stderr", "truncation_bound"]
    )
    curve = []
    # one seed for every p: coupled colourings
    for p in params.p:
        est = estimate_crossing(p, quad, params.n, seed, runner)
        result.add(
            _base(seed, est.n)
            + [p, params.rho1, params.rho2, params.direction, str(params.color)]
            + _est(est)
            + [est.truncation_bound],
            est.wall_seconds,
        )
        curve.append((p, est))
    result.plot = (PlotKind.CURVE, curve)
    return result


def _arm_spec(params: ArmParams, R: float) -> ArmSpec:
    return ArmSpec(j=params.j, r=params.r, R=R, sector=params.sector, wedge=params.wedge)


_ARM_COLUMNS = ["p", "j", "r", "R", "sector"]


def _arm_rows(params: ArmParams, seed: SeedSpec, runner: SampleRunner, result: ExperimentResult):
    points = []
    for R in params.R:
        tagged = seed.child(f"R={R:g}")
        est = estimate_arm(params.p, _arm_spec(params, R), params.n, tagged, runner)
        result.add(
            _base(tagged, est.n)
            + [params.p, params.j, params.r, R, str(params.sector)]
            + _est(est)
            + [est.truncation_bound],
            est.wall_seconds,
        )
        points.append((params.r, R, est))
    return points


@_handles(Experiment.ARM)
def _arm(params: ArmParams, seed: SeedSpec, runner: SampleRunner) -> ExperimentResult:
    result = ExperimentResult(_BASE + _ARM_COLUMNS + ["value", "stderr", "truncation_bound"])
    result.plot = (PlotKind.LOGLOG, _arm_rows(params, seed, runner, result))
    return result


@_handles(Experiment.EXPONENT_FIT)
def _exponent_fit(
    params: ExponentFitParams, seed: SeedSpec, runner: SampleRunner
) -> ExperimentResult:
    result = ExperimentResult(_BASE + _ARM_COLUMNS + ["value", "stderr", "truncation_bound"])
    points = _arm_rows(params, seed, runner, result)
    fit = fit_exponent(points)
    result.plot = (PlotKind.LOGLOG, points)
    result.summary = {
        "slope": fit.slope,
        "slope_stderr": fit.slope_stderr,
        "intercept": fit.intercept,
        "points_used": len(fit.points),
    }
    return result


@_handles(Experiment.F_J)
def _f_j(params: FjParams, seed: SeedSpec, runner: SampleRunner) -> ExperimentResult:
    result = ExperimentResult(
        _BASE + _ARM_COLUMNS + ["inner_trials", "f_value", "f_stderr", "alpha_value", "alpha_stderr"]
    )
    curve = []
    for R in params.R:
        tagged = seed.child(f"R={R:g}")
        spec = _arm_spec(params, R)
        f = estimate_f_j(params.p, spec, params.n, params.inner_trials, tagged, runner)
        alpha = estimate_arm(params.p, spec, params.n, tagged, runner)
        result.add(
            _base(tagged, f.n)
            + [params.p, params.j, params.r, R, str(params.sector), params.inner_trials]
            + _est(f)
            + _est(alpha),
            f.wall_seconds + alpha.wall_seconds,
        )
        curve.append((R, f))
    result.plot = (PlotKind.CURVE, curve)
    return result


@_handles(Experiment.NESTED)
def _nested(params: NestedParams, seed: SeedSpec, runner: SampleRunner) -> ExperimentResult:
    result = ExperimentResult(
        _BASE
        + ["n_color", "p", "event", "R", "mean", "mean_stderr", "second_moment"]
        + ["second_moment_stderr", "variance", "variance_stderr"]
    )
    curve = []
    for R in params.R:
        tagged = seed.child(f"R={R:g}")
        if params.event == "crossing":
            event = EventSpec(quad=QuadSpec.left_right(centered_rectangle(params.aspect * R, R)))
        else:
            event = EventSpec(arm=ArmSpec(j=params.j, r=params.r, R=R))
        est = estimate_nested(params.p, event, params.n_env, params.n_color, tagged, runner)
        result.add(
            _base(tagged, est.n_env)
            + [est.n_color, params.p, params.event, R, est.mean, est.mean_stderr]
            + [est.second_moment, est.second_moment_stderr, est.variance, est.variance_stderr],
            est.wall_seconds,
        )
        curve.append(
            (R, Estimate(value=est.variance, stderr=est.variance_stderr, n=est.n_env, seed=tagged))
        )
    result.plot = (PlotKind.CURVE, curve)
    return result


@_handles(Experiment.CORR_LENGTH)
def _corr_length(params: CorrLengthParams, seed: SeedSpec, runner: SampleRunner) -> ExperimentResult:
    result = ExperimentResult(
        _BASE + ["p", "R", "value", "stderr", "epsilon0", "L_hat", "beyond_grid"]
    )
    curve = []
    summary = {}
    for p in params.p:
        corr = estimate_correlation_length(
            p, params.epsilon0, params.R_grid or DEFAULT_R_GRID, params.n, seed, runner
        )
        for R, est in corr.curve:
            result.add(
                _base(est.seed, est.n)
                + [p, R]
                + _est(est)
                + [params.epsilon0, corr.L_hat, corr.beyond_grid],
                est.wall_seconds,
            )
            curve.append((R, est))
        summary[f"L_hat(p={p})"] = corr.L_hat
    result.plot = (PlotKind.CURVE, curve)
    result.summary = summary
    return result


@_handles(Experiment.THETA)
def _theta(params: ThetaParams, seed: SeedSpec, runner: SampleRunner) -> ExperimentResult:
    result = ExperimentResult(_BASE + ["p", "R", "value", "stderr", "truncation_bound"])
    curve = estimate_theta_proxy(params.p, params.R, params.n, seed, runner)
    for R, est in curve:
        # all radii share the samples and the wall time
        result.add(
            _base(seed, est.n) + [params.p, R] + _est(est) + [est.truncation_bound],
            est.wall_seconds / len(curve),
        )
    result.plot = (PlotKind.CURVE, curve)
    return result


@_handles(Experiment.QUASI_MULT)
def _quasi_mult(params: QuasiMultParams, seed: SeedSpec, runner: SampleRunner) -> ExperimentResult:
    result = ExperimentResult(
        _BASE
        + ["p", "j", "r1", "r2", "r3", "ratio", "stderr", "undefined"]
        + ["alpha_r1_r3", "alpha_r1_r2", "alpha_r2_r3"]
    )
    for rec in quasi_mult_table(params.j, params.triples, params.p, params.n, seed, runner):
        a13, a12, a23 = rec.estimates
        result.add(
            _base(seed, params.n)
            + [params.p, params.j, *rec.triple, rec.ratio, rec.stderr, rec.undefined]
            + [a13.value, a12.value, a23.value],
            sum(e.wall_seconds for e in rec.estimates),
        )
    return result


@_handles(Experiment.RUSSO)
def _russo(params: RussoParams, seed: SeedSpec, runner: SampleRunner) -> ExperimentResult:
    result = ExperimentResult(
        _BASE
        + ["p", "dp", "R", "finite_diff", "finite_diff_stderr"]
        + ["pivotal_sum", "pivotal_sum_stderr", "ratio"]
    )
    for R in params.R:
        tagged = seed.child(f"R={R:g}")
        report = russo_check(params.p, R, params.dp, params.n, tagged, runner)
        result.add(
            _base(tagged, params.n)
            + [params.p, params.dp, R]
            + _est(report.finite_diff)
            + _est(report.pivotal_sum)
            + [report.ratio],
            report.finite_diff.wall_seconds,
        )
    return result


@_handles(Experiment.SCALING_REPORT)
def _scaling(params: ScalingReportParams, seed: SeedSpec, runner: SampleRunner) -> ExperimentResult:
    result = ExperimentResult(
        _BASE
        + ["p", "L_hat", "beyond_grid", "R", "theta_proxy", "theta_stderr"]
        + ["alpha1", "alpha1_stderr", "alpha4", "alpha4_stderr", "product"]
        + ["theta_over_alpha1", "max_alpha1_ratio", "max_alpha4_ratio"]
    )
    start = time.perf_counter()
    rows = scaling_relation_report(
        params.p, params.epsilon0, params.n, seed, params.R_grid or DEFAULT_R_GRID, runner
    )
    for row in rows:
        result.add(
            _base(seed, params.n)
            + [row.p, row.L_hat, row.beyond_grid, row.R]
            + _est(row.theta_proxy)
            + _est(row.alpha1)
            + _est(row.alpha4)
            + [row.product, row.theta_over_alpha1, row.max_alpha1_ratio, row.max_alpha4_ratio],
            (time.perf_counter() - start) / len(rows),
        )
    return result


@_handles(Experiment.REVEALMENT)
def _revealment(params: RevealmentParams, seed: SeedSpec, runner: SampleRunner) -> ExperimentResult:
    result = ExperimentResult(
        _BASE + ["p", "R", "rho", "max_revealment", "stderr", "argmax_sx", "argmax_sy"]
    )
    curve = []
    for R in params.R:
        tagged = seed.child(f"R={R:g}")
        rev = estimate_revealment(
            params.p, centered_rectangle(R, R / 2), params.n, params.rho, tagged, runner
        )
        sx, sy = rev.argmax if rev.argmax else (None, None)
        result.add(
            _base(tagged, params.n) + [params.p, R, params.rho] + _est(rev.max) + [sx, sy],
            rev.max.wall_seconds,
        )
        curve.append((R, rev.max))
    result.plot = (PlotKind.CURVE, curve)
    return result


@_handles(Experiment.SELFTEST)
def _selftest(params: SelftestParams, seed: SeedSpec, runner: SampleRunner) -> ExperimentResult:
    from .selftest import run_selftest

    result = ExperimentResult(_BASE + ["suite", "passed", "detail"])
    for suite in run_selftest(params.n, params.resolution, seed, runner):
        result.add(_base(seed, params.n) + [suite.name, suite.passed, suite.detail], suite.wall_seconds)
        result.passed &= suite.passed
    result.summary = {"passed": result.passed}
    return result


@_handles(Experiment.FKG)
def _fkg(params: FkgParams, seed: SeedSpec, runner: SampleRunner) -> ExperimentResult:
    R = params.R
    # two strips separated by a gap of width R
    quad_a = QuadSpec.bottom_top(rectangle(-R, -R, -R / 2, R))
    quad_b = QuadSpec.bottom_top(rectangle(R / 2, -R, R, R))
    report = fkg_check(params.p, quad_a, quad_b, params.n, seed, runner)
    result = ExperimentResult(
        _BASE + ["p", "R", "p_a", "p_b", "p_ab", "p_ab_stderr", "margin", "margin_stderr"]
    )
    result.add(
        _base(seed, params.n)
        + [params.p, R, report.p_a.value, report.p_b.value]
        + _est(report.p_ab)
        + [report.margin, report.margin_stderr],
        report.p_ab.wall_seconds,
    )
    result.summary = {"margin_over_3sigma": report.margin >= -3 * report.margin_stderr}
    return result


@_handles(Experiment.BK)
def _bk(params: BkParams, seed: SeedSpec, runner: SampleRunner) -> ExperimentResult:
    quad = QuadSpec.left_right(centered_rectangle(params.R, params.R))
    report = quenched_bk_check(params.p, quad, params.n_env, params.n_color, seed, runner)
    result = ExperimentResult(
        _BASE
        + ["n_color", "p", "R", "violations", "max_excess"]
        + ["annealed_a", "annealed_a_stderr", "annealed_aa", "annealed_aa_stderr", "annealed_holds"]
    )
    result.add(
        _base(seed, params.n_env)
        + [params.n_color, params.p, params.R, report.violations, report.max_excess]
        + _est(report.annealed_a)
        + _est(report.annealed_aa)
        + [report.annealed_holds],
        report.annealed_a.wall_seconds,
    )
    result.summary = {"quenched_holds": report.holds}
    return result


@_handles(Experiment.DENSE)
def _dense(params: DenseParams, seed: SeedSpec, runner: SampleRunner) -> ExperimentResult:
    result = ExperimentResult(_BASE + ["delta", "R", "value", "stderr", "failure_bound"])
    curve = []
    for R in params.R:
        tagged = seed.child(f"R={R:g}")
        report = estimate_dense(params.delta, R, params.n, tagged, runner)
        result.add(
            _base(tagged, params.n) + [params.delta, R] + _est(report.estimate) + [report.failure_bound],
            report.estimate.wall_seconds,
        )
        curve.append((R, report.estimate))
    result.plot = (PlotKind.CURVE, curve)
    return result


@_handles(Experiment.PIVGRID)
def _pivgrid(params: PivgridParams, seed: SeedSpec, runner: SampleRunner) -> ExperimentResult:
    report = estimate_pivotal_squares(
        params.p, params.R, params.rho, params.n, seed, params.fill_spacing, runner
    )
    result = ExperimentResult(
        _BASE
        + ["p", "R", "rho", "annealed_squares", "annealed_stderr"]
        + ["quenched_single_point_squares", "quenched_single_point_stderr"]
    )
    result.add(
        _base(seed, params.n)
        + [params.p, params.R, params.rho]
        + _est(report.annealed)
        + _est(report.quenched_single_point),
        report.annealed.wall_seconds,
    )
    return result


def run_experiment(config: ExperimentConfig, runner: SampleRunner) -> ExperimentResult:
    """
    Compute the rows of [config]'s experiment; no file is written
    """
    seed = SeedSpec(master_seed=config.run.seed, experiment_tag=str(config.experiment))
    _logger.info(f"Running [{config.experiment}] with seed {seed.master_seed}")
    return _HANDLERS[config.experiment](config.params, seed, runner)


def _versions() -> dict:
    try:
        own = version(APPNAME)
    except PackageNotFoundError:
        own = "unknown"
    return {
        APPNAME: own,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "shapely": shapely.__version__,
    }


def meta_content(config: ExperimentConfig, info: dict) -> dict:
    """
    The .meta echo: [run], the parameter section under the experiment's name, then [info].
    Loading it back yields the same ExperimentConfig.
    """
    return {
        "run": config.run.model_dump(mode="json"),
        str(config.experiment): config.params.model_dump(mode="json"),
        "info": info,
    }


def run(config: ExperimentConfig, runner: SampleRunner) -> ExperimentResult:
    """
    Run [config] and write its result files next to the output prefix
    """
    start = time.perf_counter()
    started = datetime.now(timezone.utc).isoformat(timespec="seconds")
    result = run_experiment(config, runner)
    prefix = Path(config.run.output)

    csv_path = write_csv(prefix.with_name(prefix.name + ".csv"), result.header, result.rows)
    if result.plot is not None:
        kind, records = result.plot
        emit_plot_data(records, kind, prefix.with_name(prefix.name + ".dat"))
    if isinstance(config.params, PivgridParams) and config.params.dump:
        params = config.params
        seed = SeedSpec(master_seed=config.run.seed, experiment_tag=str(config.experiment))
        window = Window.around(cross_2R_R(params.R).region)
        grid = pivotal_grid_sample(0, seed, window, params.p, params.R, params.rho, params.fill_spacing)
        write_pivgrid_csv(grid, prefix.with_name(prefix.name + ".pivgrid.csv"))

    info = {
        "versions": _versions(),
        "started": started,
        "workers": runner.workers,
        "available_memory_mb": round(available_memory_mb(), 1),
        "total_wall_seconds": round(time.perf_counter() - start, 3),
        "row_wall_seconds": result.row_wall_seconds,
        "summary": result.summary,
    }
    write_meta(prefix.with_name(prefix.name + ".meta"), meta_content(config, info))
    _logger.info(f"Wrote {csv_path} ({len(result.rows)} rows)")
    return result
