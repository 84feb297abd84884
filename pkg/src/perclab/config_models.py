from enum import StrEnum
from typing import Annotated, Literal

from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    PositiveInt,
    SerializeAsAny,
    field_validator,
    model_validator,
)
from typing_extensions import Self

from .connectivity import Color
from .misc import DEFAULT_EPSILON0, DEFAULT_FILL_SPACING, DEFAULT_RASTER_RESOLUTION, DEFAULT_SEED
from .regions import Sector


class Experiment(StrEnum):
    """
    Experiments the CLI can run; the value is also the name of the parameter section
    """

    CROSSING = "crossing"
    ARM = "arm"
    F_J = "f_j"
    NESTED = "nested"
    CORR_LENGTH = "corr-length"
    THETA = "theta"
    QUASI_MULT = "quasi-mult"
    EXPONENT_FIT = "exponent-fit"
    RUSSO = "russo"
    SCALING_REPORT = "scaling-report"
    REVEALMENT = "revealment"
    SELFTEST = "selftest"
    FKG = "fkg"
    BK = "bk"
    DENSE = "dense"
    PIVGRID = "pivgrid"


def _as_list(value):
    """A single scalar stands for a one-element list"""
    return value if isinstance(value, (list, tuple)) else [value]


def _as_triples(value):
    value = _as_list(value)
    if len(value) == 3 and not any(isinstance(v, (list, tuple)) for v in value):
        return [value]
    return value


FloatList = Annotated[list[float], BeforeValidator(_as_list), Field(min_length=1)]
Probability = Annotated[float, Field(ge=0, le=1)]
ProbabilityList = Annotated[list[Probability], BeforeValidator(_as_list), Field(min_length=1)]
Triples = Annotated[
    list[tuple[float, float, float]], BeforeValidator(_as_triples), Field(min_length=1)
]
Radius = Annotated[float, Field(gt=0)]
RadiusList = Annotated[list[Radius], BeforeValidator(_as_list), Field(min_length=1)]
InnerRadius = Annotated[float, Field(ge=1)]
"""Arm events start at the unit scale"""


class Params(BaseModel):
    """
    Base of every parameter section. Unknown keys are rejected
    """

    model_config = ConfigDict(extra="forbid", frozen=True)


class RunSection(BaseModel):
    """
    The [run] section
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    experiment: Experiment
    seed: int = Field(default=DEFAULT_SEED, ge=0, lt=2**64)
    output: str = Field(default="perc-lab-run", min_length=1)
    """Prefix of the result files"""
    workers: PositiveInt | None = None
    """None means machine parallelism"""


class CrossingParams(Params):
    p: ProbabilityList
    rho1: Radius = 16.0
    rho2: Radius = 8.0
    direction: Literal["left-right", "bottom-top"] = "left-right"
    color: Color = Color.BLACK
    n: PositiveInt = 1000


class ArmParams(Params):
    p: Probability = 0.5
    j: PositiveInt = 1
    r: InnerRadius = 1.0
    R: RadiusList
    sector: Sector = Sector.FULL
    wedge: tuple[float, float] | None = None
    """Degrees, only for the custom sector"""
    n: PositiveInt = 1000

    @model_validator(mode="after")
    def validate_wedge(self) -> Self:
        if (self.sector == Sector.CUSTOM) != (self.wedge is not None):
            raise ValueError("A wedge is required for the custom sector and only for it")
        if self.wedge is not None:
            Sector.CUSTOM.wedge(self.wedge)
        return self


class FjParams(ArmParams):
    inner_trials: int = Field(default=32, ge=0)


class NestedParams(Params):
    p: Probability = 0.5
    event: Literal["crossing", "arm"] = "crossing"
    R: RadiusList
    aspect: Radius = 1.0
    """Crossing of [-aspect R, aspect R] x [-R, R], left to right"""
    j: PositiveInt = 1
    r: InnerRadius = 1.0
    n_env: int = Field(default=100, ge=2)
    n_color: int = Field(default=50, ge=2)


class CorrLengthParams(Params):
    p: ProbabilityList
    epsilon0: float = Field(default=DEFAULT_EPSILON0, gt=0, lt=1)
    R_grid: RadiusList | None = None
    """None means the default geometric grid"""
    n: PositiveInt = 1000

    @field_validator("p")
    @classmethod
    def validate_supercritical(cls, value: list[float]) -> list[float]:
        for p in value:
            if not p > 0.5:
                raise ValueError(f"Correlation length needs p > 1/2, got {p}")
        return value

    @field_validator("R_grid")
    @classmethod
    def validate_grid(cls, value: list[float] | None) -> list[float] | None:
        if value is not None and any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("R_grid must be increasing")
        return value


class ThetaParams(Params):
    p: Probability
    R: RadiusList
    n: PositiveInt = 1000


class QuasiMultParams(Params):
    j: PositiveInt = 1
    triples: Triples
    p: Probability = 0.5
    n: PositiveInt = 1000

    @field_validator("triples")
    @classmethod
    def validate_triples(cls, value):
        for r1, r2, r3 in value:
            if not 1 <= r1 <= r2 <= r3:
                raise ValueError(f"Need 1 <= r1 <= r2 <= r3, got ({r1}, {r2}, {r3})")
        return value


class ExponentFitParams(ArmParams):
    """Arm probabilities on A(r, R) for every R, then a log-log fit"""

    @model_validator(mode="after")
    def validate_points(self) -> Self:
        if len(self.R) < 3:
            raise ValueError("An exponent fit needs at least 3 outer radii")
        return self


class RussoParams(Params):
    p: Probability = 0.5
    R: RadiusList
    dp: float = Field(default=0.02, gt=0)
    n: PositiveInt = 1000

    @model_validator(mode="after")
    def validate_band(self) -> Self:
        if self.p - self.dp < 0 or self.p + self.dp > 1:
            raise ValueError(f"Need 0 <= p - dp and p + dp <= 1, got p={self.p}, dp={self.dp}")
        return self


class ScalingReportParams(Params):
    p: ProbabilityList
    epsilon0: float = Field(default=DEFAULT_EPSILON0, gt=0, lt=1)
    R_grid: RadiusList | None = None
    n: PositiveInt = 1000

    @field_validator("p")
    @classmethod
    def validate_near_critical(cls, value: list[float]) -> list[float]:
        for p in value:
            if not 0.5 < p <= 0.75:
                raise ValueError(f"Scaling report needs p in (1/2, 3/4], got {p}")
        return value


class RevealmentParams(Params):
    p: Probability = 0.5
    R: RadiusList
    """Exploration of [-R, R] x [-R/2, R/2]"""
    rho: Radius = 1.0
    n: PositiveInt = 1000


class SelftestParams(Params):
    n: PositiveInt = 50
    """Samples per suite"""
    resolution: Radius = DEFAULT_RASTER_RESOLUTION


class FkgParams(Params):
    p: Probability = 0.5
    R: Radius = 8.0
    n: PositiveInt = 1000


class BkParams(Params):
    p: Probability = 0.5
    R: Radius = 8.0
    n_env: PositiveInt = 50
    n_color: int = Field(default=50, ge=2)


class DenseParams(Params):
    delta: float = Field(gt=0, lt=1)
    R: RadiusList
    n: PositiveInt = 1000


class PivgridParams(Params):
    p: Probability = 0.5
    R: Radius = 8.0
    rho: float = Field(default=1.0, ge=1)
    n: PositiveInt = 100
    fill_spacing: float = Field(default=DEFAULT_FILL_SPACING, gt=0)
    dump: bool = False
    """Also write the grid of sample 0 as <output>.pivgrid.csv"""


PARAMETER_MODELS: dict[Experiment, type[Params]] = {
    Experiment.CROSSING: CrossingParams,
    Experiment.ARM: ArmParams,
    Experiment.F_J: FjParams,
    Experiment.NESTED: NestedParams,
    Experiment.CORR_LENGTH: CorrLengthParams,
    Experiment.THETA: ThetaParams,
    Experiment.QUASI_MULT: QuasiMultParams,
    Experiment.EXPONENT_FIT: ExponentFitParams,
    Experiment.RUSSO: RussoParams,
    Experiment.SCALING_REPORT: ScalingReportParams,
    Experiment.REVEALMENT: RevealmentParams,
    Experiment.SELFTEST: SelftestParams,
    Experiment.FKG: FkgParams,
    Experiment.BK: BkParams,
    Experiment.DENSE: DenseParams,
    Experiment.PIVGRID: PivgridParams,
}


class ExperimentConfig(BaseModel):
    """
    Full experiment configuration: the [run] section and the typed parameter section
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    run: RunSection
    params: SerializeAsAny[Params]

    @model_validator(mode="before")
    @classmethod
    def typed_params(cls, data):
        if not isinstance(data, dict) or "run" not in data:
            return data
        run = data["run"]
        if isinstance(run, RunSection):
            name = run.experiment
        elif isinstance(run, dict) and "experiment" in run:
            name = run["experiment"]
        else:
            return data
        model = PARAMETER_MODELS[Experiment(name)]
        params = data.get("params") or {}
        if not isinstance(params, model):
            params = model.model_validate(params.model_dump() if isinstance(params, BaseModel) else params)
        return {**data, "params": params}

    @property
    def experiment(self) -> Experiment:
        return self.run.experiment
