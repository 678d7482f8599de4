"""
Pydantic models for ggmc.

This module defines the domain types passed between the numerical modules
(graph models, samples, node-wise fits, test results, pi0 estimates), the
run configuration consumed by the CLI, the simulation report, and the input
models of the MCP tools. Array-valued fields hold numpy arrays; those models
are frozen so results can be shared across worker threads.
"""

from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .utils import SCHEMA_VERSION, format_markdown_table


# ====================
# Enums
# ====================

class ResponseFormat(str, Enum):
    """Output format for tool responses."""
    MARKDOWN = "markdown"
    JSON = "json"


class DesignTag(str, Enum):
    """Covariance/precision designs used in the simulation studies."""
    BLOCK_AR1 = "BlockAR1"
    BLOCK_EQUICORR = "BlockEquicorr"
    BAND = "Band"
    ERDOS_RENYI = "ErdosRenyi"


class GfcMethod(str, Enum):
    """Node-wise regression used inside the GFC procedure."""
    LASSO = "GFC_L"
    SCALED_LASSO = "GFC_SL"

    @classmethod
    def parse(cls, value: str) -> "GfcMethod":
        """Accept the table tags as well as the CLI spellings."""
        aliases = {
            "gfc_l": cls.LASSO,
            "lasso": cls.LASSO,
            "l": cls.LASSO,
            "gfc_sl": cls.SCALED_LASSO,
            "scaled-lasso": cls.SCALED_LASSO,
            "scaled_lasso": cls.SCALED_LASSO,
            "sl": cls.SCALED_LASSO,
        }
        key = value.strip().lower()
        if key not in aliases:
            raise ValueError(f"unknown method {value!r}; use lasso or scaled-lasso")
        return aliases[key]


class Pi0Method(str, Enum):
    """How the Storey tuning parameter was handled."""
    FIXED_LAMBDA = "FixedLambda"
    SMOOTHER = "Smoother"
    BOOTSTRAP = "Bootstrap"


class Pi0Selection(str, Enum):
    """Which pi0 selectors a run reports."""
    SMOOTHER = "smoother"
    BOOTSTRAP = "bootstrap"
    BOTH = "both"


class Command(str, Enum):
    ESTIMATE = "estimate"
    SIMULATE = "simulate"
    ECDF = "ecdf"
    ORACLE = "oracle"


class EmitFormat(str, Enum):
    JSON = "json"
    CSV = "csv"


_ARRAY_CONFIG = ConfigDict(arbitrary_types_allowed=True, frozen=True)


# ====================
# Graph models
# ====================

class ModelSpec(BaseModel):
    """Parameters of one simulation design; serialises to a JSON config block."""

    model_config = ConfigDict(validate_assignment=True, extra='forbid')

    design_tag: DesignTag = Field(..., description="Which design to generate")
    k: int = Field(..., description="Number of variables", ge=2)
    s: Optional[int] = Field(default=None, description="Block size (block designs)", ge=1)
    rho: Optional[float] = Field(default=None, description="Within-block correlation (block designs)")
    q: Optional[float] = Field(
        default=None,
        description="Edge probability (Erdos-Renyi); None means min(0.05, 5/k)",
    )
    u_range: Tuple[float, float] = Field(
        default=(0.4, 0.8),
        description="Range of the uniform edge weights (Erdos-Renyi)",
    )
    seed: Optional[int] = Field(
        default=None,
        description="Graph seed (Erdos-Renyi only)",
        ge=0,
        lt=2**64,
    )

    @model_validator(mode="after")
    def check_design_fields(self) -> "ModelSpec":
        if self.design_tag in (DesignTag.BLOCK_AR1, DesignTag.BLOCK_EQUICORR):
            if self.s is None or self.rho is None:
                raise ValueError("block designs need both s and rho")
            if self.k % self.s != 0:
                raise ValueError(f"block size s={self.s} must divide k={self.k}")
            if not 0.0 < self.rho < 1.0:
                raise ValueError("rho must lie in (0, 1)")
        elif self.design_tag == DesignTag.BAND:
            if self.k < 3:
                raise ValueError("the band graph needs k >= 3")
        elif self.design_tag == DesignTag.ERDOS_RENYI:
            if self.q is not None and not 0.0 < self.q < 1.0:
                raise ValueError("q must lie in (0, 1)")
            if not self.u_range[0] < self.u_range[1]:
                raise ValueError("u_range must satisfy u_lo < u_hi")
        return self


class GraphModel(BaseModel):
    """Covariance, precision and ground-truth edge set of one design."""

    model_config = _ARRAY_CONFIG

    k: int
    sigma: np.ndarray
    omega: np.ndarray
    edges: Tuple[Tuple[int, int], ...]
    pi0_true: float
    pi0_nominal: Optional[float] = None
    design_tag: Optional[DesignTag] = None
    c0_bound: float
    spec: Optional[ModelSpec] = None
    pd_shift: float = 0.0

    @property
    def n_pairs(self) -> int:
        return self.k * (self.k - 1) // 2

    def edge_matrix(self) -> np.ndarray:
        """Boolean k x k matrix, symmetric, True where (i, j) is an edge."""
        mask = np.zeros((self.k, self.k), dtype=bool)
        if self.edges:
            idx = np.asarray(self.edges)
            mask[idx[:, 0], idx[:, 1]] = True
            mask[idx[:, 1], idx[:, 0]] = True
        return mask

    def describe(self) -> Dict[str, Any]:
        return {
            "design": self.design_tag.value if self.design_tag else None,
            "k": self.k,
            "n_edges": len(self.edges),
            "pi0_true": self.pi0_true,
            "pi0_nominal": self.pi0_nominal,
            "c0_bound": self.c0_bound,
            "pd_shift": self.pd_shift,
        }


class C1Report(BaseModel):
    """Advisory check of condition (C1)."""

    max_sigma_diag: float
    max_omega_diag: float
    c0: float
    bounded: bool
    log_k_over_n: float
    log_k_over_sqrt_n: float
    flagged: bool = Field(description="True when log(k)/n is not small (>= 0.1) or bounds fail")


class CholeskyFactor(BaseModel):
    """Lower-triangular factor together with the jitter that was added."""

    model_config = _ARRAY_CONFIG

    lower: np.ndarray
    jitter: float = 0.0
    attempts: int = 1


# ====================
# Samples
# ====================

class SampleMatrix(BaseModel):
    """n x k observations, one row per observation."""

    model_config = _ARRAY_CONFIG

    values: np.ndarray
    seed: Optional[int] = None
    model_tag: Optional[str] = None

    @field_validator("values", mode="before")
    @classmethod
    def check_values(cls, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.ndim != 2 or v.shape[0] < 2 or v.shape[1] < 2:
            raise ValueError(f"sample matrix must be n x k with n >= 2, k >= 2, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("sample matrix contains non-finite values")
        return v

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.values.shape[1]


# ====================
# Regression
# ====================

class NodewiseFit(BaseModel):
    """Penalised regression of one variable on all others."""

    model_config = _ARRAY_CONFIG

    node: int
    beta: np.ndarray
    lambda_used: float
    method: GfcMethod
    sigma_hat: Optional[float] = None
    iterations: int
    converged: bool

    def coef_of(self, j: int) -> float:
        """Coefficient of variable j (j != node) in this fit."""
        if j == self.node:
            raise ValueError(f"variable {j} is the response of this fit")
        return float(self.beta[j if j < self.node else j - 1])


class LassoResult(BaseModel):
    """Coordinate-descent solution of one (scaled) Lasso problem."""

    model_config = _ARRAY_CONFIG

    beta: np.ndarray
    lambda_used: float
    iterations: int
    converged: bool
    sigma_hat: Optional[float] = None


class FitReport(BaseModel):
    """All k node-wise fits plus the nodes whose solver did not converge."""

    model_config = _ARRAY_CONFIG

    fits: Tuple[NodewiseFit, ...]
    not_converged: Tuple[int, ...] = ()
    method: GfcMethod
    kappa: float


# ====================
# GFC tests
# ====================

class ResidualSet(BaseModel):
    model_config = _ARRAY_CONFIG

    eps_hat: np.ndarray
    r_hat: np.ndarray


class TestResults(BaseModel):
    """Pair statistics over the upper triangle, pairs in row-major order."""

    __test__ = False
    model_config = _ARRAY_CONFIG

    k: int
    n: int
    rows: np.ndarray
    cols: np.ndarray
    t1: np.ndarray
    t: np.ndarray
    p: np.ndarray
    method: GfcMethod

    @property
    def n_pairs(self) -> int:
        return self.k * (self.k - 1) // 2


class FdrResult(BaseModel):
    model_config = _ARRAY_CONFIG

    alpha: float
    t_hat: float
    rejected: Tuple[Tuple[int, int], ...]
    infimum_found: bool

    @property
    def n_rejected(self) -> int:
        return len(self.rejected)

    def to_json_dict(self) -> Dict[str, Any]:
        return {
            "schema": SCHEMA_VERSION,
            "alpha": self.alpha,
            "t_hat": self.t_hat,
            "infimum_found": self.infimum_found,
            "n_rejected": self.n_rejected,
            "edges": [[i + 1, j + 1] for i, j in self.rejected],
        }


class GfcRun(BaseModel):
    """End-to-end GFC output with provenance."""

    model_config = _ARRAY_CONFIG

    fit_report: FitReport
    residuals: ResidualSet
    tests: TestResults
    fdr: FdrResult
    provenance: Dict[str, Any] = Field(default_factory=dict)


class KappaSelection(BaseModel):
    """Penalty multiplier chosen by matching the tail counts of |T| to N(0, 1)."""

    model_config = _ARRAY_CONFIG

    kappa: float
    grid: np.ndarray
    criterion: np.ndarray


# ====================
# pi0
# ====================

class PValueSet(BaseModel):
    model_config = _ARRAY_CONFIG

    values: np.ndarray
    source: str = "unknown"

    @field_validator("values", mode="before")
    @classmethod
    def check_values(cls, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float).ravel()
        if v.size < 1:
            raise ValueError("need at least one p-value")
        if not np.all((v >= 0.0) & (v <= 1.0)):
            raise ValueError("p-values must lie in [0, 1]")
        return v

    @property
    def N(self) -> int:
        return int(self.values.size)


class Pi0Estimate(BaseModel):
    model_config = _ARRAY_CONFIG

    method: Pi0Method
    lambda_grid: np.ndarray
    curve: np.ndarray
    W: np.ndarray
    pi0_hat: float = Field(..., ge=0.0, le=1.0)
    selected_lambda: Optional[float] = None
    mse: Optional[np.ndarray] = None
    B: Optional[int] = None
    seed: Optional[int] = None
    spline_dof: Optional[float] = None
    smoothed: Optional[np.ndarray] = None

    def to_json_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "method": self.method.value,
            "pi0_hat": self.pi0_hat,
            "pi1_hat": 1.0 - self.pi0_hat,
            "selected_lambda": self.selected_lambda,
            "lambda_grid": [float(x) for x in self.lambda_grid],
            "curve": [float(x) for x in self.curve],
            "W": [int(x) for x in self.W],
        }
        if self.method == Pi0Method.BOOTSTRAP:
            out["B"] = self.B
            out["seed"] = self.seed
            out["mse"] = [float(x) for x in self.mse] if self.mse is not None else None
        if self.method == Pi0Method.SMOOTHER:
            out["spline_dof"] = self.spline_dof
            out["smoothed"] = (
                [float(x) for x in self.smoothed] if self.smoothed is not None else None
            )
        return out


class Ecdf(BaseModel):
    """Right-continuous empirical CDF with jumps at the sorted unique support."""

    model_config = _ARRAY_CONFIG

    support: np.ndarray
    heights: np.ndarray

    def __call__(self, x: Any) -> Any:
        x_arr = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.support, x_arr, side="right")
        padded = np.concatenate(([0.0], self.heights))
        out = padded[idx]
        return float(out) if out.ndim == 0 else out

    def left_limits(self) -> np.ndarray:
        """F_N(x-) at each support point."""
        return np.concatenate(([0.0], self.heights[:-1]))


# ====================
# Oracles
# ====================

class MonteCarloEstimate(BaseModel):
    value: float
    std_error: float
    reps: int
    seed: int


class MehlerResult(BaseModel):
    value: float
    n_terms: int
    tail_bound: float
    bound: float


class BandedDecayReport(BaseModel):
    k: int
    m: int
    sum_abs_omega: float
    sum_abs_omega_per_k: float
    condition_number: float
    r: float
    demko_C_fit: float


class OracleCheck(BaseModel):
    name: str
    passed: bool
    value: Optional[float] = None
    expected: Optional[float] = None
    margin: Optional[float] = None
    detail: Optional[str] = None


class OracleReport(BaseModel):
    schema_version: int = Field(default=SCHEMA_VERSION, alias="schema")
    checks: List[OracleCheck]
    extras: Dict[str, Any] = Field(default_factory=dict)

    model_config = ConfigDict(populate_by_name=True)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


class OracleConfig(BaseModel):
    """Knobs of the oracle suite (defaults give the standard run)."""

    model_config = ConfigDict(validate_assignment=True, extra='forbid')

    seed: int = Field(default=20240601, ge=0, lt=2**63)
    c0: float = Field(default=10.0, gt=0)
    mehler_rho: Optional[float] = Field(default=None, gt=-1.0, lt=1.0)
    mehler_x: float = Field(default=0.0)
    mehler_terms: int = Field(default=50, ge=1, le=500)
    isserlis_identity_k: Optional[int] = Field(default=None, ge=2, le=50)
    isserlis_models: int = Field(default=3, ge=1, le=100)
    mc_reps: int = Field(default=20_000, ge=10_000)


# ====================
# CLI configuration and simulation report
# ====================

class RunConfig(BaseModel):
    """Everything a CLI command needs; round-trips through its JSON file form."""

    model_config = ConfigDict(validate_assignment=True, extra='forbid', populate_by_name=True)

    schema_version: int = Field(default=SCHEMA_VERSION, alias="schema")
    command: Command
    input_path: Optional[str] = Field(default=None, description="CSV input (estimate/ecdf)")
    header: bool = Field(default=False, description="Input CSV has a header row")
    pvalues_input: bool = Field(default=False, description="ecdf: input holds p-values")
    model: Optional[ModelSpec] = None
    n: int = Field(default=200, ge=10)
    replications: int = Field(default=20, ge=1)
    seed: int = Field(default=42, ge=0, lt=2**63)
    method: GfcMethod = GfcMethod.LASSO
    kappa: float = Field(default=1.0, gt=0.0)
    tune_kappa: bool = Field(default=False, description="Pick kappa from the tail-calibration grid")
    alpha: float = Field(default=0.1, gt=0.0, lt=1.0)
    pi0_method: Pi0Selection = Pi0Selection.BOTH
    grid_lo: float = Field(default=0.0, ge=0.0)
    grid_hi: float = Field(default=0.95, le=0.95)
    grid_step: float = Field(default=0.01, gt=0.0)
    B: int = Field(default=100, ge=10)
    spline_dof: float = Field(default=3.0, gt=1.0)
    output_dir: str = "ggmc-out"
    emit: List[EmitFormat] = Field(default_factory=lambda: [EmitFormat.JSON, EmitFormat.CSV])
    uniform_reference: bool = False
    jump_points: bool = False
    oracle: OracleConfig = Field(default_factory=OracleConfig)

    @field_validator("method", mode="before")
    @classmethod
    def parse_method(cls, v: Any) -> Any:
        if isinstance(v, str) and not isinstance(v, GfcMethod):
            return GfcMethod.parse(v)
        return v

    @model_validator(mode="after")
    def check_command_inputs(self) -> "RunConfig":
        if self.grid_lo >= self.grid_hi:
            raise ValueError("grid_lo must be smaller than grid_hi")
        if self.command == Command.ESTIMATE and not self.input_path:
            raise ValueError("estimate needs an input path")
        if self.command == Command.SIMULATE and self.model is None:
            raise ValueError("simulate needs a model specification")
        if self.command == Command.ECDF and not (self.input_path or self.model):
            raise ValueError("ecdf needs an input path or a model specification")
        return self


class SimulationRecord(BaseModel):
    replication: int
    seed: int
    pi0_smoother: Optional[float]
    pi0_bootstrap: Optional[float]
    pi0_true: float
    pi0_nominal: Optional[float]
    fdp: float
    power: float
    n_rejected: int
    t_hat: float
    not_converged: int
    kappa: float
    null_t_mean: Optional[float] = None
    null_t_sd: Optional[float] = None
    runtime_seconds: float


class SimulationAggregate(BaseModel):
    mean_pi0_smoother: Optional[float]
    sd_pi0_smoother: Optional[float]
    mean_pi0_bootstrap: Optional[float]
    sd_pi0_bootstrap: Optional[float]
    mean_fdp: float
    sd_fdp: float
    mean_power: float
    mean_null_t: Optional[float] = None
    sd_null_t: Optional[float] = None


class SimulationReport(BaseModel):
    schema_version: int = Field(default=SCHEMA_VERSION, alias="schema")
    config: RunConfig
    model: Dict[str, Any]
    records: List[SimulationRecord]
    failed: List[Dict[str, Any]] = Field(default_factory=list)
    failure_budget: float = 0.10
    aggregate: SimulationAggregate

    model_config = ConfigDict(populate_by_name=True)

    def table(self) -> str:
        """Markdown summary laid out like the simulation tables: one row per run."""
        agg = self.aggregate

        def cell(mean: Optional[float], sd: Optional[float]) -> str:
            return "" if mean is None else f"{mean:.2f} ({sd:.3f})"

        row = {
            "design": self.model.get("design"),
            "k": self.model.get("k"),
            "n": self.config.n,
            "method": self.config.method.value,
            "pi0 nominal": self.model.get("pi0_nominal"),
            "pi0 counted": self.model.get("pi0_true"),
            "pi0 smoother": cell(agg.mean_pi0_smoother, agg.sd_pi0_smoother),
            "pi0 bootstrap": cell(agg.mean_pi0_bootstrap, agg.sd_pi0_bootstrap),
            "FDP": cell(agg.mean_fdp, agg.sd_fdp),
            "power": agg.mean_power,
            "null T": cell(agg.mean_null_t, agg.sd_null_t),
            "reps": len(self.records),
            "failed": len(self.failed),
        }
        return format_markdown_table([row], title="Simulation summary")


# ====================
# MCP tool inputs
# ====================

class Pi0EstimateInput(BaseModel):
    """Input model for estimating pi0 from a list of p-values."""

    model_config = ConfigDict(
        str_strip_whitespace=True,
        validate_assignment=True,
        extra='forbid'
    )

    pvalues: List[float] = Field(
        ...,
        description="P-values in [0, 1], one per hypothesis",
        min_length=1,
    )

    method: Pi0Selection = Field(
        default=Pi0Selection.BOTH,
        description="'smoother', 'bootstrap' or 'both'"
    )

    lambda_value: Optional[float] = Field(
        default=None,
        description="If set, also report the raw Storey estimate at this lambda",
        ge=0.0,
        lt=1.0
    )

    B: int = Field(default=100, description="Bootstrap resamples", ge=10, le=10_000)

    seed: int = Field(default=42, description="Bootstrap seed", ge=0)

    response_format: ResponseFormat = Field(
        default=ResponseFormat.JSON,
        description="Output format: 'json' or 'markdown'"
    )


class GraphComplexityInput(BaseModel):
    """Input model for the end-to-end estimate on a CSV data file."""

    model_config = ConfigDict(
        str_strip_whitespace=True,
        validate_assignment=True,
        extra='forbid'
    )

    input_path: str = Field(
        ...,
        description="Path to a CSV file, one observation per row",
        min_length=1,
        max_length=4096
    )

    header: bool = Field(default=False, description="First row holds variable names")

    method: GfcMethod = Field(
        default=GfcMethod.SCALED_LASSO,
        description="'GFC_L' (Lasso) or 'GFC_SL' (scaled Lasso)"
    )

    alpha: float = Field(default=0.1, description="FDR level", gt=0.0, lt=1.0)

    kappa: float = Field(default=1.0, description="Penalty multiplier", gt=0.0)

    tune_kappa: bool = Field(
        default=False,
        description="Pick kappa by matching the tail of |T| to N(0, 1); overrides kappa"
    )

    response_format: ResponseFormat = Field(
        default=ResponseFormat.JSON,
        description="Output format: 'json' or 'markdown'"
    )


class OracleRunInput(BaseModel):
    """Input model for running the closed-form oracle checks."""

    model_config = ConfigDict(
        str_strip_whitespace=True,
        validate_assignment=True,
        extra='forbid'
    )

    seed: int = Field(default=20240601, description="Monte Carlo seed", ge=0)

    mc_reps: int = Field(
        default=20_000,
        description="Monte Carlo replications for the Isserlis check",
        ge=10_000,
        le=1_000_000
    )

    response_format: ResponseFormat = Field(
        default=ResponseFormat.JSON,
        description="Output format: 'json' or 'markdown'"
    )
