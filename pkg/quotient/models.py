from typing import Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from quotient.common import InvalidInputException


class ArrayModel(BaseModel):
    """Base for models that carry numpy arrays."""

    model_config = ConfigDict(arbitrary_types_allowed=True)


class FileConfigModel(BaseModel):
    """Base for configs that can be read from a KEY=value file."""

    model_config = ConfigDict(extra="forbid")

    @classmethod
    def from_file(cls, path: str, **overrides):
        """
        Read a dotenv-style file (keys are field names, any case).
        CLI overrides win over file values.
        """
        raw = {key.lower().replace("-", "_"): value for key, value in dotenv_values(path).items()}
        raw.update({key: value for key, value in overrides.items() if value is not None})
        try:
            return cls(**raw)
        except ValidationError as e:
            raise InvalidInputException(f"Invalid {cls.__name__} in {path}: {str(e)}")


class DrawSet(ArrayModel):
    """M centered factors (and optional intercepts) from one posterior run"""

    factors: np.ndarray = Field(..., description="array of shape (M, n, r)")
    intercepts: Optional[np.ndarray] = Field(default=None, description="alpha draws, shape (M,)")

    @field_validator("factors", mode="before")
    @classmethod
    def validate_factors(cls, value):
        factors = np.asarray(value, dtype=float)
        if factors.ndim != 3 or factors.shape[0] < 1:
            raise ValueError(f"factors must have shape (M, n, r) with M >= 1, got {factors.shape}")
        if factors.shape[1] < 2 or factors.shape[2] < 1:
            raise ValueError(f"factors need n >= 2 and r >= 1, got {factors.shape}")
        if not np.all(np.isfinite(factors)):
            raise ValueError("factors contain non-finite entries")
        n = factors.shape[1]
        scale = np.maximum(np.max(np.abs(factors), axis=(1, 2)), 1.0)
        column_sums = np.max(np.abs(factors.sum(axis=1)), axis=1)
        if np.any(column_sums > 1e-10 * n * scale):
            raise ValueError("every factor must have zero column sums")
        return factors

    @field_validator("intercepts", mode="before")
    @classmethod
    def validate_intercepts(cls, value):
        if value is None:
            return None
        intercepts = np.asarray(value, dtype=float).reshape(-1)
        if not np.all(np.isfinite(intercepts)):
            raise ValueError("intercepts contain non-finite entries")
        return intercepts

    @model_validator(mode="after")
    def check_intercept_count(self):
        if self.intercepts is not None and self.intercepts.shape[0] != self.factors.shape[0]:
            raise ValueError(
                f"expected {self.factors.shape[0]} intercepts, got {self.intercepts.shape[0]}"
            )
        return self

    @classmethod
    def from_configurations(cls, configurations, intercepts=None) -> "DrawSet":
        """Center raw latent configurations and wrap them."""
        stacked = np.asarray(configurations, dtype=float)
        if stacked.ndim == 2:
            stacked = stacked[None, :, :]
        centered = stacked - stacked.mean(axis=1, keepdims=True)
        return cls.build(centered, intercepts)

    @classmethod
    def build(cls, factors, intercepts=None) -> "DrawSet":
        try:
            return cls(factors=factors, intercepts=intercepts)
        except ValidationError as e:
            raise InvalidInputException(f"Invalid draw set: {str(e)}")

    @property
    def M(self) -> int:
        return self.factors.shape[0]

    @property
    def n(self) -> int:
        return self.factors.shape[1]

    @property
    def r(self) -> int:
        return self.factors.shape[2]

    def grams(self) -> np.ndarray:
        """All B^(m) = Y^(m) Y^(m)ᵀ, shape (M, n, n)."""
        return np.einsum("mir,mjr->mij", self.factors, self.factors)

    def require_intercepts(self) -> np.ndarray:
        if self.intercepts is None:
            raise InvalidInputException("intercept draws are required for edge probabilities")
        return self.intercepts


class FrechetConfig(FileConfigModel):
    """Step size, stopping rule and initialization of the Fréchet mean iteration"""

    step_size: float = Field(default=1.0, gt=0)
    tolerance: float = Field(default=1e-8, gt=0)
    max_iterations: int = Field(default=200, ge=1)
    init: Union[Literal["mean-gram-eigen"], int] = "mean-gram-eigen"
    backtracking: bool = True
    max_halvings: int = Field(default=30, ge=0)
    restarts: int = Field(default=0, ge=0)
    seed: int = 0
    threads: int = Field(default=1, ge=1)


class FrechetResult(ArrayModel):
    """Sample Fréchet mean of the induced posterior on centered Gram matrices"""

    mean_factor: np.ndarray
    mean_gram: np.ndarray
    variation: float = Field(..., ge=0)
    iterations: int
    converged: bool
    per_draw_distances: np.ndarray
    objective_trace: List[float] = Field(default_factory=list)
    start_objectives: List[float] = Field(default_factory=list)
    init: str = "mean-gram-eigen"

    @model_validator(mode="after")
    def check_variation(self):
        implied = float(np.mean(self.per_draw_distances ** 2))
        if abs(implied - self.variation) > 1e-10 * max(1.0, implied):
            raise ValueError(f"variation {self.variation} disagrees with distances ({implied})")
        return self


class TangentSample(ArrayModel):
    """Log-lift residuals of retained draws at a base factor"""

    base: np.ndarray
    residuals: np.ndarray = Field(..., description="shape (M', n, r)")
    retained: List[int]
    excluded: int = 0

    @property
    def M(self) -> int:
        return self.residuals.shape[0]


class TangentCovariance(ArrayModel):
    """Empirical covariance of vectorized tangent residuals"""

    base: np.ndarray
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    effective_dim: int


class DeltaVariance(BaseModel):
    i: int
    j: int
    variance: float = Field(..., ge=0)
    squared_scale: bool = False


class DyadSummary(BaseModel):
    """Posterior summary of one dyad's latent distance (and edge probability)"""

    i: int
    j: int
    mean_distance: float
    median_distance: float
    var_distance: float
    ci_lo: float
    ci_hi: float
    tail_probability: Optional[float] = None
    mean_probability: Optional[float] = Field(default=None, ge=0, le=1)
    ci_prob_lo: Optional[float] = Field(default=None, ge=0, le=1)
    ci_prob_hi: Optional[float] = Field(default=None, ge=0, le=1)
    mean_link_effect: Optional[float] = None

    @model_validator(mode="after")
    def check_interval(self):
        slack = 1e-12 * max(1.0, abs(self.ci_hi))
        if not (self.ci_lo - slack <= self.median_distance <= self.ci_hi + slack):
            raise ValueError("credible interval must contain the median distance")
        return self


class NodeUncertainty(BaseModel):
    values: List[float]
    method: Literal["monte-carlo", "delta"]

    @field_validator("values")
    @classmethod
    def check_values(cls, values):
        if any(not np.isfinite(v) or v < 0 for v in values):
            raise ValueError("node uncertainty values must be finite and nonnegative")
        return values


class SensitivityResult(BaseModel):
    """Reference-sensitivity index of fixed-reference Procrustes means"""

    s_ref: float = Field(..., ge=0)
    K: int
    reference_indices: List[int]
    pairwise_gaps: List[float]
    seed: int

    @model_validator(mode="after")
    def check_mean(self):
        if abs(float(np.mean(self.pairwise_gaps)) - self.s_ref) > 1e-12 * max(1.0, self.s_ref):
            raise ValueError("s_ref must be the mean of the pairwise gaps")
        return self


class SimulationSpec(BaseModel):
    """Three-group latent template (left core, bridge, right core)"""

    group_sizes: Tuple[int, int, int] = (48, 24, 48)
    group_means: Tuple[Tuple[float, float], Tuple[float, float], Tuple[float, float]]
    group_sds: Tuple[float, float, float]
    target_density: float = Field(default=0.1, gt=0, lt=1)
    regime: str = "custom"

    @field_validator("group_sizes")
    @classmethod
    def check_sizes(cls, sizes):
        if any(size < 1 for size in sizes):
            raise ValueError("group sizes must be positive")
        return sizes

    @field_validator("group_sds")
    @classmethod
    def check_sds(cls, sds):
        if any(sd <= 0 for sd in sds):
            raise ValueError("group standard deviations must be positive")
        return sds

    @property
    def n(self) -> int:
        return sum(self.group_sizes)

    @classmethod
    def well_identified(cls, group_sizes=(48, 24, 48), target_density: float = 0.1) -> "SimulationSpec":
        return cls(
            group_sizes=group_sizes,
            group_means=((-1.8, 0.0), (0.0, 0.9), (1.8, 0.0)),
            group_sds=(0.20, 0.25, 0.20),
            target_density=target_density,
            regime="well",
        )

    @classmethod
    def weakly_identified(cls, group_sizes=(48, 24, 48), target_density: float = 0.1) -> "SimulationSpec":
        return cls(
            group_sizes=group_sizes,
            group_means=((-1.25, 0.0), (0.0, 0.0), (1.25, 0.0)),
            group_sds=(0.20, 0.45, 0.20),
            target_density=target_density,
            regime="weak",
        )

    @classmethod
    def preset(cls, regime: str, group_sizes=(48, 24, 48), target_density: float = 0.1) -> "SimulationSpec":
        presets = {"well": cls.well_identified, "weak": cls.weakly_identified}
        if regime not in presets:
            raise InvalidInputException(f"Unknown regime: {regime}. Must be well or weak.")
        try:
            return presets[regime](group_sizes=tuple(group_sizes), target_density=target_density)
        except ValidationError as e:
            raise InvalidInputException(f"Invalid simulation settings: {str(e)}")


class SamplerConfig(FileConfigModel):
    """Priors, proposal scales and schedule of the random-walk Metropolis sampler"""

    prior_sd_position: float = Field(default=10.0, gt=0)
    prior_mean_alpha: float = 0.0
    prior_sd_alpha: float = Field(default=2.0, gt=0)
    proposal_sd_position: float = Field(default=0.1, gt=0)
    proposal_sd_alpha: float = Field(default=0.1, gt=0)
    burn_in: int = Field(default=10000, ge=0)
    thin: int = Field(default=20, ge=1)
    draws: int = Field(default=500, ge=1)
    seed: int = 0
    fixed_alpha: Optional[float] = None
    link: Literal["logistic", "probit"] = "logistic"

    @classmethod
    def florentine(cls, **overrides) -> "SamplerConfig":
        """Working prior alpha ~ Normal(2, 2²) used for the Florentine network."""
        return cls(prior_mean_alpha=2.0, prior_sd_alpha=2.0, **overrides)


class SamplerResult(ArrayModel):
    draws: DrawSet
    acceptance_position: float
    acceptance_alpha: Optional[float]
    log_posterior_trace: List[float]
    seed: int


class ReplicateSummary(BaseModel):
    """One simulate → sample → summarize run of the regime study"""

    regime: str
    seed: int
    alpha: float
    s_ref: float
    corr_u_l: float
    group_mean_u: Dict[str, float]
    group_mean_l: Dict[str, float]
    frechet_error: float
    first_draw_error: float
    medoid_error: float
    variation: float
    acceptance_position: float
