"""Ground truth, data generation, and controlled initialization.

Observations follow y_i = <x_i, mu*> <z_i, nu*> + eps_i with x_i, z_i i.i.d.
standard Gaussian in R^d and eps_i ~ N(0, sigma^2), drawn fresh for every
mini-batch (online model). All randomness flows through explicit seeds;
numpy SeedSequences let the runner key batches as (master seed, trial,
iteration) so trials parallelize reproducibly.
"""

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import (
    InfeasibleInitializationError,
    InvalidDimensionError,
    ValidationError,
)

if TYPE_CHECKING:
    from .simulate import LambdaSchedule


@dataclass(frozen=True)
class GroundTruth:
    """Unit-norm coefficient vectors of the rank-one target mu* nu*^T."""

    mu_star: np.ndarray
    nu_star: np.ndarray

    def __post_init__(self):
        for name, v in (("mu_star", self.mu_star), ("nu_star", self.nu_star)):
            if abs(np.linalg.norm(v) - 1.0) > 1e-12:
                raise ValidationError(f"{name} must have unit norm")
        if self.mu_star.shape != self.nu_star.shape:
            raise ValidationError("mu_star and nu_star must share a dimension")

    @property
    def d(self):
        return int(self.mu_star.shape[0])


@dataclass(frozen=True)
class ProblemParams:
    """Dimension, batch size, noise level and inverse step-size schedule."""

    d: int
    m: int
    sigma: float
    schedule: "LambdaSchedule"

    def __post_init__(self):
        if self.d < 2:
            raise InvalidDimensionError("d must be at least 2")
        if not 1 <= self.m <= self.d:
            raise ValidationError("batch size must satisfy 1 <= m <= d")
        if self.sigma < 0:
            raise ValidationError("sigma must be nonnegative")


@dataclass(frozen=True)
class Batch:
    """One fresh mini-batch: sensing rows X, Z, noise eps and responses y."""

    X: np.ndarray
    Z: np.ndarray
    eps: np.ndarray
    y: np.ndarray


def generate_ground_truth(d, seed):
    """Two independent uniformly random unit vectors in R^d."""
    if d < 2:
        raise InvalidDimensionError("d must be at least 2")
    rng = np.random.default_rng(seed)
    return GroundTruth(
        mu_star=_unit(rng.standard_normal(d)),
        nu_star=_unit(rng.standard_normal(d)),
    )


def sample_batch(gt, params, seed):
    """Draw one batch of m observations; every call consumes fresh seeds."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((params.m, params.d))
    Z = rng.standard_normal((params.m, params.d))
    eps = params.sigma * rng.standard_normal(params.m)
    y = (X @ gt.mu_star) * (Z @ gt.nu_star) + eps
    return Batch(X=X, Z=Z, eps=eps, y=y)


@dataclass(frozen=True)
class InitSpec:
    """Target initial geometry, applied identically to both factor sides.

    overlap mode pins (alpha0, ||mu0||); distance mode pins ||mu0 - mu*||^2
    at a given norm. Either way the achieved state is exact by construction.
    """

    mode: str
    alpha0: float | None = None
    norm: float = 1.0
    dist_sq: float | None = None

    @classmethod
    def overlap(cls, alpha0, norm=1.0):
        return cls(mode="overlap", alpha0=alpha0, norm=norm)

    @classmethod
    def distance(cls, dist_sq, norm=1.0):
        return cls(mode="distance", dist_sq=dist_sq, norm=norm)

    def state_targets(self):
        """Resolve to (alpha0, beta0); raises if geometrically infeasible."""
        if self.norm <= 0:
            raise InfeasibleInitializationError("target norm must be positive")
        if self.mode == "overlap":
            if self.alpha0 is None:
                raise ValidationError("overlap mode requires alpha0")
            alpha0 = float(self.alpha0)
            if abs(alpha0) > self.norm * (1.0 + 1e-12):
                raise InfeasibleInitializationError(
                    f"|alpha0|={abs(alpha0):g} exceeds the target norm {self.norm:g}"
                )
        elif self.mode == "distance":
            if self.dist_sq is None:
                raise ValidationError("distance mode requires dist_sq")
            if self.dist_sq < 0:
                raise InfeasibleInitializationError("squared distance must be >= 0")
            # solve (alpha - 1)^2 + beta^2 = dist_sq with alpha^2 + beta^2 = norm^2
            alpha0 = 0.5 * (1.0 + self.norm ** 2 - self.dist_sq)
            if abs(alpha0) > self.norm * (1.0 + 1e-12):
                raise InfeasibleInitializationError(
                    f"distance {self.dist_sq:g} unreachable at norm {self.norm:g}"
                )
        else:
            raise ValidationError(f"unknown init mode {self.mode!r}")
        beta0 = float(np.sqrt(max(0.0, self.norm ** 2 - alpha0 ** 2)))
        return alpha0, beta0


def init_iterates(gt, spec, seed):
    """Construct (mu0, nu0) hitting the requested state targets exactly.

    mu0 = alpha0 mu* + beta0 u with u a uniformly random unit vector
    orthogonal to mu*; same construction on the nu side.
    """
    alpha0, beta0 = spec.state_targets()
    rng = np.random.default_rng(seed)
    mu0 = alpha0 * gt.mu_star + beta0 * _orthogonal_unit(rng, gt.mu_star)
    nu0 = alpha0 * gt.nu_star + beta0 * _orthogonal_unit(rng, gt.nu_star)
    return mu0, nu0


def _unit(v):
    return v / np.linalg.norm(v)


def _orthogonal_unit(rng, v):
    # v is unit norm; resampling guards the measure-zero degenerate draw
    for _ in range(16):
        g = rng.standard_normal(v.shape[0])
        g = g - (g @ v) * v
        n = np.linalg.norm(g)
        if n > 1e-12:
            return g / n
    raise ValidationError("failed to draw a direction orthogonal to v")
