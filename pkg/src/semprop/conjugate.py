"""Closed-form conjugate machinery for class beliefs and property models.

Two distribution families are represented here.  A Dirichlet over the
class simplex carries the discrete semantic belief; its conjugate update
against categorical label counts and its predictive class probabilities
are exact.  A Dirichlet Normal-Inverse-Gamma product carries the joint
belief over a Gaussian mixture's weights and per-component (mean,
variance) pairs; it is the prior family that the moment-matching module
projects back onto after property measurements.

The Normal-Inverse-Gamma density is parameterized by (tau, kappa, beta,
gamma) with inverse-gamma shape beta and scale gamma, i.e. the exponent
contains -(2*gamma + kappa*(mu - tau)^2) / (2*sigma^2).  Every moment
identity elsewhere in the package assumes this same parameterization:
E[sigma^2] = gamma/(beta-1) and E[sigma^4] = gamma^2/((beta-1)(beta-2)).

All gamma-function work happens in log space through
``scipy.special.gammaln`` so densities stay finite for concentrations and
shapes up to 1e6 (accuracy against a 50-digit reference is pinned in the
test suite).  Classes are indexed 1-based at the public API, matching the
label convention of the mapping module.

All types here are immutable values and every operation is a pure
function: evaluation is safe from any number of concurrent callers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, MomentUndefinedError

__all__ = [
    "DirichletParams",
    "CategoricalDist",
    "GaussianParams",
    "GaussianMixture",
    "NIGParams",
    "ProductPrior",
    "categorical_pmf",
    "dirichlet_logpdf",
    "dirichlet_pdf",
    "dirichlet_update",
    "predictive_class",
    "nig_logpdf",
    "nig_pdf",
    "mixture_pdf",
    "product_prior_logpdf",
    "product_prior_pdf",
    "expected_mixture",
]

SIMPLEX_TOL = 1e-12

LOG_2PI = math.log(2.0 * math.pi)


def _frozen_array(values, name, dtype=float):
    arr = np.asarray(values, dtype=dtype)
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError(f"{name} must be a nonempty 1-D vector")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


def _check_index(i, k):
    if not isinstance(i, (int, np.integer)):
        raise DomainError(f"class index must be an integer, got {type(i).__name__}")
    if not 1 <= i <= k:
        raise DomainError(f"class index {i} out of range [1, {k}]")
    return int(i)


@dataclass(frozen=True)
class DirichletParams:
    """Concentration vector over k classes; the semantic belief state."""

    alpha: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.alpha, "alpha")
        if np.any(arr < 0):
            raise DomainError("alpha entries must be nonnegative")
        if not np.any(arr > 0):
            raise DomainError("alpha must have at least one positive entry")
        object.__setattr__(self, "alpha", arr)

    @property
    def k(self):
        return self.alpha.size

    def __len__(self):
        return self.alpha.size

    @classmethod
    def uniform(cls, k):
        """The all-ones prior used to seed fresh belief state."""
        return cls(np.ones(k))


@dataclass(frozen=True)
class CategoricalDist:
    """A point on the class simplex.

    Inputs whose entries sum to 1 within 1e-12 are renormalized to absorb
    float drift from repeated predictive calls; anything further off the
    simplex is rejected.
    """

    theta: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.theta, "theta")
        if np.any(arr < 0) or np.any(arr > 1):
            raise DomainError("theta entries must lie in [0, 1]")
        total = arr.sum()
        if abs(total - 1.0) > SIMPLEX_TOL:
            raise DomainError(f"theta must sum to 1 within {SIMPLEX_TOL}, got {total!r}")
        if total != 1.0:
            arr = arr / total
            arr.flags.writeable = False
        object.__setattr__(self, "theta", arr)

    @property
    def k(self):
        return self.theta.size

    def __len__(self):
        return self.theta.size


@dataclass(frozen=True)
class GaussianParams:
    """Mean and variance of one class-conditional property Gaussian."""

    mu: float
    var: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.var)):
            raise DomainError("Gaussian parameters must be finite")
        if self.var <= 0:
            raise DomainError(f"variance must be positive, got {self.var}")

    @property
    def sigma(self):
        return math.sqrt(self.var)


@dataclass(frozen=True)
class GaussianMixture:
    """Weighted sum of k Gaussians; the property measurement likelihood."""

    weights: np.ndarray
    components: tuple

    def __post_init__(self):
        w = _frozen_array(self.weights, "weights")
        comps = tuple(self.components)
        if len(comps) != w.size:
            raise DomainError("weights and components must have matching length")
        if np.any(w < 0) or np.any(w > 1):
            raise DomainError("weights must lie in [0, 1]")
        total = w.sum()
        if abs(total - 1.0) > SIMPLEX_TOL:
            raise DomainError(f"weights must sum to 1 within {SIMPLEX_TOL}, got {total!r}")
        if total != 1.0:
            w = w / total
            w.flags.writeable = False
        for c in comps:
            if not isinstance(c, GaussianParams):
                raise DomainError("components must be GaussianParams")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", comps)

    @property
    def k(self):
        return self.weights.size

    @property
    def mus(self):
        return np.array([c.mu for c in self.components])

    @property
    def vars(self):
        return np.array([c.var for c in self.components])

    def mean(self):
        return float(self.weights @ self.mus)


@dataclass(frozen=True)
class NIGParams:
    """Normal-Inverse-Gamma hyperparameters for one mixture component."""

    tau: float
    kappa: float
    beta: float
    gamma: float

    def __post_init__(self):
        for name in ("tau", "kappa", "beta", "gamma"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if self.kappa <= 0 or self.beta <= 0 or self.gamma <= 0:
            raise DomainError("kappa, beta and gamma must be positive")


@dataclass(frozen=True)
class ProductPrior:
    """Dirichlet Normal-Inverse-Gamma product prior over a Gaussian mixture.

    Holds mixture-weight concentrations ``a`` and one NIGParams per
    component; the two parts must agree on k.
    """

    a: DirichletParams
    nig: tuple

    def __post_init__(self):
        comps = tuple(self.nig)
        if len(comps) != self.a.k:
            raise DomainError("a and nig must have matching length")
        for c in comps:
            if not isinstance(c, NIGParams):
                raise DomainError("nig entries must be NIGParams")
        object.__setattr__(self, "nig", comps)

    @property
    def k(self):
        return self.a.k

    @property
    def taus(self):
        return np.array([c.tau for c in self.nig])

    @property
    def kappas(self):
        return np.array([c.kappa for c in self.nig])

    @property
    def betas(self):
        return np.array([c.beta for c in self.nig])

    @property
    def gammas(self):
        return np.array([c.gamma for c in self.nig])


def categorical_pmf(theta: CategoricalDist, i: int) -> float:
    """Probability that a sample falls in class ``i`` (1-based)."""
    i = _check_index(i, theta.k)
    return float(theta.theta[i - 1])


def dirichlet_logpdf(params: DirichletParams, theta: CategoricalDist) -> float:
    alpha = params.alpha
    if theta.k != params.k:
        raise DomainError("theta and alpha must have matching length")
    if np.any(alpha <= 0):
        raise DomainError("dirichlet_pdf requires strictly positive concentrations")
    t = theta.theta
    on_boundary = np.any(t == 0.0) or np.any(t == 1.0)
    if on_boundary and np.any(alpha < 1.0):
        raise DomainError("density diverges on the simplex boundary for alpha < 1")
    log_norm = gammaln(alpha.sum()) - gammaln(alpha).sum()
    with np.errstate(divide="ignore"):
        log_terms = (alpha - 1.0) * np.log(t)
    # 0 * log(0) is a removable limit (alpha entry exactly 1 on the boundary)
    log_terms = np.where(alpha == 1.0, 0.0, log_terms)
    return float(log_norm + log_terms.sum())


def dirichlet_pdf(params: DirichletParams, theta: CategoricalDist) -> float:
    """Dirichlet density at ``theta``, evaluated in log space internally."""
    return math.exp(dirichlet_logpdf(params, theta))


def dirichlet_update(params: DirichletParams, counts) -> DirichletParams:
    """Conjugate posterior concentrations after observing integer class counts."""
    c = np.asarray(counts)
    if c.ndim != 1 or c.size != params.k:
        raise DomainError(f"counts must have length {params.k}")
    if np.any(c < 0) or not np.all(np.isfinite(c.astype(float))):
        raise DomainError("counts must be nonnegative")
    if not np.all(np.equal(np.mod(c, 1), 0)):
        raise DomainError("counts must be integers")
    return DirichletParams(params.alpha + c.astype(float))


def predictive_class(params: DirichletParams) -> CategoricalDist:
    """Marginal class probabilities alpha_i / sum(alpha)."""
    total = params.alpha.sum()
    if total <= 0:
        raise DomainError("predictive_class requires positive total concentration")
    return CategoricalDist(params.alpha / total)


def nig_logpdf(p: NIGParams, mu: float, var: float) -> float:
    if not (math.isfinite(mu) and math.isfinite(var)):
        raise DomainError("evaluation point must be finite")
    if var <= 0:
        raise DomainError(f"var must be positive, got {var}")
    log_var = math.log(var)
    return (
        0.5 * math.log(p.kappa)
        - 0.5 * (LOG_2PI + log_var)
        + p.beta * math.log(p.gamma)
        - float(gammaln(p.beta))
        - (p.beta + 1.0) * log_var
        - (2.0 * p.gamma + p.kappa * (mu - p.tau) ** 2) / (2.0 * var)
    )


def nig_pdf(p: NIGParams, mu: float, var: float) -> float:
    """Joint density of (mean, variance) under the Normal-Inverse-Gamma prior."""
    return math.exp(nig_logpdf(p, mu, var))


def mixture_pdf(m: GaussianMixture, psi: float) -> float:
    """Gaussian mixture density at ``psi``."""
    if not math.isfinite(psi):
        raise DomainError("psi must be finite")
    mus = m.mus
    vars_ = m.vars
    dens = np.exp(-0.5 * (psi - mus) ** 2 / vars_) / np.sqrt(2.0 * math.pi * vars_)
    return float(m.weights @ dens)


def product_prior_logpdf(psi_params: ProductPrior, theta: GaussianMixture) -> float:
    if theta.k != psi_params.k:
        raise DomainError("mixture and prior must have matching length")
    total = 0.0
    if psi_params.k > 1:
        total += dirichlet_logpdf(psi_params.a, CategoricalDist(theta.weights))
    # k = 1 puts all weight mass on a single point; the Dirichlet factor is 1
    for nig, comp in zip(psi_params.nig, theta.components):
        total += nig_logpdf(nig, comp.mu, comp.var)
    return total


def product_prior_pdf(psi_params: ProductPrior, theta: GaussianMixture) -> float:
    """Density of a full mixture parameter set under the product prior."""
    return math.exp(product_prior_logpdf(psi_params, theta))


def expected_mixture(psi_params: ProductPrior) -> GaussianMixture:
    """Posterior-predictive mixture: weights a/sum(a), means tau, variances gamma/(beta-1)."""
    betas = psi_params.betas
    bad = np.nonzero(betas <= 1.0)[0]
    if bad.size:
        i = int(bad[0]) + 1
        raise MomentUndefinedError(
            f"E[sigma^2] undefined for component {i} (beta={betas[bad[0]]} <= 1)",
            component=i,
        )
    weights = predictive_class(psi_params.a).theta
    comps = tuple(
        GaussianParams(nig.tau, nig.gamma / (nig.beta - 1.0)) for nig in psi_params.nig
    )
    return GaussianMixture(weights, comps)
