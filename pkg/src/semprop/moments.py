"""Exact mixture posterior, analytic sufficient moments, and the projection
back onto the Dirichlet Normal-Inverse-Gamma product family.

A scalar property measurement drawn from a Gaussian mixture turns the
product prior into a k-branch mixture posterior: branch j carries the
conjugately updated j-th component together with every other component
left at its prior, weighted by a branch constant.  The posterior leaves
the prior family, so after computing the branch expansion we take its six
sufficient moment families per component

    E[mu_i], E[sigma_i^2], E[sigma_i^4], E[mu_i^2 sigma_i^2], E[w_i], E[w_i^2]

in closed form and invert them back to product-prior parameters.  Two
inversion modes ship:

* ``paper`` applies the classical hat formulas unchanged.  They invert
  a Gamma-style moment map, so a pure Normal-Inverse-Gamma prior does
  not round-trip (beta comes back as beta - 2); the mode is kept as the
  faithful default and is validated against its own moment map.
* ``corrected`` applies the method-of-moments inverses for the package's
  Normal-Inverse-Gamma parameterization and round-trips exactly.

Branch constants span hundreds of orders of magnitude for large shape
parameters, so everything is accumulated in log space with max-subtracted
logsumexp.

Everything here is a pure function over immutable values and safe under
concurrent evaluation; the sequential update is inherently ordered, so
parallelism belongs across independent measurement streams, not within
one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .conjugate import DirichletParams, NIGParams, ProductPrior
from .diagnostics import Diagnostics
from .errors import (
    DomainError,
    InvalidParameterError,
    MeasurementUpdateError,
    MomentUndefinedError,
    SingularProjectionError,
)

__all__ = [
    "BETA_FLOOR",
    "BETA_FLOOR_TRIGGER",
    "PosteriorBranch",
    "ExactPosterior",
    "SufficientMoments",
    "apply_beta_floor",
    "floor_prior",
    "exact_posterior",
    "branch_responsibilities",
    "likelihood_responsibilities",
    "analytic_moments",
    "prior_moments",
    "match_moments",
    "sequential_update",
]

BETA_FLOOR_TRIGGER = 2.5
BETA_FLOOR = 4.0

_SINGULAR_DENOM = 1e-300


@dataclass(frozen=True)
class PosteriorBranch:
    """One summand of the exact mixture posterior.

    ``log_c`` is the log branch weight: the conjugate-update constant with
    the prior mean weight a_j / sum(a) folded in, so that normalized branch
    weights are the posterior probabilities of each component having
    generated the measurement.  ``log_c_raw`` keeps the bare constant
    (no prior-weight factor) for likelihood-only class scoring.
    """

    updated_index: int  # 1-based component index
    log_c: float
    log_c_raw: float
    a_tilde: DirichletParams
    nig_tilde: NIGParams


@dataclass(frozen=True)
class ExactPosterior:
    """The k-branch posterior of the product prior after one measurement."""

    prior: ProductPrior
    psi: float
    branches: tuple
    log_M: float

    @property
    def k(self):
        return self.prior.k

    def responsibilities(self):
        return branch_responsibilities(self)


@dataclass(frozen=True)
class SufficientMoments:
    """Per-component sufficient moments of the exact posterior.

    Arrays are indexed 0-based internally; component i of the public API
    is entry i-1.  Construction checks positivity and that the weight
    means resolve to a distribution; the strict Jensen gaps (e_var2 >
    e_var^2, e_w2 > e_w^2) are asserted rather than raised because the
    projection handles near-singular gaps through its fallback path.
    """

    e_mu: np.ndarray
    e_var: np.ndarray
    e_var2: np.ndarray
    e_mu2var: np.ndarray
    e_w: np.ndarray
    e_w2: np.ndarray

    def __post_init__(self):
        arrays = {}
        k = None
        for name in ("e_mu", "e_var", "e_var2", "e_mu2var", "e_w", "e_w2"):
            arr = np.asarray(getattr(self, name), dtype=float).copy()
            if k is None:
                k = arr.size
            if arr.ndim != 1 or arr.size != k:
                raise DomainError("moment arrays must be 1-D with a common length")
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"{name} must be finite")
            arr.flags.writeable = False
            arrays[name] = arr
        if np.any(arrays["e_var"] <= 0) or np.any(arrays["e_var2"] <= 0):
            raise DomainError("variance moments must be positive")
        if np.any(arrays["e_w"] <= 0) or np.any(arrays["e_w"] > 1):
            raise DomainError("e_w must lie in (0, 1]")
        if abs(arrays["e_w"].sum() - 1.0) > 1e-10:
            raise DomainError("e_w must sum to 1 within 1e-10")
        for name, arr in arrays.items():
            object.__setattr__(self, name, arr)

    @property
    def k(self):
        return self.e_mu.size


def apply_beta_floor(nig: NIGParams, target_e_var=None, diag: Diagnostics | None = None) -> NIGParams:
    """Lift degenerate shape parameters so variance moments are usable.

    Shapes at or below the trigger (2.5) are lifted to the floor (4.0)
    with gamma rescaled so E[sigma^2] is preserved: explicitly to
    ``target_e_var`` when given (initialization from a property table),
    otherwise to the parameters' own gamma/(beta-1).  When beta <= 1 the
    mean does not exist and the sigma^2 mode gamma/(beta+1) is preserved
    instead.  Shapes above the trigger pass through untouched, so
    well-posed priors are never altered and the diagnostic counter only
    records genuine lifts.

    A bare-existence floor of 2 + eps would make the lifted fourth moment
    gamma^2/((beta-1)(beta-2)) of order 1/eps; that swamps every
    projection denominator, pins the projected shape back at the floor
    and freezes the precision at its initial value, so repeated
    measurements could never concentrate the posterior.  Lifting to 4
    gives Var(sigma^2) = E[sigma^2]^2 / 2, a weakly informative shape.
    """
    if nig.beta > BETA_FLOOR_TRIGGER:
        return nig
    if target_e_var is not None:
        target = float(target_e_var)
        if target <= 0:
            raise DomainError("target_e_var must be positive")
        new_gamma = (BETA_FLOOR - 1.0) * target
    elif nig.beta > 1.0 + 1e-9:
        new_gamma = nig.gamma * (BETA_FLOOR - 1.0) / (nig.beta - 1.0)
    else:
        # mean undefined below beta = 1: keep the sigma^2 mode in place
        new_gamma = nig.gamma * (BETA_FLOOR + 1.0) / (nig.beta + 1.0)
    if diag is not None:
        diag.beta_floor_clamps += 1
    return NIGParams(nig.tau, nig.kappa, BETA_FLOOR, new_gamma)


def floor_prior(prior: ProductPrior, diag: Diagnostics | None = None) -> ProductPrior:
    """Prior with every component lifted by the beta floor policy.

    Applied once per measurement, before the branch expansion, so the
    responsibilities and the moments describe the same posterior.
    """
    nig = tuple(apply_beta_floor(n, diag=diag) for n in prior.nig)
    if all(new is old for new, old in zip(nig, prior.nig)):
        return prior
    return ProductPrior(a=prior.a, nig=nig)


def _branch_update(nig: NIGParams, psi: float):
    tau_t = (nig.kappa * nig.tau + psi) / (nig.kappa + 1.0)
    kappa_t = nig.kappa + 1.0
    beta_t = nig.beta + 0.5
    gamma_t = nig.gamma + nig.kappa * (psi - nig.tau) ** 2 / (2.0 * (1.0 + nig.kappa))
    return NIGParams(tau_t, kappa_t, beta_t, gamma_t)


def exact_posterior(prior: ProductPrior, psi: float) -> ExactPosterior:
    """Branch expansion of the posterior after one scalar measurement.

    Each branch j updates component j conjugately (a_j + 1, the posted
    tau/kappa/beta/gamma recursions) and carries a log branch constant:
    the marginal-likelihood ratio of the updated component with the prior
    Dirichlet mean a_j / sum(a) folded in.  log_M is the max-subtracted
    logsumexp of the branch constants.
    """
    if not isinstance(psi, (int, float, np.floating, np.integer)) or not math.isfinite(psi):
        raise DomainError(f"psi must be a finite real, got {psi!r}")
    psi = float(psi)
    a = prior.a.alpha
    log_a0 = math.log(a.sum())
    branches = []
    log_weights = np.empty(prior.k)
    for j, nig in enumerate(prior.nig):
        upd = _branch_update(nig, psi)
        log_c_raw = (
            0.5 * (math.log(nig.kappa) - math.log(upd.kappa))
            + float(gammaln(upd.beta) - gammaln(nig.beta))
            + nig.beta * math.log(nig.gamma)
            - upd.beta * math.log(upd.gamma)
        )
        log_c = log_c_raw + (math.log(a[j]) - log_a0 if a[j] > 0 else -math.inf)
        a_tilde = a.copy()
        a_tilde[j] += 1.0
        branches.append(
            PosteriorBranch(
                updated_index=j + 1,
                log_c=log_c,
                log_c_raw=log_c_raw,
                a_tilde=DirichletParams(a_tilde),
                nig_tilde=upd,
            )
        )
        log_weights[j] = log_c
    log_M = float(logsumexp(log_weights))
    return ExactPosterior(prior=prior, psi=psi, branches=tuple(branches), log_M=log_M)


def branch_responsibilities(post: ExactPosterior) -> np.ndarray:
    """Normalized branch weights; these sum to 1 and are the posterior
    probabilities that the measurement came from each component."""
    log_w = np.array([b.log_c for b in post.branches])
    return np.exp(log_w - post.log_M)


def likelihood_responsibilities(post: ExactPosterior) -> np.ndarray:
    """Branch weights from the bare update constants, without the prior
    Dirichlet mean factor: the per-class measurement evidence alone."""
    log_raw = np.array([b.log_c_raw for b in post.branches])
    return np.exp(log_raw - logsumexp(log_raw))


def _nig_moment_block(nig: NIGParams):
    """(E[mu], E[s2], E[s4], E[mu^2 s2]) for one floored NIG."""
    e_var = nig.gamma / (nig.beta - 1.0)
    e_var2 = nig.gamma**2 / ((nig.beta - 1.0) * (nig.beta - 2.0))
    e_mu2var = nig.tau**2 * e_var + e_var2 / nig.kappa
    return nig.tau, e_var, e_var2, e_mu2var


def analytic_moments(post: ExactPosterior, diag: Diagnostics | None = None) -> SufficientMoments:
    """Closed-form sufficient moments of the branch posterior.

    For component i, branch i contributes the updated component's moments
    and every other branch contributes the prior's, mixed by branch
    responsibilities.  Weight moments use the incremented Dirichlet of
    each branch.  Every prior and branch shape must exceed 2 (fourth
    moments); apply the floor policy to the prior before the branch
    expansion when that is not guaranteed.
    """
    k = post.k
    r = branch_responsibilities(post)
    a = post.prior.a.alpha
    a0t = a.sum() + 1.0

    e_mu = np.empty(k)
    e_var = np.empty(k)
    e_var2 = np.empty(k)
    e_mu2var = np.empty(k)

    for i in range(k):
        prior_nig = post.prior.nig[i]
        upd_nig = post.branches[i].nig_tilde
        for nig, label in ((prior_nig, "prior"), (upd_nig, "branch")):
            if nig.beta <= 2.0:
                raise MomentUndefinedError(
                    f"E[sigma^4] undefined for component {i + 1} ({label} beta={nig.beta})",
                    component=i + 1,
                    branch=i + 1 if label == "branch" else None,
                )
        pm = _nig_moment_block(prior_nig)
        um = _nig_moment_block(upd_nig)
        ri = r[i]
        e_mu[i] = ri * um[0] + (1.0 - ri) * pm[0]
        e_var[i] = ri * um[1] + (1.0 - ri) * pm[1]
        e_var2[i] = ri * um[2] + (1.0 - ri) * pm[2]
        e_mu2var[i] = ri * um[3] + (1.0 - ri) * pm[3]

    # Dirichlet moments under branch j's incremented concentration reduce to
    # closed forms because the responsibilities sum to 1.
    e_w = (a + r) / a0t
    e_w2 = (a + 1.0) * (a + 2.0 * r) / (a0t * (a0t + 1.0))

    # Jensen strictness; near-equality cases are handled by the projection
    # fallback rather than rejected here.
    assert np.all(e_var2 >= np.square(e_var) - 1e-30), "fourth moment below squared second"
    assert np.all(e_w2 >= np.square(e_w) - 1e-30), "weight moments violate Jensen"

    return SufficientMoments(
        e_mu=e_mu, e_var=e_var, e_var2=e_var2, e_mu2var=e_mu2var, e_w=e_w, e_w2=e_w2
    )


def prior_moments(prior: ProductPrior, mode: str = "corrected") -> SufficientMoments:
    """Forward moment map of a product prior under the chosen mode.

    ``corrected`` evaluates the true moment identities of the package's
    Normal-Inverse-Gamma parameterization (requires beta > 2).  ``paper``
    evaluates the map that the classical hat formulas invert, so that
    either mode's projection is self-consistent against this function.
    """
    _check_mode(mode)
    a = prior.a.alpha
    a0 = a.sum()
    e_w = a / a0
    e_w2 = a * (a + 1.0) / (a0 * (a0 + 1.0))
    taus = prior.taus
    kappas = prior.kappas
    betas = prior.betas
    gammas = prior.gammas
    if mode == "corrected":
        bad = np.nonzero(betas <= 2.0)[0]
        if bad.size:
            raise MomentUndefinedError(
                f"moments require beta > 2, component {int(bad[0]) + 1} has beta={betas[bad[0]]}",
                component=int(bad[0]) + 1,
            )
        e_var = gammas / (betas - 1.0)
        e_var2 = gammas**2 / ((betas - 1.0) * (betas - 2.0))
        e_mu2var = taus**2 * e_var + e_var2 / kappas
    else:
        e_var = betas / gammas
        e_var2 = e_var**2 + betas / gammas**2
        e_mu2var = taus**2 * e_var + 1.0 / kappas
    return SufficientMoments(
        e_mu=taus, e_var=e_var, e_var2=e_var2, e_mu2var=e_mu2var, e_w=e_w, e_w2=e_w2
    )


def _check_mode(mode):
    if mode not in ("paper", "corrected"):
        raise DomainError(f"mode must be 'paper' or 'corrected', got {mode!r}")


def match_moments(
    m: SufficientMoments,
    mode: str = "paper",
    fallback: ProductPrior | None = None,
    diag: Diagnostics | None = None,
) -> ProductPrior:
    """Project sufficient moments back onto the product-prior family.

    If a component's denominator collapses (below 1e-300) and ``fallback``
    is given, that component's parameters are carried over from the
    fallback prior and the event is counted; without a fallback the
    collapse raises.  Projected shape/scale/precision parameters must come
    out positive.
    """
    _check_mode(mode)
    k = m.k
    if fallback is not None and fallback.k != k:
        raise DomainError("fallback prior k does not match moments")

    a_hat = np.empty(k)
    nig_hat = []
    for i in range(k):
        denom_w = m.e_w2[i] - m.e_w[i] ** 2
        num_w = m.e_w[i] - m.e_w2[i]
        if denom_w <= _SINGULAR_DENOM:
            if fallback is None:
                raise SingularProjectionError(
                    f"weight-moment denominator collapsed for component {i + 1}",
                    component=i + 1,
                )
            if diag is not None:
                diag.singular_fallbacks += 1
            a_hat[i] = fallback.a.alpha[i]
        else:
            a_hat[i] = m.e_w[i] * num_w / denom_w
            if a_hat[i] <= 0:
                raise InvalidParameterError(
                    f"projected concentration nonpositive for component {i + 1}",
                    component=i + 1,
                )

        denom_b = m.e_var2[i] - m.e_var[i] ** 2
        denom_k = m.e_mu2var[i] - m.e_mu[i] ** 2 * m.e_var[i]
        if denom_b <= _SINGULAR_DENOM or denom_k <= _SINGULAR_DENOM:
            if fallback is None:
                raise SingularProjectionError(
                    f"variance-moment denominator collapsed for component {i + 1}",
                    component=i + 1,
                )
            if diag is not None:
                diag.singular_fallbacks += 1
            nig_hat.append(fallback.nig[i])
            continue
        tau_hat = m.e_mu[i]
        if mode == "paper":
            kappa_hat = 1.0 / denom_k
            beta_hat = m.e_var[i] ** 2 / denom_b
            gamma_hat = m.e_var[i] / denom_b
        else:
            beta_hat = m.e_var[i] ** 2 / denom_b + 2.0
            gamma_hat = m.e_var[i] * (beta_hat - 1.0)
            kappa_hat = m.e_var2[i] / denom_k
        if beta_hat <= 0 or kappa_hat <= 0 or gamma_hat <= 0:
            raise InvalidParameterError(
                f"projected NIG parameters invalid for component {i + 1} "
                f"(kappa={kappa_hat}, beta={beta_hat}, gamma={gamma_hat})",
                component=i + 1,
            )
        nig_hat.append(NIGParams(tau_hat, kappa_hat, beta_hat, gamma_hat))

    return ProductPrior(a=DirichletParams(a_hat), nig=tuple(nig_hat))


def sequential_update(
    prior: ProductPrior,
    measurements,
    mode: str = "paper",
    diag: Diagnostics | None = None,
) -> ProductPrior:
    """Fold exact posterior -> moments -> projection once per measurement.

    An empty measurement list returns the prior unchanged.  Failures are
    re-raised annotated with the 0-based index of the offending
    measurement.
    """
    _check_mode(mode)
    current = prior
    for idx, psi in enumerate(measurements):
        try:
            floored = floor_prior(current, diag=diag)
            post = exact_posterior(floored, psi)
            moms = analytic_moments(post, diag=diag)
            current = match_moments(moms, mode=mode, fallback=floored, diag=diag)
        except Exception as exc:
            raise MeasurementUpdateError(
                f"update failed at measurement {idx}: {exc}", index=idx
            ) from exc
    return current
