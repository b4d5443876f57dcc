"""Independent brute-force verifiers for every closed form in the package.

Nothing here shares code with the implementations it checks: densities
are re-derived locally, log-gamma comes from the C library through
``math.lgamma`` (the main modules use scipy's independent implementation;
both routes are pinned against a high-precision reference in the tests),
and log-sum accumulation is a local max-subtracted helper.

The verifiers are a simplex lattice for Dirichlet posteriors, nested
quadrature over (mean, variance) planes for the mixture posterior and its
sufficient moments, and seeded Monte Carlo for predictive class
probabilities.  Variance axes are integrated on log-spaced grids because
inverse-gamma tails are heavy; the upper span widens as the shape
parameter approaches 2 so fourth-moment tail mass is captured (a fixed
thousand-fold span leaves ~1e-3 of E[sigma^4] outside the grid at shape
3, far above the accuracy this module must deliver).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .conjugate import DirichletParams, NIGParams, ProductPrior
from .errors import DomainError, PrecisionError
from .moments import ExactPosterior, SufficientMoments, exact_posterior

__all__ = [
    "QuadratureSpec",
    "SimplexLattice",
    "grid_posterior_dirichlet",
    "quad_moments",
    "normalization_check",
    "mc_predictive",
    "bayes_branch_masses",
    "nig_quad_moments",
    "simplex_integral",
]

_LOG_2PI = math.log(2.0 * math.pi)


def _logsumexp(values):
    arr = np.asarray(values, dtype=float)
    m = arr.max()
    if not np.isfinite(m):
        return m
    return m + math.log(np.exp(arr - m).sum())


def _lgamma(x):
    return math.lgamma(x)


@dataclass(frozen=True)
class QuadratureSpec:
    """Node placement for one (mean, variance) quadrature plane.

    The variance axis is a log-spaced grid on [var_lo, var_hi].  The mean
    axis is integrated per variance slice on a window scaled to the
    slice's conditional spread: the bounds [mu_lo, mu_hi] are in
    standardized units (multiples of the conditional standard deviation
    around the slice's bump centers), so every slice is resolved equally
    well no matter how wide the variance grid spans.  ``rule`` selects
    trapezoid or Gauss-Legendre nodes along each transformed axis.
    """

    mu_lo: float
    mu_hi: float
    mu_nodes: int
    var_lo: float
    var_hi: float
    var_nodes: int
    rule: str = "gauss-legendre"

    def __post_init__(self):
        if not (math.isfinite(self.mu_lo) and math.isfinite(self.mu_hi) and self.mu_lo < self.mu_hi):
            raise DomainError("mu bounds must be finite with mu_lo < mu_hi")
        if not (0.0 < self.var_lo < self.var_hi) or not math.isfinite(self.var_hi):
            raise DomainError("var bounds must satisfy 0 < var_lo < var_hi < inf")
        if self.mu_nodes < 16 or self.var_nodes < 16:
            raise DomainError("node counts must be at least 16")
        if self.rule not in ("trapezoid", "gauss-legendre"):
            raise DomainError(f"unknown rule {self.rule!r}")

    def refine(self, factor=2):
        """Same bounds with node counts scaled by ``factor``."""
        return QuadratureSpec(
            self.mu_lo, self.mu_hi, int(self.mu_nodes * factor),
            self.var_lo, self.var_hi, int(self.var_nodes * factor),
            self.rule,
        )

    def shrink(self, factor=2):
        return QuadratureSpec(
            self.mu_lo, self.mu_hi, max(16, self.mu_nodes // factor),
            self.var_lo, self.var_hi, max(16, self.var_nodes // factor),
            self.rule,
        )

    @classmethod
    def for_component(cls, nig: NIGParams, psi=None, mu_nodes=96, var_nodes=900,
                      rule="gauss-legendre"):
        """Bounds wide enough for moments up to sigma^4 and mu^2 sigma^2.

        The variance upper span follows the shape parameter: the tail of
        sigma^4 against an inverse-gamma with shape b decays like
        x^(1 - b), so the span must grow as b approaches 2.
        """
        mode = nig.gamma / (nig.beta + 1.0)
        mean_anchor = nig.gamma / (nig.beta - 1.0) if nig.beta > 1.05 else mode * 100.0
        decades_hi = min(12.0, max(4.0, 8.0 / max(nig.beta - 2.0, 0.6)))
        var_lo = mode * 1e-4
        var_hi = max(mean_anchor, mode) * 10.0**decades_hi
        return cls(-12.0, 12.0, mu_nodes, var_lo, var_hi, var_nodes, rule)


def _axis_nodes(lo, hi, n, rule):
    """Nodes and weights on [lo, hi] for the chosen 1-D rule."""
    if rule == "trapezoid":
        x = np.linspace(lo, hi, n)
        w = np.full(n, (hi - lo) / (n - 1))
        w[0] *= 0.5
        w[-1] *= 0.5
        return x, w
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (hi - lo)
    return half * x + 0.5 * (hi + lo), half * w


def _unit_nodes(n, rule):
    """Nodes and weights on [0, 1]."""
    return _axis_nodes(0.0, 1.0, n, rule)


def _quad_plane(nig: NIGParams, spec: QuadratureSpec, psi):
    """(var nodes, var weights, mu grid (n_var, n_mu), mu weights) with
    per-slice mu windows covering the prior bump and, when given, the
    likelihood bump."""
    u, wu = _axis_nodes(math.log(spec.var_lo), math.log(spec.var_hi), spec.var_nodes, spec.rule)
    var = np.exp(u)
    wvar = wu * var  # d(var) = var d(log var)
    t, wt = _unit_nodes(spec.mu_nodes, spec.rule)
    if psi is None:
        center = nig.tau
        cond_sd = np.sqrt(var / nig.kappa)
    else:
        # the mu-profile of prior times Gaussian likelihood is itself a
        # Gaussian (product of two Gaussians, elementary completion of the
        # square); used for node placement only
        center = (nig.kappa * nig.tau + psi) / (nig.kappa + 1.0)
        cond_sd = np.sqrt(var / (nig.kappa + 1.0))
    lo = center + spec.mu_lo * cond_sd
    hi = center + spec.mu_hi * cond_sd
    span = hi - lo
    mu = lo[:, None] + span[:, None] * t[None, :]
    wmu = span[:, None] * wt[None, :]
    return var, wvar, mu, wmu


def nig_quad_moments(nig: NIGParams, spec: QuadratureSpec | None = None, psi=None):
    """Quadrature moments (mass, E[mu], E[s2], E[s4], E[mu^2 s2]) of one NIG,
    optionally multiplied by a Gaussian likelihood centered at psi.

    The mass of the bare NIG should be 1; with the likelihood factor the
    mass is the component's measurement evidence.
    """
    if spec is None:
        spec = QuadratureSpec.for_component(nig, psi=psi)
    var, wvar, mu, wmu = _quad_plane(nig, spec, psi)
    vcol = var[:, None]
    logd = (
        0.5 * math.log(nig.kappa)
        - 0.5 * _LOG_2PI
        + nig.beta * math.log(nig.gamma)
        - _lgamma(nig.beta)
        - (nig.beta + 1.5) * np.log(vcol)
        - (2.0 * nig.gamma + nig.kappa * (mu - nig.tau) ** 2) / (2.0 * vcol)
    )
    if psi is not None:
        logd = logd - 0.5 * (_LOG_2PI + np.log(vcol)) - 0.5 * (psi - mu) ** 2 / vcol
    dens = np.exp(logd) * wmu * wvar[:, None]
    mass = float(dens.sum())
    e_mu = float((dens * mu).sum())
    e_var = float((dens * vcol).sum())
    e_var2 = float((dens * vcol**2).sum())
    e_mu2var = float((dens * mu**2 * vcol).sum())
    return {
        "mass": mass,
        "e_mu": e_mu / mass,
        "e_var": e_var / mass,
        "e_var2": e_var2 / mass,
        "e_mu2var": e_mu2var / mass,
    }


def bayes_branch_masses(prior: ProductPrior, psi: float, specs=None):
    """Posterior component responsibilities by direct Bayes quadrature.

    The mixture likelihood is expanded termwise: branch j's unnormalized
    mass is the prior weight mean a_j / sum(a) times the quadrature
    evidence of component j, with every other component integrating to 1.
    No update recursions or branch constants are used.
    """
    a = prior.a.alpha
    a0 = a.sum()
    masses = np.empty(prior.k)
    for j, nig in enumerate(prior.nig):
        spec = None if specs is None else specs[j]
        unit = nig_quad_moments(nig, spec=spec)["mass"]
        if abs(unit - 1.0) > 1e-4:
            raise PrecisionError(
                f"component {j + 1} prior density integrates to {unit}, not 1"
            )
        evidence = nig_quad_moments(nig, spec=spec, psi=psi)["mass"]
        masses[j] = (a[j] / a0) * evidence
    return masses / masses.sum()


def quad_moments(prior: ProductPrior, psi: float, spec: QuadratureSpec | None = None,
                 check: bool = True) -> SufficientMoments:
    """Sufficient moments of the exact posterior by nested quadrature.

    Component moments integrate the likelihood-weighted and prior planes
    separately and mix them with quadrature-derived branch masses; weight
    moments use closed-form Dirichlet monomial integrals per branch (the
    Dirichlet factor is exactly integrable) mixed by the same masses.
    With ``check`` a halved-resolution pass must agree within 1e-4
    relative, otherwise a PrecisionError is raised.
    """
    if prior.k > 3:
        raise DomainError("quadrature moments support k <= 3 only")
    result = _quad_moments_once(prior, psi, spec)
    if check:
        coarse = _quad_moments_once(prior, psi, spec, shrink=2)
        for name in ("e_mu", "e_var", "e_var2", "e_mu2var", "e_w", "e_w2"):
            a = getattr(result, name)
            b = getattr(coarse, name)
            rel = np.abs(a - b) / np.maximum(np.abs(a), 1e-12)
            if np.any(rel > 1e-4):
                raise PrecisionError(
                    f"{name} changed by {rel.max():.2e} under refinement"
                )
    return result


def _quad_moments_once(prior: ProductPrior, psi: float, spec, shrink=1):
    k = prior.k
    a = prior.a.alpha
    a0 = a.sum()

    evidence = np.empty(k)
    upd = []
    pri = []
    for j, nig in enumerate(prior.nig):
        s = spec if spec is not None else QuadratureSpec.for_component(nig, psi=psi)
        if shrink != 1:
            s = s.shrink(shrink)
        with_meas = nig_quad_moments(nig, spec=s, psi=psi)
        without = nig_quad_moments(nig, spec=s)
        evidence[j] = with_meas["mass"]
        upd.append(with_meas)
        pri.append(without)

    masses = (a / a0) * evidence
    r = masses / masses.sum()

    e_mu = np.empty(k)
    e_var = np.empty(k)
    e_var2 = np.empty(k)
    e_mu2var = np.empty(k)
    for i in range(k):
        for name, store in (("e_mu", e_mu), ("e_var", e_var),
                            ("e_var2", e_var2), ("e_mu2var", e_mu2var)):
            store[i] = r[i] * upd[i][name] + (1.0 - r[i]) * pri[i][name]

    # Dirichlet monomial moments under the prior, per branch: the factor
    # integrates in closed form against w_j and w_i, w_i^2.
    e_w = np.empty(k)
    e_w2 = np.empty(k)
    for i in range(k):
        first = 0.0
        second = 0.0
        for j in range(k):
            if i == j:
                m1 = a[i] * (a[i] + 1.0) / (a0 * (a0 + 1.0))
                m2 = a[i] * (a[i] + 1.0) * (a[i] + 2.0) / (a0 * (a0 + 1.0) * (a0 + 2.0))
            else:
                m1 = a[i] * a[j] / (a0 * (a0 + 1.0))
                m2 = a[i] * (a[i] + 1.0) * a[j] / (a0 * (a0 + 1.0) * (a0 + 2.0))
            # divide out the E[w_j] that the branch mass already carries
            first += r[j] * m1 / (a[j] / a0)
            second += r[j] * m2 / (a[j] / a0)
        e_w[i] = first
        e_w2[i] = second

    return SufficientMoments(
        e_mu=e_mu, e_var=e_var, e_var2=e_var2, e_mu2var=e_mu2var, e_w=e_w, e_w2=e_w2
    )


def normalization_check(prior: ProductPrior, psi: float, spec: QuadratureSpec | None = None) -> float:
    """Integral of the branch-expanded posterior; 1 if the expansion is
    correctly normalized and each branch density is itself a density.

    Works on the implementation's posterior object: per branch, the
    normalized branch weight multiplies quadrature integrals of the
    updated component, of every prior component, and of the incremented
    Dirichlet factor.
    """
    if prior.k > 2:
        raise DomainError("normalization check supports k <= 2 only")
    post = exact_posterior(prior, psi)
    return _posterior_integral(post, spec)


def _posterior_integral(post: ExactPosterior, spec):
    total = 0.0
    k = post.k
    for j, branch in enumerate(post.branches):
        weight = math.exp(branch.log_c - post.log_M)
        s_upd = spec if spec is not None else QuadratureSpec.for_component(branch.nig_tilde, psi=post.psi)
        piece = nig_quad_moments(branch.nig_tilde, spec=s_upd)["mass"]
        for i, nig in enumerate(post.prior.nig):
            if i == j:
                continue
            s_pri = spec if spec is not None else QuadratureSpec.for_component(nig)
            piece *= nig_quad_moments(nig, spec=s_pri)["mass"]
        if k == 2:
            piece *= _beta_mass(branch.a_tilde.alpha)
        total += weight * piece
    return total


def _beta_mass(alpha_pair):
    """Quadrature integral of a Beta density over [0, 1] (k = 2 Dirichlet)."""
    a, b = float(alpha_pair[0]), float(alpha_pair[1])
    x, w = np.polynomial.legendre.leggauss(400)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    log_norm = _lgamma(a + b) - _lgamma(a) - _lgamma(b)
    dens = np.exp(log_norm + (a - 1.0) * np.log(x) + (b - 1.0) * np.log(1.0 - x))
    return float((dens * w).sum())


@dataclass(frozen=True)
class SimplexLattice:
    """Interior lattice points (barycentric) and the density values on them."""

    points: np.ndarray  # (n, k) barycentric coordinates
    density: np.ndarray  # (n,)
    cell_weight: float  # measure represented by each point


def _sub_triangles(resolution):
    """Vertex triples of the subdivided simplex in (t1, t2) coordinates."""
    h = 1.0 / resolution
    ups = [
        ((i, j), (i + 1, j), (i, j + 1))
        for i in range(resolution)
        for j in range(resolution - i)
    ]
    downs = [
        ((i + 1, j), (i, j + 1), (i + 1, j + 1))
        for i in range(resolution - 1)
        for j in range(resolution - 1 - i)
    ]
    verts = np.array(ups + downs, dtype=float) * h  # (n, 3, 2)
    return verts, h


def _lattice_points(k, resolution):
    """Comparison points (cell centers / triangle centroids), all interior."""
    h = 1.0 / resolution
    if k == 2:
        t1 = (np.arange(resolution) + 0.5) * h
        pts = np.column_stack([t1, 1.0 - t1])
        return pts, h
    verts, h = _sub_triangles(resolution)
    centroids = verts.mean(axis=1)
    pts = np.column_stack([centroids, 1.0 - centroids.sum(axis=1)])
    return pts, h * h / 2.0


def _log_monomial(pts, exponents):
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = exponents[None, :] * np.log(pts)
    # 0 * log(0) is the removable exponent-zero case
    terms = np.where(exponents[None, :] == 0.0, 0.0, terms)
    return terms.sum(axis=1)


def _lattice_normalizer(k, resolution, exponents, shift):
    """Integral of the unnormalized monomial by a degree-2 interior rule
    on the same subdivision the comparison lattice lives on."""
    if k == 2:
        h = 1.0 / resolution
        offs = np.array([0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0)])
        t1 = (np.arange(resolution)[:, None] + offs[None, :]).reshape(-1) * h
        pts = np.column_stack([t1, 1.0 - t1])
        weights = np.full(pts.shape[0], h / 2.0)
    else:
        verts, h = _sub_triangles(resolution)
        nodes = []
        for a in range(3):
            mix = np.full(3, 1.0 / 6.0)
            mix[a] = 4.0 / 6.0
            nodes.append(np.einsum("v,nvc->nc", mix, verts))
        pts2 = np.concatenate(nodes, axis=0)
        pts = np.column_stack([pts2, 1.0 - pts2.sum(axis=1)])
        weights = np.full(pts.shape[0], (h * h / 2.0) / 3.0)
    log_f = _log_monomial(pts, exponents)
    return float(np.exp(log_f - shift) @ weights)


def grid_posterior_dirichlet(alpha: DirichletParams, counts, resolution: int = 200) -> SimplexLattice:
    """Discretized Dirichlet-categorical posterior on a simplex lattice.

    Evaluates prior times likelihood pointwise (no normalizing constants)
    on an interior lattice at the given resolution; the renormalizing mass
    comes from a degree-2 symmetric rule over the same subdivision.
    Supports k <= 3.
    """
    k = alpha.k
    if k > 3 or k < 2:
        raise DomainError("lattice posterior supports k in {2, 3} only")
    c = np.asarray(counts, dtype=float)
    if c.size != k or np.any(c < 0):
        raise DomainError("counts must be a nonnegative vector of length k")
    pts, cell_weight = _lattice_points(k, resolution)
    exponents = alpha.alpha + c - 1.0
    log_f = _log_monomial(pts, exponents)
    shift = log_f.max()
    z = _lattice_normalizer(k, resolution, exponents, shift)
    density = np.exp(log_f - shift) / z
    return SimplexLattice(points=pts, density=density, cell_weight=cell_weight)


def simplex_integral(fn, k, nodes=120):
    """Nested Gauss-Legendre integral of fn(theta) over the (k-1)-simplex.

    fn receives an (n, k) array of simplex points and returns n values.
    """
    if k == 2:
        x, w = np.polynomial.legendre.leggauss(nodes)
        t = 0.5 * (x + 1.0)
        wt = 0.5 * w
        pts = np.column_stack([t, 1.0 - t])
        return float((fn(pts) * wt).sum())
    if k == 3:
        x, w = np.polynomial.legendre.leggauss(nodes)
        t1 = 0.5 * (x + 1.0)
        w1 = 0.5 * w
        total = 0.0
        for a, wa in zip(t1, w1):
            span = 1.0 - a
            t2 = 0.5 * (x + 1.0) * span
            w2 = 0.5 * w * span
            pts = np.column_stack([np.full_like(t2, a), t2, 1.0 - a - t2])
            total += wa * float((fn(pts) * w2).sum())
        return total
    raise DomainError("simplex integration supports k in {2, 3} only")


def mc_predictive(alpha: DirichletParams, n_samples: int, seed: int):
    """Monte-Carlo estimate of the predictive class probabilities.

    Deterministic for a given (alpha, n_samples, seed); the estimate is
    the sample mean of Dirichlet draws.  Returns (estimate, standard
    errors).
    """
    if n_samples < 10_000:
        raise DomainError("mc_predictive needs at least 1e4 samples")
    rng = np.random.default_rng(seed)
    chunk = 200_000
    remaining = n_samples
    total = np.zeros(alpha.k)
    total_sq = np.zeros(alpha.k)
    while remaining > 0:
        m = min(chunk, remaining)
        draws = rng.dirichlet(alpha.alpha, size=m)
        total += draws.sum(axis=0)
        total_sq += (draws**2).sum(axis=0)
        remaining -= m
    mean = total / n_samples
    var = total_sq / n_samples - mean**2
    se = np.sqrt(np.maximum(var, 0.0) / n_samples)
    return mean, se
