"""Class-conditional property models: table priors, likelihood assembly,
force-to-friction conversion and measurement plumbing.

A property table maps each semantic class to a Gaussian over a scalar
physical property (the bundled default is a friction table against a
rubber contact).  The table seeds the product prior and supplies the
mixture components of the measurement likelihood, whose weights come from
the predictive class probabilities of the current semantic belief.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .conjugate import (
    DirichletParams,
    GaussianMixture,
    GaussianParams,
    NIGParams,
    ProductPrior,
    predictive_class,
)
from .diagnostics import Diagnostics
from .errors import DomainError, InitError, InvalidContactError, PsiOutOfRangeWarning
from .moments import apply_beta_floor

__all__ = [
    "PropertyTable",
    "ForceSample",
    "MeasurementEvent",
    "LowPassState",
    "build_likelihood",
    "friction_from_forces",
    "lowpass",
    "nearest_class",
    "raw_table_nig",
    "init_product_prior",
    "read_force_stream",
    "write_force_stream",
    "psi_from_force_stream",
    "DEFAULT_PSI_MAX",
]

DEFAULT_PSI_MAX = 2.0


@dataclass(frozen=True)
class PropertyTable:
    """Ordered (class name, Gaussian) rows defining the property model.

    Row order defines the 1-based class indexing used everywhere else.
    """

    names: tuple
    params: tuple
    property_name: str = "friction"
    contact_material: str = "rubber"

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        params = tuple(self.params)
        if not names or len(names) != len(params):
            raise DomainError("table needs one Gaussian per class name")
        if len(set(names)) != len(names):
            raise DomainError("class names must be unique")
        for p in params:
            if not isinstance(p, GaussianParams):
                raise DomainError("table rows must be GaussianParams")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "params", params)

    @property
    def k(self):
        return len(self.names)

    def __len__(self):
        return len(self.names)

    @property
    def mus(self):
        return np.array([p.mu for p in self.params])

    @property
    def sigmas(self):
        return np.array([p.sigma for p in self.params])

    @property
    def vars(self):
        return np.array([p.var for p in self.params])

    def index_of(self, name: str) -> int:
        """1-based index of a class name."""
        try:
            return self.names.index(name) + 1
        except ValueError:
            raise DomainError(f"unknown class {name!r}") from None

    def subset(self, names) -> "PropertyTable":
        """New table restricted to the given class names, in the given order."""
        idx = [self.index_of(n) - 1 for n in names]
        return PropertyTable(
            names=tuple(self.names[i] for i in idx),
            params=tuple(self.params[i] for i in idx),
            property_name=self.property_name,
            contact_material=self.contact_material,
        )

    @classmethod
    def from_csv(cls, path, property_name="friction", contact_material="rubber"):
        """Load a delimited table with header ``class,mu,sigma`` (sigma = std dev)."""
        names, params = [], []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            required = {"class", "mu", "sigma"}
            if reader.fieldnames is None or not required.issubset(reader.fieldnames):
                raise DomainError(f"table file {path} must have header class,mu,sigma")
            for row in reader:
                names.append(row["class"])
                sigma = float(row["sigma"])
                if sigma <= 0:
                    raise DomainError(f"class {row['class']}: sigma must be positive")
                params.append(GaussianParams(float(row["mu"]), sigma**2))
        return cls(tuple(names), tuple(params), property_name, contact_material)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["class", "mu", "sigma"])
            for name, p in zip(self.names, self.params):
                writer.writerow([name, repr(p.mu), repr(p.sigma)])

    @classmethod
    def bundled(cls, name="friction_rubber"):
        """Load one of the tables shipped with the package."""
        ref = resources.files("semprop.data").joinpath(f"{name}.csv")
        with resources.as_file(ref) as path:
            if name == "door_affordance":
                return cls.from_csv(path, property_name="opening_force", contact_material="door_handle")
            return cls.from_csv(path)


@dataclass(frozen=True)
class ForceSample:
    """One tactile force reading: tangential and normal components in newtons."""

    f_t: float
    f_n: float
    timestamp: float = 0.0


@dataclass(frozen=True)
class MeasurementEvent:
    """A property measurement bound to the region it updates."""

    psi: float
    region: object = None
    source: str = "tactile"

    def __post_init__(self):
        if not math.isfinite(self.psi):
            raise DomainError("psi must be finite")
        if self.source not in ("tactile", "simulated"):
            raise DomainError(f"source must be 'tactile' or 'simulated', got {self.source!r}")


@dataclass(frozen=True)
class LowPassState:
    """First-order exponential smoother state."""

    smoothed: float
    alpha_smooth: float = 0.2

    def __post_init__(self):
        if not 0.0 < self.alpha_smooth <= 1.0:
            raise DomainError("alpha_smooth must lie in (0, 1]")
        if not math.isfinite(self.smoothed):
            raise DomainError("smoothed value must be finite")


def build_likelihood(alpha: DirichletParams, table: PropertyTable) -> GaussianMixture:
    """Measurement likelihood: table Gaussians weighted by the predictive class."""
    if alpha.k != table.k:
        raise DomainError(f"alpha length {alpha.k} does not match table length {table.k}")
    weights = predictive_class(alpha).theta
    return GaussianMixture(weights, table.params)


def friction_from_forces(s: ForceSample, psi_max: float = DEFAULT_PSI_MAX,
                         diag: Diagnostics | None = None) -> float:
    """Friction coefficient as the tangential-to-normal force ratio."""
    if not (math.isfinite(s.f_t) and math.isfinite(s.f_n)):
        raise InvalidContactError("force components must be finite")
    if s.f_n <= 0:
        raise InvalidContactError(f"normal force must be positive, got {s.f_n}")
    psi = s.f_t / s.f_n
    if abs(psi) > psi_max:
        if diag is not None:
            diag.psi_out_of_range += 1
        warnings.warn(
            f"friction ratio {psi:.4g} exceeds sanity bound {psi_max}",
            PsiOutOfRangeWarning,
            stacklevel=2,
        )
    return psi


def lowpass(state: LowPassState, sample: float):
    """One smoothing step; returns (new state, smoothed value)."""
    if not math.isfinite(sample):
        raise DomainError("sample must be finite")
    value = state.alpha_smooth * sample + (1.0 - state.alpha_smooth) * state.smoothed
    return LowPassState(value, state.alpha_smooth), value


def nearest_class(psi: float, table: PropertyTable) -> int:
    """Class (1-based) whose conditional Gaussian density is largest at psi.

    Density comparison rather than nearest mean: wide classes absorb
    outliers that would be implausible under a tight class.  Ties break to
    the lowest index.
    """
    if not math.isfinite(psi):
        raise DomainError("psi must be finite")
    mus = table.mus
    vars_ = table.vars
    log_dens = -0.5 * (psi - mus) ** 2 / vars_ - 0.5 * np.log(vars_)
    return int(np.argmax(log_dens)) + 1


def raw_table_nig(table: PropertyTable, c_const: float = 40.0):
    """Unfloored per-class NIG parameters from the table formulas.

    tau = mu, kappa = 1, beta = sigma^2 / tau, gamma = sqrt(beta) / C.
    Kept separate from :func:`init_product_prior` so the pre-floor values
    stay inspectable.  Raises for classes whose mean is nonpositive, where
    the shape formula is undefined.
    """
    if c_const <= 0:
        raise DomainError("c_const must be positive")
    out = []
    for name, p in zip(table.names, table.params):
        if p.mu <= 0:
            raise InitError(
                f"class {name!r}: beta = sigma^2/tau undefined for tau <= 0 (tau={p.mu})",
                class_name=name,
            )
        beta = p.var / p.mu
        gamma = math.sqrt(beta) / c_const
        out.append(NIGParams(tau=p.mu, kappa=1.0, beta=beta, gamma=gamma))
    return tuple(out)


def init_product_prior(
    alpha: DirichletParams,
    table: PropertyTable,
    c_const: float = 40.0,
    diag: Diagnostics | None = None,
) -> ProductPrior:
    """Product prior seeded from the class-property table.

    Weight concentrations copy alpha; each NIG starts from the table
    formulas and is then lifted by the beta floor with gamma rescaled so
    the expected variance reproduces the table's sigma^2 exactly.
    """
    if alpha.k != table.k:
        raise DomainError(f"alpha length {alpha.k} does not match table length {table.k}")
    raw = raw_table_nig(table, c_const)
    floored = tuple(
        apply_beta_floor(nig, target_e_var=p.var, diag=diag)
        for nig, p in zip(raw, table.params)
    )
    return ProductPrior(a=alpha, nig=floored)


def direct_prior_from_table(
    alpha: DirichletParams,
    table: PropertyTable,
    kappa: float = 1.0,
    diag: Diagnostics | None = None,
) -> ProductPrior:
    """Prior with tau = mu and E[sigma^2] = sigma^2 at the beta floor.

    Used for tables with nonpositive means (signed forces), where the
    table's shape formula is undefined.
    """
    if alpha.k != table.k:
        raise DomainError(f"alpha length {alpha.k} does not match table length {table.k}")
    nig = tuple(
        apply_beta_floor(
            NIGParams(tau=p.mu, kappa=kappa, beta=1.0, gamma=p.var),
            target_e_var=p.var,
            diag=diag,
        )
        for p in table.params
    )
    return ProductPrior(a=alpha, nig=nig)


def read_force_stream(path):
    """Load replay rows of (timestamp, f_t, f_n) from a delimited file."""
    samples = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"timestamp", "f_t", "f_n"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise DomainError(f"force stream {path} must have header timestamp,f_t,f_n")
        for row in reader:
            samples.append(
                ForceSample(
                    f_t=float(row["f_t"]),
                    f_n=float(row["f_n"]),
                    timestamp=float(row["timestamp"]),
                )
            )
    return samples


def write_force_stream(path, samples):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["timestamp", "f_t", "f_n"])
        for s in samples:
            writer.writerow([repr(s.timestamp), repr(s.f_t), repr(s.f_n)])


def psi_from_force_stream(
    samples,
    alpha_smooth: float = 0.2,
    psi_max: float = DEFAULT_PSI_MAX,
    diag: Diagnostics | None = None,
):
    """Convert a force stream into smoothed friction values, one per sample."""
    if not samples:
        return []
    state = None
    out = []
    for s in samples:
        psi = friction_from_forces(s, psi_max=psi_max, diag=diag)
        if state is None:
            state = LowPassState(psi, alpha_smooth)
            out.append(psi)
        else:
            state, value = lowpass(state, psi)
            out.append(value)
    return out
