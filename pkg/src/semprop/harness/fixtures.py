"""Golden quadrature fixtures: (prior, psi, expected moments) tuples.

Regenerated by ``semprop oracle`` and committed under tests/data; the fast
test tier checks the closed-form moments against these stored values so
the heavy quadrature only runs when the fixtures are refreshed or in the
slow tier.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..conjugate import DirichletParams, NIGParams, ProductPrior
from ..oracle import quad_moments
from ..property_model import PropertyTable, init_product_prior

FIXTURE_VERSION = 1


def standard_fixture_priors():
    """The fixture set: k=1 standard, snow/ice, and seeded random priors."""
    cases = []
    cases.append(
        ("k1_standard", ProductPrior(DirichletParams([2.0]), (NIGParams(0.5, 1.0, 3.0, 1.0),)), 0.9)
    )
    snow_ice = PropertyTable.bundled().subset(["Snow", "Ice"])
    cases.append(
        ("snow_ice_0139", init_product_prior(DirichletParams([1.0, 1.0]), snow_ice), 0.139)
    )
    rng = np.random.default_rng(20240917)
    for i in range(2):
        k = 2
        nig = tuple(
            NIGParams(
                tau=float(rng.uniform(0.2, 1.2)),
                kappa=float(rng.uniform(0.5, 4.0)),
                beta=float(rng.uniform(3.0, 8.0)),
                gamma=float(rng.uniform(0.5, 3.0)),
            )
            for _ in range(k)
        )
        prior = ProductPrior(DirichletParams(rng.uniform(0.5, 5.0, size=k)), nig)
        cases.append((f"random_k2_{i}", prior, float(rng.normal(0.7, 0.8))))
    nig3 = tuple(
        NIGParams(
            tau=float(rng.uniform(0.2, 1.2)),
            kappa=float(rng.uniform(0.5, 4.0)),
            beta=float(rng.uniform(3.0, 8.0)),
            gamma=float(rng.uniform(0.5, 3.0)),
        )
        for _ in range(3)
    )
    cases.append(
        ("random_k3", ProductPrior(DirichletParams(rng.uniform(0.5, 5.0, size=3)), nig3), 0.55)
    )
    return cases


def _prior_to_json(prior: ProductPrior):
    return {
        "a": [float(x) for x in prior.a.alpha],
        "nig": [[n.tau, n.kappa, n.beta, n.gamma] for n in prior.nig],
    }


def prior_from_json(doc):
    return ProductPrior(
        a=DirichletParams(np.array(doc["a"], dtype=float)),
        nig=tuple(NIGParams(*row) for row in doc["nig"]),
    )


def generate_fixtures(out_path):
    """Compute quadrature moments for the fixture set and write them."""
    entries = []
    for name, prior, psi in standard_fixture_priors():
        moments = quad_moments(prior, psi, check=True)
        entries.append(
            {
                "name": name,
                "prior": _prior_to_json(prior),
                "psi": psi,
                "moments": {
                    field: [float(x) for x in getattr(moments, field)]
                    for field in ("e_mu", "e_var", "e_var2", "e_mu2var", "e_w", "e_w2")
                },
            }
        )
    doc = {"version": FIXTURE_VERSION, "fixtures": entries}
    Path(out_path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    return doc


def load_fixtures(path):
    doc = json.loads(Path(path).read_text())
    if doc.get("version") != FIXTURE_VERSION:
        raise ValueError(f"unsupported fixture version {doc.get('version')!r}")
    return doc["fixtures"]
