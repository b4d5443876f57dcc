"""Sparse voxel grid of semantic beliefs with region-scoped property updates.

Each occupied voxel stores a Dirichlet concentration vector fused from
projected label counts.  A scalar property measurement updates a whole
region at once: the region's class belief seeds a product prior, one
sequential update folds the measurement in, and the resulting posterior
is written back as a single shared object referenced by every cell of the
region.  Vision counts arriving afterwards keep accumulating; a cell's
effective belief is the written-back concentration plus the counts seen
since the write-back.

Voxel assignment uses the floor convention: index = floor((p - origin) /
resolution), so a point lying exactly on a face belongs to the voxel
whose lower corner it is.  The grid supports one writer at a time with
any number of readers between writes; nothing here locks.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .conjugate import (
    CategoricalDist,
    DirichletParams,
    GaussianMixture,
    GaussianParams,
    NIGParams,
    ProductPrior,
)
from .diagnostics import Diagnostics
from .errors import CellNotFoundError, DomainError, MomentUndefinedError
from .frames import SemanticPointCloud
from .moments import (
    ExactPosterior,
    branch_responsibilities,
    exact_posterior,
    floor_prior,
    likelihood_responsibilities,
    sequential_update,
)
from .property_model import PropertyTable, init_product_prior

__all__ = [
    "CellState",
    "RegionMask",
    "MeasurementUpdate",
    "VoxelGrid",
]

GRID_FORMAT_VERSION = 1


@dataclass
class CellState:
    """Belief state of one voxel.

    ``alpha`` accumulates vision counts (initialized to ones).  After a
    property update, ``local_psi`` holds the shared region posterior and
    ``alpha_at_update`` snapshots the counts at write-back time so the
    effective belief can add only the counts seen since.
    """

    alpha: np.ndarray
    local_psi: ProductPrior | None = None
    alpha_at_update: np.ndarray | None = None
    measurement_count: int = 0

    def effective_alpha(self):
        if self.local_psi is None:
            return self.alpha
        return self.local_psi.a.alpha + (self.alpha - self.alpha_at_update)


@dataclass(frozen=True)
class RegionMask:
    """The set of voxels a single measurement updates jointly."""

    voxel_ids: frozenset

    def __post_init__(self):
        ids = frozenset(tuple(int(c) for c in vid) for vid in self.voxel_ids)
        if not ids:
            raise DomainError("region mask must be nonempty")
        for vid in ids:
            if len(vid) != 3:
                raise DomainError("voxel ids must be integer triples")
        object.__setattr__(self, "voxel_ids", ids)

    def __len__(self):
        return len(self.voxel_ids)

    def sorted_ids(self):
        return sorted(self.voxel_ids)


@dataclass(frozen=True)
class MeasurementUpdate:
    """Everything a caller may want back from one region update."""

    psi: float
    region: RegionMask
    exact: ExactPosterior
    posterior: ProductPrior
    responsibilities: np.ndarray
    likelihood_class_posterior: np.ndarray


class VoxelGrid:
    """Sparse spatial store of per-voxel class beliefs."""

    def __init__(self, resolution, k, origin=(0.0, 0.0, 0.0), class_names=None,
                 table: PropertyTable | None = None):
        if resolution <= 0 or not math.isfinite(resolution):
            raise DomainError("resolution must be positive")
        if k < 1:
            raise DomainError("k must be at least 1")
        if class_names is not None and len(class_names) != k:
            raise DomainError("class_names length must equal k")
        if table is not None and table.k != k:
            raise DomainError("table length must equal k")
        self.resolution = float(resolution)
        self.origin = np.asarray(origin, dtype=float).copy()
        if self.origin.shape != (3,):
            raise DomainError("origin must be a 3-vector")
        self.k = int(k)
        self.class_names = tuple(class_names) if class_names is not None else None
        self.table = table
        self.cells: dict = {}

    # ------------------------------------------------------------------
    # geometry

    def voxel_id(self, point):
        """Floor-convention voxel index of a world point."""
        p = np.asarray(point, dtype=float)
        return tuple(int(i) for i in np.floor((p - self.origin) / self.resolution))

    def voxel_ids(self, points):
        p = np.asarray(points, dtype=float).reshape(-1, 3)
        return np.floor((p - self.origin) / self.resolution).astype(np.int64)

    # ------------------------------------------------------------------
    # vision path

    def integrate_cloud(self, cloud: SemanticPointCloud):
        """Fuse a labeled point cloud: per-voxel, per-class count increments.

        New voxels start from the all-ones concentration before counts are
        added.  Returns the grid for chaining.
        """
        if len(cloud) == 0:
            return self
        if cloud.labels.min() < 1 or cloud.labels.max() > self.k:
            raise DomainError("cloud labels must lie in [1, k]")
        ids = self.voxel_ids(cloud.points)
        order = np.lexsort((ids[:, 2], ids[:, 1], ids[:, 0]))
        ids = ids[order]
        labels = cloud.labels[order] - 1
        unique, inverse = np.unique(ids, axis=0, return_inverse=True)
        counts = np.zeros((unique.shape[0], self.k))
        np.add.at(counts, (inverse, labels), 1.0)
        for row, cnt in zip(unique, counts):
            vid = (int(row[0]), int(row[1]), int(row[2]))
            cell = self.cells.get(vid)
            if cell is None:
                cell = CellState(alpha=np.ones(self.k))
                self.cells[vid] = cell
            cell.alpha = cell.alpha + cnt
        return self

    # ------------------------------------------------------------------
    # queries

    def _require_cell(self, voxel_id):
        vid = tuple(int(c) for c in voxel_id)
        cell = self.cells.get(vid)
        if cell is None:
            raise CellNotFoundError(f"no cell at {vid}")
        return cell

    def query_cell(self, voxel_id):
        """(class belief, property mixture or None) for one voxel.

        The class belief uses the effective concentration (region
        posterior plus counts since write-back, when present).  The
        mixture pairs those weights with the region posterior's component
        Gaussians when present, else with the grid's table; without
        either source it is None.
        """
        cell = self._require_cell(voxel_id)
        eff = cell.effective_alpha()
        belief = CategoricalDist(eff / eff.sum())
        components = self._cell_components(cell)
        if components is None:
            return belief, None
        return belief, GaussianMixture(belief.theta, components)

    def _cell_components(self, cell):
        if cell.local_psi is not None:
            comps = []
            for i, nig in enumerate(cell.local_psi.nig):
                if nig.beta <= 1.0:
                    raise MomentUndefinedError(
                        f"stored posterior variance undefined for component {i + 1} "
                        f"(beta={nig.beta})",
                        component=i + 1,
                    )
                comps.append(GaussianParams(nig.tau, nig.gamma / (nig.beta - 1.0)))
            return tuple(comps)
        if self.table is not None:
            return self.table.params
        return None

    def class_map(self, voxel_ids):
        """Effective class probabilities for a list of voxel ids, (n, k)."""
        out = np.empty((len(voxel_ids), self.k))
        for row, vid in enumerate(voxel_ids):
            cell = self._require_cell(vid)
            eff = cell.effective_alpha()
            out[row] = eff / eff.sum()
        return out

    # ------------------------------------------------------------------
    # property path

    def _region_cells(self, region: RegionMask, create_missing=True):
        cells = []
        for vid in region.sorted_ids():
            cell = self.cells.get(vid)
            if cell is None:
                if not create_missing:
                    raise CellNotFoundError(f"no cell at {vid}")
                cell = CellState(alpha=np.ones(self.k))
                self.cells[vid] = cell
            cells.append(cell)
        return cells

    def _aggregate_alpha(self, cells):
        # Mean over cells so region size does not inflate confidence.
        stacked = np.stack([c.effective_alpha() for c in cells])
        return stacked.mean(axis=0)

    def _region_prior(self, cells, agg_alpha, table, c_const, diag):
        """Shared psi for the region: reuse the region's posterior components
        when every cell carries the same one, else seed from the table."""
        psis = {id(c.local_psi) for c in cells}
        shared = cells[0].local_psi
        if shared is not None and len(psis) == 1:
            if shared.k != self.k:
                raise DomainError("stored region posterior has mismatched k")
            return ProductPrior(a=DirichletParams(agg_alpha), nig=shared.nig)
        if any(c.local_psi is not None for c in cells) and len(psis) != 1:
            # Overlapping previously-updated regions: fall back to a fresh
            # table seed rather than guess which posterior to keep.
            pass
        if table is None:
            raise DomainError("a property table is required to seed the region prior")
        return init_product_prior(DirichletParams(agg_alpha), table, c_const=c_const, diag=diag)

    def apply_property_measurement(
        self,
        region: RegionMask,
        psi: float,
        table: PropertyTable | None = None,
        mode: str = "paper",
        c_const: float = 40.0,
        diag: Diagnostics | None = None,
    ) -> MeasurementUpdate:
        """Update a whole region with one scalar property measurement.

        Aggregates the region's effective concentrations (mean), seeds or
        reuses the region prior, folds the measurement through the
        sequential update, and writes the projected posterior back as the
        shared state of every region cell.  Cells outside the region are
        untouched.
        """
        table = table if table is not None else self.table
        cells = self._region_cells(region)
        agg = self._aggregate_alpha(cells)
        prior = floor_prior(self._region_prior(cells, agg, table, c_const, diag), diag=diag)
        post = exact_posterior(prior, psi)
        posterior = sequential_update(prior, [psi], mode=mode, diag=diag)
        for cell in cells:
            cell.local_psi = posterior
            cell.alpha_at_update = cell.alpha.copy()
            cell.measurement_count += 1
        return MeasurementUpdate(
            psi=float(psi),
            region=region,
            exact=post,
            posterior=posterior,
            responsibilities=branch_responsibilities(post),
            likelihood_class_posterior=likelihood_responsibilities(post),
        )

    def expected_property(self, region: RegionMask) -> float:
        """Mean of the region's effective property mixture, sum(w_i mu_i)."""
        cells = self._region_cells(region, create_missing=False)
        agg = self._aggregate_alpha(cells)
        weights = agg / agg.sum()
        shared = cells[0].local_psi
        if shared is not None and all(c.local_psi is shared for c in cells):
            means = shared.taus
        elif self.table is not None:
            means = self.table.mus
        else:
            raise DomainError("region has no property model to take means from")
        return float(weights @ means)

    # ------------------------------------------------------------------
    # serialization

    def save(self, path):
        """Write the canonical snapshot (sorted cells, full-precision floats)."""
        cells = []
        for vid in sorted(self.cells):
            cell = self.cells[vid]
            entry = {
                "id": list(vid),
                "alpha": [float(x) for x in cell.alpha],
                "count": cell.measurement_count,
            }
            if cell.local_psi is not None:
                entry["psi"] = _psi_to_json(cell.local_psi)
                entry["alpha_at_update"] = [float(x) for x in cell.alpha_at_update]
            cells.append(entry)
        doc = {
            "version": GRID_FORMAT_VERSION,
            "k": self.k,
            "resolution": self.resolution,
            "origin": [float(x) for x in self.origin],
            "class_names": list(self.class_names) if self.class_names else None,
            "table": _table_to_json(self.table),
            "cells": cells,
        }
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path):
        doc = json.loads(Path(path).read_text())
        if doc.get("version") != GRID_FORMAT_VERSION:
            raise DomainError(f"unsupported grid format version {doc.get('version')!r}")
        table = _table_from_json(doc.get("table"))
        grid = cls(
            resolution=doc["resolution"],
            k=doc["k"],
            origin=doc["origin"],
            class_names=doc.get("class_names"),
            table=table,
        )
        psi_cache = {}
        for entry in doc["cells"]:
            vid = tuple(int(c) for c in entry["id"])
            cell = CellState(alpha=np.array(entry["alpha"], dtype=float))
            cell.measurement_count = int(entry["count"])
            if "psi" in entry:
                key = json.dumps(entry["psi"], sort_keys=True)
                if key not in psi_cache:
                    psi_cache[key] = _psi_from_json(entry["psi"])
                cell.local_psi = psi_cache[key]
                cell.alpha_at_update = np.array(entry["alpha_at_update"], dtype=float)
            grid.cells[vid] = cell
        return grid


def _psi_to_json(psi: ProductPrior):
    return {
        "a": [float(x) for x in psi.a.alpha],
        "nig": [[n.tau, n.kappa, n.beta, n.gamma] for n in psi.nig],
    }


def _psi_from_json(doc):
    return ProductPrior(
        a=DirichletParams(np.array(doc["a"], dtype=float)),
        nig=tuple(NIGParams(*row) for row in doc["nig"]),
    )


def _table_to_json(table: PropertyTable | None):
    if table is None:
        return None
    return {
        "property_name": table.property_name,
        "contact_material": table.contact_material,
        "rows": [[name, p.mu, p.var] for name, p in zip(table.names, table.params)],
    }


def _table_from_json(doc):
    if doc is None:
        return None
    return PropertyTable(
        names=tuple(row[0] for row in doc["rows"]),
        params=tuple(GaussianParams(row[1], row[2]) for row in doc["rows"]),
        property_name=doc["property_name"],
        contact_material=doc["contact_material"],
    )
