"""Protocol replays: misclassification correction, gait choice, door modes.

Every experiment is reproducible byte-for-byte from (config, seed): trial
t draws all randomness from a generator seeded with [seed, t], trials own
their grids, and reports carry the config hash plus the floor/fallback
counters so silent numerical policy activity stays visible.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..conjugate import DirichletParams, expected_mixture
from ..diagnostics import Diagnostics
from ..errors import ConfigError
from ..frames import project_labels
from ..mapping import RegionMask, VoxelGrid
from ..moments import (
    analytic_moments,
    branch_responsibilities,
    exact_posterior,
    floor_prior,
    match_moments,
)
from ..property_model import direct_prior_from_table, init_product_prior
from .metrics import compute_metrics
from .report import ExperimentReport
from .scene import ScenarioConfig, generate_scene

__all__ = [
    "gait_decision",
    "run_correction_experiment",
    "run_gait_scenario",
    "run_door_scenario",
    "run_simulation",
    "run_config",
]


def gait_decision(e_psi: float, threshold: float = 0.25) -> str:
    """Static gait when the expected friction is at or below the threshold."""
    if not (np.isfinite(e_psi) and np.isfinite(threshold)):
        raise ConfigError("gait decision needs finite inputs", "thresholds.gait")
    return "Static" if e_psi <= threshold else "Dynamic"


def _build_grid(config: ScenarioConfig, scene, table):
    grid = VoxelGrid(
        resolution=scene.cell_size,
        k=table.k,
        class_names=table.names,
        table=table,
    )
    for frame, pose in zip(scene.frames, scene.poses):
        cloud = project_labels(frame, scene.cam, pose, stride=config.scene.stride)
        grid.integrate_cloud(cloud)
    return grid


def _cell_ids(scene):
    rows, cols = scene.shape
    return [(c, r, 0) for r in range(rows) for c in range(cols)]


def _belief_map(grid, scene):
    rows, cols = scene.shape
    out = np.empty((rows, cols, grid.k))
    for r in range(rows):
        for c in range(cols):
            belief, _ = grid.query_cell((c, r, 0))
            out[r, c] = belief.theta
    return out


def _misclassified_regions(pred_map, truth):
    """Connected components (4-neighborhood) of the misclassification mask."""
    wrong = (np.argmax(pred_map, axis=2) + 1) != truth
    labeled, n = ndimage.label(wrong)
    regions = []
    for i in range(1, n + 1):
        rs, cs = np.nonzero(labeled == i)
        regions.append([(int(c), int(r), 0) for r, c in zip(rs, cs)])
    return regions


def _mixture_curve(weights, mus, variances, grid_lo, grid_hi, n=512):
    xs = np.linspace(grid_lo, grid_hi, n)
    dens = np.zeros_like(xs)
    for w, mu, var in zip(weights, mus, variances):
        dens += w * np.exp(-0.5 * (xs - mu) ** 2 / var) / np.sqrt(2 * np.pi * var)
    return xs, dens


def run_correction_experiment(config: ScenarioConfig) -> ExperimentReport:
    """The misclassification-correction protocol.

    Per trial: build the map from confusion-sampled frames, find regions
    whose predictive argmax disagrees with the truth, pick scheduled
    regions uniformly at random, draw one property measurement from each
    region's true-class table Gaussian, update the map, and score class
    maps before and after.  Measured regions contribute their
    measurement-likelihood class posterior to the posterior map (the
    vision prior over a misclassified region is the quantity under
    correction, so it does not discount the tactile evidence).
    """
    table = config.load_table()
    diag = Diagnostics()
    trials = []
    curves = None
    for t in range(config.trials):
        rng = np.random.default_rng([config.seed, t])
        scene = generate_scene(config, rng)
        grid = _build_grid(config, scene, table)
        prior_map = _belief_map(grid, scene)
        truth = scene.truth

        regions = _misclassified_regions(prior_map, truth)
        n_meas = min(config.measurements.count, len(regions))
        chosen = []
        if n_meas:
            order = rng.permutation(len(regions))
            chosen = [regions[i] for i in order[:n_meas]]

        post_map = prior_map.copy()
        records = []
        for region_cells in chosen:
            region = RegionMask(frozenset(region_cells))
            cells_rc = [(vid[1], vid[0]) for vid in region_cells]
            true_classes = [int(truth[r, c]) for r, c in cells_rc]
            true_class = int(np.bincount(true_classes).argmax())
            row = table.params[true_class - 1]
            if config.measurements.values:
                psi = float(config.measurements.values[0])
            else:
                psi = float(rng.normal(row.mu, row.sigma))
            prior_argmax = int(
                np.bincount([int(np.argmax(prior_map[r, c])) + 1 for r, c in cells_rc]).argmax()
            )
            upd = grid.apply_property_measurement(region, psi, mode=config.mode, diag=diag)
            class_post = upd.likelihood_class_posterior
            for r, c in cells_rc:
                post_map[r, c] = class_post
            post_argmax = int(np.argmax(class_post)) + 1
            records.append(
                {
                    "psi": psi,
                    "region_size": len(region_cells),
                    "true_class": true_class,
                    "prior_argmax": prior_argmax,
                    "posterior_argmax": post_argmax,
                    "flipped": bool(prior_argmax != post_argmax),
                    "corrected": bool(post_argmax == true_class),
                }
            )

        before = compute_metrics(prior_map, truth)
        after = compute_metrics(post_map, truth)
        trials.append(
            {
                "trial": t,
                "measurements": records,
                "metrics_before": before.as_dict(),
                "metrics_after": after.as_dict(),
                "accuracy_improved": bool(after.accuracy > before.accuracy),
            }
        )
        if t == 0 and chosen:
            mus = table.mus
            sig = np.sqrt(table.vars)
            lo = float((mus - 4 * sig).min())
            hi = float((mus + 4 * sig).max())
            prior_prior = init_product_prior(
                DirichletParams(np.ones(table.k)), table, c_const=config.c_const
            )
            prior_mix = expected_mixture(prior_prior)
            post_mix = expected_mixture(floor_prior(upd.posterior))
            xs, prior_dens = _mixture_curve(prior_mix.weights, prior_mix.mus, prior_mix.vars, lo, hi)
            _, post_dens = _mixture_curve(post_mix.weights, post_mix.mus, post_mix.vars, lo, hi)
            curves = {
                "psi": [float(x) for x in xs],
                "series": {
                    "prior": [float(v) for v in prior_dens],
                    "posterior": [float(v) for v in post_dens],
                },
            }

    n_corrected = sum(
        1 for tr in trials for m in tr["measurements"] if m["corrected"]
    )
    n_measured = sum(len(tr["measurements"]) for tr in trials)
    flip_trials = [
        tr for tr in trials if any(m["flipped"] and m["corrected"] for m in tr["measurements"])
    ]
    aggregate = {
        "trials": config.trials,
        "measured_regions": n_measured,
        "corrected_regions": n_corrected,
        "correction_rate": (n_corrected / n_measured) if n_measured else None,
        "accuracy_improved_on_all_flips": all(tr["accuracy_improved"] for tr in flip_trials),
        "mean_accuracy_before": float(
            np.mean([tr["metrics_before"]["accuracy"] for tr in trials])
        ),
        "mean_accuracy_after": float(
            np.mean([tr["metrics_after"]["accuracy"] for tr in trials])
        ),
    }
    return ExperimentReport(
        kind="correct",
        seed=config.seed,
        mode=config.mode,
        config=config.to_dict(),
        config_hash=config.content_hash(),
        trials=trials,
        aggregate=aggregate,
        diagnostics=diag.as_dict(),
        curves=curves,
    )


def run_simulation(config: ScenarioConfig) -> ExperimentReport:
    """Single-pass scene build plus scheduled measurements; the generic
    ``simulate`` entry point."""
    sim = ScenarioConfig.from_dict({**config.to_dict(), "kind": "correct", "trials": config.trials})
    report = run_correction_experiment(sim)
    return ExperimentReport(
        kind="simulate",
        seed=report.seed,
        mode=report.mode,
        config=config.to_dict(),
        config_hash=config.content_hash(),
        trials=report.trials,
        aggregate=report.aggregate,
        diagnostics=report.diagnostics,
        curves=report.curves,
    )


def run_gait_scenario(config: ScenarioConfig, psi_values=None) -> ExperimentReport:
    """Gait choice from expected friction after one measurement per trial."""
    table = config.load_table()
    diag = Diagnostics()
    values = tuple(psi_values) if psi_values is not None else config.measurements.values
    if not values:
        raise ConfigError("gait scenario needs measurement values", "measurements.values")
    trials = []
    curves = None
    for i, psi in enumerate(values):
        prior = init_product_prior(
            DirichletParams(np.ones(table.k)), table, c_const=config.c_const, diag=diag
        )
        floored = floor_prior(prior, diag=diag)
        post = exact_posterior(floored, float(psi))
        moments = analytic_moments(post, diag=diag)
        projected = match_moments(moments, mode=config.mode, fallback=floored, diag=diag)
        weights = projected.a.alpha / projected.a.alpha.sum()
        e_psi = float(weights @ projected.taus)
        decision = gait_decision(e_psi, config.gait_threshold)
        trials.append(
            {
                "trial": i,
                "psi": float(psi),
                "expected_friction": e_psi,
                "threshold": config.gait_threshold,
                "decision": decision,
                "class_weights": [float(w) for w in weights],
                "class_means": [float(tau) for tau in projected.taus],
            }
        )
        if i == 0:
            mus = table.mus
            sig = table.sigmas
            lo = float((mus - 4 * sig).min())
            hi = float((mus + 4 * sig).max())
            pm = expected_mixture(floored)
            xs, prior_dens = _mixture_curve(pm.weights, pm.mus, pm.vars, lo, hi)
            _, post_dens = _mixture_curve(weights, projected.taus, moments.e_var, lo, hi)
            curves = {
                "psi": [float(x) for x in xs],
                "series": {
                    "prior": [float(v) for v in prior_dens],
                    "posterior": [float(v) for v in post_dens],
                },
            }
    aggregate = {
        "decisions": [tr["decision"] for tr in trials],
        "static_count": sum(tr["decision"] == "Static" for tr in trials),
    }
    return ExperimentReport(
        kind="gait",
        seed=config.seed,
        mode=config.mode,
        config=config.to_dict(),
        config_hash=config.content_hash(),
        trials=trials,
        aggregate=aggregate,
        diagnostics=diag.as_dict(),
        curves=curves,
    )


def run_door_scenario(config: ScenarioConfig) -> ExperimentReport:
    """Sequential bimodal affordance update over door-opening forces.

    Positive measurements are pulls, negative pushes.  Each step records
    mode weights, posterior component means, moment variances, and the
    branch-updated scale of the responsible mode.
    """
    table = config.load_table()
    diag = Diagnostics()
    values = config.measurements.values
    if not values:
        raise ConfigError("door scenario needs measurement values", "measurements.values")
    prior = direct_prior_from_table(DirichletParams(np.ones(table.k)), table, diag=diag)
    current = prior
    trials = []
    series = {}
    xs = None
    mus = table.mus
    spread = float(np.sqrt(table.vars).max())
    lo = float(mus.min() - 6 * spread - 40.0)
    hi = float(mus.max() + 6 * spread + 40.0)
    pm = expected_mixture(current)
    xs, prior_dens = _mixture_curve(pm.weights, pm.mus, pm.vars, lo, hi)
    series["step0_prior"] = [float(v) for v in prior_dens]
    for i, psi in enumerate(values):
        floored = floor_prior(current, diag=diag)
        post = exact_posterior(floored, float(psi))
        resp = branch_responsibilities(post)
        measured_mode = int(np.argmax(resp)) + 1
        moments = analytic_moments(post, diag=diag)
        projected = match_moments(moments, mode=config.mode, fallback=floored, diag=diag)
        weights = projected.a.alpha / projected.a.alpha.sum()
        trials.append(
            {
                "trial": i,
                "psi": float(psi),
                "responsibilities": [float(r) for r in resp],
                "measured_mode": measured_mode,
                "measured_mode_name": table.names[measured_mode - 1],
                "prior_gamma": [float(n.gamma) for n in floored.nig],
                "updated_gamma": [float(b.nig_tilde.gamma) for b in post.branches],
                "mode_weights": [float(w) for w in weights],
                "mode_means": [float(tau) for tau in projected.taus],
                "mode_variances": [float(v) for v in moments.e_var],
                "concentrations": [float(a) for a in projected.a.alpha],
            }
        )
        _, dens = _mixture_curve(weights, projected.taus, moments.e_var, lo, hi)
        series[f"step{i + 1}_posterior"] = [float(v) for v in dens]
        current = projected
    final = trials[-1]
    w = np.array(final["mode_weights"])
    aggregate = {
        "steps": len(values),
        "final_mode_weights": final["mode_weights"],
        "final_weight_ratio": float(w.max() / w.min()),
        "final_mode_means": final["mode_means"],
        "final_mode_variances": final["mode_variances"],
    }
    return ExperimentReport(
        kind="door",
        seed=config.seed,
        mode=config.mode,
        config=config.to_dict(),
        config_hash=config.content_hash(),
        trials=trials,
        aggregate=aggregate,
        diagnostics=diag.as_dict(),
        curves={"psi": [float(x) for x in xs], "series": series},
    )


def run_config(config: ScenarioConfig) -> ExperimentReport:
    """Dispatch on config.kind."""
    if config.kind == "correct":
        return run_correction_experiment(config)
    if config.kind == "simulate":
        return run_simulation(config)
    if config.kind == "gait":
        return run_gait_scenario(config)
    if config.kind == "door":
        return run_door_scenario(config)
    raise ConfigError(f"unknown kind {config.kind!r}", "kind")
