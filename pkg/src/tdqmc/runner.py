"""Run orchestration: relax, propagate, compare, and bandwidth sweeps.

Each run writes into its own output directory: summary.json always,
timeseries.csv for time-dependent runs, bandwidths.csv for walker
ensembles, merged_compare.csv for cross-run comparison. All files are
written atomically and contain no timestamps, so a fixed config and
seed reproduce every artifact byte for byte.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from tdqmc.config import RunConfig
from tdqmc.effective_potential import SIGMA_MEAN_FIELD, SIGMA_ULTRA
from tdqmc.engine import (
    CorrelationRegime,
    EngineConfig,
    propagate_realtime,
    relax_ground_state,
)
from tdqmc.errors import ConfigurationError
from tdqmc.kde import BandwidthSpec, adaptive_bandwidths, variational_sigma
from tdqmc.numerics import Grid1D
from tdqmc.observables import COLUMNS, TimeSeries, write_json_atomic
from tdqmc.reference import (
    exact_ground_state,
    exact_propagate,
    hartree_scf_ground,
    tdhf_propagate,
)

__all__ = [
    "ARTIFACT_VERSION",
    "DEFAULT_SIGMA_GRID",
    "run_relax",
    "run_propagate",
    "run_compare",
    "run_sweep_sigma",
]

ARTIFACT_VERSION = 1

# candidate pilot bandwidths for the variational scan
DEFAULT_SIGMA_GRID = (0.1, 0.5, 2.0, 5.0, 20.0)

_HISTOGRAM_BINS = 60


def _json_num(value: float):
    """nan/inf have no strict-JSON encoding; summaries use null."""
    value = float(value)
    return value if np.isfinite(value) else None


def _summary_payload(config: RunConfig, command: str, **extra) -> dict:
    payload = {
        "artifact_version": ARTIFACT_VERSION,
        "command": command,
        "solver": config.solver,
        "seed": config.seed,
        "config": config.values,
    }
    payload.update(extra)
    return payload


def _walker_histogram(positions: np.ndarray, grid: Grid1D) -> dict:
    counts, edges = np.histogram(
        positions.ravel(), bins=_HISTOGRAM_BINS, range=(grid.x_min, grid.x_max)
    )
    return {"edges": [round(e, 12) for e in edges], "counts": counts.tolist()}


def _bandwidth_arrays(
    regime: CorrelationRegime, positions: np.ndarray
) -> list[np.ndarray]:
    """Per-electron per-walker bandwidths actually used by the regime;
    the sentinel regimes report their limiting constants."""
    m = positions.shape[1]
    if regime.tag == "ultra_correlated":
        return [np.full(m, SIGMA_ULTRA)] * 2
    if regime.tag == "mean_field":
        return [np.full(m, SIGMA_MEAN_FIELD)] * 2
    spec = regime.bandwidth
    if spec.mode == "global":
        return [np.full(m, spec.sigma)] * 2
    return [adaptive_bandwidths(positions[e], spec.sigma) for e in (0, 1)]


def _write_bandwidths_csv(
    path: Path, positions: np.ndarray, bandwidths: list[np.ndarray]
) -> None:
    lines = ["electron,x,sigma"]
    for e in (0, 1):
        for x, s in zip(positions[e], bandwidths[e]):
            lines.append(f"{e},{x:.12g},{s:.12g}")
    tmp = path.with_suffix(".tmp")
    tmp.write_text("\n".join(lines) + "\n")
    tmp.replace(path)


def _relax_tdqmc(config: RunConfig, out: Path) -> dict:
    grid = config.grid()
    regime = config.relax_regime()
    result = relax_ground_state(
        grid, config.engine_config(), regime, config.atom_params()
    )
    positions = result.state.positions
    bandwidths = _bandwidth_arrays(regime, positions)
    _write_bandwidths_csv(out / "bandwidths.csv", positions, bandwidths)
    core = np.concatenate(
        [bw[np.abs(positions[e]) < 1.0] for e, bw in enumerate(bandwidths)]
    )
    return {
        "energy": result.energy,
        "diagnostics": {
            "energy_trace_final": float(result.energy_trace[-1]),
            "node_events": result.node_events,
            "clamp_events": result.clamp_events,
            "sigma_core_mean": float(np.mean(core)) if core.size else None,
            "sigma_max": float(np.max([np.max(b) for b in bandwidths])),
            "histogram": _walker_histogram(positions, grid),
        },
    }


def run_relax(config: RunConfig, out_dir) -> dict:
    """Ground-state run for the selected solver; returns the summary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if config.solver == "tdqmc":
        extra = _relax_tdqmc(config, out)
    elif config.solver == "exact":
        state, energy = exact_ground_state(
            config.exact_grid(), config.atom_params()
        )
        extra = {
            "energy": energy,
            "diagnostics": {"grid_points": config.exact_grid().n_points},
        }
    else:
        orbital, energy = hartree_scf_ground(config.grid(), config.atom_params())
        extra = {
            "energy": energy,
            "diagnostics": {
                "scf_iterations": orbital.iterations,
                "scf_residual": orbital.residual,
            },
        }
    payload = _summary_payload(config, "relax", **extra)
    write_json_atomic(payload, out / "summary.json")
    return payload


def run_propagate(config: RunConfig, out_dir) -> dict:
    """Relax, then drive the pulse; writes timeseries.csv + summary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pulse = config.pulse()
    params = config.atom_params()
    extra: dict
    if config.solver == "tdqmc":
        engine = config.engine_config()
        grid = config.grid()
        relaxed = relax_ground_state(
            grid, engine, config.relax_regime(), params
        )
        prop = propagate_realtime(
            relaxed.state,
            engine,
            config.regime(),
            pulse,
            params,
            record_every=config.record_every,
            energy_every=config.energy_every,
        )
        series = prop.series
        extra = {
            "relax_energy": relaxed.energy,
            "diagnostics": {
                "node_events": prop.node_events,
                "clamp_events": prop.clamp_events,
                "walker_steps": prop.walker_steps,
            },
        }
    elif config.solver == "exact":
        state, energy = exact_ground_state(config.exact_grid(), params)
        series = exact_propagate(
            state,
            pulse,
            params,
            record_every=config.record_every,
            energy_every=config.energy_every,
        )
        extra = {"relax_energy": energy, "diagnostics": {}}
    else:
        orbital, energy = hartree_scf_ground(config.grid(), params)
        series = tdhf_propagate(
            orbital,
            pulse,
            config.grid(),
            params,
            record_every=config.record_every,
            energy_every=config.energy_every,
        )
        extra = {"relax_energy": energy, "diagnostics": {}}
    series.to_csv(out / "timeseries.csv")
    finals = {
        name: _json_num(series.final(name))
        for name in ("t", "ion_proj", "ion_walk_latched", "ion_walk_inst",
                     "ion_region", "dipole", "absorbed_norm")
    }
    payload = _summary_payload(
        config, "propagate", final=finals, records=len(series), **extra
    )
    write_json_atomic(payload, out / "summary.json")
    return payload


def _load_run(run_dir: Path) -> tuple[dict, TimeSeries]:
    import json

    summary_path = run_dir / "summary.json"
    series_path = run_dir / "timeseries.csv"
    if not summary_path.exists() or not series_path.exists():
        raise ConfigurationError(
            f"{run_dir} is not a completed propagation run "
            "(needs summary.json and timeseries.csv)"
        )
    with open(summary_path) as fh:
        summary = json.load(fh)
    return summary, TimeSeries.from_csv(series_path)


def run_compare(run_dirs: Sequence, out_dir) -> dict:
    """Merge completed propagation runs over their shared time axis.

    All runs must have identical [pulse] settings; rows are aligned on
    the time column and restricted to times every run recorded.
    """
    if len(run_dirs) < 2:
        raise ConfigurationError("compare needs at least two run directories")
    runs = [_load_run(Path(d)) for d in run_dirs]
    labels = []
    for i, (summary, _) in enumerate(runs):
        solver = summary.get("solver", "run")
        labels.append(f"{solver}{i + 1}")
    pulse0 = runs[0][0]["config"]["pulse"]
    for summary, _ in runs[1:]:
        if summary["config"]["pulse"] != pulse0:
            raise ConfigurationError(
                "compare requires identical pulse settings across runs"
            )

    keyed = []
    for _, series in runs:
        t = series.column("t")
        keyed.append({f"{tv:.9f}": j for j, tv in enumerate(t)})
    common = [k for k in keyed[0] if all(k in km for km in keyed[1:])]
    if not common:
        raise ConfigurationError("runs share no recorded time points")

    merge_cols = ("ion_proj", "ion_walk_latched", "dipole", "absorbed_norm")
    header = ["t", "field"] + [
        f"{label}_{col}" for label in labels for col in merge_cols
    ]
    lines = [",".join(header)]
    t0 = runs[0][1].column("t")
    field0 = runs[0][1].column("field")
    columns = [
        {col: series.column(col) for col in merge_cols} for _, series in runs
    ]
    for key in common:
        j0 = keyed[0][key]
        row = [f"{t0[j0]:.12g}", f"{field0[j0]:.12g}"]
        for r, label in enumerate(labels):
            j = keyed[r][key]
            row.extend(f"{columns[r][col][j]:.12g}" for col in merge_cols)
        lines.append(",".join(row))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    merged = out / "merged_compare.csv"
    tmp = merged.with_suffix(".tmp")
    tmp.write_text("\n".join(lines) + "\n")
    tmp.replace(merged)

    finals = {
        label: run[1].final("ion_proj") for label, run in zip(labels, runs)
    }
    deviations = {}
    for i in range(len(runs)):
        for j in range(i + 1, len(runs)):
            common_ij = [k for k in keyed[i] if k in keyed[j]]
            a = runs[i][1].column("ion_proj")
            b = runs[j][1].column("ion_proj")
            dev = max(
                abs(a[keyed[i][k]] - b[keyed[j][k]]) for k in common_ij
            )
            deviations[f"{labels[i]}-{labels[j]}"] = float(dev)
    payload = {
        "artifact_version": ARTIFACT_VERSION,
        "command": "compare",
        "runs": [str(d) for d in run_dirs],
        "labels": labels,
        "final_ion_proj": finals,
        "max_ion_proj_deviation": deviations,
    }
    write_json_atomic(payload, out / "summary.json")
    return payload


def run_sweep_sigma(
    config: RunConfig,
    out_dir,
    sigma_grid: Optional[Sequence[float]] = None,
) -> dict:
    """Variational bandwidth scan for the distance-weighted regime.

    Relaxes once per candidate sigma with the configured seed and
    bandwidth mode, plus one mean-field baseline, and selects the
    energy-minimizing sigma (ties toward smaller)."""
    if config.solver != "tdqmc":
        raise ConfigurationError("sweep-sigma requires solver = tdqmc")
    sigmas = tuple(sigma_grid) if sigma_grid is not None else DEFAULT_SIGMA_GRID
    grid = config.grid()
    engine = config.engine_config()
    params = config.atom_params()
    relax_spec = config.relax_regime()
    if relax_spec.tag != "effective":
        raise ConfigurationError(
            "sweep-sigma requires the effective regime (got "
            f"{relax_spec.tag})"
        )
    mode = relax_spec.bandwidth.mode
    refresh = relax_spec.bandwidth.refresh_every

    def relax_energy(sigma: float) -> float:
        regime = CorrelationRegime.effective(
            BandwidthSpec(mode=mode, sigma=sigma, refresh_every=refresh)
        )
        return relax_ground_state(grid, engine, regime, params).energy

    best, scan = variational_sigma(relax_energy, sigmas)
    mean_field_energy = relax_ground_state(
        grid, engine, CorrelationRegime.mean_field(), params
    ).energy

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["sigma,energy"]
    for sigma, energy in scan:
        lines.append(f"{sigma:.12g},{energy:.12g}")
    sweep_path = out / "sweep_sigma.csv"
    tmp = sweep_path.with_suffix(".tmp")
    tmp.write_text("\n".join(lines) + "\n")
    tmp.replace(sweep_path)

    payload = _summary_payload(
        config,
        "sweep-sigma",
        selected_sigma=best,
        scan=[[s, _json_num(e)] for s, e in scan],
        mean_field_energy=mean_field_energy,
    )
    write_json_atomic(payload, out / "summary.json")
    return payload
