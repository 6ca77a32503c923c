"""End-to-end acceptance runs at the production protocol.

One test per numbered criterion; every test appends a single PASS/FAIL
line with its measured values to acceptance_report.txt at the repo
root (lines starting with # are progress notes from the long
fixtures). The heavy fixtures are shared: the 512^2 ground state feeds
the energy, gap, and every exact pulse; the M=2000 relaxed ensemble
feeds both the energy and the bandwidth criteria.

Budget several CPU-hours: the six M=1000 engine pulses and the four
512^2 exact pulses dominate.
"""

import math
from pathlib import Path

import numpy as np
import pytest

from tdqmc.effective_potential import SIGMA_MEAN_FIELD, SIGMA_ULTRA, v_eff_batch
from tdqmc.engine import (
    CorrelationRegime,
    EngineConfig,
    guidance_velocities,
    propagate_realtime,
    relax_ground_state,
)
from tdqmc.kde import BandwidthSpec, adaptive_bandwidths
from tdqmc.numerics import Grid1D, gaussian, inner_product
from tdqmc.potentials import PulseSpec, SoftCoreParams, v_ee
from tdqmc.propagator import (
    StepSpec,
    absorber_mask,
    cn_step_batch,
    hamiltonian_expectation,
    relax,
)
from tdqmc.reference import (
    exact_first_gap,
    exact_ground_state,
    exact_propagate,
    hartree_scf_ground,
    tdhf_propagate,
)

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]

GRID = Grid1D.centered(50.0, 1024)
GRID_2D = Grid1D.centered(50.0, 512)
PARAMS = SoftCoreParams()

E_EXACT_REF = -2.4597
E_HF_REF = -2.4522
E_TDQMC_REF = -2.4595
GAP_REF = 0.6117
CORE_BW_REF = 0.58

LOW_PULSE = PulseSpec(e0=0.20, omega=0.136, n_cycles=8)
HIGH_PULSE = PulseSpec(e0=0.30, omega=1.22, n_cycles=8)
SEEDS = (0, 1, 2)
M_PULSE = 1000

# production protocol: adaptive per-walker bandwidths (pilot 0.6) for
# the ground-state relaxation, global sigma = 5 during the pulse
RELAX_REGIME = CorrelationRegime.effective(BandwidthSpec("adaptive", 0.6))
DYN_REGIME = CorrelationRegime.effective(BandwidthSpec("global", 5.0))
ULTRA = CorrelationRegime.ultra_correlated()

REPORT = Path(__file__).resolve().parent.parent / "acceptance_report.txt"


@pytest.fixture(scope="module", autouse=True)
def _fresh_report():
    REPORT.write_text("")
    yield


def _note(msg: str) -> None:
    with REPORT.open("a") as fh:
        fh.write(f"# {msg}\n")


def _record(criterion: int, ok: bool, detail: str) -> None:
    line = f"criterion {criterion:2d} {'PASS' if ok else 'FAIL'}: {detail}"
    with REPORT.open("a") as fh:
        fh.write(line + "\n")
    assert ok, line


@pytest.fixture(scope="module")
def exact_ground():
    _note("relaxing 512^2 ground state")
    return exact_ground_state(GRID_2D, PARAMS)


@pytest.fixture(scope="module")
def hf_ground():
    return hartree_scf_ground(GRID, PARAMS)


@pytest.fixture(scope="module")
def relaxed_m2000():
    _note("relaxing M=2000 ensemble, adaptive bandwidths")
    cfg = EngineConfig(seed=0)
    return relax_ground_state(GRID, cfg, RELAX_REGIME, PARAMS)


def _engine_pulse(seed: int, relax_regime, dyn_regime, pulse):
    cfg = EngineConfig(m_walkers=M_PULSE, seed=seed)
    rel = relax_ground_state(GRID, cfg, relax_regime, PARAMS)
    return propagate_realtime(rel.state, cfg, dyn_regime, pulse, PARAMS).series


@pytest.fixture(scope="module")
def exact_low(exact_ground):
    state, _ = exact_ground
    _note("exact low-frequency pulse")
    return exact_propagate(state, LOW_PULSE, PARAMS)


@pytest.fixture(scope="module")
def tdhf_low(hf_ground):
    orbital, _ = hf_ground
    return tdhf_propagate(orbital, LOW_PULSE, GRID, PARAMS)


@pytest.fixture(scope="module")
def tdqmc_low_effective():
    runs = []
    for s in SEEDS:
        _note(f"tdqmc effective low-frequency pulse, seed {s}")
        runs.append(_engine_pulse(s, RELAX_REGIME, DYN_REGIME, LOW_PULSE))
    return runs


@pytest.fixture(scope="module")
def tdqmc_low_ultra():
    runs = []
    for s in SEEDS:
        _note(f"tdqmc ultra low-frequency pulse, seed {s}")
        runs.append(_engine_pulse(s, ULTRA, ULTRA, LOW_PULSE))
    return runs


def test_01_exact_ground_energy(exact_ground):
    _, energy = exact_ground
    ok = abs(energy - E_EXACT_REF) <= 0.002
    _record(1, ok, f"E_exact = {energy:.5f} (target {E_EXACT_REF} +/- 0.002, 512^2 grid)")


def test_02_hartree_fock_energy(hf_ground):
    _, energy = hf_ground
    ok = abs(energy - E_HF_REF) <= 0.002
    _record(2, ok, f"E_hf = {energy:.5f} (target {E_HF_REF} +/- 0.002)")


def test_03_tdqmc_ground_energy_and_ordering(relaxed_m2000, exact_ground, hf_ground):
    e_q = relaxed_m2000.energy
    e_x = exact_ground[1]
    e_h = hf_ground[1]
    in_tol = abs(e_q - E_TDQMC_REF) <= 0.02
    ordered = e_x <= e_q < e_h
    _record(
        3,
        in_tol and ordered,
        f"E_tdqmc = {e_q:.5f} (target {E_TDQMC_REF} +/- 0.02, M=2000, 400 steps); "
        f"ordering {e_x:.5f} <= {e_q:.5f} < {e_h:.5f} -> {ordered}",
    )


def test_04_first_resonance_gap(exact_ground):
    _note("relaxing first excited state for the gap")
    gap = exact_first_gap(GRID_2D, PARAMS, ground=exact_ground)
    ok = abs(gap - GAP_REF) <= 0.01
    _record(4, ok, f"gap = {gap:.5f} (target {GAP_REF} +/- 0.01)")


def test_05_adaptive_bandwidth_profile(relaxed_m2000):
    positions = relaxed_m2000.state.positions
    pooled_x = np.concatenate([positions[0], positions[1]])
    pooled_sigma = np.concatenate(
        [adaptive_bandwidths(positions[e], 0.6) for e in (0, 1)]
    )
    core = pooled_sigma[np.abs(pooled_x) < 1.0]
    assert core.size > 50, "too few walkers near the core to estimate sigma"
    core_mean = float(np.mean(core))
    growth = float(np.max(pooled_sigma) / core_mean)
    in_tol = abs(core_mean - CORE_BW_REF) <= 0.2 * CORE_BW_REF
    grows = growth > 10.0
    _record(
        5,
        in_tol and grows,
        f"core sigma = {core_mean:.3f} (target {CORE_BW_REF} +/- 20%), "
        f"max/core growth = {growth:.1f}x (> 10x required)",
    )


def test_06_regime_limit_equivalence():
    grid = Grid1D.centered(30.0, 193)
    x = grid.points
    rng = np.random.default_rng(7)
    worst_ultra = worst_mean = worst_mid = 0.0
    for m in range(1, 65):
        pos = rng.normal(0.0, 1.5, size=m)
        pair_curves = v_ee(x[None, :] - pos[:, None], PARAMS)

        ultra = v_eff_batch(grid, pos, SIGMA_ULTRA, PARAMS).curves
        worst_ultra = max(worst_ultra, float(np.max(np.abs(ultra - pair_curves))))

        mean_field = v_eff_batch(grid, pos, SIGMA_MEAN_FIELD, PARAMS).curves
        expected_mean = np.broadcast_to(pair_curves.mean(axis=0), ultra.shape)
        worst_mean = max(worst_mean, float(np.max(np.abs(mean_field - expected_mean))))

        for sigmas in (np.full(m, 1.3), rng.uniform(0.6, 2.5, size=m)):
            batch = v_eff_batch(grid, pos, sigmas, PARAMS).curves
            for k in range(m):
                w = np.exp(-(((pos - pos[k]) / sigmas[k]) ** 2))
                direct = (w @ pair_curves) / w.sum()
                worst_mid = max(worst_mid, float(np.max(np.abs(batch[k] - direct))))
    ok = worst_ultra <= 1e-10 and worst_mean <= 1e-10 and worst_mid <= 1e-8
    _record(
        6,
        ok,
        f"sentinel errors: sigma=0 {worst_ultra:.1e}, sigma=inf {worst_mean:.1e} "
        f"(<= 1e-10); mid-sigma vs direct sum {worst_mid:.1e} (<= 1e-8), M = 1..64",
    )


def test_07_low_frequency_ionization_ordering(
    exact_low, tdhf_low, tdqmc_low_effective, tdqmc_low_ultra
):
    f_exact = exact_low.final("ion_proj")
    f_tdhf = tdhf_low.final("ion_proj")
    f_eff = float(np.mean([s.final("ion_proj") for s in tdqmc_low_effective]))
    walk_inst = float(np.mean([s.final("ion_walk_inst") for s in tdqmc_low_ultra]))
    walk_lat = float(np.mean([s.final("ion_walk_latched") for s in tdqmc_low_ultra]))
    region_exact = exact_low.final("ion_region")

    tdhf_below = f_tdhf < f_exact and (f_exact - f_tdhf) / f_exact >= 0.10
    eff_closer = abs(f_eff - f_exact) < abs(f_tdhf - f_exact)
    ultra_above = walk_inst > region_exact
    _record(
        7,
        tdhf_below and eff_closer and ultra_above,
        f"proj finals: exact {f_exact:.4f}, tdhf {f_tdhf:.4f} "
        f"(gap {(f_exact - f_tdhf) / f_exact:.1%}, >= 10%), "
        f"tdqmc-eff {f_eff:.4f} (3-seed mean, closer: {eff_closer}); "
        f"walker-count: ultra {walk_inst:.4f} (latched {walk_lat:.4f}) "
        f"> exact region {region_exact:.4f}: {ultra_above}",
    )


def test_08_high_frequency_agreement(exact_ground, hf_ground):
    state, _ = exact_ground
    orbital, _ = hf_ground
    _note("high-frequency trio")
    f_exact = exact_propagate(state, HIGH_PULSE, PARAMS).final("ion_proj")
    f_tdhf = tdhf_propagate(orbital, HIGH_PULSE, GRID, PARAMS).final("ion_proj")
    f_eff = _engine_pulse(0, RELAX_REGIME, DYN_REGIME, HIGH_PULSE).final("ion_proj")
    spread = max(
        abs(f_exact - f_tdhf), abs(f_exact - f_eff), abs(f_tdhf - f_eff)
    )
    ok = spread <= 0.05
    _record(
        8,
        ok,
        f"proj finals: exact {f_exact:.4f}, tdhf {f_tdhf:.4f}, tdqmc-eff {f_eff:.4f}; "
        f"max pairwise spread {spread:.4f} (<= 0.05)",
    )


def test_09_exact_intensity_monotonicity(exact_ground, exact_low):
    state, _ = exact_ground
    finals = {}
    for e0 in (0.10, 0.15):
        _note(f"exact low-frequency pulse, e0 = {e0}")
        pulse = PulseSpec(e0=e0, omega=0.136, n_cycles=8)
        finals[e0] = exact_propagate(state, pulse, PARAMS).final("ion_proj")
    finals[0.20] = exact_low.final("ion_proj")
    increasing = finals[0.10] < finals[0.15] < finals[0.20]
    weak_small = finals[0.10] < 0.10
    _record(
        9,
        increasing and weak_small,
        f"exact proj finals: e0=0.10 -> {finals[0.10]:.4f} (< 0.10), "
        f"0.15 -> {finals[0.15]:.4f}, 0.20 -> {finals[0.20]:.4f}; "
        f"strictly increasing: {increasing}",
    )


def test_10_numerical_hygiene():
    checks = {}

    # unitarity of the 1D real-time step
    grid = Grid1D.centered(16.0, 512)
    v = 0.5 * grid.points**2
    amps = gaussian(grid, width=0.9, center=1.0, momentum=0.7).amplitudes
    spec = StepSpec(dt=0.1)
    drift = 0.0
    for _ in range(100):
        amps = cn_step_batch(amps, v, grid.dx, spec)
        drift = max(drift, abs(np.sum(np.abs(amps) ** 2) * grid.dx - 1.0))
    checks["unitarity"] = (drift, drift <= 1e-10)

    # reversal via conjugation
    w0 = gaussian(grid, width=0.9, center=1.0, momentum=0.7).amplitudes
    amps = w0.copy()
    for _ in range(25):
        amps = cn_step_batch(amps, v, grid.dx, spec)
    amps = np.conj(amps)
    for _ in range(25):
        amps = cn_step_batch(amps, v, grid.dx, spec)
    rev = float(np.max(np.abs(np.conj(amps) - w0)))
    checks["reversal"] = (rev, rev <= 1e-9)

    # pure-imaginary relaxation of the harmonic oscillator; step count
    # stays moderate so roundoff-seeded top-of-spectrum Cayley modes
    # (|factor| ~ 1) cannot outlive the damped ground mode
    ho = relax(
        gaussian(grid, width=2.0), v, 300, StepSpec(dt=0.1, rotation_angle=np.pi / 2)
    )
    e_ho = abs(hamiltonian_expectation(ho, v) - 0.5)
    checks["oscillator"] = (e_ho, e_ho <= 1e-4)

    # real waves carry no phase gradient
    m = 16
    waves = np.empty((grid.n_points, 2, m), dtype=np.complex128)
    rng = np.random.default_rng(3)
    for e in (0, 1):
        for k in range(m):
            waves[:, e, k] = gaussian(
                grid, width=rng.uniform(0.6, 2.0), center=rng.uniform(-1, 1)
            ).amplitudes
    positions = rng.uniform(-2.0, 2.0, size=(2, m))
    guide, _, _ = guidance_velocities(waves, positions, grid)
    g_max = float(np.max(np.abs(guide)))
    checks["guidance"] = (g_max, g_max == 0.0)

    # rectangle-rule overlap of two gaussians vs the closed form
    wide = Grid1D.centered(40.0, 2048)
    w1, c1, w2, c2 = 1.1, 0.7, 1.6, -0.5
    g1 = gaussian(wide, width=w1, center=c1, normalized=False)
    g2 = gaussian(wide, width=w2, center=c2, normalized=False)
    closed = math.sqrt(math.pi * w1**2 * w2**2 / (w1**2 + w2**2)) * math.exp(
        -((c1 - c2) ** 2) / (w1**2 + w2**2)
    )
    q_err = abs(inner_product(g1, g2).real - closed)
    checks["quadrature"] = (q_err, q_err <= 1e-8)

    # absorbed-norm bookkeeping closes the balance
    box = Grid1D.centered(50.0, 1024)
    mask = absorber_mask(box)
    amps = gaussian(box, width=1.5, center=5.0, momentum=1.5).amplitudes
    absorbed = 0.0
    free = np.zeros(box.n_points)
    for _ in range(300):
        amps = cn_step_batch(amps, free, box.dx, StepSpec(dt=0.1))
        before = np.sum(np.abs(amps) ** 2) * box.dx
        amps *= mask
        absorbed += before - np.sum(np.abs(amps) ** 2) * box.dx
    balance = abs(np.sum(np.abs(amps) ** 2) * box.dx + absorbed - 1.0)
    assert absorbed > 0.5, "packet should have reached the absorber"
    checks["norm balance"] = (balance, balance <= 1e-6)

    # bitwise determinism of a seeded engine run
    cfg = EngineConfig(
        m_walkers=24, n_relax_steps=16, seed=9, conditional_block=4
    )
    small = Grid1D.centered(50.0, 256)
    runs = []
    for _ in range(2):
        rel = relax_ground_state(small, cfg, DYN_REGIME, PARAMS)
        out = propagate_realtime(
            rel.state, cfg, DYN_REGIME, HIGH_PULSE, PARAMS, n_steps=12
        )
        runs.append((rel, out))
    same = (
        np.array_equal(runs[0][0].state.positions, runs[1][0].state.positions)
        and np.array_equal(runs[0][0].energy_trace, runs[1][0].energy_trace)
        and np.array_equal(
            runs[0][1].series.column("ion_proj"), runs[1][1].series.column("ion_proj")
        )
        and np.array_equal(
            runs[0][1].state.positions, runs[1][1].state.positions
        )
    )
    checks["determinism"] = (0.0 if same else 1.0, same)

    ok = all(passed for _, passed in checks.values())
    detail = "; ".join(
        f"{name} {value:.2e}" if name != "determinism" else f"{name} {passed}"
        for name, (value, passed) in checks.items()
    )
    _record(10, ok, detail)
