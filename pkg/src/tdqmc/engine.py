"""Walker-ensemble dynamics with per-walker guiding waves.

Every walker pair (x1, x2) carries its own pair of one-electron waves.
The waves are advanced by Crank-Nicolson steps in a potential chosen
by the correlation regime (bare pairwise, distance-weighted effective,
or mean-field). During complex-time relaxation the walkers are
resampled from their own orbitals in alternating per-electron blocks
(noise balanced by the density-gradient drift), which draws each pair
from the conditional density of one coordinate given the other and
finds the correlated ground state. Real-time propagation then drives
the relaxed state with a laser pulse, moving the walkers along the
velocity field of the symmetrized two-electron product of their waves,
and records ionization observables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from tdqmc.effective_potential import SIGMA_MEAN_FIELD, SIGMA_ULTRA, v_eff_batch
from tdqmc.errors import ConfigurationError, DivergenceError
from tdqmc.kde import BandwidthSpec, adaptive_bandwidths
from tdqmc.numerics import Grid1D, gaussian
from tdqmc.observables import (
    TimeSeries,
    ionization_projection_from_survival,
    ionization_walker_count,
)
from tdqmc.potentials import (
    PulseSpec,
    SoftCoreParams,
    field as pulse_field,
    v_ee,
    v_en,
)
from tdqmc.propagator import (
    StepSpec,
    absorber_mask,
    apply_hamiltonian,
    cn_step_batch,
)

__all__ = [
    "CorrelationRegime",
    "EngineConfig",
    "EngineState",
    "RelaxResult",
    "PropagationResult",
    "stream_normals",
    "init_state",
    "guidance_velocities",
    "guidance_velocity",
    "orbital_velocities",
    "drift_positions",
    "energy_estimate",
    "relax_ground_state",
    "propagate_realtime",
]

REGIME_TAGS = ("ultra_correlated", "effective", "mean_field")

# counter-block purposes for the per-electron Philox streams
_PURPOSE_INIT = 0
_PURPOSE_RELAX_NOISE = 1
_PURPOSE_REALTIME_NOISE = 2


@dataclass(frozen=True)
class CorrelationRegime:
    """Which electron-electron coupling the guiding waves see."""

    tag: str
    bandwidth: Optional[BandwidthSpec] = None

    def __post_init__(self):
        if self.tag not in REGIME_TAGS:
            raise ConfigurationError(
                f"regime must be one of {REGIME_TAGS}, got {self.tag!r}"
            )
        if self.tag == "effective" and self.bandwidth is None:
            raise ConfigurationError("effective regime requires a BandwidthSpec")
        if self.tag != "effective" and self.bandwidth is not None:
            raise ConfigurationError(
                f"{self.tag} regime takes no bandwidth specification"
            )

    @classmethod
    def ultra_correlated(cls) -> "CorrelationRegime":
        return cls("ultra_correlated")

    @classmethod
    def mean_field(cls) -> "CorrelationRegime":
        return cls("mean_field")

    @classmethod
    def effective(cls, bandwidth: BandwidthSpec) -> "CorrelationRegime":
        return cls("effective", bandwidth)


@dataclass(frozen=True)
class EngineConfig:
    """Engine parameters; defaults follow the production protocol."""

    m_walkers: int = 2000
    dt: float = 0.1
    n_relax_steps: int = 400
    rotation_angle: float = math.pi / 4
    sigma0: float = 0.5
    noise_amplitude: float = 1.0
    noise_decay_steps: Optional[int] = None
    conditional_block: int = 25
    walker_substeps: int = 8
    realtime_noise: float = 0.0
    v_max: float = 20.0
    node_eps: float = 1e-12
    seed: int = 0
    electron_streams: tuple[int, int] = (0, 1)

    def __post_init__(self):
        if self.m_walkers < 2:
            raise ConfigurationError(
                f"need at least 2 walkers, got {self.m_walkers}"
            )
        for name in ("dt", "sigma0", "v_max"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.n_relax_steps < 0 or self.seed < 0:
            raise ConfigurationError("n_relax_steps and seed must be >= 0")
        if self.noise_amplitude < 0 or self.realtime_noise < 0:
            raise ConfigurationError("noise amplitudes must be >= 0")
        if self.conditional_block < 1:
            raise ConfigurationError("conditional_block must be >= 1")
        if self.walker_substeps < 1:
            raise ConfigurationError("walker_substeps must be >= 1")
        if not 0 < self.rotation_angle <= math.pi / 2:
            raise ConfigurationError(
                "rotation_angle must lie in (0, pi/2] for relaxation"
            )

    @property
    def decay_steps(self) -> int:
        if self.noise_decay_steps is not None:
            return self.noise_decay_steps
        return max(1, min(self.conditional_block, self.n_relax_steps))

    def noise_at(self, step: int) -> float:
        """Full-strength noise while waves and walkers co-adapt, then a
        linear anneal to zero over the final decay_steps (one sampling
        block by default) so the ensemble comes to rest on the adapted
        waves. The matched density-gradient drift keeps the walker
        equilibrium at the wave density for every amplitude, so the
        anneal length is a convenience, not a correctness knob."""
        start = self.n_relax_steps - self.decay_steps
        if step < start:
            return self.noise_amplitude
        if self.decay_steps <= 0:
            return 0.0
        return self.noise_amplitude * max(
            0.0, (self.n_relax_steps - step) / self.decay_steps
        )


@dataclass
class EngineState:
    """Mutable snapshot of the ensemble: positions (2, M) and guiding
    waves (n_points, 2, M) on a shared grid."""

    grid: Grid1D
    positions: np.ndarray
    waves: np.ndarray

    @property
    def m_walkers(self) -> int:
        return self.positions.shape[1]

    def copy(self) -> "EngineState":
        return EngineState(self.grid, self.positions.copy(), self.waves.copy())


@dataclass
class RelaxResult:
    state: EngineState
    energy: float
    energy_trace: np.ndarray
    node_events: int
    clamp_events: int
    bandwidths: tuple


@dataclass
class PropagationResult:
    series: TimeSeries
    state: EngineState
    node_events: int
    clamp_events: int
    walker_steps: int


def stream_normals(seed: int, stream: int, purpose: int, step: int, n: int) -> np.ndarray:
    """Standard normals from a counter-based stream.

    The (purpose, step) pair selects a disjoint counter block of the
    Philox generator keyed by (seed, stream), so any draw is
    reproducible in isolation regardless of the order draws happen in.
    """
    bitgen = np.random.Philox(
        key=np.array([seed, stream], dtype=np.uint64),
        counter=np.array([0, 0, purpose, step], dtype=np.uint64),
    )
    return np.random.Generator(bitgen).standard_normal(n)


def init_state(grid: Grid1D, config: EngineConfig) -> EngineState:
    """Identical Gaussian guiding waves of width sigma0 for every
    walker; positions sampled from the matching |phi|^2 density."""
    g0 = gaussian(grid, width=config.sigma0).amplitudes
    waves = np.empty((grid.n_points, 2, config.m_walkers), dtype=np.complex128)
    waves[:] = g0[:, None, None]
    # |exp(-x^2/sigma0^2)|^2 has standard deviation sigma0 / 2
    positions = np.empty((2, config.m_walkers))
    for e in (0, 1):
        eta = stream_normals(
            config.seed, config.electron_streams[e], _PURPOSE_INIT, 0,
            config.m_walkers,
        )
        positions[e] = np.clip(eta * (config.sigma0 / 2.0), grid.x_min, grid.x_max)
    return EngineState(grid, positions, waves)


def _interp_pair(padded: np.ndarray, idx: np.ndarray, frac: np.ndarray,
                 i: int, dx: float) -> tuple[np.ndarray, np.ndarray]:
    """Linear interpolation of wave i and its centered-difference
    derivative at off-grid points; `padded` has one zero ghost row at
    each end so boundary stencils see the Dirichlet values."""
    kk = np.arange(padded.shape[2])
    w_lo = padded[idx + 1, i, kk]
    w_hi = padded[idx + 2, i, kk]
    d_lo = (padded[idx + 2, i, kk] - padded[idx, i, kk]) / (2.0 * dx)
    d_hi = (padded[idx + 3, i, kk] - padded[idx + 1, i, kk]) / (2.0 * dx)
    cf = 1.0 - frac
    return w_lo * cf + w_hi * frac, d_lo * cf + d_hi * frac


def guidance_velocities(
    waves: np.ndarray,
    positions: np.ndarray,
    grid: Grid1D,
    v_max: float = 20.0,
    node_eps: float = 1e-12,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Velocity fields of all walkers from the symmetrized product wave.

    For each walker k the two-electron wave is
    Psi(x1, x2) = phi1(x1) phi2(x2) + phi1(x2) phi2(x1), evaluated with
    centered differences and linear interpolation at the walker's
    coordinates. Two fields are returned, both clamped to
    |v| <= v_max:

    - the guidance velocity Im[d_i Psi / Psi], which moves walkers
      along the phase of the wave (zero for real waves);
    - the density-gradient (osmotic) velocity Re[d_i Psi / Psi],
      which together with matched noise drives the walker distribution
      to |Psi|^2, the equilibrium of the stochastic interpretation.

    Walkers within node_eps of a node of |Psi|^2 get both components
    zeroed and are counted as node events.

    Returns (guidance (2, M), osmotic (2, M), node event count).
    """
    n = grid.n_points
    dx = grid.dx
    m = positions.shape[1]
    padded = np.zeros((n + 2,) + waves.shape[1:], dtype=np.complex128)
    padded[1:-1] = waves

    t = (positions - grid.x_min) / dx
    idx = np.clip(t.astype(np.int64), 0, n - 2)
    frac = t - idx

    # phi_at[i][c]: wave of electron i evaluated at coordinate c
    phi_at = [[None, None], [None, None]]
    dphi_at = [[None, None], [None, None]]
    for i in (0, 1):
        for c in (0, 1):
            phi_at[i][c], dphi_at[i][c] = _interp_pair(
                padded, idx[c], frac[c], i, dx
            )

    psi = phi_at[0][0] * phi_at[1][1] + phi_at[0][1] * phi_at[1][0]
    dpsi = (
        dphi_at[0][0] * phi_at[1][1] + dphi_at[1][0] * phi_at[0][1],
        phi_at[0][0] * dphi_at[1][1] + phi_at[1][0] * dphi_at[0][1],
    )

    dens = np.abs(psi) ** 2
    ok = dens >= node_eps
    node_events = int(2 * (m - np.count_nonzero(ok)))
    safe_psi = np.where(ok, psi, 1.0)
    guidance = np.empty((2, m))
    osmotic = np.empty((2, m))
    for i in (0, 1):
        ratio = dpsi[i] / safe_psi
        guidance[i] = np.clip(np.where(ok, np.imag(ratio), 0.0), -v_max, v_max)
        osmotic[i] = np.clip(np.where(ok, np.real(ratio), 0.0), -v_max, v_max)
    return guidance, osmotic, node_events


def guidance_velocity(
    k: int,
    i: int,
    waves: np.ndarray,
    positions: np.ndarray,
    grid: Grid1D,
    v_max: float = 20.0,
    node_eps: float = 1e-12,
) -> float:
    """Single-walker phase-gradient velocity Im[d_i Psi / Psi]."""
    v, _, _ = guidance_velocities(
        waves[:, :, k : k + 1], positions[:, k : k + 1], grid, v_max, node_eps
    )
    return float(v[i, 0])


def _pad_waves(waves: np.ndarray) -> np.ndarray:
    padded = np.zeros((waves.shape[0] + 2,) + waves.shape[1:], dtype=np.complex128)
    padded[1:-1] = waves
    return padded


def _orbital_fields(
    padded: np.ndarray,
    positions: np.ndarray,
    grid: Grid1D,
    v_max: float,
    node_eps: float,
) -> tuple[np.ndarray, np.ndarray, int]:
    n = grid.n_points
    dx = grid.dx
    m = positions.shape[1]
    t = (positions - grid.x_min) / dx
    idx = np.clip(t.astype(np.int64), 0, n - 2)
    frac = t - idx

    guidance = np.empty((2, m))
    osmotic = np.empty((2, m))
    node_events = 0
    for i in (0, 1):
        phi, dphi = _interp_pair(padded, idx[i], frac[i], i, dx)
        ok = np.abs(phi) ** 2 >= node_eps
        node_events += int(m - np.count_nonzero(ok))
        ratio = dphi / np.where(ok, phi, 1.0)
        guidance[i] = np.clip(np.where(ok, np.imag(ratio), 0.0), -v_max, v_max)
        osmotic[i] = np.clip(np.where(ok, np.real(ratio), 0.0), -v_max, v_max)
    return guidance, osmotic, node_events


def orbital_velocities(
    waves: np.ndarray,
    positions: np.ndarray,
    grid: Grid1D,
    v_max: float = 20.0,
    node_eps: float = 1e-12,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Velocity fields from each walker's own orbital, phi_i^k at x_i^k.

    Same (guidance, osmotic, node_events) contract as
    guidance_velocities but with the ratio d phi_i / phi_i of the
    single-particle wave instead of the symmetrized pair wave. Used
    for the relaxation sampling drift: the pair wave's exchange
    cross-term pulls the two sampled coordinates of a walker pair
    toward each other, which biases the sampled e-e energy upward,
    while the correlation carried by the per-walker waves lives in how
    each orbital is shaped around its partner's position, not in the
    shared-coordinate drift.
    """
    return _orbital_fields(_pad_waves(waves), positions, grid, v_max, node_eps)


def drift_positions(
    positions: np.ndarray,
    velocities: np.ndarray,
    dt: float,
    noise: Optional[np.ndarray],
    grid: Grid1D,
) -> tuple[np.ndarray, int]:
    """x <- x + v dt + eta sqrt(dt), clamped to the box.

    `noise` is the pre-scaled term eta * amplitude (or None for
    noise-free drift). Returns (new positions, clamp count).
    """
    new = positions + velocities * dt
    if noise is not None:
        new = new + noise * math.sqrt(dt)
    clamped = np.clip(new, grid.x_min, grid.x_max)
    n_clamped = int(np.count_nonzero(clamped != new))
    return clamped, n_clamped


def energy_estimate(
    waves: np.ndarray,
    positions: np.ndarray,
    grid: Grid1D,
    v_nuclear: np.ndarray,
    pair_potential: Callable[[np.ndarray], np.ndarray],
    conditional: bool = True,
) -> float:
    """Ensemble energy: per-walker one-body expectations plus a pair
    interaction term.

    E = mean_k [ sum_i <phi_i^k| -1/2 d^2/dx^2 + v_nuclear |phi_i^k>
                 + vee_k ]

    With conditional=False, vee_k = pair(x1^k - x2^k), the interaction
    sampled at the walker separation. The default averages each
    electron's interaction with the partner's sampled position over
    its own wave density,

        vee_k = 1/2 sum_i integral |phi_i^k(x)|^2 pair(x - x_j^k) dx,

    which has the same expectation over the walker distribution but a
    much smaller variance, so short tail averages of the relaxation
    trace are less seed-sensitive. Requires normalized waves.
    """
    n, _, m = waves.shape
    flat = waves.reshape(n, 2 * m)
    dx = grid.dx
    norms2 = np.sum(np.abs(flat) ** 2, axis=0) * dx
    assert np.max(np.abs(norms2 - 1.0)) < 1e-6, "energy estimate needs normalized waves"
    h_flat = apply_hamiltonian(flat, np.asarray(v_nuclear), dx)
    one_body = np.real(np.sum(np.conj(flat) * h_flat, axis=0)) * dx
    if conditional:
        x = grid.points
        vee = np.zeros(m)
        for i in (0, 1):
            table = np.asarray(pair_potential(x[None, :] - positions[1 - i][:, None]))
            dens = np.abs(waves[:, i, :]) ** 2
            vee += 0.5 * np.einsum("kn,nk->k", table, dens) * dx
    else:
        vee = np.asarray(pair_potential(positions[0] - positions[1]))
    per_walker = one_body.reshape(2, m).sum(axis=0) + vee
    return float(np.mean(per_walker))


def _regime_bandwidths(
    regime: CorrelationRegime,
    positions: np.ndarray,
    step: int,
    cache: list,
):
    """Per-electron bandwidth arguments for v_eff_batch, with the
    adaptive refresh cadence handled through `cache`."""
    if regime.tag == "ultra_correlated":
        return (SIGMA_ULTRA, SIGMA_ULTRA)
    if regime.tag == "mean_field":
        return (SIGMA_MEAN_FIELD, SIGMA_MEAN_FIELD)
    spec = regime.bandwidth
    if spec.mode == "global":
        return (spec.sigma, spec.sigma)
    if cache and step % spec.refresh_every != 0:
        return cache[-1]
    bw = tuple(adaptive_bandwidths(positions[e], spec.sigma) for e in (0, 1))
    cache.clear()
    cache.append(bw)
    return bw


def _assemble_potentials(
    grid: Grid1D,
    positions: np.ndarray,
    bandwidths: tuple,
    params: SoftCoreParams,
    base: np.ndarray,
) -> np.ndarray:
    """Per-wave potentials (n_points, 2, M): shared one-body part plus
    each electron's effective e-e curve over the other's walkers."""
    n = grid.n_points
    m = positions.shape[1]
    v = np.empty((n, 2, m))
    for i in (0, 1):
        j = 1 - i
        table = v_eff_batch(grid, positions[j], bandwidths[j], params)
        v[:, i, :] = base[:, None] + table.curves.T
    return v


def _renormalize(waves_flat: np.ndarray, dx: float) -> None:
    norms = np.sqrt(np.sum(np.abs(waves_flat) ** 2, axis=0) * dx)
    if np.any(norms == 0) or not np.all(np.isfinite(norms)):
        raise DivergenceError("guiding wave lost its norm during relaxation")
    waves_flat /= norms


def relax_ground_state(
    grid: Grid1D,
    config: EngineConfig,
    regime: CorrelationRegime,
    params: SoftCoreParams = SoftCoreParams(),
) -> RelaxResult:
    """Complex-time relaxation to the regime's ground state.

    Each step rebuilds the per-walker potentials from the current
    walker snapshot and advances all waves one rotated-time step with
    renormalization. Walker sampling alternates between the two
    electrons in blocks of conditional_block steps: during a block one
    electron's walkers diffuse (orbital guidance plus density-gradient
    drift balanced against the noise), while the other electron's
    walkers stand still. Holding one side fixed lets every moving
    wave converge onto its partner's current position before that
    position changes, so across the ensemble each walker pair is
    drawn from the conditional density of one coordinate given the
    other. Updating both electrons at once instead washes out the
    pair correlation: each wave then chases a moving target and the
    sampled pair separation reverts to the product of the marginals.

    Within each relaxation step the walker update is divided into
    walker_substeps shorter Langevin steps against the frozen waves,
    which keeps the discrete-time equilibrium density close to |phi|^2
    (the forward-Euler chain widens it by O(dt) otherwise).

    The noise amplitude anneals to zero over the final block, freezing
    the last-moving electron onto a valid sample of its (static)
    waves. The reported energy averages the estimator over the final
    eighth of the trace; the full trace is returned alongside.
    """
    state = init_state(grid, config)
    spec = StepSpec(dt=config.dt, rotation_angle=config.rotation_angle)
    v_base = v_en(grid.points, params)
    pair = lambda d: v_ee(d, params)  # noqa: E731
    n = grid.n_points
    m = config.m_walkers
    flat = state.waves.reshape(n, 2 * m)

    trace = np.empty(max(config.n_relax_steps, 1))
    node_total = 0
    clamp_total = 0
    bw_cache: list = []
    bandwidths = _regime_bandwidths(regime, state.positions, 0, bw_cache)
    if config.n_relax_steps == 0:
        trace[0] = energy_estimate(state.waves, state.positions, grid, v_base, pair)

    for step in range(config.n_relax_steps):
        bandwidths = _regime_bandwidths(regime, state.positions, step, bw_cache)
        v = _assemble_potentials(grid, state.positions, bandwidths, params, v_base)
        flat[:] = cn_step_batch(flat, v.reshape(n, 2 * m), grid.dx, spec)
        _renormalize(flat, grid.dx)

        amp = config.noise_at(step)
        active = (step // config.conditional_block) % 2
        # thermalizing pair: noise of variance amp^2 dt balanced by the
        # density-gradient drift amp^2 * Re[d phi / phi], so the moving
        # electron's walkers equilibrate to |phi|^2 at every noise
        # level and freeze in place as amp -> 0. The Langevin update is
        # split into walker_substeps Euler steps of dt/walker_substeps
        # (waves held fixed, drift re-evaluated at each sub-position):
        # the forward-Euler chain equilibrates to a density widened by
        # O(amp^2 dt_w), which undersamples the repulsion hole around
        # the partner, so shrinking dt_w at fixed diffusion per wave
        # step removes the bias without slowing the mixing.
        dt_w = config.dt / config.walker_substeps
        padded = _pad_waves(state.waves)
        for sub in range(config.walker_substeps):
            guidance, osmotic, nodes = _orbital_fields(
                padded, state.positions, grid, config.v_max, config.node_eps
            )
            node_total += nodes
            velocities = np.zeros((2, m))
            velocities[active] = guidance[active] + amp * amp * osmotic[active]
            noise = None
            if amp > 0.0:
                noise = np.zeros((2, m))
                noise[active] = amp * stream_normals(
                    config.seed, config.electron_streams[active],
                    _PURPOSE_RELAX_NOISE,
                    step * config.walker_substeps + sub, m,
                )
            state.positions, clamped = drift_positions(
                state.positions, velocities, dt_w, noise, grid
            )
            clamp_total += clamped

        trace[step] = energy_estimate(state.waves, state.positions, grid, v_base, pair)
        if step > config.n_relax_steps // 2 and trace[step] > 0.0:
            raise DivergenceError(
                f"relaxation energy {trace[step]:.4f} is unbound at step {step}"
            )

    tail = max(1, config.n_relax_steps // 8)
    energy = float(np.mean(trace[-tail:])) if config.n_relax_steps else float(trace[0])
    return RelaxResult(
        state=state,
        energy=energy,
        energy_trace=trace[: max(config.n_relax_steps, 1)].copy(),
        node_events=node_total,
        clamp_events=clamp_total,
        bandwidths=bandwidths,
    )


def propagate_realtime(
    state: EngineState,
    config: EngineConfig,
    regime: CorrelationRegime,
    pulse: PulseSpec,
    params: SoftCoreParams = SoftCoreParams(),
    n_steps: Optional[int] = None,
    record_every: int = 5,
    energy_every: int = 50,
    use_absorber: bool = True,
) -> PropagationResult:
    """Drive a relaxed state with the laser and record observables.

    The input state is not modified. Real-time steps keep the noise
    off by default (config.realtime_noise overrides); the absorber
    removes outgoing flux near the box edge, and the lost norm counts
    as ionized in the projection measure. Records are written at t=0,
    every record_every-th step, and at the final step; the energy
    column is filled every energy_every-th record from per-wave
    renormalized copies (nan in between).
    """
    if n_steps is None:
        n_steps = int(math.ceil(pulse.duration / config.dt))
    state = state.copy()
    grid = state.grid
    n = grid.n_points
    m = state.m_walkers
    dx = grid.dx
    spec = StepSpec(dt=config.dt, rotation_angle=0.0)
    v_base = v_en(grid.points, params)
    pair = lambda d: v_ee(d, params)  # noqa: E731
    mask = absorber_mask(grid)[:, None] if use_absorber else None

    flat = state.waves.reshape(n, 2 * m)
    ref = flat.copy()
    latched = np.zeros_like(state.positions, dtype=bool)
    node_total = 0
    clamp_total = 0
    series = TimeSeries()
    bw_cache: list = []

    def record(step: int, t: float) -> None:
        nonlocal latched
        overlaps = np.sum(np.conj(ref) * flat, axis=0) * dx
        # two-electron ground survival per walker: the product of its
        # two orbital survivals, the same estimand the grid solvers
        # report, so projection curves are comparable across solvers
        orbital_survival = np.abs(overlaps.reshape(2, m)) ** 2
        survival = orbital_survival[0] * orbital_survival[1]
        ion_proj = ionization_projection_from_survival(survival)
        lat, inst, latched = ionization_walker_count(state.positions, latched)
        norms2 = np.sum(np.abs(flat) ** 2, axis=0) * dx
        absorbed = float(np.clip(1.0 - np.mean(norms2), 0.0, 1.0))
        dens_sum = np.maximum(norms2 / dx, 1e-300)
        dip = float(
            np.mean((grid.points @ (np.abs(flat) ** 2)) / dens_sum)
        )
        energy = math.nan
        if energy_every > 0 and step % energy_every == 0 and np.all(norms2 > 1e-8):
            renorm = flat / np.sqrt(norms2)
            energy = energy_estimate(
                renorm.reshape(n, 2, m), state.positions, grid, v_base, pair
            )
        series.append(
            t=t,
            field=pulse_field(t, pulse),
            ion_proj=ion_proj,
            ion_walk_latched=lat,
            ion_walk_inst=inst,
            ion_region=math.nan,
            energy=energy,
            dipole=dip,
            absorbed_norm=absorbed,
            node_events=float(node_total),
        )

    record(0, 0.0)
    bandwidths = _regime_bandwidths(regime, state.positions, 0, bw_cache)
    for step in range(n_steps):
        t_mid = (step + 0.5) * config.dt
        bandwidths = _regime_bandwidths(regime, state.positions, step, bw_cache)
        v = _assemble_potentials(grid, state.positions, bandwidths, params, v_base)
        e_field = pulse_field(t_mid, pulse)
        if e_field != 0.0:
            v -= (grid.points * e_field)[:, None, None]
        flat[:] = cn_step_batch(flat, v.reshape(n, 2 * m), dx, spec)
        if mask is not None:
            flat *= mask

        guidance, osmotic, nodes = guidance_velocities(
            state.waves, state.positions, grid, config.v_max, config.node_eps
        )
        node_total += nodes
        amp = config.realtime_noise
        velocities = guidance + amp * amp * osmotic
        noise = None
        if amp > 0.0:
            noise = amp * np.stack([
                stream_normals(
                    config.seed, config.electron_streams[e],
                    _PURPOSE_REALTIME_NOISE, step, m,
                )
                for e in (0, 1)
            ])
        state.positions, clamped = drift_positions(
            state.positions, velocities, config.dt, noise, grid
        )
        clamp_total += clamped

        is_last = step == n_steps - 1
        if is_last or (step + 1) % record_every == 0:
            record(step + 1, (step + 1) * config.dt)

    return PropagationResult(
        series=series,
        state=state,
        node_events=node_total,
        clamp_events=clamp_total,
        walker_steps=2 * m * n_steps,
    )
