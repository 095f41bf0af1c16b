"""Pseudo-spectral time integration of incompressible flow on the periodic box.

The state is the spectral velocity; the viscous term (unit viscosity) is
integrated exactly through the heat-kernel factor exp(-|k|^2 dt) while the
dealiased, projected advection term is advanced with classical RK4.  The mean
mode is pinned to zero and the field stays real, divergence-free, and
band-limited for the whole run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import spectral_core
from .inequality_lab import EnergyLedger, LedgerRow
from .multiplier_bank import MultiplierSet
from .similarity_frame import (
    SimilarityClock,
    route_gap,
    w_functionals_multiplier_route,
    w_functionals_scaling_route,
)
from .spectral_core import SPECTRAL, SpectralGrid, VectorField, make_grid

INITIAL_KINDS = ("taylor_green", "random_low_mode")


class NumericalBlowupError(RuntimeError):
    """The integrator produced a non-finite value (overflow of the numerics,
    not a statement about the underlying flow)."""


@dataclass(frozen=True)
class SimulationConfig:
    """Everything needed to reproduce one trajectory and its ledger."""

    n: int = 32
    box_length: float = 2.0 * math.pi
    horizon: float = 1.0
    alpha: float = 0.0625
    delta: float = 0.01
    initial_kind: str = "random_low_mode"
    seed: int = 0
    init_k_max: float = 4.0
    amplitude: float = 1.0
    c_cfl: float = 1.0
    t_min: float = float("nan")  # filled with horizon * e^-6 when unset
    stride: int = 2
    strict: bool = False

    def __post_init__(self) -> None:
        if math.isnan(self.t_min):
            object.__setattr__(self, "t_min", self.horizon * math.exp(-6.0))
        if self.n % 2 != 0 or self.n < 8:
            raise ValueError(f"n must be even and >= 8, got {self.n}")
        if not self.box_length > 0 or not self.horizon > 0:
            raise ValueError("box length and horizon must be positive")
        if not 0.0 < self.alpha < 0.125:
            raise ValueError(f"alpha must lie in (0, 1/8), got {self.alpha}")
        if self.delta < 0.0:
            raise ValueError(f"delta target must be nonnegative, got {self.delta}")
        if self.initial_kind not in INITIAL_KINDS:
            raise ValueError(f"unknown initial data kind {self.initial_kind!r}")
        if not 0.0 < self.c_cfl <= 1.0:
            raise ValueError(f"CFL safety factor must lie in (0, 1], got {self.c_cfl}")
        if not 0.0 < self.t_min < self.horizon:
            raise ValueError(f"t_min must lie in (0, horizon), got {self.t_min}")
        if self.stride < 1:
            raise ValueError("output stride must be >= 1")
        mode_cap = self.init_k_max * self.box_length / (2.0 * math.pi)
        if mode_cap > self.n / 3.0:
            raise ValueError(
                "initial modes would not survive dealiasing; lower init_k_max or raise n"
            )


@dataclass
class TrajectoryState:
    u_hat: VectorField
    t: float
    step_index: int
    last_dt: float


def make_initial_data(config: SimulationConfig, grid: SpectralGrid | None = None) -> VectorField:
    """Divergence-free, mean-free initial velocity scaled exactly to the
    requested L2 norm `config.delta`.

    `taylor_green` is the classical single-mode vortex; `random_low_mode`
    seeds every mode with |k| <= init_k_max with Gaussian coefficients and
    projects out the gradient part.
    """
    grid = grid or make_grid(config.n, config.box_length)
    if config.initial_kind == "taylor_green":
        x1, x2, x3 = grid.coordinates()
        q = 2.0 * math.pi / grid.box_length
        a = config.amplitude
        data = np.stack(
            [
                a * np.sin(q * x1) * np.cos(q * x2) * np.cos(q * x3),
                -a * np.cos(q * x1) * np.sin(q * x2) * np.cos(q * x3),
                np.zeros((grid.n, grid.n, grid.n)),
            ]
        )
        u_hat = spectral_core.to_spectral(VectorField(grid, data, spectral_core.PHYSICAL))
    else:
        rng = np.random.default_rng(config.seed)
        shape = (3, grid.n, grid.n, grid.n)
        raw = config.amplitude * (
            rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        )
        mask = (grid.k_mag <= config.init_k_max) & (grid.k_mag > 0.0)
        raw *= mask
        # enforce coef(-k) = conj(coef(k)) so the field is real
        flipped = np.roll(raw[:, ::-1, ::-1, ::-1], 1, axis=(1, 2, 3))
        sym = 0.5 * (raw + np.conj(flipped))
        u_hat = spectral_core.leray_project(VectorField(grid, sym, SPECTRAL))

    coef = spectral_core.dealias(u_hat).data
    coef[:, 0, 0, 0] = 0.0
    current = math.sqrt(grid.volume * float(np.sum(np.abs(coef) ** 2)))
    coef = coef * (config.delta / current) if current > 0.0 else coef * 0.0
    return VectorField(grid, coef, SPECTRAL)


def nonlinear_rhs(u_hat: VectorField) -> VectorField:
    """Projected, dealiased advection term -P[F[(u . grad) u]].

    The pressure gradient never appears: the projection removes it.  The
    output is mean-free and divergence-free.
    """
    conv_hat = spectral_core.to_spectral(spectral_core.convective_product(u_hat))
    out = spectral_core.leray_project(spectral_core.dealias(conv_hat))
    data = -out.data
    data[:, 0, 0, 0] = 0.0
    return VectorField(u_hat.grid, data, SPECTRAL)


def _advective_limit(state: TrajectoryState) -> float:
    grid = state.u_hat.grid
    u_phys = spectral_core.to_physical(state.u_hat)
    vmax = float(np.sqrt(np.max(np.sum(u_phys.data**2, axis=0))))
    return grid.dx / vmax if vmax > 0.0 else math.inf


def cfl_dt(state: TrajectoryState, c_cfl: float = 1.0) -> float:
    """Step-size bound c_cfl * min(dx / max|u|, 1 / k_max^2).

    The viscous bound is informational (the integrating factor is exact) but
    it is what limits dt for small data; the advective bound takes over for
    energetic fields.
    """
    viscous = 1.0 / state.u_hat.grid.max_wavenumber**2
    return c_cfl * min(_advective_limit(state), viscous)


def step(state: TrajectoryState, dt: float) -> TrajectoryState:
    """One RK4 step with the exact viscous integrating factor.

    With the advection term zeroed this reduces to the heat kernel
    exp(-|k|^2 dt) exactly; with it, the scheme is classical fourth order.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    # Only advection limits stability: the viscous part is integrated exactly.
    limit = _advective_limit(state)
    if dt > limit * (1.0 + 1e-9):
        raise ValueError(f"dt={dt} exceeds the advective stability bound {limit}")
    grid = state.u_hat.grid
    e_half = np.exp(-grid.k_sq * (0.5 * dt))
    e_full = e_half * e_half

    def rhs(coef: np.ndarray) -> np.ndarray:
        return nonlinear_rhs(VectorField(grid, coef, SPECTRAL)).data

    u0 = state.u_hat.data
    ka = dt * rhs(u0)
    kb = dt * rhs(e_half * (u0 + 0.5 * ka))
    kc = dt * rhs(e_half * u0 + 0.5 * kb)
    kd = dt * rhs(e_full * u0 + e_half * kc)
    u1 = e_full * u0 + (e_full * ka + 2.0 * e_half * (kb + kc) + kd) / 6.0
    return TrajectoryState(
        u_hat=VectorField(grid, u1, SPECTRAL),
        t=state.t + dt,
        step_index=state.step_index + 1,
        last_dt=dt,
    )


def _abort_if_not_finite(state: TrajectoryState) -> None:
    peak = float(np.max(np.abs(state.u_hat.data)))
    if not math.isfinite(peak):
        raise NumericalBlowupError(
            f"non-finite coefficients at t={state.t} (step {state.step_index})"
        )


def _ledger_row(
    state: TrajectoryState, config: SimulationConfig, mults: MultiplierSet
) -> LedgerRow:
    clock = SimilarityClock(horizon=config.horizon, t=state.t)
    u_norms = spectral_core.norms(state.u_hat)
    wa = w_functionals_scaling_route(state.u_hat, clock, mults)
    wb = w_functionals_multiplier_route(state.u_hat, clock, mults)
    wa.validate()
    wb.validate()
    return LedgerRow(
        t=state.t,
        tau=clock.tau,
        dt=state.last_dt,
        u_l2sq=u_norms.l2_sq,
        u_h1sq=u_norms.h1_sq,
        u_h2sq=u_norms.h2_sq,
        u_sup=u_norms.sup,
        w_l2sq=wa.w_l2_sq,
        w_h1sq=wa.w_h1_sq,
        w_h2sq=wa.w_h2_sq,
        w_sup=wa.w_sup,
        E_low=wa.e_low,
        E_high=wa.e_high,
        low_l4=wa.low_l4,
        low_sup=wa.low_sup,
        grad_high_sq=wa.grad_high_sq,
        trilinear_w=wa.trilinear,
        lap_coupling=wa.lap_coupling,
        route_gap=route_gap(wa, wb),
    )


def run(config: SimulationConfig) -> EnergyLedger:
    """Integrate from t = 0 to horizon - t_min, recording ledger rows.

    Rows are emitted at step 0, every `stride` steps, and at the final step.
    A non-finite field aborts with NumericalBlowupError.
    """
    grid = make_grid(config.n, config.box_length)
    mults = MultiplierSet.build(config.alpha)
    state = TrajectoryState(
        u_hat=make_initial_data(config, grid), t=0.0, step_index=0, last_dt=0.0
    )
    _abort_if_not_finite(state)
    t_end = config.horizon - config.t_min
    rows = [_ledger_row(state, config, mults)]
    while state.t < t_end * (1.0 - 1e-12):
        dt = min(cfl_dt(state, config.c_cfl), t_end - state.t)
        state = step(state, dt)
        _abort_if_not_finite(state)
        done = state.t >= t_end * (1.0 - 1e-12)
        if done or state.step_index % config.stride == 0:
            rows.append(_ledger_row(state, config, mults))
    meta = {
        "alpha": config.alpha,
        "n": config.n,
        "box_length": config.box_length,
        "horizon": config.horizon,
        "delta": config.delta,
        "seed": config.seed,
        "initial_kind": config.initial_kind,
        "stride": config.stride,
        "strict": config.strict,
        "steps": state.step_index,
    }
    ledger = EnergyLedger(rows=rows, meta=meta)
    ledger.validate()
    return ledger
