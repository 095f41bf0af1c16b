"""Exact change of variables into self-similar coordinates.

For a horizon T the rescaling is

    y = x / sqrt(T - t),    tau = -ln(T - t),    w(y, tau) = sqrt(T - t) u(x, t)

and every functional of w is obtained from the u-state without ever
time-stepping the rescaled system.  Two independent computation routes are
provided and audited against each other:

* the *scaling route* multiplies u-side integrals by exact powers of
  s = T - t (the normative exponent table below) and evaluates the
  frequency-split functionals on an explicitly constructed w-field via
  physical-space quadrature;
* the *multiplier route* stays on the u-grid and evaluates rescaled radial
  symbols profile(sqrt(s) |k|) against the u-coefficients directly.

Both reduce to the same numbers in exact arithmetic; the ledger records their
maximum relative gap per time step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from fractions import Fraction
from typing import ClassVar

import numpy as np

from . import multiplier_bank, spectral_core
from .multiplier_bank import MultiplierSet
from .spectral_core import SPECTRAL, VectorField, make_grid

#: Normative scaling exponents: functional(w) = s**power * functional(u).
#: Squared integral quantities unless noted; `sup` and `l4` are plain norms.
SCALING_EXPONENTS: dict[str, Fraction] = {
    "l2_sq": Fraction(-1, 2),
    "h1_sq": Fraction(1, 2),
    "h2_sq": Fraction(3, 2),
    "h3_sq": Fraction(5, 2),
    "sup": Fraction(1, 2),
    "l4": Fraction(1, 8),
    "trilinear": Fraction(3, 2),
    "lap_coupling": Fraction(5, 2),
}


def scale_factor(name: str, remaining: float) -> float:
    """The power of s = T - t mapping a u-side functional to its w-side value."""
    return float(remaining) ** float(SCALING_EXPONENTS[name])


@dataclass(frozen=True)
class SimilarityClock:
    """Physical time t within [0, T) together with the slow time tau."""

    horizon: float
    t: float

    def __post_init__(self) -> None:
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if not 0.0 <= self.t < self.horizon:
            raise ValueError(f"time {self.t} outside [0, {self.horizon})")
        object.__setattr__(self, "tau", tau_of_t(self.t, self.horizon))

    @property
    def remaining(self) -> float:
        return self.horizon - self.t

    @classmethod
    def from_tau(cls, tau: float, horizon: float) -> "SimilarityClock":
        return cls(horizon=horizon, t=t_of_tau(tau, horizon))


def tau_of_t(t: float, horizon: float) -> float:
    """Slow time tau = -ln(T - t); rejects t >= T."""
    if t >= horizon:
        raise ValueError(f"time {t} reached or passed the horizon {horizon}")
    return -math.log(horizon - t)


def t_of_tau(tau: float, horizon: float) -> float:
    """Inverse clock map t = T - exp(-tau)."""
    return horizon - math.exp(-tau)


@dataclass(frozen=True)
class WFunctionals:
    """Functionals of the rescaled field at one instant.

    `e_low` is the chi-weighted low-frequency energy, `e_high` the
    energy-split high part; `low_l2_sq + e_high` recovers `w_l2_sq` exactly
    (the pointwise identity phi^2 + (1 - phi^2) = 1).  `trilinear_scale` and
    `lap_scale` are magnitude majorants of the two signed integrals, kept so
    that route agreement can be judged even where the integrals cancel.
    """

    w_l2_sq: float
    w_h1_sq: float
    w_h2_sq: float
    w_sup: float
    low_l2_sq: float
    e_low: float
    e_high: float
    low_l4: float
    low_sup: float
    grad_high_sq: float
    trilinear: float
    lap_coupling: float
    trilinear_scale: float = 0.0
    lap_scale: float = 0.0

    COMPARED: ClassVar[tuple[str, ...]] = (
        "w_l2_sq",
        "w_h1_sq",
        "w_h2_sq",
        "w_sup",
        "low_l2_sq",
        "e_low",
        "e_high",
        "low_l4",
        "low_sup",
        "grad_high_sq",
        "trilinear",
        "lap_coupling",
    )

    @property
    def energy(self) -> float:
        return self.e_low + self.e_high

    def validate(self, rel_tol: float = 1e-12) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float) and not math.isfinite(v):
                raise ValueError(f"non-finite functional {f.name}")
        split = self.low_l2_sq + self.e_high
        gap = abs(split - self.w_l2_sq)
        if gap > rel_tol * max(self.w_l2_sq, split, 1e-300):
            raise ValueError(
                f"energy split violated: low+high={split!r} vs total={self.w_l2_sq!r}"
            )
        for name in ("w_l2_sq", "w_h1_sq", "w_h2_sq", "low_l2_sq", "e_low", "e_high"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"negative squared norm {name}")


def route_gap(a: WFunctionals, b: WFunctionals) -> float:
    """Maximum relative disagreement between the two computation routes.

    The signed integrals are measured against their magnitude majorants so a
    benign cancellation near zero does not masquerade as route divergence.
    """
    worst = 0.0
    for name in WFunctionals.COMPARED:
        va, vb = getattr(a, name), getattr(b, name)
        if va == vb:
            continue
        floor = 1e-300
        if name == "trilinear":
            floor = max(a.trilinear_scale, b.trilinear_scale, floor)
        elif name == "lap_coupling":
            floor = max(a.lap_scale, b.lap_scale, floor)
        worst = max(worst, abs(va - vb) / max(abs(va), abs(vb), floor))
    return worst


def build_w_field(u_hat: VectorField, clock: SimilarityClock) -> VectorField:
    """The rescaled field as a spectral VectorField on its own (larger) box.

    The collocation lattice of w is the u-lattice relabelled: box side
    L/sqrt(s), values sqrt(s) * u, identical integer modes.
    """
    if u_hat.representation != SPECTRAL:
        raise spectral_core.RepresentationError("build_w_field expects spectral input")
    s = clock.remaining
    root = math.sqrt(s)
    w_grid = make_grid(u_hat.grid.n, u_hat.grid.box_length / root)
    return VectorField(w_grid, u_hat.data * root, SPECTRAL)


def _trilinear_with_scale(field: VectorField) -> tuple[float, float]:
    """Signed gradient triple product together with int |grad f|^3 dx."""
    spec = spectral_core.ensure_spectral(field)
    g = field.grid
    grads = np.empty((3, 3, g.n, g.n, g.n))
    for j in range(3):
        dj = spectral_core.to_physical(
            VectorField(g, spec.data * (1j * g.k[j]), SPECTRAL)
        )
        grads[j] = dj.data
    total = 0.0
    for j in range(3):
        for k in range(3):
            for l in range(3):
                total += float(np.sum(grads[j, k] * grads[j, l] * grads[l, k]))
    mag_cubed = np.sum(grads**2, axis=(0, 1)) ** 1.5
    return total * g.cell_volume, float(np.sum(mag_cubed)) * g.cell_volume


def _lap_coupling_with_scale(field: VectorField) -> tuple[float, float]:
    """Laplacian coupling integral and its Cauchy-Schwarz majorant."""
    spec = spectral_core.ensure_spectral(field)
    g = field.grid
    conv_hat = spectral_core.to_spectral(spectral_core.convective_product(field))
    w4 = g.k_sq**2
    value = g.volume * float(np.real(np.sum(w4 * spec.data * np.conj(conv_hat.data))))
    lap_f = g.volume * float(np.sum(w4 * np.sum(np.abs(spec.data) ** 2, axis=0)))
    lap_c = g.volume * float(np.sum(w4 * np.sum(np.abs(conv_hat.data) ** 2, axis=0)))
    return value, math.sqrt(lap_f * lap_c)


def w_functionals_scaling_route(
    u_hat: VectorField, clock: SimilarityClock, mults: MultiplierSet
) -> WFunctionals:
    """w-functionals from u-side integrals and the exponent table.

    The frequency-split quantities are evaluated on the explicitly
    constructed w-field: multiplier application on the w-grid followed by
    physical-space quadrature, a code path disjoint from the spectral sums of
    the multiplier route.
    """
    s = clock.remaining
    ns_u = spectral_core.norms(u_hat)
    tri_u, tri_scale_u = _trilinear_with_scale(u_hat)
    lap_u, lap_scale_u = _lap_coupling_with_scale(u_hat)

    w_field = build_w_field(u_hat, clock)
    low = multiplier_bank.apply(mults.phi, w_field)
    low_phys = spectral_core.to_physical(low)
    low_mag_sq = np.sum(low_phys.data**2, axis=0)
    vol = w_field.grid.cell_volume
    low_l2_sq = float(np.sum(low_mag_sq)) * vol
    low_sup = float(np.sqrt(np.max(low_mag_sq)))
    low_l4 = float((np.sum(low_mag_sq**2) * vol) ** 0.25)
    e_low = spectral_core.quadrature_l2_sq(multiplier_bank.apply(mults.chi, w_field))
    e_high = spectral_core.quadrature_l2_sq(
        multiplier_bank.apply(mults.sqrt_one_minus_phi_sq, w_field)
    )
    high = multiplier_bank.apply(mults.one_minus_phi, w_field)
    grad_high_sq = 0.0
    for j in range(3):
        grad_high_sq += spectral_core.quadrature_l2_sq(
            spectral_core.spectral_derivative(high, ((1, 0, 0), (0, 1, 0), (0, 0, 1))[j])
        )

    return WFunctionals(
        w_l2_sq=scale_factor("l2_sq", s) * ns_u.l2_sq,
        w_h1_sq=scale_factor("h1_sq", s) * ns_u.h1_sq,
        w_h2_sq=scale_factor("h2_sq", s) * ns_u.h2_sq,
        w_sup=scale_factor("sup", s) * ns_u.sup,
        low_l2_sq=low_l2_sq,
        e_low=e_low,
        e_high=e_high,
        low_l4=low_l4,
        low_sup=low_sup,
        grad_high_sq=grad_high_sq,
        trilinear=scale_factor("trilinear", s) * tri_u,
        lap_coupling=scale_factor("lap_coupling", s) * lap_u,
        trilinear_scale=scale_factor("trilinear", s) * tri_scale_u,
        lap_scale=scale_factor("lap_coupling", s) * lap_scale_u,
    )


def w_functionals_multiplier_route(
    u_hat: VectorField, clock: SimilarityClock, mults: MultiplierSet
) -> WFunctionals:
    """w-functionals via rescaled radial symbols applied to the u-coefficients.

    Every quadratic functional is a spectral sum with weights evaluated at
    xi = sqrt(s) |k|; sup/L4 quantities reconstruct the filtered field on the
    u-lattice and rescale the samples.
    """
    s = clock.remaining
    root = math.sqrt(s)
    g = u_hat.grid
    if u_hat.representation != SPECTRAL:
        raise spectral_core.RepresentationError("multiplier route expects spectral input")
    power = np.sum(np.abs(u_hat.data) ** 2, axis=0)
    xi_sq = s * g.k_sq
    pref = scale_factor("l2_sq", s) * g.volume

    phi_xi = multiplier_bank.evaluate_on_grid(mults.phi, g, scale=root)
    chi_xi = multiplier_bank.evaluate_on_grid(mults.chi, g, scale=root)
    split_hi = multiplier_bank.evaluate_on_grid(mults.sqrt_one_minus_phi_sq, g, scale=root)

    w_l2_sq = pref * float(np.sum(power))
    w_h1_sq = pref * float(np.sum(xi_sq * power))
    w_h2_sq = pref * float(np.sum(xi_sq**2 * power))
    low_l2_sq = pref * float(np.sum(phi_xi**2 * power))
    e_low = pref * float(np.sum(chi_xi**2 * power))
    e_high = pref * float(np.sum(split_hi**2 * power))
    grad_high_sq = pref * float(np.sum(xi_sq * (1.0 - phi_xi) ** 2 * power))

    u_phys = spectral_core.to_physical(u_hat)
    w_sup = root * float(np.sqrt(np.max(np.sum(u_phys.data**2, axis=0))))
    low_u = spectral_core.to_physical(VectorField(g, u_hat.data * phi_xi, SPECTRAL))
    low_mag_sq = np.sum(low_u.data**2, axis=0)
    low_sup = root * float(np.sqrt(np.max(low_mag_sq)))
    low_l4 = scale_factor("l4", s) * float((np.sum(low_mag_sq**2) * g.cell_volume) ** 0.25)

    w_field = build_w_field(u_hat, clock)
    trilinear, tri_scale = _trilinear_with_scale(w_field)
    lap_coupling, lap_scale = _lap_coupling_with_scale(w_field)

    return WFunctionals(
        w_l2_sq=w_l2_sq,
        w_h1_sq=w_h1_sq,
        w_h2_sq=w_h2_sq,
        w_sup=w_sup,
        low_l2_sq=low_l2_sq,
        e_low=e_low,
        e_high=e_high,
        low_l4=low_l4,
        low_sup=low_sup,
        grad_high_sq=grad_high_sq,
        trilinear=trilinear,
        lap_coupling=lap_coupling,
        trilinear_scale=tri_scale,
        lap_scale=lap_scale,
    )


def initial_similarity_energy(
    u0_hat: VectorField, horizon: float, mults: MultiplierSet
) -> float:
    """Split energy E(0) of the rescaled initial data, with its upper bound.

    Returns e_low + e_high at t = 0 and checks it never exceeds
    ||w(0)||^2 = T^(-1/2) ||u0||^2, which follows from the pointwise weight
    bound chi^2 + 1 - phi^2 <= 1 (verified here on a dense radial grid
    before use).
    """
    r = np.linspace(0.0, 3.0, 30_001)
    weight = mults.chi(r) ** 2 + mults.sqrt_one_minus_phi_sq(r) ** 2
    if float(np.max(weight)) > 1.0 + 1e-13:
        raise AssertionError("split weight exceeds 1; profile construction is broken")

    clock = SimilarityClock(horizon=horizon, t=0.0)
    w = w_functionals_multiplier_route(u0_hat, clock, mults)
    energy = w.energy
    bound = w.w_l2_sq
    if energy > bound * (1.0 + 1e-12) + 1e-300:
        raise AssertionError(
            f"initial split energy {energy!r} exceeds its bound {bound!r}"
        )
    return energy
