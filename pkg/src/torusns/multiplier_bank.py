"""Radial Fourier multipliers and the frequency-split operators built on them.

One smooth low-pass profile `phi` (identically 1 inside radius 1, identically
0 outside radius 2, nonincreasing) generates the whole bank:

* ``phi``                    -- low-pass cut (operator: low part of a field),
* ``one_minus_phi``          -- the complementary high-pass cut,
* ``sqrt_one_minus_phi_sq``  -- the energy-split high weight, so that
  phi^2 + (sqrt(1-phi^2))^2 = 1 pointwise and the two parts split the L2
  energy exactly,
* ``chi``                    -- a weighted low-pass: r^(1/2+2a) * phi(r) below
  the knee r = 1/2 + a and (1/2+a)^(1/2+2a) * phi(r) above it, for a weight
  exponent a in (0, 1/8).

The module also provides the quadrature constant bounding L^m norms of the
low part by the chi-weighted L2 norm, a Bernstein-type margin check, and the
two pointwise sign certificates used by the energy-decay argument.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .spectral_core import SPECTRAL, RepresentationError, VectorField, spectral_derivative

_FD_STEP = 1e-5  # central-difference step for profile derivatives, error O(h^2)

_cache_lock = threading.Lock()
_profile_cache: dict[tuple, np.ndarray] = {}


def _bump(s: np.ndarray) -> np.ndarray:
    """exp(-1/s) continued by 0 for s <= 0."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    with np.errstate(divide="ignore", over="ignore", under="ignore"):
        out[pos] = np.exp(-1.0 / s[pos])
    return out


def _smoothstep(s: np.ndarray) -> np.ndarray:
    """The standard C-infinity step b(s)/(b(s)+b(1-s)): 0 for s<=0, 1 for s>=1."""
    s = np.asarray(s, dtype=float)
    num = _bump(s)
    den = num + _bump(1.0 - s)
    out = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return np.clip(out, 0.0, 1.0)


@dataclass(frozen=True)
class RadialMultiplier:
    """A radial symbol r >= 0 -> [0, C]; `fn` must accept numpy arrays."""

    label: str
    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    alpha: float | None = None
    sharpness: float = 1.0

    def __call__(self, r: np.ndarray | float) -> np.ndarray:
        return self.fn(np.asarray(r, dtype=float))

    def sq(self, r: np.ndarray | float) -> np.ndarray:
        return self(r) ** 2

    def d_sq_dr(self, r: np.ndarray | float) -> np.ndarray:
        """Central-difference derivative of the squared profile (O(h^2))."""
        r = np.asarray(r, dtype=float)
        h = _FD_STEP
        return (self.sq(r + h) - self.sq(np.maximum(r - h, 0.0))) / (
            (r + h) - np.maximum(r - h, 0.0)
        )


def build_phi(transition_sharpness: float = 1.0) -> RadialMultiplier:
    """Smooth low-pass profile: 1 on r <= 1, 0 on r >= 2, nonincreasing.

    `transition_sharpness` in (0, 1] is the fraction of [1, 2] used for the
    transition (measured from r = 2 backwards); values above 1 would erode the
    inner plateau and are rejected.
    """
    w = float(transition_sharpness)
    if not 0.0 < w <= 1.0:
        raise ValueError(f"transition sharpness must lie in (0, 1], got {w}")

    def fn(r: np.ndarray) -> np.ndarray:
        return _smoothstep((2.0 - np.asarray(r, dtype=float)) / w)

    return RadialMultiplier(label="phi", fn=fn, sharpness=w)


def build_chi(phi: RadialMultiplier, alpha: float) -> RadialMultiplier:
    """Weighted low-pass profile with knee at r = 1/2 + alpha.

    Equals r^(1/2+2a)*phi(r) below the knee and (1/2+a)^(1/2+2a)*phi(r) above
    it; the two branches match continuously at the knee.
    """
    a = float(alpha)
    if not 0.0 < a < 0.125:
        raise ValueError(f"alpha must lie in the open interval (0, 1/8), got {a}")
    knee = 0.5 + a
    exponent = 0.5 + 2.0 * a

    def fn(r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return np.minimum(r, knee) ** exponent * phi(r)

    return RadialMultiplier(label="chi", fn=fn, alpha=a, sharpness=phi.sharpness)


def _derive(phi: RadialMultiplier, label: str) -> RadialMultiplier:
    if label == "one_minus_phi":
        fn = lambda r: 1.0 - phi(r)  # noqa: E731
    elif label == "sqrt_one_minus_phi_sq":
        # (1-phi)(1+phi) is better conditioned near phi = 1 than 1 - phi^2.
        fn = lambda r: np.sqrt(np.clip((1.0 - phi(r)) * (1.0 + phi(r)), 0.0, None))  # noqa: E731
    else:
        raise ValueError(label)
    return RadialMultiplier(label=label, fn=fn, sharpness=phi.sharpness)


@dataclass(frozen=True)
class MultiplierSet:
    """The four profiles of the bank for one weight exponent alpha."""

    alpha: float
    phi: RadialMultiplier
    chi: RadialMultiplier
    one_minus_phi: RadialMultiplier
    sqrt_one_minus_phi_sq: RadialMultiplier

    @classmethod
    def build(cls, alpha: float, transition_sharpness: float = 1.0) -> "MultiplierSet":
        phi = build_phi(transition_sharpness)
        return cls(
            alpha=float(alpha),
            phi=phi,
            chi=build_chi(phi, alpha),
            one_minus_phi=_derive(phi, "one_minus_phi"),
            sqrt_one_minus_phi_sq=_derive(phi, "sqrt_one_minus_phi_sq"),
        )

    def labelled(self, label: str) -> RadialMultiplier:
        for m in (self.phi, self.chi, self.one_minus_phi, self.sqrt_one_minus_phi_sq):
            if m.label == label:
                return m
        raise KeyError(label)


def evaluate_on_grid(mult: RadialMultiplier, grid, scale: float = 1.0) -> np.ndarray:
    """Profile evaluated at scale*|k| over the grid lattice, cached for scale=1."""
    if scale == 1.0:
        key = (grid.n, grid.box_length, mult.label, mult.alpha, mult.sharpness)
        with _cache_lock:
            hit = _profile_cache.get(key)
        if hit is not None:
            return hit
        values = mult(grid.k_mag)
        with _cache_lock:
            _profile_cache[key] = values
        return values
    return mult(scale * grid.k_mag)


def apply(mult: RadialMultiplier, field: VectorField, scale: float = 1.0) -> VectorField:
    """Multiply the coefficients by profile(scale * |k|)."""
    if field.representation != SPECTRAL:
        raise RepresentationError("multipliers act on spectral fields")
    weights = evaluate_on_grid(mult, field.grid, scale)
    return VectorField(field.grid, field.data * weights, SPECTRAL)


def hausdorff_young_constant(alpha: float, m: float) -> float:
    """Quadrature constant C(alpha, m) with ||low f||_m <= C ||chi-low f||_2.

    C = (2 pi)^(3/m') * ( int_{|xi|<=2} |xi|^(-(1/2+2a)*2m'/(2-m')) dxi )^((2-m')/(2m'))
    with the conjugate exponent 1/m + 1/m' = 1; for m = inf take m' = 1.  The
    volume integral reduces to 4 pi * int_0^2 r^(2-p) dr, evaluated here with
    adaptive quadrature.
    """
    a = float(alpha)
    if not 0.0 < a < 0.125:
        raise ValueError(f"alpha must lie in (0, 1/8), got {a}")
    if m != math.inf and m < 4:
        raise ValueError(f"norm order must satisfy m >= 4, got {m}")
    m_conj = 1.0 if m == math.inf else m / (m - 1.0)
    q = 2.0 * m_conj / (2.0 - m_conj)
    p = (0.5 + 2.0 * a) * q
    if p >= 3.0:
        raise ValueError(f"radial exponent p={p} is not integrable in 3-d")
    radial, _ = quad(lambda r: r ** (2.0 - p), 0.0, 2.0, limit=200)
    integral = 4.0 * np.pi * radial
    exponent = (2.0 - m_conj) / (2.0 * m_conj)
    return float((2.0 * np.pi) ** (3.0 / m_conj) * integral**exponent)


def check_bernstein(mults: MultiplierSet, field: VectorField, beta: tuple[int, int, int]) -> float:
    """Margin ||D^b split-high f||^2 - ||D^b high f||^2 (must be >= -1e-12 scale).

    Pointwise (1-phi)^2 <= 1-phi^2, so the margin is nonnegative up to
    roundoff for every derivative multi-index with |beta| <= 2.
    """
    if sum(beta) > 2:
        raise ValueError(f"margin check supports |beta| <= 2, got {beta}")
    deriv = spectral_derivative(field, beta)
    g = field.grid
    power = np.sum(np.abs(deriv.data) ** 2, axis=0)
    w_high = evaluate_on_grid(mults.one_minus_phi, g) ** 2
    w_split = evaluate_on_grid(mults.sqrt_one_minus_phi_sq, g) ** 2
    return g.volume * float(np.sum((w_split - w_high) * power))


def _chi_sq_derivative(mults: MultiplierSet, r: np.ndarray) -> np.ndarray:
    """d(chi^2)/dr on [0, 1], where phi == 1 so both branches are closed-form."""
    a = mults.alpha
    knee = 0.5 + a
    return np.where(r < knee, (1.0 + 4.0 * a) * np.maximum(r, 0.0) ** (4.0 * a), 0.0)


def sign_certificate_A(alpha: float, r_grid: np.ndarray | None = None) -> float:
    """Max over r in [0,1] of the low-range bracket; certified <= 0.

    bracket(r) = (1/4) r d(-chi^2)/dr - r^2 chi^2 + (1/4 + alpha) chi^2.
    On the power branch the algebra collapses to -r^(3+4a) exactly.
    """
    mults = MultiplierSet.build(alpha)
    if r_grid is None:
        r_grid = np.linspace(0.0, 1.0, 10_001)
    r = np.asarray(r_grid, dtype=float)
    if r.min() < 0.0 or r.max() > 1.0:
        raise ValueError("the low-range certificate is defined on r in [0, 1]")
    chi_sq = mults.chi.sq(r)
    bracket = -0.25 * r * _chi_sq_derivative(mults, r) + (0.25 + alpha - r**2) * chi_sq
    return float(np.max(bracket))


def sign_certificate_B(alpha: float, r_grid: np.ndarray | None = None) -> float:
    """Max over r in [1,2] of the transition-range bracket; certified <= 0.

    bracket(r) = (1/4)(1 - c) r d(phi^2)/dr - (r^2 - (1/4 + alpha)) c phi^2
    with c = (1/2 + alpha)^(1 + 4 alpha).  Both terms are nonpositive: the
    profile is nonincreasing and r^2 >= 1 > 1/4 + alpha.
    """
    mults = MultiplierSet.build(alpha)
    if r_grid is None:
        r_grid = np.linspace(1.0, 2.0, 10_001)
    r = np.asarray(r_grid, dtype=float)
    if r.min() < 1.0 or r.max() > 2.0:
        raise ValueError("the transition-range certificate is defined on r in [1, 2]")
    c = (0.5 + alpha) ** (1.0 + 4.0 * alpha)
    dphi_sq = mults.phi.d_sq_dr(r)
    bracket = 0.25 * (1.0 - c) * r * dphi_sq - (r**2 - (0.25 + alpha)) * c * mults.phi.sq(r)
    return float(np.max(bracket))
