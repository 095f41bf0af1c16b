"""Spectral discretization of a periodic box: transforms, differentiation,
dealiasing, divergence-free projection, and norms.

Conventions
-----------
The box is [0, L)^3 sampled on an n^3 collocation lattice.  Wavenumbers are
k = (2*pi/L) * m with integer mode m in [-n/2, n/2) per axis.  Spectral
coefficients are normalized so that a field expands as

    f(x) = sum_k fhat(k) * exp(i k.x)

which makes the Parseval identity read

    integral |f|^2 dx = L^3 * sum_k |fhat(k)|^2

and derivatives act as fhat(k) -> (i k_j) fhat(k).  Physical-space integrals
use the trapezoidal (here: exact for band-limited fields) quadrature weight
(L/n)^3.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass

import numpy as np
import scipy.fft

PHYSICAL = "physical"
SPECTRAL = "spectral"

_fft_lock = threading.Lock()
_fft_workers = 1


class RepresentationError(ValueError):
    """A field was passed in the wrong representation (physical vs spectral)."""


def set_fft_workers(workers: int) -> None:
    """Set the worker count used by the pocketfft backend (1 = serial)."""
    global _fft_workers
    with _fft_lock:
        _fft_workers = max(1, int(workers))


def get_fft_workers() -> int:
    return _fft_workers


def fft_workers_from_env(default: int = 1) -> int:
    """Read the thread-count override from the TORUSNS_THREADS variable."""
    raw = os.environ.get("TORUSNS_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return default


@dataclass(frozen=True)
class SpectralGrid:
    """
    Pre-computed spectral quantities for a cubic periodic domain.

    Parameters
    ----------
    n : int
        Collocation points per dimension.  Must be even and at least 8.
    box_length : float
        Physical side length L of the box.
    """

    n: int
    box_length: float

    def __post_init__(self) -> None:
        if self.n % 2 != 0 or self.n < 8:
            raise ValueError(f"grid size must be even and >= 8, got n={self.n}")
        if not self.box_length > 0:
            raise ValueError(f"box length must be positive, got {self.box_length}")

        n, L = self.n, float(self.box_length)
        m1 = np.fft.fftfreq(n, d=1.0 / n)  # integer modes 0..n/2-1, -n/2..-1
        k1 = (2.0 * np.pi / L) * m1
        shapes = [(n, 1, 1), (1, n, 1), (1, 1, n)]
        modes = [m1.reshape(s) for s in shapes]
        k = [k1.reshape(s) for s in shapes]
        k_sq = k[0] ** 2 + k[1] ** 2 + k[2] ** 2
        cutoff = n / 3.0
        mask = (
            (np.abs(modes[0]) <= cutoff)
            & (np.abs(modes[1]) <= cutoff)
            & (np.abs(modes[2]) <= cutoff)
        )
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "k_sq", k_sq)
        object.__setattr__(self, "k_mag", np.sqrt(k_sq))
        object.__setattr__(self, "dealias_mask", mask)
        object.__setattr__(self, "dx", L / n)
        object.__setattr__(self, "cell_volume", (L / n) ** 3)
        object.__setattr__(self, "volume", L**3)

    @property
    def num_modes(self) -> int:
        return self.n**3

    @property
    def max_wavenumber(self) -> float:
        """Largest wavenumber magnitude on the lattice, sqrt(3)*pi*n/L."""
        return float(np.sqrt(3.0) * np.pi * self.n / self.box_length)

    def coordinates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Collocation coordinates as broadcastable 1-axis arrays."""
        x1 = np.arange(self.n) * self.dx
        return x1.reshape(-1, 1, 1), x1.reshape(1, -1, 1), x1.reshape(1, 1, -1)


def make_grid(n: int, box_length: float = 2.0 * np.pi) -> SpectralGrid:
    """Build the spectral grid for an n^3 periodic box of side `box_length`."""
    return SpectralGrid(n=int(n), box_length=float(box_length))


@dataclass
class VectorField:
    """A 3-component field with a physical or spectral representation tag.

    `data` has shape (3, n, n, n): float64 samples when physical, complex128
    coefficients (in the normalization of the module docstring) when spectral.
    """

    grid: SpectralGrid
    data: np.ndarray
    representation: str

    def __post_init__(self) -> None:
        n = self.grid.n
        if self.data.shape != (3, n, n, n):
            raise ValueError(f"expected data shape (3, {n}, {n}, {n}), got {self.data.shape}")
        if self.representation not in (PHYSICAL, SPECTRAL):
            raise ValueError(f"unknown representation {self.representation!r}")
        if self.representation == PHYSICAL and np.iscomplexobj(self.data):
            raise ValueError("physical fields must hold real data")
        if self.representation == SPECTRAL and not np.iscomplexobj(self.data):
            raise ValueError("spectral fields must hold complex data")

    def copy(self) -> "VectorField":
        return VectorField(self.grid, self.data.copy(), self.representation)


def zero_field(grid: SpectralGrid, representation: str = SPECTRAL) -> VectorField:
    dtype = np.complex128 if representation == SPECTRAL else np.float64
    return VectorField(grid, np.zeros((3, grid.n, grid.n, grid.n), dtype=dtype), representation)


def to_spectral(field: VectorField) -> VectorField:
    """Forward transform of a physical field; fhat(k) = DFT[f]/n^3."""
    if field.representation != PHYSICAL:
        raise RepresentationError("to_spectral expects a physical field")
    coef = scipy.fft.fftn(field.data, axes=(1, 2, 3), workers=_fft_workers) / field.grid.num_modes
    return VectorField(field.grid, coef, SPECTRAL)


def to_physical(field: VectorField) -> VectorField:
    """Inverse transform; discards the roundoff-level imaginary part."""
    if field.representation != SPECTRAL:
        raise RepresentationError("to_physical expects a spectral field")
    vals = scipy.fft.ifftn(field.data, axes=(1, 2, 3), workers=_fft_workers) * field.grid.num_modes
    return VectorField(field.grid, np.ascontiguousarray(vals.real), PHYSICAL)


def ensure_spectral(field: VectorField) -> VectorField:
    return field if field.representation == SPECTRAL else to_spectral(field)


def ensure_physical(field: VectorField) -> VectorField:
    return field if field.representation == PHYSICAL else to_physical(field)


def leray_project(field: VectorField) -> VectorField:
    """Project onto divergence-free fields: coef -> (I - k k^T/|k|^2) coef.

    The k=0 mode is left unchanged.  The projection removes any gradient
    component, which is how the pressure term is eliminated.
    """
    if field.representation != SPECTRAL:
        raise RepresentationError("leray_project expects a spectral field")
    g = field.grid
    k_sq = np.where(g.k_sq == 0.0, 1.0, g.k_sq)
    k_dot_u = g.k[0] * field.data[0] + g.k[1] * field.data[1] + g.k[2] * field.data[2]
    coef = np.empty_like(field.data)
    for j in range(3):
        coef[j] = field.data[j] - g.k[j] * k_dot_u / k_sq
    return VectorField(g, coef, SPECTRAL)


def spectral_derivative(field: VectorField, beta: tuple[int, int, int]) -> VectorField:
    """Apply the derivative symbol (i k_1)^b1 (i k_2)^b2 (i k_3)^b3.

    Orders up to |beta| <= 3 are supported; the harness never needs more.
    """
    if field.representation != SPECTRAL:
        raise RepresentationError("spectral_derivative expects a spectral field")
    if len(beta) != 3 or any(b < 0 for b in beta):
        raise ValueError(f"beta must be three nonnegative integers, got {beta}")
    if sum(beta) > 3:
        raise ValueError(f"derivative order {sum(beta)} exceeds the supported maximum 3")
    g = field.grid
    symbol = np.ones((), dtype=np.complex128)
    for j, b in enumerate(beta):
        if b:
            symbol = symbol * (1j * g.k[j]) ** b
    return VectorField(g, field.data * symbol, SPECTRAL)


def dealias(field: VectorField) -> VectorField:
    """Zero every mode with any axis index |m| > n/3 (two-thirds rule)."""
    if field.representation != SPECTRAL:
        raise RepresentationError("dealias expects a spectral field")
    return VectorField(field.grid, field.data * field.grid.dealias_mask, SPECTRAL)


@dataclass(frozen=True)
class NormSuite:
    """Norm bundle for one field: L2/H1/H2 squared seminorms, sup, and L4."""

    l2_sq: float
    h1_sq: float
    h2_sq: float
    sup: float
    l4: float

    def lm(self, m: float) -> float:
        """The L^m norm for the supported orders m in {4, inf}."""
        if m == 4:
            return self.l4
        if m == np.inf:
            return self.sup
        raise ValueError(f"unsupported norm order m={m}")


def norms(field: VectorField) -> NormSuite:
    """Compute the norm suite.

    L2/H1/H2 come from Plancherel sums over the coefficients; the sup and L4
    norms are evaluated on the collocation grid (no over-sampling).
    """
    spec = ensure_spectral(field)
    phys = ensure_physical(field)
    g = field.grid
    power = np.sum(np.abs(spec.data) ** 2, axis=0)
    l2_sq = g.volume * float(np.sum(power))
    h1_sq = g.volume * float(np.sum(g.k_sq * power))
    h2_sq = g.volume * float(np.sum(g.k_sq**2 * power))
    mag_sq = np.sum(phys.data**2, axis=0)
    sup = float(np.sqrt(np.max(mag_sq)))
    l4 = float((np.sum(mag_sq**2) * g.cell_volume) ** 0.25)
    return NormSuite(l2_sq=l2_sq, h1_sq=h1_sq, h2_sq=h2_sq, sup=sup, l4=l4)


def quadrature_l2_sq(field: VectorField) -> float:
    """L2 norm squared by physical-grid quadrature (independent of Plancherel)."""
    phys = ensure_physical(field)
    return float(np.sum(phys.data**2) * field.grid.cell_volume)


def inner_l2(f: VectorField, g: VectorField) -> float:
    """Discrete L2 inner product <f, g> via the spectral coefficients."""
    fs, gs = ensure_spectral(f), ensure_spectral(g)
    return f.grid.volume * float(np.real(np.sum(fs.data * np.conj(gs.data))))


def divergence_ratio(field: VectorField) -> float:
    """Dimensionless divergence measure: ||k . coef||_2 / ||  |k| coef ||_2.

    Zero for exactly divergence-free fields; ~1 for a pure gradient.  Returns
    0 for the zero field.
    """
    spec = ensure_spectral(field)
    g = field.grid
    div = g.k[0] * spec.data[0] + g.k[1] * spec.data[1] + g.k[2] * spec.data[2]
    num = np.sqrt(np.sum(np.abs(div) ** 2))
    den = np.sqrt(np.sum(g.k_sq * np.sum(np.abs(spec.data) ** 2, axis=0)))
    if den == 0.0:
        return 0.0
    return float(num / den)


def hermitian_defect(field: VectorField) -> float:
    """Relative deviation from coef(-k) = conj(coef(k)) for a real field."""
    spec = ensure_spectral(field)
    flipped = spec.data[:, ::-1, ::-1, ::-1]
    # index -m lives at position n-m; rolling by one aligns 0 with 0.
    flipped = np.roll(flipped, 1, axis=(1, 2, 3))
    defect = np.max(np.abs(spec.data - np.conj(flipped)))
    scale = np.max(np.abs(spec.data))
    if scale == 0.0:
        return 0.0
    return float(defect / scale)


def convective_product(field: VectorField) -> VectorField:
    """Pointwise advection product (u . grad) u, returned in physical space."""
    spec = ensure_spectral(field)
    phys = ensure_physical(field)
    g = field.grid
    out = np.zeros((3, g.n, g.n, g.n))
    for j in range(3):
        dj = to_physical(VectorField(g, spec.data * (1j * g.k[j]), SPECTRAL))
        out += phys.data[j] * dj.data
    return VectorField(g, out, PHYSICAL)


def trilinear_form(field: VectorField) -> float:
    """The gradient triple product sum_{j,k,l} int d_j f_k d_j f_l d_l f_k dx.

    The integrand is a cubic of band-limited factors, so collocation
    quadrature is exact as long as 3 * max_mode < n.
    """
    spec = ensure_spectral(field)
    g = field.grid
    grads = np.empty((3, 3, g.n, g.n, g.n))
    for j in range(3):
        dj = to_physical(VectorField(g, spec.data * (1j * g.k[j]), SPECTRAL))
        grads[j] = dj.data  # grads[j, c] = d_j f_c
    total = 0.0
    for j in range(3):
        for k in range(3):
            for l in range(3):
                total += float(np.sum(grads[j, k] * grads[j, l] * grads[l, k]))
    return total * g.cell_volume


def advective_laplacian_form(field: VectorField) -> float:
    """The coupling integral int (Lap f) . Lap((f . grad) f) dx."""
    spec = ensure_spectral(field)
    g = field.grid
    conv_hat = to_spectral(convective_product(field))
    weight = g.k_sq**2  # two Laplacians pair to |k|^4 under Plancherel
    return g.volume * float(np.real(np.sum(weight * spec.data * np.conj(conv_hat.data))))
