"""Fourier-side calculus on the torus of period 2*pi*q.

Fields are stored as Fourier coefficients in FFT layout: index j runs over
0, 1, ..., n/2-1, -n/2, ..., -1 and the physical wavenumber of index j is
kappa_j = j / q.  A function f is reconstructed as

    f(alpha) = sum_j  c_j exp(i kappa_j alpha),   alpha in [0, 2*pi*q).

Holomorphic fields carry their content on kappa <= 0 only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

PAD_FACTOR = 2          # zero padding for pointwise products (>= 3/2 rule)
TOL_HOLO = 1e-10        # tolerance on positive-frequency content / zero modes
TOL_JAC = 0.25          # lower bound on the conformal Jacobian


class GridMismatchError(ValueError):
    """Operands live on different grids."""


class DegenerateInverseError(ValueError):
    """Negative fractional power applied to a field with a real zero mode."""


class JacobianDegenerateError(RuntimeError):
    """The conformal factor J dropped below its configured floor."""


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform collocation grid on [0, 2*pi*q) with n_modes Fourier modes."""

    n_modes: int
    q: float = 1.0

    def __post_init__(self):
        n = self.n_modes
        if n < 16 or n & (n - 1) != 0:
            raise ValueError(f"n_modes must be a power of two >= 16, got {n}")
        if not self.q > 0:
            raise ValueError(f"period multiplier must be positive, got {self.q}")

    @property
    def period(self) -> float:
        return 2.0 * np.pi * self.q

    @property
    def spacing(self) -> float:
        return self.period / self.n_modes

    @property
    def mode_indices(self) -> np.ndarray:
        return _mode_indices(self.n_modes)

    @property
    def wavenumbers(self) -> np.ndarray:
        return _mode_indices(self.n_modes) / self.q

    @property
    def points(self) -> np.ndarray:
        return self.spacing * np.arange(self.n_modes)

    def index_of(self, mode: int) -> int:
        """FFT-layout position of integer mode index `mode`."""
        n = self.n_modes
        if not -n // 2 <= mode <= n // 2 - 1:
            raise ValueError(f"mode {mode} not representable on n={n}")
        return mode % n


@lru_cache(maxsize=64)
def _mode_indices(n: int) -> np.ndarray:
    j = np.fft.fftfreq(n) * n
    j.flags.writeable = False
    return j


@lru_cache(maxsize=64)
def _pad_slots(n: int, m: int):
    half = n // 2
    return (slice(0, half), slice(m - half, m))


def pad_coeffs(coeffs: np.ndarray, m: int) -> np.ndarray:
    n = len(coeffs)
    lo, hi = _pad_slots(n, m)
    out = np.zeros(m, dtype=complex)
    out[lo] = coeffs[: n // 2]
    out[hi] = coeffs[n // 2:]
    return out

def unpad_coeffs(coeffs: np.ndarray, n: int) -> np.ndarray:
    m = len(coeffs)
    lo, hi = _pad_slots(n, m)
    out = np.empty(n, dtype=complex)
    out[: n // 2] = coeffs[lo]
    out[n // 2:] = coeffs[hi]
    return out


def coeffs_to_values(coeffs: np.ndarray, m: int | None = None) -> np.ndarray:
    """Evaluate on a (possibly padded) physical grid with m points."""
    n = len(coeffs)
    if m is None or m == n:
        return np.fft.ifft(coeffs) * n
    return np.fft.ifft(pad_coeffs(coeffs, m)) * m


def values_to_coeffs(values: np.ndarray, n: int | None = None) -> np.ndarray:
    m = len(values)
    c = np.fft.fft(values) / m
    if n is None or n == m:
        return c
    return unpad_coeffs(c, n)


@dataclass(frozen=True)
class SpectralField:
    """Complex 2*pi*q-periodic function stored by Fourier coefficients."""

    grid: PeriodicGrid
    coeffs: np.ndarray
    flags: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if len(self.coeffs) != self.grid.n_modes:
            raise ValueError("coefficient array does not match the grid")

    # -- constructors -------------------------------------------------
    @staticmethod
    def zero(grid: PeriodicGrid) -> "SpectralField":
        return SpectralField(grid, np.zeros(grid.n_modes, dtype=complex))

    @staticmethod
    def from_values(grid: PeriodicGrid, values: np.ndarray) -> "SpectralField":
        return SpectralField(grid, values_to_coeffs(np.asarray(values, dtype=complex)))

    @staticmethod
    def from_modes(grid: PeriodicGrid, modes: dict) -> "SpectralField":
        """Build from {integer mode index: amplitude}."""
        c = np.zeros(grid.n_modes, dtype=complex)
        for m, a in modes.items():
            c[grid.index_of(int(m))] += a
        return SpectralField(grid, c)

    # -- evaluation ---------------------------------------------------
    def values(self, pad: int = 1) -> np.ndarray:
        return coeffs_to_values(self.coeffs, pad * self.grid.n_modes)

    def coeff(self, mode: int) -> complex:
        return self.coeffs[self.grid.index_of(mode)]

    def with_coeffs(self, coeffs: np.ndarray, *extra_flags: str) -> "SpectralField":
        return SpectralField(self.grid, coeffs, self.flags | frozenset(extra_flags))

    # -- algebra ------------------------------------------------------
    def __add__(self, other: "SpectralField") -> "SpectralField":
        _same_grid(self, other)
        return SpectralField(self.grid, self.coeffs + other.coeffs, self.flags | other.flags)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _same_grid(self, other)
        return SpectralField(self.grid, self.coeffs - other.coeffs, self.flags | other.flags)

    def __mul__(self, scalar) -> "SpectralField":
        return self.with_coeffs(self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return self.with_coeffs(-self.coeffs)

    def conj(self) -> "SpectralField":
        """Coefficients of the complex-conjugate function."""
        n = self.grid.n_modes
        idx = np.mod(-np.arange(n), n)
        return self.with_coeffs(np.conj(self.coeffs[idx]))

    # -- diagnostics ----------------------------------------------------
    def positive_leak(self) -> float:
        """Largest coefficient magnitude at strictly positive wavenumbers."""
        pos = self.grid.mode_indices > 0
        if not pos.any():
            return 0.0
        return float(np.max(np.abs(self.coeffs[pos])))

    def is_holomorphic(self, tol: float = TOL_HOLO) -> bool:
        return self.positive_leak() <= tol

    def is_real_valued(self, tol: float = 1e-12) -> bool:
        return float(np.max(np.abs(self.coeffs - self.conj().coeffs))) <= tol


def _same_grid(f: SpectralField, g: SpectralField):
    if f.grid != g.grid:
        raise GridMismatchError(f"grids differ: {f.grid} vs {g.grid}")


# ---------------------------------------------------------------------------
# multiplier operators
# ---------------------------------------------------------------------------

def hilbert(f: SpectralField) -> SpectralField:
    """Periodic Hilbert transform, multiplier -i*sign(kappa)."""
    kap = f.grid.wavenumbers
    return f.with_coeffs(f.coeffs * (-1j) * np.sign(kap))


def project_holomorphic(f: SpectralField) -> SpectralField:
    """Keep negative wavenumbers, halve the zero mode, drop positive ones."""
    j = f.grid.mode_indices
    c = f.coeffs.copy()
    c[0] *= 0.5
    c[j > 0] = 0.0
    return f.with_coeffs(c)


def derivative(f: SpectralField, order: int = 1) -> SpectralField:
    kap = f.grid.wavenumbers
    return f.with_coeffs(f.coeffs * (1j * kap) ** order)


def fractional_derivative(f: SpectralField, s: float, *, tol_holo: float = TOL_HOLO) -> SpectralField:
    """Multiplier |kappa|**s.  For s < 0 the zero mode must be negligible;
    it is zeroed and flagged when below tol_holo, otherwise this errors."""
    kap = f.grid.wavenumbers
    c = f.coeffs.copy()
    flags = ()
    if s < 0:
        z = abs(c[0])
        if z > tol_holo:
            raise DegenerateInverseError(
                f"negative power |D|^{s} needs a mean-zero field (|c0|={z:.3e})")
        if z > 0:
            flags = ("zero_mode_dropped",)
        c[0] = 0.0
        nz = kap != 0
        c[nz] = c[nz] * np.abs(kap[nz]) ** s
        return f.with_coeffs(c, *flags)
    if s == 0:
        return f.with_coeffs(c)
    return f.with_coeffs(c * np.abs(kap) ** s)   # |0|**s = 0 for s > 0


def dealiased_product(f: SpectralField, g: SpectralField, *, pad: int = PAD_FACTOR) -> SpectralField:
    """Pointwise product on a zero-padded grid, truncated back to f's grid."""
    _same_grid(f, g)
    m = pad * f.grid.n_modes
    vals = coeffs_to_values(f.coeffs, m) * coeffs_to_values(g.coeffs, m)
    return SpectralField(f.grid, values_to_coeffs(vals, f.grid.n_modes), f.flags | g.flags)


def convolve_reference(f: SpectralField, g: SpectralField) -> SpectralField:
    """Direct O(n^2) truncated convolution; oracle for dealiased_product."""
    _same_grid(f, g)
    n = f.grid.n_modes
    j = f.grid.mode_indices.astype(int)
    out = np.zeros(n, dtype=complex)
    fi = np.nonzero(f.coeffs)[0]
    gi = np.nonzero(g.coeffs)[0]
    for a in fi:
        ja = j[a]
        for b in gi:
            jo = ja + j[b]
            if -n // 2 <= jo <= n // 2 - 1:
                out[jo % n] += f.coeffs[a] * g.coeffs[b]
    return SpectralField(f.grid, out)


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

def sobolev_norm(f: SpectralField, s: float = 0.0) -> float:
    """H^s norm with the 2*pi*q-periodic Plancherel normalization."""
    kap = f.grid.wavenumbers
    w = (1.0 + kap ** 2) ** s
    return float(np.sqrt(f.grid.period * np.sum(w * np.abs(f.coeffs) ** 2)))


def pair_norm(w: SpectralField, q: SpectralField, s: float = 0.0) -> float:
    """Product norm H^{s+3/2} x H^s for the position/potential pair."""
    return float(np.hypot(sobolev_norm(w, s + 1.5), sobolev_norm(q, s)))


def normalized_sobolev_norm(f: SpectralField, s: float = 0.0) -> float:
    """H^s norm normalized so that (1/sqrt(q)) e^{i kappa x} has unit L^2 norm.

    Equals sobolev_norm / sqrt(2*pi); convenient when comparing runs across
    torus sizes, where amplitude conventions carry explicit 1/sqrt(q) factors.
    """
    return sobolev_norm(f, s) / np.sqrt(2.0 * np.pi)


def dyadic_sup_l2(f: SpectralField) -> float:
    """Discrete stand-in for the B^0_{inf,2} seminorm: an l2 sum over
    dyadic wavenumber shells of sup-norms of the shell pieces."""
    kap = f.grid.wavenumbers
    absk = np.abs(kap)
    kmax = absk.max()
    total = 0.0
    # shell 0: |kappa| <= 1
    lo = 0.0
    hi = 1.0
    while lo <= kmax:
        mask = (absk >= lo) & (absk < hi) if lo > 0 else (absk < hi)
        if mask.any():
            piece = np.zeros_like(f.coeffs)
            piece[mask] = f.coeffs[mask]
            total += np.max(np.abs(coeffs_to_values(piece))) ** 2
        lo, hi = hi, 2.0 * hi
    return float(np.sqrt(total))


def sup_norm(f: SpectralField, pad: int = PAD_FACTOR) -> float:
    return float(np.max(np.abs(f.values(pad))))


def control_norms(W: SpectralField, Q: SpectralField, *, tol_jac: float = TOL_JAC):
    """Pointwise control diagnostics (A0, A_5/2, A2) built from the slope
    bW = W_alpha, the reduced potential R = Q_alpha/(1+W_alpha) and the
    rational slope Y = W_alpha/(1+W_alpha).

    Sup norms are evaluated on the padded collocation grid; the fractional
    Hoelder indices are replaced by integer/half-integer multiplier proxies.
    """
    _same_grid(W, Q)
    grid = W.grid
    m = PAD_FACTOR * grid.n_modes
    Wa = coeffs_to_values(derivative(W).coeffs, m)
    Qa = coeffs_to_values(derivative(Q).coeffs, m)
    one = 1.0 + Wa
    J = np.abs(one) ** 2
    if J.min() <= tol_jac:
        raise JacobianDegenerateError(f"min J = {J.min():.4f} <= {tol_jac}")
    R = Qa / one
    Yv = Wa / one
    Rf = SpectralField(grid, values_to_coeffs(R, grid.n_modes))
    bWf = derivative(W)

    Rm32 = fractional_derivative(Rf, -1.5, tol_holo=np.inf)
    a0 = (np.max(np.abs(Wa)) + np.max(np.abs(Yv))
          + max(sup_norm(Rm32), dyadic_sup_l2(Rm32)))
    a52 = sup_norm(fractional_derivative(bWf, 2.5)) + sup_norm(derivative(Rf))
    a2 = (sup_norm(bWf) + sup_norm(derivative(bWf)) + sup_norm(derivative(bWf, 2))
          + sup_norm(Rf) + sup_norm(fractional_derivative(Rf, 0.5)))
    return float(a0), float(a52), float(a2)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def field_to_json(f: SpectralField) -> dict:
    return {
        "period_multiplier": f.grid.q,
        "n_modes": f.grid.n_modes,
        "coeffs": [[float(c.real), float(c.imag)] for c in f.coeffs],
    }


def field_from_json(obj: dict) -> SpectralField:
    grid = PeriodicGrid(int(obj["n_modes"]), float(obj["period_multiplier"]))
    c = np.array([complex(re, im) for re, im in obj["coeffs"]], dtype=complex)
    return SpectralField(grid, c)


def save_field(path, f: SpectralField):
    with open(path, "w") as fh:
        json.dump(field_to_json(f), fh)


def load_field(path) -> SpectralField:
    with open(path) as fh:
        return field_from_json(json.load(fh))


def random_band_limited(grid: PeriodicGrid, max_mode: int, rng,
                        holomorphic: bool = False, amplitude: float = 1.0) -> SpectralField:
    """Random field supported on |mode| <= max_mode (test helper)."""
    c = np.zeros(grid.n_modes, dtype=complex)
    lo = -max_mode
    hi = 0 if holomorphic else max_mode
    for m in range(lo, hi + 1):
        if m == 0:
            continue
        c[grid.index_of(m)] = amplitude * (rng.standard_normal() + 1j * rng.standard_normal())
    return SpectralField(grid, c)
