"""Time evolution of the bending-sheet water-wave system in holomorphic
coordinates, with the conserved energy and momentum functionals.

State: a pair (W, Q) of holomorphic fields; W parametrizes the interface
position, Q the velocity potential trace.  The evolution is

    W_t = -F (1 + W_a)
    Q_t = -F Q_a - P[|Q_a|^2 / J] + i s P{ J^{-1/2} d_a [ J^{-1/2} d_a curv ] }
          + b3 * s * P{ curv^3 }

with J = |1 + W_a|^2, F = P[(Q_a - conj(Q_a))/J], s the bending stiffness and

    curv = W_aa / (J^{1/2} (1 + W_a)) - conj(...)   (= 2i * geometric curvature).

The cubed-bending coefficient b3 defaults to -i/8, the unique value for which
the bending energy and the horizontal momentum are conserved exactly and for
which steady profiles translate rigidly; the +i/2 variant is retained for
comparison runs (it drifts at quartic order in amplitude).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .spectral_core import (PAD_FACTOR, TOL_HOLO, TOL_JAC, JacobianDegenerateError,
                            PeriodicGrid, SpectralField, coeffs_to_values,
                            pair_norm, values_to_coeffs)

BEND_CUBE_CONSERVING = -0.125j   # conserves energy/momentum exactly
BEND_CUBE_ALT = 0.5j             # alternative scaling; breaks conservation


@dataclass(frozen=True)
class WaveState:
    """Holomorphic pair (W, Q) at time t with bending stiffness sigma."""

    t: float
    W: SpectralField
    Q: SpectralField
    sigma: float = 1.0

    def __post_init__(self):
        if self.W.grid != self.Q.grid:
            raise ValueError("W and Q must share a grid")

    @property
    def grid(self) -> PeriodicGrid:
        return self.W.grid

    def holo_leak(self) -> float:
        return max(self.W.positive_leak(), self.Q.positive_leak())


@dataclass
class EvolveReport:
    times: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    momentum: list = field(default_factory=list)
    pair_norm_trace: list = field(default_factory=list)
    holo_leak: list = field(default_factory=list)
    aborted: bool = False
    abort_reason: str = ""

    def append(self, t, en, mom, pn, leak):
        self.times.append(float(t))
        self.energy.append(float(en))
        self.momentum.append(float(mom))
        self.pair_norm_trace.append(float(pn))
        self.holo_leak.append(float(leak))

    def energy_drift(self) -> float:
        if not self.energy or self.energy[0] == 0:
            return 0.0
        e0 = self.energy[0]
        return max(abs(e - e0) for e in self.energy) / abs(e0)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "energy", "momentum", "pair_norm", "holo_leak"])
            for row in zip(self.times, self.energy, self.momentum,
                           self.pair_norm_trace, self.holo_leak):
                w.writerow(row)


class _GridOps:
    """Cached multiplier arrays for one (n, q) grid."""

    def __init__(self, grid: PeriodicGrid):
        n = grid.n_modes
        self.n = n
        self.m = PAD_FACTOR * n
        self.j = grid.mode_indices
        self.kap = grid.wavenumbers
        self.ik = 1j * self.kap
        self.absk = np.abs(self.kap)
        jpad = np.fft.fftfreq(self.m) * self.m
        self.ikpad = 1j * jpad / grid.q
        self.pos = self.j > 0
        self.dal = grid.period / self.m   # padded-grid quadrature weight

    def phys(self, c):
        out = np.zeros(self.m, dtype=complex)
        h = self.n // 2
        out[:h] = c[:h]
        out[-h:] = c[-h:]
        return np.fft.ifft(out) * self.m

    def spec(self, v):
        c = np.fft.fft(v) / self.m
        h = self.n // 2
        out = np.empty(self.n, dtype=complex)
        out[:h] = c[:h]
        out[-h:] = c[-h:]
        return out

    def dpad(self, v, order=1):
        return np.fft.ifft(np.fft.fft(v) * self.ikpad ** order)

    def proj(self, c):
        out = c.copy()
        out[0] *= 0.5
        out[self.pos] = 0.0
        return out


@lru_cache(maxsize=16)
def _ops_for(n_modes: int, q: float) -> _GridOps:
    return _GridOps(PeriodicGrid(n_modes, q))


def _ops(grid: PeriodicGrid) -> _GridOps:
    return _ops_for(grid.n_modes, grid.q)


# ---------------------------------------------------------------------------
# right-hand side
# ---------------------------------------------------------------------------

def _rhs_arrays(ops: _GridOps, Wc, Qc, sigma, cube_coef, tol_jac):
    Wa = ops.phys(Wc * ops.ik)
    Waa = ops.phys(Wc * ops.ik ** 2)
    Qa = ops.phys(Qc * ops.ik)
    one = 1.0 + Wa
    J = (one * np.conj(one)).real
    if J.min() <= tol_jac:
        raise JacobianDegenerateError(f"min J = {J.min():.4f} <= tol {tol_jac}")
    sJ = np.sqrt(J)
    F = ops.phys(ops.proj(ops.spec((Qa - np.conj(Qa)) / J)))
    half = Waa / (sJ * one)
    curv = half - np.conj(half)
    bend = ops.dpad(ops.dpad(curv) / sJ) / sJ
    dW = ops.proj(-ops.spec(F * one))
    dQ = ops.proj(-ops.spec(F * Qa)
                  - ops.proj(ops.spec(Qa * np.conj(Qa) / J))
                  + 1j * sigma * ops.proj(ops.spec(bend))
                  + cube_coef * sigma * ops.proj(ops.spec(curv ** 3)))
    return dW, dQ


def auxiliary(state: WaveState, *, tol_jac: float = TOL_JAC):
    """Return (J, F, curvature_term) as fields on the state's grid."""
    ops = _ops(state.grid)
    Wa = ops.phys(state.W.coeffs * ops.ik)
    Waa = ops.phys(state.W.coeffs * ops.ik ** 2)
    Qa = ops.phys(state.Q.coeffs * ops.ik)
    one = 1.0 + Wa
    J = (one * np.conj(one)).real
    if J.min() <= tol_jac:
        raise JacobianDegenerateError(f"min J = {J.min():.4f} <= tol {tol_jac}")
    sJ = np.sqrt(J)
    F = ops.proj(ops.spec((Qa - np.conj(Qa)) / J))
    half = Waa / (sJ * one)
    curv = half - np.conj(half)
    g = state.grid
    return (SpectralField(g, ops.spec(J.astype(complex))),
            SpectralField(g, F),
            SpectralField(g, ops.spec(curv)))


def rhs(state: WaveState, *, cube_coef: complex = BEND_CUBE_CONSERVING,
        tol_jac: float = TOL_JAC):
    """Time derivative (dW, dQ) of the state."""
    ops = _ops(state.grid)
    dW, dQ = _rhs_arrays(ops, state.W.coeffs, state.Q.coeffs,
                         state.sigma, cube_coef, tol_jac)
    return SpectralField(state.grid, dW), SpectralField(state.grid, dQ)


# ---------------------------------------------------------------------------
# diagnostics: energy, momentum, diagonal variables
# ---------------------------------------------------------------------------

def energy(state: WaveState) -> float:
    """Kinetic plus bending energy (spectral quadrature on the padded grid)."""
    ops = _ops(state.grid)
    Wc, Qc = state.W.coeffs, state.Q.coeffs
    ImQ = ops.phys(Qc).imag
    DImQ = ops.phys(Qc * ops.absk).imag
    D1 = ops.phys(Wc * ops.absk).imag
    ImWa = ops.phys(Wc * ops.ik).imag
    ImWaa = ops.phys(Wc * ops.ik ** 2).imag
    DImWa = ops.phys(Wc * ops.ik * ops.absk).imag
    J = (1.0 + D1) ** 2 + ImWa ** 2
    num = (1.0 + D1) * ImWaa - ImWa * DImWa
    kin = 0.5 * np.sum(DImQ * ImQ) * ops.dal
    bend = 0.5 * state.sigma * np.sum(num ** 2 / J ** 2.5) * ops.dal
    return float(kin + bend)


def momentum(state: WaveState) -> float:
    ops = _ops(state.grid)
    ImW = ops.phys(state.W.coeffs).imag
    DImQ = ops.phys(state.Q.coeffs * ops.absk).imag
    return float(-np.sum(DImQ * ImW) * ops.dal)


def diagonal_variables(state: WaveState):
    """Y- and Y+ with Y_{-/+} = (sqrt(sigma) |D|^{3/2} W -/+ Q)/2."""
    ops = _ops(state.grid)
    root = np.sqrt(state.sigma)
    DW = root * state.W.coeffs * ops.absk ** 1.5
    Ym = 0.5 * (DW - state.Q.coeffs)
    Yp = 0.5 * (DW + state.Q.coeffs)
    return SpectralField(state.grid, Ym), SpectralField(state.grid, Yp)


# ---------------------------------------------------------------------------
# integrating-factor RK4
# ---------------------------------------------------------------------------

@lru_cache(maxsize=32)
def _propagator(n_modes: int, q: float, sigma: float, dt: float):
    """Exact flow of (W_t = -Q_a, Q_t = i sigma d_a^4 W) per mode over dt.

    Per mode the generator is [[0, -i kap], [i sigma kap^4, 0]] whose
    exponential is cos(om dt) I + sin(om dt)/om * generator with
    om = sqrt(sigma) |kap|^{5/2}.
    """
    grid = PeriodicGrid(n_modes, q)
    kap = grid.wavenumbers
    om = np.sqrt(sigma) * np.abs(kap) ** 2.5
    phase = om * dt
    cosw = np.cos(phase)
    sinc = np.where(om > 0, np.divide(np.sin(phase), np.where(om > 0, om, 1.0)), dt)
    c12 = sinc * (-1j * kap)
    c21 = sinc * (1j * sigma * kap ** 4)
    return cosw, c12, c21


def _apply_prop(P, Wc, Qc):
    c11, c12, c21 = P
    return c11 * Wc + c12 * Qc, c21 * Wc + c11 * Qc


def step(state: WaveState, dt: float, *, cube_coef: complex = BEND_CUBE_CONSERVING,
         tol_jac: float = TOL_JAC):
    """One integrating-factor RK4 step.  Returns (new_state, holo_leak) where
    the leak is the largest positive-frequency magnitude produced by the
    nonlinear stages before re-projection."""
    ops = _ops(state.grid)
    grid = state.grid
    sig = state.sigma
    E = _propagator(grid.n_modes, grid.q, sig, dt)
    E2 = _propagator(grid.n_modes, grid.q, sig, 0.5 * dt)

    def N(Wc, Qc):
        dW, dQ = _rhs_arrays(ops, Wc, Qc, sig, cube_coef, tol_jac)
        # subtract the linear part handled by the propagator
        return dW + ops.ik * Qc, dQ - 1j * sig * ops.kap ** 4 * Wc

    W0, Q0 = state.W.coeffs, state.Q.coeffs
    n1W, n1Q = N(W0, Q0)
    eW0, eQ0 = _apply_prop(E2, W0, Q0)
    aW, aQ = _apply_prop(E2, W0 + 0.5 * dt * n1W, Q0 + 0.5 * dt * n1Q)
    n2W, n2Q = N(aW, aQ)
    n3W, n3Q = N(eW0 + 0.5 * dt * n2W, eQ0 + 0.5 * dt * n2Q)
    fW, fQ = _apply_prop(E, W0, Q0)
    pW, pQ = _apply_prop(E2, n3W, n3Q)
    n4W, n4Q = N(fW + dt * pW, fQ + dt * pQ)
    e1W, e1Q = _apply_prop(E, n1W, n1Q)
    m2W, m2Q = _apply_prop(E2, n2W + n3W, n2Q + n3Q)
    W1 = fW + dt / 6.0 * (e1W + 2.0 * m2W + n4W)
    Q1 = fQ + dt / 6.0 * (e1Q + 2.0 * m2Q + n4Q)

    pos = ops.pos
    leak = max(np.max(np.abs(W1[pos])), np.max(np.abs(Q1[pos]))) if pos.any() else 0.0
    W1 = ops.proj(W1)
    Q1 = ops.proj(Q1)
    new = WaveState(state.t + dt, SpectralField(grid, W1), SpectralField(grid, Q1), sig)
    return new, float(leak)


def effective_max_wavenumber(state: WaveState, rel_floor: float = 1e-12) -> float:
    """Largest |kappa| carrying relative content above rel_floor."""
    amp = np.maximum(np.abs(state.W.coeffs), np.abs(state.Q.coeffs))
    top = amp.max()
    if top == 0:
        return 1.0
    active = amp > rel_floor * top
    return float(max(np.max(np.abs(state.grid.wavenumbers[active])), 1.0))


def suggest_dt(state: WaveState, cfl: float = 0.5, band_growth: float = 2.0) -> float:
    """Phase-accuracy step: cfl / (band_growth * kappa_eff)^{5/2}."""
    keff = band_growth * effective_max_wavenumber(state)
    return float(cfl * max(keff, 1.0) ** -2.5)


def evolve(state: WaveState, t_end: float, dt: float | None = None,
           sample_every: int = 10, *, cfl: float = 0.5,
           cube_coef: complex = BEND_CUBE_CONSERVING, tol_jac: float = TOL_JAC,
           observer=None):
    """March to t_end, sampling diagnostics every sample_every steps.

    Aborts gracefully (partial report, aborted flag) if the conformal factor
    degenerates mid-run.  `observer(state)` is called at each sample time.
    """
    if dt is None:
        dt = suggest_dt(state, cfl)
    report = EvolveReport()

    def sample(s, leak):
        report.append(s.t, energy(s), momentum(s), pair_norm(s.W, s.Q, 0.0), leak)
        if observer is not None:
            observer(s)

    sample(state, state.holo_leak())
    if t_end <= state.t:
        return state, report
    n_steps = int(np.ceil((t_end - state.t) / dt))
    dt = (t_end - state.t) / n_steps
    worst_leak = 0.0
    try:
        for k in range(1, n_steps + 1):
            state, leak = step(state, dt, cube_coef=cube_coef, tol_jac=tol_jac)
            worst_leak = max(worst_leak, leak)
            if k % sample_every == 0 or k == n_steps:
                sample(state, worst_leak)
                worst_leak = 0.0
    except JacobianDegenerateError as exc:
        report.aborted = True
        report.abort_reason = str(exc)
    return state, report


# ---------------------------------------------------------------------------
# homogeneous expansions of the nonlinearity (quadratic and cubic parts)
# ---------------------------------------------------------------------------

def expand_nonlinearity(state: WaveState, order: int):
    """Homogeneous part of the source terms, order 2 or 3, as transcribed:
    (G_k, K_k) with W_t + Q_a = G and Q_t - i d_a^4 W = K."""
    if order not in (2, 3):
        raise ValueError("order must be 2 or 3")
    ops = _ops(state.grid)
    g = state.grid
    Wc, Qc = state.W.coeffs, state.Q.coeffs
    Wa = ops.phys(Wc * ops.ik)
    Waa = ops.phys(Wc * ops.ik ** 2)
    Waaa = ops.phys(Wc * ops.ik ** 3)
    W4 = ops.phys(Wc * ops.ik ** 4)
    Qa = ops.phys(Qc * ops.ik)
    cWa, cWaa, cWaaa, cW4 = np.conj(Wa), np.conj(Waa), np.conj(Waaa), np.conj(W4)
    cQa = np.conj(Qa)

    if order == 2:
        G2 = ops.proj(ops.spec(Qa * cWa - cQa * Wa))
        K2 = (-ops.spec(Qa * Qa) - ops.proj(ops.spec(Qa * cQa))
              - 1j * ops.proj(ops.spec(2.5 * Wa * W4 + 5.0 * Waa * Waaa
                                       + 1.5 * cWa * W4 + cWaa * Waaa
                                       - Waa * cWaaa - 1.5 * Wa * cW4)))
        return SpectralField(g, G2), SpectralField(g, K2)

    inner = Qa * Wa - ops.phys(ops.proj(ops.spec(cQa * Wa - Qa * cWa)))
    G3 = (ops.spec(Wa * inner)
          - ops.proj(ops.spec((Qa - cQa) * (4.0 * Wa.real ** 2 - Wa * cWa))))
    bracket = (35 / 8 * Wa ** 2 * W4 + 7 / 4 * Wa * cWa * W4 + 15 / 8 * cWa ** 2 * W4
               + 35 / 2 * Wa * Waa * Waaa + 15 / 2 * cWa * Waa * Waaa
               + 15 / 4 * Wa * cWaa * Waaa + 15 / 4 * cWa * cWaa * Waaa
               + 5 / 4 * Wa * Waa * cWaaa + 5 / 4 * cWa * Waa * cWaaa
               + 9 / 2 * Waa ** 3 + 5 / 2 * Waa ** 2 * cWaa + Waa * cWaa ** 2
               - 7 / 4 * Wa * cWa * cW4 - 15 / 8 * Wa ** 2 * cW4
               - 15 / 2 * Wa * cWaa * cWaaa - 15 / 4 * cWa * Waa * cWaaa
               - 15 / 4 * Wa * Waa * cWaaa - 5 / 4 * cWa * cWaa * Waaa
               - 5 / 4 * Wa * cWaa * Waaa - 5 / 2 * Waa * cWaa ** 2 - Waa ** 2 * cWaa)
    K3 = (ops.spec(Qa * inner) + 2.0 * ops.proj(ops.spec(Waa.real * Qa * cQa))
          + 1j * ops.proj(ops.spec(bracket))
          + 0.5j * ops.proj(ops.spec(Waa ** 3 - 3.0 * Waa ** 2 * cWaa
                                     + 3.0 * Waa * cWaa ** 2)))
    return SpectralField(g, G3), SpectralField(g, K3)


def linear_part(state: WaveState):
    """(-Q_a, i sigma d_a^4 W): the generator handled exactly by the stepper."""
    ops = _ops(state.grid)
    dW = -ops.ik * state.Q.coeffs
    dQ = 1j * state.sigma * ops.kap ** 4 * state.W.coeffs
    return SpectralField(state.grid, dW), SpectralField(state.grid, dQ)


def state_to_json(state: WaveState) -> dict:
    from .spectral_core import field_to_json
    return {"t": state.t, "sigma": state.sigma,
            "W": field_to_json(state.W), "Q": field_to_json(state.Q)}


def state_from_json(obj: dict) -> WaveState:
    from .spectral_core import field_from_json
    return WaveState(float(obj["t"]), field_from_json(obj["W"]),
                     field_from_json(obj["Q"]), float(obj["sigma"]))
