"""Quadratic normal-form machinery, resonant cubic terms, and construction of
frequency-localized approximate solutions.

Two families of bilinear coefficients are available:

* ``symbols="displayed"`` evaluates the seven published rational symbols
  A^h, B^h, C^h, A^a, B^a, C^a, D^a verbatim (`symbol_eval`).
* ``symbols="solved"`` keeps the holomorphic-pair block (which coincides with
  the displayed one) and replaces the mixed conjugate block by the exact
  solution of the per-pair cancellation equations for the quadratic sources.
  This is the family that actually eliminates the quadratic terms of this
  system; the published mixed block does not (see the adjacent tests).

The solved mixed coefficients are indexed by (xi, eta) = (holomorphic input
frequency, pre-conjugation frequency of the conjugated input), both negative.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np

from .spectral_core import (GridMismatchError, SpectralField, dealiased_product,
                            derivative, fractional_derivative, pair_norm,
                            project_holomorphic, sobolev_norm)
from .hydroelastic import WaveState, expand_nonlinearity
from .nls_lab import omega0

RESONANT_CUBIC_COEF = 57.0 / 512.0   # value of the resonant combination at the carrier
YPLUS_CUBIC_COEF = 31.0 / 1024.0     # cubic closure coefficient for the + branch

H_TAGS = ("Ah", "Bh", "Ch")
A_TAGS = ("Aa", "Ba", "Ca", "Da")
TAGS = H_TAGS + A_TAGS


class SymbolValue(NamedTuple):
    value: complex
    degenerate: bool


def _S(xi, eta):
    return xi ** 3 + 2 * xi ** 2 * eta + 2 * xi * eta ** 2 + eta ** 3


def _den_h(xi, eta):
    return 25.0 * _S(xi, eta) ** 2 - 4.0 * xi ** 3 * eta ** 3


def _den_a_core(xi, eta):
    return (25 * xi ** 6 + 100 * xi ** 5 * eta + 200 * xi ** 4 * eta ** 2
            + 246 * xi ** 3 * eta ** 3 + 200 * xi ** 2 * eta ** 4
            + 100 * xi * eta ** 5 + 25 * eta ** 6)


def _num(tag, xi, eta):
    if tag == "Ah":
        return 1j * (5 * xi ** 7 - 2.5 * xi ** 6 * eta - 40 * xi ** 5 * eta ** 2
                     - 95 * xi ** 4 * eta ** 3 - 121 * xi ** 3 * eta ** 4
                     - 100 * xi ** 2 * eta ** 5 - 50 * xi * eta ** 6 - 12.5 * eta ** 7)
    if tag == "Bh":
        return -1j * (xi + eta) * (6.25 * _S(xi, eta) ** 2 - 2.0 * xi ** 3 * eta ** 3)
    if tag == "Ch":
        return -2.5j * (xi + eta) * _S(xi, eta)
    if tag == "Aa":
        return 0.5j * (10 * xi ** 8 + 45 * xi ** 7 * eta + 112 * xi ** 6 * eta ** 2
                       + 154 * xi ** 5 * eta ** 3 + 62 * xi ** 4 * eta ** 4
                       - 140 * xi ** 3 * eta ** 5 - 240 * xi ** 2 * eta ** 6
                       - 155 * xi * eta ** 7 - 40 * eta ** 8)
    if tag == "Ba":
        return 0.5j * (-25 * xi ** 8 - 150 * xi ** 7 * eta - 420 * xi ** 6 * eta ** 2
                       - 722 * xi ** 5 * eta ** 3 - 822 * xi ** 4 * eta ** 4
                       - 620 * xi ** 3 * eta ** 5 - 293 * xi ** 2 * eta ** 6
                       - 76 * xi * eta ** 7 - 8 * eta ** 8)
    if tag == "Ca":
        return -1j * (5 * xi ** 5 + 15 * xi ** 4 * eta + 16 * xi ** 3 * eta ** 2
                      + 3 * xi ** 2 * eta ** 3 - 7 * xi * eta ** 4 - 4 * eta ** 5)
    if tag == "Da":
        return -0.5j * (25 * xi ** 8 + 125 * xi ** 7 * eta + 320 * xi ** 6 * eta ** 2
                        + 542 * xi ** 5 * eta ** 3 + 662 * xi ** 4 * eta ** 4
                        + 580 * xi ** 3 * eta ** 5 + 345 * xi ** 2 * eta ** 6
                        + 125 * xi * eta ** 7 + 20 * eta ** 8)
    raise KeyError(tag)


def symbol_eval_flagged(tag: str, xi: float, eta: float) -> SymbolValue:
    """Published rational symbol at (xi, eta); 0 with a flag when the
    denominator degenerates relative to the term scale."""
    if tag not in TAGS:
        raise KeyError(f"unknown symbol tag {tag!r}")
    scale = max(1.0, abs(xi) + abs(eta)) ** 6
    if tag in H_TAGS:
        den = _den_h(xi, eta)
    else:
        den = xi * _den_a_core(xi, eta)
    if abs(den) < 1e-14 * scale:
        return SymbolValue(0.0 + 0.0j, True)
    return SymbolValue(complex(_num(tag, xi, eta)) / den, False)


def symbol_eval(tag: str, xi: float, eta: float) -> complex:
    return symbol_eval_flagged(tag, xi, eta).value


@lru_cache(maxsize=200000)
def solved_mixed_coefficients(xi: float, eta: float):
    """Exact cancellation coefficients for the mixed (holomorphic x
    conjugate) quadratic monomials at output frequency zeta = xi - eta.

    Arguments are the holomorphic input frequency xi < 0 and the
    pre-conjugation frequency eta < 0 of the conjugated input.  Returns a
    dict over A_TAGS, or None at an exactly resonant/degenerate pair.
    """
    if xi == 0.0 or eta == 0.0 or xi == eta:
        return None
    z = xi - eta
    M = np.array([
        [0, -1j * xi, -1j * eta ** 4, 1j * z],
        [1j * z, 1j * eta, 1j * xi ** 4, 0],
        [-1j * xi, 0, -1j * z ** 4, 1j * eta],
        [-1j * eta ** 4, -1j * z ** 4, 0, 1j * xi ** 4],
    ], dtype=complex)
    b = -np.array([
        xi * eta,
        -xi * eta,
        -xi * eta,
        -xi * eta * (1.5 * (xi ** 3 + eta ** 3) - xi * eta * (xi + eta)),
    ], dtype=complex)
    try:
        sol = np.linalg.solve(M, b)
    except np.linalg.LinAlgError:
        return None
    return {"Aa": sol[0], "Ba": sol[1], "Ca": sol[2], "Da": sol[3]}


def _coef(tag: str, xi: float, eta_slot: float, symbols: str) -> complex:
    """Coefficient multiplying f(xi) * g(eta_slot); for mixed tags eta_slot is
    the actual (positive) frequency of the conjugated input."""
    if tag in H_TAGS or symbols == "displayed":
        return symbol_eval(tag, xi, eta_slot)
    if symbols != "solved":
        raise ValueError(f"unknown symbol family {symbols!r}")
    table = solved_mixed_coefficients(xi, -eta_slot)
    if table is None:
        return 0.0
    return table[tag]


def apply_bilinear(tag: str, f: SpectralField, g: SpectralField,
                   *, symbols: str = "solved") -> SpectralField:
    """Direct double-sum bilinear form: output mode zeta accumulates
    coef(xi, eta) * f_hat(xi) * g_hat(eta) over xi + eta = zeta.

    For the mixed tags (Aa, Ba, Ca, Da) the second input is expected to be an
    already-conjugated field (content on positive frequencies)."""
    if f.grid != g.grid:
        raise GridMismatchError("bilinear inputs on different grids")
    n = f.grid.n_modes
    j = f.grid.mode_indices.astype(int)
    kap = f.grid.wavenumbers
    out = np.zeros(n, dtype=complex)
    fi = np.nonzero(np.abs(f.coeffs) > 0)[0]
    gi = np.nonzero(np.abs(g.coeffs) > 0)[0]
    flags = set()
    for a in fi:
        xi = kap[a]
        ja = j[a]
        fa = f.coeffs[a]
        for b in gi:
            jo = ja + j[b]
            if jo < -n // 2 or jo > n // 2 - 1:
                continue
            c = _coef(tag, xi, kap[b], symbols)
            if c == 0.0:
                flags.add("degenerate_pair_dropped")
                continue
            out[jo % n] += c * fa * g.coeffs[b]
    return SpectralField(f.grid, out, f.flags | g.flags | frozenset(flags))


def quadratic_corrections(W: SpectralField, Q: SpectralField,
                          *, symbols: str = "solved"):
    """Near-identity quadratic corrections (W2, Q2) assembled from the seven
    bilinear forms."""
    cW, cQ = W.conj(), Q.conj()
    W2 = (apply_bilinear("Bh", W, W, symbols=symbols)
          + apply_bilinear("Ch", Q, Q, symbols=symbols)
          + apply_bilinear("Ba", W, cW, symbols=symbols)
          + apply_bilinear("Ca", Q, cQ, symbols=symbols))
    Q2 = (apply_bilinear("Ah", W, Q, symbols=symbols)
          + apply_bilinear("Aa", W, cQ, symbols=symbols)
          + apply_bilinear("Da", Q, cW, symbols=symbols))
    return W2, Q2


def _bilinear_ddt(tag, f, g, fdot, gdot, symbols):
    return (apply_bilinear(tag, fdot, g, symbols=symbols)
            + apply_bilinear(tag, f, gdot, symbols=symbols))


def quadratic_corrections_ddt(W, Q, Wdot, Qdot, *, symbols: str = "solved"):
    """Chain-rule time derivative of quadratic_corrections."""
    cW, cQ = W.conj(), Q.conj()
    cWd, cQd = Wdot.conj(), Qdot.conj()
    W2d = (_bilinear_ddt("Bh", W, W, Wdot, Wdot, symbols)
           + _bilinear_ddt("Ch", Q, Q, Qdot, Qdot, symbols)
           + apply_bilinear("Ba", Wdot, cW, symbols=symbols)
           + apply_bilinear("Ba", W, cWd, symbols=symbols)
           + apply_bilinear("Ca", Qdot, cQ, symbols=symbols)
           + apply_bilinear("Ca", Q, cQd, symbols=symbols))
    Q2d = (_bilinear_ddt("Ah", W, Q, Wdot, Qdot, symbols)
           + apply_bilinear("Aa", Wdot, cQ, symbols=symbols)
           + apply_bilinear("Aa", W, cQd, symbols=symbols)
           + apply_bilinear("Da", Qdot, cW, symbols=symbols)
           + apply_bilinear("Da", Q, cWd, symbols=symbols))
    return W2d, Q2d


# ---------------------------------------------------------------------------
# resonant cubic terms
# ---------------------------------------------------------------------------

def _inv_dal2(f: SpectralField) -> SpectralField:
    """Multiplier (i kappa)^{-2} with the zero mode dropped (flagged)."""
    kap = f.grid.wavenumbers
    c = f.coeffs.copy()
    flags = ("zero_mode_dropped",) if abs(c[0]) > 0 else ()
    c[0] = 0.0
    nz = kap != 0
    c[nz] = c[nz] / (1j * kap[nz]) ** 2
    return f.with_coeffs(c, *flags)


def cubic_resonant(W: SpectralField, Q: SpectralField):
    """Resonant cubic source terms (G3r, K3r), transcribed verbatim."""
    Wa = derivative(W)
    Waa = derivative(W, 2)
    Waaa = derivative(W, 3)
    W4 = derivative(W, 4)
    Qa = derivative(Q)
    cW_a = Wa.conj()
    cW_aa = Waa.conj()
    cW_4 = W4.conj()
    cQ = Q.conj()
    cQ_a = Qa.conj()

    def prod(*fs):
        out = fs[0]
        for h in fs[1:]:
            out = dealiased_product(out, h)
        return out

    G3r = (-1j / 128.0) * _inv_dal2(
        prod(Qa, Qa, cQ) + 2.5j * prod(Wa, W4, cQ) + 5j * prod(Waa, Waaa, cQ))
    K3r = ((-49.0 / 32.0) * prod(cW_a, Qa, Qa) + prod(Wa, Qa, cQ_a)
           - 1j * ((133.0 / 64.0) * prod(Wa, cW_a, W4)
                   + (5.0 / 32.0) * prod(cW_a, Waa, Waaa)
                   + (15.0 / 8.0) * prod(Wa, Wa, cW_4)))
    return G3r, K3r


def resonant_combination(W: SpectralField, Q: SpectralField):
    """(i/2)|D|^{3/2} G3r - (i/2) K3r: the source of the minus-branch
    diagonal variable."""
    G3r, K3r = cubic_resonant(W, Q)
    return 0.5j * fractional_derivative(G3r, 1.5) - 0.5j * K3r


# ---------------------------------------------------------------------------
# approximate solutions
# ---------------------------------------------------------------------------

@dataclass
class ApproxSolution:
    eps: float
    Ytil: SpectralField
    Wtt: SpectralField
    Qtt: SpectralField
    We: SpectralField
    Qe: SpectralField
    closeness_tt: float      # L2 distance of (Wtt, Qtt) to (Y, -Y)
    closeness_full: float    # L2 distance of (We, Qe) to (Y, -Y)
    symbols: str = "solved"


def _cube(Y: SpectralField) -> SpectralField:
    return dealiased_product(dealiased_product(Y, Y), Y.conj())


def _cube_ddt(Y: SpectralField, Ydot: SpectralField) -> SpectralField:
    return (2.0 * dealiased_product(dealiased_product(Y, Ydot), Y.conj())
            + dealiased_product(dealiased_product(Y, Y), Ydot.conj()))


def _invert_corrections(Wtt, Qtt, W2, Q2, symbols):
    We = (Wtt - W2
          - apply_bilinear("Bh", W2, Wtt, symbols=symbols)
          - apply_bilinear("Bh", Wtt, W2, symbols=symbols)
          - apply_bilinear("Ch", Q2, Qtt, symbols=symbols)
          - apply_bilinear("Ch", Qtt, Q2, symbols=symbols)
          - apply_bilinear("Ba", W2, Wtt.conj(), symbols=symbols)
          - apply_bilinear("Ba", Wtt, W2.conj(), symbols=symbols)
          - apply_bilinear("Ca", Q2, Qtt.conj(), symbols=symbols)
          - apply_bilinear("Ca", Qtt, Q2.conj(), symbols=symbols))
    Qe = (Qtt - Q2
          - apply_bilinear("Ah", W2, Qtt, symbols=symbols)
          - apply_bilinear("Ah", Wtt, Q2, symbols=symbols)
          - apply_bilinear("Aa", W2, Qtt.conj(), symbols=symbols)
          - apply_bilinear("Aa", Wtt, Q2.conj(), symbols=symbols)
          - apply_bilinear("Da", Q2, Wtt.conj(), symbols=symbols)
          - apply_bilinear("Da", Qtt, W2.conj(), symbols=symbols))
    return We, Qe


def build_approx_solution(Ytil: SpectralField, eps: float, *,
                          symbols: str = "solved",
                          cubic_correction: Callable | None = None) -> ApproxSolution:
    """Construct the frequency-localized approximate wave pair from a
    truncated envelope profile on the carrier grid.

    Intermediate pair: Wtt = |D|^{-3/2}(Y - c+ Y|Y|^2), Qtt = -Y - c+ Y|Y|^2
    with c+ = 31/1024; the final pair inverts the quadratic corrections
    through cubic order.  `cubic_correction(Wtt, Qtt) -> (W3, Q3)` plugs in
    third-order corrections when available (omitted by default)."""
    cube = _cube(Ytil)
    inner = Ytil - YPLUS_CUBIC_COEF * cube
    Wtt = fractional_derivative(inner, -1.5, tol_holo=np.inf)
    Qtt = -1.0 * Ytil - YPLUS_CUBIC_COEF * cube
    W2, Q2 = quadratic_corrections(Wtt, Qtt, symbols=symbols)
    We, Qe = _invert_corrections(Wtt, Qtt, W2, Q2, symbols)
    if cubic_correction is not None:
        W3, Q3 = cubic_correction(Wtt, Qtt)
        We = We - W3
        Qe = Qe - Q3
    c_tt = sobolev_norm(Wtt - Ytil, 0.0) + sobolev_norm(Qtt + Ytil, 0.0)
    c_full = sobolev_norm(We - Ytil, 0.0) + sobolev_norm(Qe + Ytil, 0.0)
    return ApproxSolution(eps, Ytil, Wtt, Qtt, We, Qe, c_tt, c_full, symbols)


def envelope_time_derivative(Ytil: SpectralField, lam: float) -> SpectralField:
    """d/dt of the truncated envelope under (i d_t + w0(D)) Y = lam Y|Y|^2."""
    kap = Ytil.grid.wavenumbers
    lin = Ytil.with_coeffs(1j * omega0(kap) * Ytil.coeffs)
    return lin - 1j * lam * _cube(Ytil)


def residual_in_full_system(approx: ApproxSolution, *,
                            lam: float = RESONANT_CUBIC_COEF,
                            Ytil_dt: SpectralField | None = None):
    """Insert (We, Qe) into the expanded system through cubic order and
    measure the leftover in the energy pairing H^{3/2} x L^2.

    Returns (g_norm, k_norm).  The envelope time derivative defaults to the
    truncated cubic envelope equation with coefficient `lam`."""
    Y = approx.Ytil
    symbols = approx.symbols
    Ydot = Ytil_dt if Ytil_dt is not None else envelope_time_derivative(Y, lam)
    cube_dot = _cube_ddt(Y, Ydot)
    inner_dot = Ydot - YPLUS_CUBIC_COEF * cube_dot
    Wtt_dot = fractional_derivative(inner_dot, -1.5, tol_holo=np.inf)
    Qtt_dot = -1.0 * Ydot - YPLUS_CUBIC_COEF * cube_dot

    Wtt, Qtt = approx.Wtt, approx.Qtt
    W2, Q2 = quadratic_corrections(Wtt, Qtt, symbols=symbols)
    W2d, Q2d = quadratic_corrections_ddt(Wtt, Qtt, Wtt_dot, Qtt_dot, symbols=symbols)

    def ddt_pair(tag, f, g, fd, gd, conj_second=False):
        if conj_second:
            return (apply_bilinear(tag, fd, g.conj(), symbols=symbols)
                    + apply_bilinear(tag, f, gd.conj(), symbols=symbols))
        return (apply_bilinear(tag, fd, g, symbols=symbols)
                + apply_bilinear(tag, f, gd, symbols=symbols))

    We_dot = (Wtt_dot - W2d
              - ddt_pair("Bh", W2, Wtt, W2d, Wtt_dot)
              - ddt_pair("Bh", Wtt, W2, Wtt_dot, W2d)
              - ddt_pair("Ch", Q2, Qtt, Q2d, Qtt_dot)
              - ddt_pair("Ch", Qtt, Q2, Qtt_dot, Q2d)
              - ddt_pair("Ba", W2, Wtt, W2d, Wtt_dot, True)
              - ddt_pair("Ba", Wtt, W2, Wtt_dot, W2d, True)
              - ddt_pair("Ca", Q2, Qtt, Q2d, Qtt_dot, True)
              - ddt_pair("Ca", Qtt, Q2, Qtt_dot, Q2d, True))
    Qe_dot = (Qtt_dot - Q2d
              - ddt_pair("Ah", W2, Qtt, W2d, Qtt_dot)
              - ddt_pair("Ah", Wtt, Q2, Wtt_dot, Q2d)
              - ddt_pair("Aa", W2, Qtt, W2d, Qtt_dot, True)
              - ddt_pair("Aa", Wtt, Q2, Wtt_dot, Q2d, True)
              - ddt_pair("Da", Q2, Wtt, Q2d, Wtt_dot, True)
              - ddt_pair("Da", Qtt, W2, Qtt_dot, W2d, True))

    state = WaveState(0.0, project_holomorphic(approx.We),
                      project_holomorphic(approx.Qe), 1.0)
    G2f, K2f = expand_nonlinearity(state, 2)
    G3f, K3f = expand_nonlinearity(state, 3)
    g = We_dot + derivative(approx.Qe) - G2f - G3f
    k = Qe_dot - 1j * derivative(approx.We, 4) - K2f - K3f
    return sobolev_norm(g, 1.5), sobolev_norm(k, 0.0)
