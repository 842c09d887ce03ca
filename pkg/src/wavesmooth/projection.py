"""Deterministic oracle for the detail projection Q_j f.

Detail coefficients of a piecewise-polynomial density are computed in
closed form: within a polynomial piece only moments of psi survive (all
of which vanish up to the filter's oscillation order), and every
breakpoint contributes tail moments of psi evaluated at its grid-mapped
position.  Both ingredients come from the wavelet system's exact moment
recursion and its tail-moment tables, so coefficient values do not
depend on a quadrature step.  Variance functionals (the conditional
variance, the full kernel second moment, third moments) integrate the
evaluated projection against the density on a fine dyadic grid.

A direct table-grid quadrature of f * psi_jk is kept alongside as an
independent slow route for cross-checking the closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P

from .densities import PiecewisePolyDensity
from .errors import ConfigurationError, NumericDegeneracyError
from .wavelet import WaveletSystem

_QUAD_LEVEL = 10   # spacing 2^-(j+_QUAD_LEVEL) for integrals against f
_BAND_LEVEL = 8    # spacing 2^-(j+_BAND_LEVEL) for the kernel band sums


@dataclass(frozen=True)
class CoefficientVector:
    """beta_{jk} = <psi_jk, f> for the finitely many k that can be
    nonzero, stored densely over [k_min, k_min + len - 1]."""

    j: int
    k_min: int
    values: np.ndarray

    @property
    def k_max(self) -> int:
        return self.k_min + self.values.size - 1

    def entries(self) -> dict:
        return {self.k_min + i: float(v)
                for i, v in enumerate(self.values) if v != 0.0}

    def energy(self) -> float:
        """||Q_j f||_2^2, exact by orthonormality."""
        return float(np.dot(self.values, self.values))


def _k_range(density: PiecewisePolyDensity, ws: WaveletSystem, j: int):
    lo, hi = density.support
    s = ws.support_len
    k_min = int(math.floor(np.ldexp(lo, j) - s)) + 1
    k_max = int(math.ceil(np.ldexp(hi, j))) - 1
    return k_min, k_max


def coefficients(density: PiecewisePolyDensity, ws: WaveletSystem,
                 j: int) -> CoefficientVector:
    """Closed-form detail coefficients at level j."""
    if j < 0:
        raise ConfigurationError(f"resolution level must be >= 0, got {j}")
    k_min, k_max = _k_range(density, ws, j)
    ks = np.arange(k_min, k_max + 1)
    betas = np.zeros(ks.size)
    s = ws.support_len
    scale = 2.0 ** (-j / 2.0)
    breaks = np.asarray(density.breakpoints)
    x_k = ks / np.ldexp(1.0, j)

    # Polynomial part: the piece holding the left endpoint of each
    # support window; only moments beyond the oscillation order survive.
    n_mom = ws.psi_moments
    d = ws.vanishing_moments
    piece_idx = density.piece_index(x_k)
    inside = (x_k >= breaks[0]) & (x_k < breaks[-1])
    for i, c in enumerate(density.pieces):
        deg = len(c) - 1
        if deg <= d:
            continue
        sel = inside & (piece_idx == i)
        if not np.any(sel):
            continue
        coeff = np.asarray(c, dtype=np.float64)
        xs = x_k[sel]
        acc = np.zeros(xs.size)
        der = coeff
        fact = 1.0
        for q in range(deg + 1):
            if q > d and n_mom[q] != 0.0:
                acc += (P.polyval(xs, der) / fact) * (2.0 ** (-j * q)) * n_mom[q]
            der = P.polyder(der)
            fact *= q + 1
        betas[sel] += acc

    # Breakpoint part: each derivative jump contributes a tail moment of
    # psi at the breakpoint's position inside the support window.
    jumps = density.derivative_jumps()
    tail_tab = ws._tail_psi_int
    for b, jp in jumps.items():
        tb_real = np.ldexp(b, j) - ks
        sel = (tb_real > 0.0) & (tb_real < s)
        if not np.any(sel):
            continue
        tb = tb_real[sel]
        tb_int = np.rint(tb)
        on_grid = np.max(np.abs(tb - tb_int)) < 1e-9
        acc = np.zeros(tb.size)
        fact = 1.0
        for q in range(jp.size):
            if jp[q] != 0.0:
                if on_grid and q < tail_tab.shape[0]:
                    tails = tail_tab[q, tb_int.astype(np.int64)]
                else:
                    tails = np.array([ws.tail_psi(q, t) for t in tb])
                acc += (jp[q] / fact) * (2.0 ** (-j * q)) * tails
            fact *= q + 1
        betas[sel] += acc

    return CoefficientVector(j, k_min, betas * scale)


def coefficients_quadrature(density: PiecewisePolyDensity, ws: WaveletSystem,
                            j: int) -> CoefficientVector:
    """Slow independent route: composite left-rectangle quadrature of
    f * psi_jk on the psi table grid (right-continuous f gives exact
    piece attribution at on-grid breakpoints)."""
    k_min, k_max = _k_range(density, ws, j)
    t = ws.table.grid[:-1]
    psi = ws.table.psi_values[:-1]
    h = ws.table.spacing
    out = np.zeros(k_max - k_min + 1)
    for i, k in enumerate(range(k_min, k_max + 1)):
        x = (t + k) / np.ldexp(1.0, j)
        out[i] = h * float(np.dot(psi, density.pdf(x)))
    return CoefficientVector(j, k_min, out * 2.0 ** (-j / 2.0))


def qj_eval(coeffs: CoefficientVector, ws: WaveletSystem, x) -> np.ndarray:
    """Q_j f(x) = sum_k beta_jk psi_jk(x)."""
    x = np.asarray(x, dtype=np.float64)
    j = coeffs.j
    t = np.ldexp(x, j)
    base = np.floor(t).astype(np.int64)
    out = np.zeros_like(x, dtype=np.float64)
    s = ws.support_len
    for o in range(s):
        k = base - o
        idx = k - coeffs.k_min
        ok = (idx >= 0) & (idx < coeffs.values.size)
        if np.any(ok):
            out[ok] += coeffs.values[idx[ok]] * ws.psi_at(t[ok] - k[ok])
    return out * 2.0 ** (j / 2.0)


def qj_norm(coeffs: CoefficientVector, ws: WaveletSystem, p: float = 2.0,
            grid_level: int = _QUAD_LEVEL) -> float:
    """L^p norm of Q_j f; p = 2 uses the exact coefficient norm, other
    p >= 1 a fine-grid left-rectangle quadrature (oracle grade)."""
    if p < 1.0:
        raise ConfigurationError(f"norm order must be >= 1, got {p}")
    if p == 2.0:
        return math.sqrt(coeffs.energy())
    j = coeffs.j
    lo = coeffs.k_min * 2.0 ** (-j)
    hi = (coeffs.k_max + ws.support_len) * 2.0 ** (-j)
    step = 2.0 ** (-(j + grid_level))
    acc = 0.0
    for x0 in np.arange(lo, hi, 2.0 ** 7):
        x = np.arange(x0, min(x0 + 2.0 ** 7, hi), step)
        acc += step * float(np.sum(np.abs(qj_eval(coeffs, ws, x)) ** p))
    return acc ** (1.0 / p)


def _against_density(density: PiecewisePolyDensity, ws: WaveletSystem,
                     coeffs: CoefficientVector, func,
                     grid_level: int = _QUAD_LEVEL) -> float:
    """Left-rectangle integral of func(Q_j f(x)) * f(x) dx over supp f,
    chunked per density piece so jumps never straddle a cell."""
    j = coeffs.j
    step = 2.0 ** (-(j + grid_level))
    total = 0.0
    b = density.breakpoints
    for i, c in enumerate(density.pieces):
        n_cells = int(round((b[i + 1] - b[i]) / step))
        coeff = np.asarray(c)
        for start in range(0, n_cells, 1 << 21):
            stop = min(start + (1 << 21), n_cells)
            x = b[i] + step * np.arange(start, stop)
            q = qj_eval(coeffs, ws, x)
            total += step * float(np.dot(func(q), P.polyval(x, coeff)))
    return total


@dataclass(frozen=True)
class VarianceTerms:
    """Variance functionals of the level-j detail kernel under f."""

    qj_energy: float        # ||Q_j f||_2^2
    delta_j: float          # integral (Q_j f)^2 f dx
    sigma_tilde_sq: float   # delta_j - qj_energy^2 (variance of Q_j f(X))
    sigma_sq: float         # Var of the off-diagonal kernel G_j(X1, X2)


def variance_terms(density: PiecewisePolyDensity, ws: WaveletSystem, j: int,
                   grid_level: int = _QUAD_LEVEL,
                   band_level: int = _BAND_LEVEL) -> VarianceTerms:
    coeffs = coefficients(density, ws, j)
    energy = coeffs.energy()
    delta = _against_density(density, ws, coeffs, np.square, grid_level)
    eg2 = _kernel_second_moment(density, ws, j, band_level)
    return VarianceTerms(
        qj_energy=energy,
        delta_j=delta,
        sigma_tilde_sq=delta - energy ** 2,
        sigma_sq=eg2 - energy ** 2,
    )


def _kernel_second_moment(density: PiecewisePolyDensity, ws: WaveletSystem,
                          j: int, band_level: int = _BAND_LEVEL) -> float:
    """E[G_j(X1,X2)^2] = sum over the band |k-k'| <= S of the squared
    f-weighted psi cross-products (the double quadrature factorizes)."""
    s = ws.support_len
    n_b = 1 << band_level
    h_t = 2.0 ** (-band_level)
    t = np.arange(s * n_b + 1) * h_t
    psi = ws.psi_at(t)
    lo, hi = density.support
    k_min = int(math.floor(np.ldexp(lo, j))) - s + 1
    k_max = int(math.ceil(np.ldexp(hi, j))) - 1
    n_k = k_max - k_min + 1
    xg = (np.arange(k_min * n_b, (k_max + s) * n_b + 1)) * (h_t / np.ldexp(1.0, j))
    fg = density.pdf(xg)
    win = np.lib.stride_tricks.sliding_window_view(fg, s * n_b + 1)[::n_b]
    assert win.shape[0] >= n_k
    win = win[:n_k]
    total = 0.0
    for o in range(s + 1):
        prod = psi * np.where(t - o >= 0.0, ws.psi_at(t - o), 0.0)
        a_o = (win[:, :-1] @ prod[:-1]) * h_t
        total += (1.0 if o == 0 else 2.0) * float(np.dot(a_o, a_o))
    return total * np.ldexp(1.0, j)


def third_abs_moment_g(density: PiecewisePolyDensity, ws: WaveletSystem,
                       j: int, grid_level: int = _QUAD_LEVEL) -> float:
    """E|g_j(X)|^3 with g_j(x) = Q_j f(x) - ||Q_j f||^2."""
    coeffs = coefficients(density, ws, j)
    energy = coeffs.energy()
    return _against_density(density, ws, coeffs,
                            lambda q: np.abs(q - energy) ** 3, grid_level)


def regularity_ratio(density: PiecewisePolyDensity, ws: WaveletSystem,
                     j: int, grid_level: int = _QUAD_LEVEL) -> float:
    """Best constant C at level j in C ||Q_j f||^2 <= int (Q_j f)^2 f."""
    coeffs = coefficients(density, ws, j)
    energy = coeffs.energy()
    if energy <= 0.0:
        raise NumericDegeneracyError(
            f"density {density.label!r} is invisible at level {j}: "
            "zero detail energy, regularity ratio undefined")
    delta = _against_density(density, ws, coeffs, np.square, grid_level)
    return delta / energy


def decay_row(density: PiecewisePolyDensity, ws: WaveletSystem, j: int,
              grid_level: int = _QUAD_LEVEL,
              band_level: int = _BAND_LEVEL) -> dict:
    """One row of the decay table exported by the CLI."""
    vt = variance_terms(density, ws, j, grid_level, band_level)
    norm2 = math.sqrt(vt.qj_energy)
    return {
        "j": j,
        "qj_norm_2": norm2,
        "r_j": (-math.log2(norm2) / j - 0.5) if norm2 > 0 else float("inf"),
        "delta_j": vt.delta_j,
        "sigma_sq": vt.sigma_sq,
        "sigma_tilde_sq": vt.sigma_tilde_sq,
        "regularity_ratio": (vt.delta_j / vt.qj_energy
                             if vt.qj_energy > 0 else float("nan")),
    }
