"""Compactly supported Daubechies wavelet systems.

Builds the order-N filter from an embedded coefficient table, evaluates
the scaling function phi and wavelet psi on a dyadic grid by the cascade
refinement, and derives every wavelet-dependent constant consumed by the
detail-energy formulas: the shift-sum bound Psi0, the sup bound Psi2,
the zero-free radius delta1 and the oscillation constant Psi1, the first
nonvanishing moment b, and the periodic jump-energy profile F_psi whose
extrema calibrate the resolution-dependent correction V_j.

Conventions: lowpass h_0..h_{2N-1} with sum(h) = sqrt(2); highpass
g_k = (-1)^k h_{2N-1-k}; supp psi = [0, S] with S = 2N-1.  All table
integrals use left-endpoint dyadic Riemann sums, which are exact for the
refinement construction (partition of unity makes the phi lattice sums
exact, and psi inherits this through the filter).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._daub_coeffs import DAUB_LOWPASS
from .errors import AssumptionViolation, ConfigurationError, InternalError

DEFAULT_TABLE_LEVEL = 14
_TAIL_MOMENT_MAX = 12  # covers polynomial pieces up to degree 12


@dataclass(frozen=True)
class DaubechiesFilter:
    """Orthonormal Daubechies filter pair of a given order."""

    order: int
    lowpass: np.ndarray
    highpass: np.ndarray

    @property
    def support_len(self) -> int:
        """S = 2N - 1, the length of supp psi = [0, S]."""
        return 2 * self.order - 1

    @property
    def vanishing_moments(self) -> int:
        """d = N - 1: integral of x^q psi vanishes for 0 <= q <= d."""
        return self.order - 1


def build_filter(order: int) -> DaubechiesFilter:
    """Look up the embedded filter for 1 <= order <= 20."""
    if not isinstance(order, (int, np.integer)) or not 1 <= order <= 20:
        raise ConfigurationError(
            f"wavelet order must be an integer in 1..20, got {order!r}")
    h = np.array(DAUB_LOWPASS[int(order)], dtype=np.float64)
    g = ((-1.0) ** np.arange(h.size)) * h[::-1]
    h.flags.writeable = False
    g.flags.writeable = False
    return DaubechiesFilter(int(order), h, g)


@dataclass(frozen=True)
class DyadicTable:
    """Values of phi and psi on the grid m/2^level over [0, S]."""

    order: int
    level: int
    phi_values: np.ndarray
    psi_values: np.ndarray

    @property
    def support_len(self) -> int:
        return 2 * self.order - 1

    @property
    def spacing(self) -> float:
        return 2.0 ** (-self.level)

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.phi_values.size) * self.spacing

    def integral(self, values: np.ndarray) -> float:
        """Left-endpoint dyadic Riemann sum over [0, S]."""
        return self.spacing * float(np.sum(values[:-1]))

    def phi_integral(self) -> float:
        return self.integral(self.phi_values)

    def psi_integral(self) -> float:
        return self.integral(self.psi_values)

    def psi_square_integral(self) -> float:
        return self.integral(self.psi_values ** 2)

    def psi_moment(self, q: int) -> float:
        return self.integral(self.grid ** q * self.psi_values)


def _phi_at_integers(filt: DaubechiesFilter) -> np.ndarray:
    """phi(0..S) via the eigenvalue-1 eigenvector of the refinement
    matrix, normalized to the partition of unity sum(phi(k)) = 1."""
    s = filt.support_len
    h = filt.lowpass
    m = np.zeros((s - 1, s - 1))
    for a in range(1, s):
        for b in range(1, s):
            idx = 2 * a - b
            if 0 <= idx < h.size:
                m[a - 1, b - 1] = math.sqrt(2.0) * h[idx]
    vals, vecs = np.linalg.eig(m)
    i = int(np.argmin(np.abs(vals - 1.0)))
    if abs(vals[i] - 1.0) > 1e-8:
        raise InternalError(
            f"refinement matrix for order {filt.order} has no eigenvalue 1 "
            f"(closest: {vals[i]!r})")
    v = np.real(vecs[:, i])
    v = v / v.sum()
    out = np.zeros(s + 1)
    out[1:s] = v
    return out


def cascade(filt: DaubechiesFilter, level: int) -> DyadicTable:
    """Evaluate phi and psi on the dyadic grid of spacing 2^-level.

    Even grid points are copied from the coarser level; odd points come
    from the two-scale relation, so every entry is an exact value of the
    underlying function (up to float64 roundoff).
    """
    if level < 1:
        raise ConfigurationError(f"table level must be >= 1, got {level}")
    s = filt.support_len
    h = filt.lowpass
    g = filt.highpass
    rt2 = math.sqrt(2.0)

    if filt.order == 1:
        n = 1 << level
        phi = np.ones(n + 1)
        phi[-1] = 0.0
        psi = np.ones(n + 1)
        psi[n // 2:] = -1.0
        psi[-1] = 0.0
        return DyadicTable(1, level, phi, psi)

    prev = _phi_at_integers(filt)
    for j in range(1, level + 1):
        half = 1 << (j - 1)
        cur = np.zeros(s * (1 << j) + 1)
        cur[::2] = prev
        odd = np.arange(1, cur.size, 2)
        acc = np.zeros(odd.size)
        for k in range(h.size):
            src = odd - k * half
            ok = (src >= 0) & (src < prev.size)
            acc[ok] += rt2 * h[k] * prev[src[ok]]
        cur[1::2] = acc
        prev = cur
    phi = prev

    # psi on the level-J grid from phi on the level-(J-1) grid.
    coarse = phi[::2]
    psi = np.zeros_like(phi)
    idx = np.arange(phi.size)
    half = 1 << (level - 1)
    for k in range(g.size):
        src = idx - k * half
        ok = (src >= 0) & (src < coarse.size)
        psi[ok] += rt2 * g[k] * coarse[src[ok]]
    return DyadicTable(filt.order, level, phi, psi)


def _interp(values: np.ndarray, level: int, t: np.ndarray) -> np.ndarray:
    """Linear interpolation on the dyadic table; 0 outside [0, S]."""
    t = np.asarray(t, dtype=np.float64)
    tmax = (values.size - 1) * 2.0 ** (-level)
    pos = t * (1 << level)
    inside = (t >= 0.0) & (t <= tmax)
    pos = np.clip(pos, 0.0, values.size - 1.0)
    i0 = np.minimum(pos.astype(np.int64), values.size - 2)
    frac = pos - i0
    out = values[i0] * (1.0 - frac) + values[i0 + 1] * frac
    return np.where(inside, out, 0.0)


@dataclass(frozen=True)
class FPsiProfile:
    """Samples of the periodic profile F(u) = sum_k (tail integral of
    psi past u+k)^2 on [0, 1), with its grid extrema.

    For a density with a unit jump at a, the level-j detail energy of
    the jump part is 2^-j * F({2^j a}); inf F and sup F therefore bracket
    the energy constant of any zeroth-order defect.
    """

    u: np.ndarray
    values: np.ndarray
    inf: float
    sup: float

    def at(self, u) -> np.ndarray:
        frac = np.mod(np.asarray(u, dtype=np.float64), 1.0)
        return np.interp(frac, np.append(self.u, 1.0),
                         np.append(self.values, self.values[0]))


def compute_f_psi(table: DyadicTable, grid_points: int = 4096):
    """Compute the jump-energy profile from the cumulative psi integral.

    Returns (profile, f_psi_inf, f_psi_sup); the extrema are taken over
    the full table grid regardless of the sample count requested.
    """
    if grid_points < 256:
        raise ConfigurationError("f_psi grid_points must be >= 256")
    n = 1 << table.level
    s = table.support_len
    h = table.spacing
    # T[m] = integral of psi over [m h, S]; equals -cumulative since
    # the total integral vanishes.
    cum = np.concatenate(([0.0], np.cumsum(table.psi_values[:-1]) * h))
    tails = -cum
    full = (tails[: s * n] ** 2).reshape(s, n).sum(axis=0)
    f_inf = float(full.min())
    f_sup = float(full.max())
    step = max(1, n // grid_points)
    prof = FPsiProfile(np.arange(0, n, step) / n, full[::step], f_inf, f_sup)
    return prof, f_inf, f_sup


def v_correction(j: int, f_psi_inf: float) -> float:
    """Resolution-dependent stand-in sqrt(f_psi_inf + 1/j) for Psi1 in
    zeroth-order tests; decreases to sqrt(inf F) as j grows."""
    if j < 1:
        raise ConfigurationError(f"resolution level must be >= 1, got {j}")
    return math.sqrt(f_psi_inf + 1.0 / j)


@dataclass(frozen=True)
class WaveletConstants:
    psi0: float
    psi2: float
    delta1: float
    psi1: float
    f_psi_inf: float
    f_psi_sup: float
    moment_b: float


def compute_constants(table: DyadicTable, filt: DaubechiesFilter) -> WaveletConstants:
    """Derive all scalar constants from the dyadic table.

    Refuses wavelets whose table shows a sign change in (0, 1]: the
    zero-free-interval assumption behind Psi1 then fails (Haar does).
    """
    if table.level < 10:
        raise ConfigurationError(
            f"constants need a table level >= 10, got {table.level}")
    s = filt.support_len
    n = 1 << table.level
    h = table.spacing
    psi = table.psi_values

    if filt.order == 1:
        raise AssumptionViolation(
            "order-1 (Haar) wavelet is discontinuous and vanishes on no "
            "interval (0, 1+delta1]; the oscillation constant Psi1 is "
            "undefined for it — use order >= 2")

    prod = psi[:-1] * psi[1:]
    # Zero-free check on (0, 1]: no sign change among grid cells there.
    if np.any(prod[1:n] <= 0.0):
        raise AssumptionViolation(
            f"order-{filt.order} wavelet table has a zero crossing inside "
            "(0, 1]; the zero-free-interval assumption fails")
    cross = np.nonzero(prod[n:] <= 0.0)[0]
    if cross.size == 0:
        delta1 = 1.0 - h
    else:
        delta1 = min((n + cross[0]) * h - 1.0 - h, 1.0 - h)
    if delta1 <= 0.0:
        raise AssumptionViolation(
            f"order-{filt.order} wavelet vanishes immediately past 1; "
            "zero-free radius is degenerate")

    m_d1 = int(round(delta1 / h))
    grid_d1 = np.arange(m_d1 + 1) * h
    psi1 = min(
        abs(h * float(np.sum((delta1 - grid_d1[:-1]) ** q * psi[:m_d1])))
        for q in range(filt.vanishing_moments + 1)
    )

    abs_psi = np.abs(psi[: s * n]).reshape(s, n).sum(axis=0)
    psi0 = float(abs_psi.max())
    psi2 = float(np.abs(psi).max())

    _, f_inf, f_sup = compute_f_psi(table)
    grid = table.grid
    b = table.integral(grid ** (filt.vanishing_moments + 1) * psi)
    return WaveletConstants(psi0, psi2, delta1, psi1, f_inf, f_sup, b)


def _filter_moment(coeffs: np.ndarray, s: int) -> float:
    k = np.arange(coeffs.size, dtype=np.float64)
    return float(np.sum(coeffs * k ** s)) / math.sqrt(2.0)


class WaveletSystem:
    """Immutable bundle of filter, dyadic table, derived constants and
    the exact-moment machinery used by the projection oracle.

    Safe for concurrent use: everything is computed at construction.
    """

    def __init__(self, filt: DaubechiesFilter, table: DyadicTable):
        if filt.order != table.order:
            raise InternalError("filter/table order mismatch")
        self.filter = filt
        self.table = table
        self._constants = None
        self._constants_error = None
        try:
            self._constants = compute_constants(table, filt)
        except AssumptionViolation as exc:
            self._constants_error = exc
        self.f_psi, self.f_psi_inf, self.f_psi_sup = compute_f_psi(table)
        qmax = max(_TAIL_MOMENT_MAX, filt.vanishing_moments + 2)
        self.phi_moments = self._exact_moments(filt.lowpass, qmax)
        self.psi_moments = self._exact_psi_moments(qmax)
        self._tail_psi_int = self._tail_table(table.psi_values, qmax)
        self._tail_phi_int = self._tail_table(table.phi_values, qmax)

    # -- construction ---------------------------------------------------

    @classmethod
    def build(cls, order: int, level: int = DEFAULT_TABLE_LEVEL,
              cache_dir: str | Path | None = None) -> "WaveletSystem":
        filt = build_filter(order)
        if cache_dir is not None:
            path = table_cache_path(cache_dir, order, level)
            if path.exists():
                return cls(filt, load_table(path))
            table = cascade(filt, level)
            dump_table(table, path)
            return cls(filt, table)
        return cls(filt, cascade(filt, level))

    # -- basic queries ---------------------------------------------------

    @property
    def order(self) -> int:
        return self.filter.order

    @property
    def support_len(self) -> int:
        return self.filter.support_len

    @property
    def vanishing_moments(self) -> int:
        return self.filter.vanishing_moments

    @property
    def constants(self) -> WaveletConstants:
        if self._constants is None:
            raise self._constants_error
        return self._constants

    def v_correction(self, j: int) -> float:
        return v_correction(j, self.f_psi_inf)

    # -- point evaluation --------------------------------------------------

    def psi_at(self, t) -> np.ndarray:
        """psi(t) by linear interpolation; exactly 0 outside [0, S]."""
        return _interp(self.table.psi_values, self.table.level, t)

    def phi_at(self, t) -> np.ndarray:
        return _interp(self.table.phi_values, self.table.level, t)

    def eval_psi_jk(self, j: int, k: int, x) -> np.ndarray:
        """2^{j/2} psi(2^j x - k)."""
        x = np.asarray(x, dtype=np.float64)
        return 2.0 ** (j / 2.0) * self.psi_at(np.ldexp(x, j) - k)

    # -- exact moments ----------------------------------------------------

    def _exact_moments(self, lowpass: np.ndarray, qmax: int) -> np.ndarray:
        """m_q = integral x^q phi(x) dx via the two-scale recursion."""
        mu = [_filter_moment(lowpass, s) for s in range(qmax + 1)]
        m = np.zeros(qmax + 1)
        m[0] = 1.0
        for q in range(1, qmax + 1):
            acc = sum(math.comb(q, l) * m[l] * mu[q - l] for l in range(q))
            m[q] = acc / (2.0 ** q - 1.0)
        return m

    def _exact_psi_moments(self, qmax: int) -> np.ndarray:
        """n_q = integral x^q psi(x) dx; vanishes for q <= N-1."""
        nu = [_filter_moment(self.filter.highpass, s) for s in range(qmax + 1)]
        m = self.phi_moments
        n = np.zeros(qmax + 1)
        for q in range(qmax + 1):
            n[q] = 2.0 ** (-q) * sum(
                math.comb(q, l) * m[l] * nu[q - l] for l in range(q + 1))
        n[: self.filter.vanishing_moments + 1] = 0.0
        return n

    def _tail_table(self, values: np.ndarray, qmax: int) -> np.ndarray:
        """T[q, i] = integral over [i, S] of (t - i)^q * values(t) dt
        for integer i, by left-rectangle sums on the table."""
        s = self.support_len
        n = 1 << self.table.level
        h = self.table.spacing
        grid = self.table.grid
        out = np.zeros((qmax + 1, s + 1))
        for i in range(s):
            sl = values[i * n: -1]
            t = grid[i * n: -1] - i
            for q in range(qmax + 1):
                out[q, i] = h * float(np.sum(t ** q * sl))
        return out

    def tail_psi(self, q: int, t: float) -> float:
        """Integral over [t, S] of (s - t)^q psi(s) ds."""
        return self._tail(self.table.psi_values, self._tail_psi_int, q, t)

    def tail_phi(self, q: int, t: float) -> float:
        return self._tail(self.table.phi_values, self._tail_phi_int, q, t)

    def _tail(self, values: np.ndarray, cache: np.ndarray,
              q: int, t: float) -> float:
        s = self.support_len
        if t >= s:
            return 0.0
        ti = int(round(t))
        if abs(t - ti) < 1e-12 and 0 <= ti <= s and q < cache.shape[0]:
            return float(cache[q, ti])
        # general case (negative, fractional, or high-degree offset):
        # direct table sum; values vanish off [0, S] so clipping at 0 is exact
        h = self.table.spacing
        grid = self.table.grid
        lo = max(0, int(math.ceil(max(t, 0.0) / h)))
        sl = values[lo:-1]
        tt = grid[lo:-1] - t
        return h * float(np.sum(tt ** q * sl))


def table_cache_path(cache_dir: str | Path, order: int, level: int) -> Path:
    return Path(cache_dir) / f"daub{order:02d}_J{level:02d}.tab"


def dump_table(table: DyadicTable, path: str | Path) -> None:
    """Binary dump: header (order, level as little-endian uint32), then
    phi and psi as little-endian float64 arrays."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", table.order, table.level))
        fh.write(table.phi_values.astype("<f8").tobytes())
        fh.write(table.psi_values.astype("<f8").tobytes())


def load_table(path: str | Path) -> DyadicTable:
    with open(path, "rb") as fh:
        order, level = struct.unpack("<II", fh.read(8))
        s = 2 * order - 1
        count = s * (1 << level) + 1
        raw = fh.read()
    expect = 2 * count * 8
    if len(raw) != expect:
        raise ConfigurationError(
            f"table cache {path} is corrupt: payload {len(raw)} bytes, "
            f"expected {expect}")
    phi = np.frombuffer(raw[: count * 8], dtype="<f8").astype(np.float64)
    psi = np.frombuffer(raw[count * 8:], dtype="<f8").astype(np.float64)
    return DyadicTable(order, level, phi, psi)
