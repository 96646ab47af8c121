"""Semiclassical quantization on periodic grids, eps-Sobolev norms, wave packets.

op_eps(a) u = (2 pi)^-d int e^{i x xi} a(x, eps^h xi) u^(xi) d xi, realized on a
uniform periodic grid: exact Fourier multiplier for x-independent symbols,
Kohn-Nirenberg mode sum otherwise.  Also the instability datum: the modulated
wave packet eps^K Re(op_eps(Q^-1)(e^{i y xi0 / eps^h} theta(y) e(y))).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

_MAGIC = b"HYPGRID1"


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid with n nodes on [x_left, x_left + length)."""

    n: int
    length: float
    x_left: float = 0.0

    def __post_init__(self):
        if self.n & (self.n - 1):
            raise ValueError("node count must be a power of two")

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def nodes(self) -> np.ndarray:
        return self.x_left + self.dx * np.arange(self.n)

    @property
    def freqs(self) -> np.ndarray:
        """Angular frequencies xi_k in FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)


@dataclass
class GridFunction:
    """Complex N-component function sampled on a Grid1D; values shape (n, N)."""

    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim == 1:
            v = v[:, None]
        self.values = np.ascontiguousarray(v.astype(complex))
        if self.values.shape[0] != self.grid.n:
            raise ValueError("values/grid size mismatch")

    @property
    def n_components(self) -> int:
        return self.values.shape[1]

    def hat(self) -> np.ndarray:
        return np.fft.fft(self.values, axis=0)

    def l2_norm(self) -> float:
        return float(np.sqrt(self.grid.dx * np.sum(np.abs(self.values) ** 2)))

    def copy(self) -> "GridFunction":
        return GridFunction(self.grid, self.values.copy())


def save_grid_function(u: GridFunction, path: str) -> None:
    """Binary container: magic, version, N, n, L, x_left, complex128 payload."""
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<IIQdd", 1, u.n_components, u.grid.n,
                            u.grid.length, u.grid.x_left))
        f.write(np.ascontiguousarray(u.values, dtype="<c16").tobytes())


def load_grid_function(path: str) -> GridFunction:
    with open(path, "rb") as f:
        if f.read(8) != _MAGIC:
            raise ValueError("not a grid-function container")
        ver, ncomp, n, length, x_left = struct.unpack("<IIQdd", f.read(32))
        if ver != 1:
            raise ValueError(f"unsupported container version {ver}")
        data = np.frombuffer(f.read(), dtype="<c16").reshape(n, ncomp)
    return GridFunction(Grid1D(int(n), length, x_left), data.astype(complex))


def grid_function_to_csv(u: GridFunction, path: str, header_lines: Sequence[str] = ()) -> None:
    xs = u.grid.nodes
    with open(path, "w") as f:
        for line in header_lines:
            f.write(f"# {line}\n")
        cols = ["x"]
        for c in range(u.n_components):
            cols += [f"re_{c}", f"im_{c}"]
        f.write(",".join(cols) + "\n")
        for i, x in enumerate(xs):
            row = [f"{x:.17g}"]
            for c in range(u.n_components):
                z = u.values[i, c]
                row += [f"{z.real:.17g}", f"{z.imag:.17g}"]
            f.write(",".join(row) + "\n")


# ---------------------------------------------------------------------------
# symbols and quantization
# ---------------------------------------------------------------------------

@dataclass
class SymbolSampler:
    """Callable symbol a(x, xi) with metadata used by the calculus checks.

    fn(x, xi, eps): x is the node vector (or None for x-independent symbols),
    xi the already-scaled frequency eps^h xi_k; returns a scalar/(n,) array for
    scalar symbols, or (N,N)/(n,N,N) for matrix symbols.
    """

    fn: Callable
    order: int = 0
    slow_x: bool = False
    x_dependent: bool = True
    matrix: bool = False
    name: str = "a"

    def __call__(self, x, xi, eps=None):
        return self.fn(x, xi, eps)


def _significant_modes(u_hat: np.ndarray, threshold: float) -> np.ndarray:
    mags = np.max(np.abs(u_hat), axis=1)
    cap = np.max(mags)
    if cap == 0.0:
        return np.zeros(0, dtype=int)
    return np.nonzero(mags > threshold * cap)[0]


def resolution_check(u: GridFunction, fraction: float = 1e-8) -> None:
    """Reject grid functions with significant mass in the unresolvable band.

    Carriers need at least 8 nodes per oscillation, i.e. |k| <= n/8; mass above
    n/4 indicates an unresolved field and names the node count that would fix it.
    """
    uh = u.hat()
    power = np.sum(np.abs(uh) ** 2)
    if power == 0.0:
        return
    k_idx = np.abs(np.fft.fftfreq(u.grid.n) * u.grid.n)
    bad = k_idx > u.grid.n / 4
    frac = float(np.sum(np.abs(uh[bad]) ** 2) / power)
    if frac > fraction:
        kmax_sig = int(np.max(k_idx[np.max(np.abs(uh), axis=1) >
                                     1e-10 * np.max(np.abs(uh))]))
        raise ValueError(
            f"grid does not resolve the field: {frac:.2e} of the mass above n/4; "
            f"need n >= {8 * kmax_sig} nodes (currently {u.grid.n})")


def op_eps_apply(a, u: GridFunction, eps: float, h: float,
                 mode_threshold: float = 1e-14,
                 check_resolution: bool = True) -> GridFunction:
    """Apply op_eps(a) to u.

    Fourier multiplier path (exact) for x-independent symbols; otherwise a
    Kohn-Nirenberg sum over the modes carrying relative mass > mode_threshold.
    """
    if not isinstance(a, SymbolSampler):
        a = SymbolSampler(a)
    if check_resolution and a.x_dependent:
        resolution_check(u)
    uh = u.hat()
    xis = eps ** h * u.grid.freqs
    n, ncomp = u.values.shape
    if not a.x_dependent:
        if a.matrix:
            mats = np.asarray([np.asarray(a(None, xi, eps), dtype=complex) for xi in xis])
            out_hat = np.einsum("kij,kj->ki", mats, uh)
        else:
            vals = np.asarray([a(None, xi, eps) for xi in xis], dtype=complex)
            out_hat = vals[:, None] * uh
        return GridFunction(u.grid, np.fft.ifft(out_hat, axis=0))
    ks = _significant_modes(uh, mode_threshold)
    x = u.grid.nodes
    rel = x - u.grid.x_left
    out = np.zeros((n, ncomp), dtype=complex)
    for k in ks:
        phase = np.exp(1j * u.grid.freqs[k] * rel) / n
        av = np.asarray(a(x, xis[k], eps), dtype=complex)
        if a.matrix:
            if av.ndim == 2:
                av = np.broadcast_to(av, (n, ncomp, ncomp))
            out += np.einsum("xij,j->xi", av, uh[k]) * phase[:, None]
        else:
            if av.ndim == 0:
                av = np.full(n, complex(av))
            out += (av * phase)[:, None] * uh[k][None, :]
    return GridFunction(u.grid, out)


def eps_sobolev_norm(u: GridFunction, s: float, eps: float, h: float) -> float:
    """|| <eps^h xi>^s u^ ||_{L^2}, discrete Parseval normalization."""
    uh = u.hat()
    w = (1.0 + (eps ** h * u.grid.freqs) ** 2) ** (s / 2.0)
    return float(np.sqrt(u.grid.length / u.grid.n ** 2
                         * np.sum(w[:, None] ** 2 * np.abs(uh) ** 2)))


def sobolev_norm(u: GridFunction, s: float) -> float:
    """Plain (eps-free) H^s norm."""
    return eps_sobolev_norm(u, s, 1.0, 1.0)


def dilate(u: GridFunction, eps: float, h: float) -> GridFunction:
    """L2-isometric dilation (d_eps u)(x) = eps^{h/2} u(eps^h x).

    On a periodic grid this is the same sample vector scaled by eps^{h/2} and
    reinterpreted on a grid of length L / eps^h.
    """
    g = Grid1D(u.grid.n, u.grid.length / eps ** h, u.grid.x_left / eps ** h)
    return GridFunction(g, eps ** (h / 2.0) * u.values)


# ---------------------------------------------------------------------------
# wave packets
# ---------------------------------------------------------------------------

def smooth_cutoff(r, inner: float = 0.5, outer: float = 1.0):
    """C-infinity plateau bump: 1 on |r| <= inner, 0 on |r| >= outer."""
    r = np.abs(np.asarray(r, dtype=float))
    s = np.clip((r - inner) / (outer - inner), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        ga = np.where(s > 0, np.exp(-1.0 / np.maximum(s, 1e-300)), 0.0)
        gb = np.where(s < 1, np.exp(-1.0 / np.maximum(1.0 - s, 1e-300)), 0.0)
    out = gb / np.where(ga + gb == 0.0, 1.0, ga + gb)
    out[r >= outer] = 0.0
    out[r <= inner] = 1.0
    return out


@dataclass
class WavePacketSpec:
    """Datum perturbation parameters: eps^K Re(op(Q^-1)(e^{i y xi0/eps^h} theta e))."""

    K: float
    xi0: float
    x0: float
    eps: float
    h: float
    delta: float = 1.0
    e_vec: np.ndarray | Callable = (1.0,)
    cutoff: Callable | None = None
    q_inv: SymbolSampler | None = None

    def theta(self, y):
        if self.cutoff is not None:
            return self.cutoff(y)
        return smooth_cutoff(y, inner=self.delta / 2.0, outer=self.delta)

    def direction(self, y) -> np.ndarray:
        if callable(self.e_vec):
            e = np.asarray(self.e_vec(y), dtype=complex)
        else:
            e = np.asarray(self.e_vec, dtype=complex)
        return e / np.linalg.norm(e)


def build_wavepacket(spec: WavePacketSpec, grid: Grid1D,
                     frame: str = "rescaled") -> GridFunction:
    """Assemble the packet on `grid`.

    frame="rescaled": nodes are y; carrier frequency xi0/eps^h.
    frame="original": nodes are x; the packet is eps^K phi0((x-x0)/eps^{1-h}),
    carrier frequency xi0/eps.  The grid must give >= 8 nodes per oscillation.
    """
    x = grid.nodes
    if frame == "rescaled":
        y = x
        carrier_freq = spec.xi0 / spec.eps ** spec.h
    elif frame == "original":
        y = (x - spec.x0) / spec.eps ** (1.0 - spec.h)
        carrier_freq = spec.xi0 / spec.eps
    else:
        raise ValueError(f"unknown frame {frame!r}")
    per_osc = 2.0 * np.pi / abs(carrier_freq) / grid.dx
    if per_osc < 8.0 - 1e-9:
        need = int(2 ** np.ceil(np.log2(grid.n * 8.0 / per_osc)))
        raise ValueError(f"carrier unresolved ({per_osc:.1f} nodes/oscillation); "
                         f"need n >= {need}")
    theta = spec.theta(y)
    phase = np.exp(1j * carrier_freq * (x - (spec.x0 if frame == "original" else 0.0)))
    ncomp = np.atleast_1d(spec.direction(0.0)).size
    vals = np.zeros((grid.n, ncomp), dtype=complex)
    if callable(spec.e_vec):
        for i, yi in enumerate(y):
            vals[i] = spec.direction(yi)
        vals *= (theta * phase)[:, None]
    else:
        vals = np.outer(theta * phase, spec.direction(0.0))
    if spec.q_inv is not None:
        if frame != "rescaled":
            raise NotImplementedError("basis symbol quantization only in the rescaled frame")
        gf = GridFunction(grid, vals)
        vals = op_eps_apply(spec.q_inv, gf, spec.eps, spec.h).values
    return GridFunction(grid, spec.eps ** spec.K * np.real(vals).astype(complex))


def blend_symbol_to_identity(q_fn: Callable, delta: float, n_dim: int,
                             check_points: int = 64) -> SymbolSampler:
    """Globalize a locally defined matrix symbol by blending it to the identity
    outside the delta-ball; invertibility asserted by det sampling."""
    eye = np.eye(n_dim)

    def fn(x, xi, eps=None):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        sig = smooth_cutoff(x / delta, inner=0.5, outer=1.0)
        out = np.empty((x.size, n_dim, n_dim), dtype=complex)
        for i, (xv, sv) in enumerate(zip(x, sig)):
            out[i] = sv * (np.asarray(q_fn(xv, xi)) - eye) + eye
        return out

    xs = np.linspace(-delta, delta, check_points)
    dets = np.linalg.det(fn(xs, 0.0))
    if np.min(np.abs(dets)) < 1e-8:
        raise ValueError("blended symbol loses invertibility inside the ball")
    return SymbolSampler(fn, order=0, x_dependent=True, matrix=True, name="blended-Q")


# ---------------------------------------------------------------------------
# calculus residuals
# ---------------------------------------------------------------------------

@dataclass
class CompositionReport:
    eps_values: np.ndarray
    residuals: np.ndarray
    fitted_order: float


def composition_residual(a: SymbolSampler, b: SymbolSampler, eps_ladder,
                         h: float, u_probe: GridFunction) -> CompositionReport:
    """||op(a) op(b) u - op(ab) u|| / ||u|| across the ladder, with the order of
    the leading remainder fitted by log-log regression."""
    resids = []
    for eps in eps_ladder:
        bu = op_eps_apply(b, u_probe, eps, h)
        abu = op_eps_apply(a, bu, eps, h)

        def prod_fn(x, xi, e=eps, _a=a, _b=b):
            av = np.asarray(_a(x if _a.x_dependent else None, xi, e), dtype=complex)
            bv = np.asarray(_b(x if _b.x_dependent else None, xi, e), dtype=complex)
            return av * bv

        prod = SymbolSampler(prod_fn, order=a.order + b.order,
                             x_dependent=a.x_dependent or b.x_dependent,
                             matrix=False, name=f"{a.name}*{b.name}")
        direct = op_eps_apply(prod, u_probe, eps, h)
        num = GridFunction(u_probe.grid, abu.values - direct.values).l2_norm()
        resids.append(num / u_probe.l2_norm())
    resids = np.asarray(resids)
    eps_arr = np.asarray(list(eps_ladder), dtype=float)
    if np.all(resids > 0):
        order = float(np.polyfit(np.log(eps_arr), np.log(resids), 1)[0])
    else:
        order = np.inf
    return CompositionReport(eps_arr, resids, order)


def operator_norm_estimate(a: SymbolSampler, eps: float, h: float,
                           probes: Sequence[GridFunction],
                           m: float | None = None) -> float:
    """Lower estimate of ||op_eps(a)||: max over probes of ||op(a)u|| / ||u||_{eps,-m}."""
    m = a.order if m is None else m
    best = 0.0
    for u in probes:
        num = op_eps_apply(a, u, eps, h, check_resolution=False).l2_norm()
        den = eps_sobolev_norm(u, -m, eps, h)
        if den > 0:
            best = max(best, num / den)
    return best
