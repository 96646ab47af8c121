"""Quasilinear first-order systems: principal symbol, characteristic polynomial and its jet.

A system  d_t u + sum_j A_j(t,x,u) d_{x_j} u = F(t,x,u)  is described by a
:class:`SystemSpec`.  Linearizing about a reference solution phi gives the
principal symbol A(t,x,xi) = sum_j xi_j A_j(t,x,phi(t,x)); the classification
machinery works on the characteristic polynomial P = det(lambda I - A) and its
first and second partial derivatives in (t, lambda) at t = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as npoly


def as_vec(x, dim: int) -> np.ndarray:
    """Coerce a scalar or sequence to a float vector of length `dim`."""
    a = np.atleast_1d(np.asarray(x, dtype=float))
    if a.shape != (dim,):
        raise ValueError(f"expected vector of length {dim}, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class Domain:
    """Periodic box [0, length)^dim (or a plain box when periodic=False)."""

    length: float
    dim: int = 1
    periodic: bool = True


@dataclass(frozen=True)
class SystemSpec:
    """Fluxes A_j(t,x,u), source F(t,x,u) and their u-derivatives.

    ``fluxes[j](t, x, u)`` returns the real N x N matrix A_j; ``source`` the
    N-vector F.  Analytic u-derivatives are optional; a centered finite
    difference with step fd_step*(1+|u|) is used when absent.  The optional
    ``fluxes_vec``/``source_vec`` evaluate on node batches ``xs (n,d)``,
    ``us (n,N)`` and are only a performance device for the PDE solver.
    """

    name: str
    space_dim: int
    state_dim: int
    fluxes: tuple
    source: Callable
    du_fluxes: tuple | None = None
    du_source: Callable | None = None
    fd_step: float = 1e-5
    fluxes_vec: tuple | None = None
    source_vec: Callable | None = None

    def flux(self, j: int, t: float, x, u) -> np.ndarray:
        x = as_vec(x, self.space_dim)
        u = as_vec(u, self.state_dim)
        return np.asarray(self.fluxes[j](t, x, u), dtype=float)

    def eval_source(self, t: float, x, u) -> np.ndarray:
        x = as_vec(x, self.space_dim)
        u = as_vec(u, self.state_dim)
        return np.asarray(self.source(t, x, u), dtype=float)

    def du_flux(self, j: int, t: float, x, u) -> np.ndarray:
        """dA_j/du as an (N,N,N) tensor, [i,k,m] = d (A_j)_{ik} / d u_m."""
        x = as_vec(x, self.space_dim)
        u = as_vec(u, self.state_dim)
        if self.du_fluxes is not None:
            return np.asarray(self.du_fluxes[j](t, x, u), dtype=float)
        return _fd_jacobian(lambda w: self.fluxes[j](t, x, w), u, self.fd_step)

    def du_F(self, t: float, x, u) -> np.ndarray:
        """dF/du as an (N,N) matrix, [i,m] = d F_i / d u_m."""
        x = as_vec(x, self.space_dim)
        u = as_vec(u, self.state_dim)
        if self.du_source is not None:
            return np.asarray(self.du_source(t, x, u), dtype=float)
        return _fd_jacobian(lambda w: self.source(t, x, w), u, self.fd_step)

    def dt_flux(self, j: int, t: float, x, u, step: float = 1e-5) -> np.ndarray:
        """Explicit t-derivative of A_j at frozen (x,u), by centered differences."""
        x = as_vec(x, self.space_dim)
        u = as_vec(u, self.state_dim)
        ap = np.asarray(self.fluxes[j](t + step, x, u), dtype=float)
        am = np.asarray(self.fluxes[j](t - step, x, u), dtype=float)
        return (ap - am) / (2.0 * step)

    def dt_F(self, t: float, x, u, step: float = 1e-5) -> np.ndarray:
        x = as_vec(x, self.space_dim)
        u = as_vec(u, self.state_dim)
        fp = np.asarray(self.source(t + step, x, u), dtype=float)
        fm = np.asarray(self.source(t - step, x, u), dtype=float)
        return (fp - fm) / (2.0 * step)


def _fd_jacobian(fun: Callable, u: np.ndarray, base_step: float) -> np.ndarray:
    """Centered-difference derivative of fun(u) in u, stacked on a last axis."""
    cols = []
    for m in range(u.size):
        h = base_step * (1.0 + abs(u[m]))
        up = u.copy(); up[m] += h
        um = u.copy(); um[m] -= h
        cols.append((np.asarray(fun(up), dtype=float) - np.asarray(fun(um), dtype=float)) / (2 * h))
    return np.stack(cols, axis=-1)


@dataclass
class ReferenceSolution:
    """Reference state phi about which the system is linearized.

    ``initial(x)`` samples phi(0,x).  When the full ``value(t,x)`` is known in
    closed form it is used directly; otherwise time derivatives of phi are
    reconstructed from the PDE itself (see :class:`TaylorExtendedSolution`).
    ``initial_dx`` may supply the exact spatial Jacobian (N,d) of phi(0,.).
    """

    initial: Callable
    domain: Domain
    value: Callable | None = None
    initial_dx: Callable | None = None
    name: str = "phi"

    def at0(self, x) -> np.ndarray:
        return np.asarray(self.initial(as_vec(x, self.domain.dim)), dtype=float)

    def __call__(self, t: float, x) -> np.ndarray:
        if self.value is None:
            if t == 0.0:
                return self.at0(x)
            raise ValueError("reference solution has no time extension; "
                             "wrap it with TaylorExtendedSolution or supply `value`")
        return np.asarray(self.value(t, as_vec(x, self.domain.dim)), dtype=float)


class TaylorExtendedSolution:
    """Second-order time extension of phi(0,.) consistent with the PDE.

    d_t phi is substituted from the equation, d_t phi = -sum_j A_j(phi)
    d_{x_j} phi + F(phi), and differentiated once more (spatial derivatives by
    centered differences) to reach phi(t,x) = phi0 + t g + t^2/2 g2 + O(t^3).
    Only meant for |t| << 1, which is all the jet evaluation needs.
    """

    def __init__(self, sys: SystemSpec, phi: ReferenceSolution, x_step: float = 1e-5):
        self.sys = sys
        self.phi = phi
        self.x_step = x_step
        self._cache: dict[bytes, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    def _phi0(self, x: np.ndarray) -> np.ndarray:
        return self.phi.at0(x)

    def _dx_phi0(self, x: np.ndarray) -> np.ndarray:
        if self.phi.initial_dx is not None:
            return np.asarray(self.phi.initial_dx(x), dtype=float).reshape(
                self.sys.state_dim, self.sys.space_dim)
        d = self.sys.space_dim
        cols = []
        for j in range(d):
            e = np.zeros(d); e[j] = self.x_step
            cols.append((self._phi0(x + e) - self._phi0(x - e)) / (2 * self.x_step))
        return np.stack(cols, axis=-1)

    def _g(self, x: np.ndarray) -> np.ndarray:
        """d_t phi(0,x) from the PDE."""
        u = self._phi0(x)
        dxu = self._dx_phi0(x)
        out = self.sys.eval_source(0.0, x, u).copy()
        for j in range(self.sys.space_dim):
            out -= self.sys.flux(j, 0.0, x, u) @ dxu[:, j]
        return out

    def _coeffs(self, x: np.ndarray):
        key = x.tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        sys = self.sys
        u = self._phi0(x)
        dxu = self._dx_phi0(x)
        g = self._g(x)
        # dx of g by centered differences (g is smooth in x)
        d = sys.space_dim
        dxg = []
        for j in range(d):
            e = np.zeros(d); e[j] = self.x_step
            dxg.append((self._g(x + e) - self._g(x - e)) / (2 * self.x_step))
        g2 = sys.dt_F(0.0, x, u) + sys.du_F(0.0, x, u) @ g
        for j in range(d):
            g2 -= sys.dt_flux(j, 0.0, x, u) @ dxu[:, j]
            g2 -= np.einsum("ikm,m,k->i", sys.du_flux(j, 0.0, x, u), g, dxu[:, j])
            g2 -= sys.flux(j, 0.0, x, u) @ dxg[j]
        out = (u, g, g2)
        self._cache[key] = out
        return out

    def __call__(self, t: float, x) -> np.ndarray:
        x = as_vec(x, self.sys.space_dim)
        u, g, g2 = self._coeffs(x)
        return u + t * g + 0.5 * t * t * g2


def time_sampler(sys: SystemSpec, phi: ReferenceSolution) -> Callable:
    """phi(t,x) evaluator: closed form when available, else PDE-Taylor extension."""
    if phi.value is not None:
        return phi
    return TaylorExtendedSolution(sys, phi)


@dataclass(frozen=True)
class CotangentPoint:
    """A point omega = (x, xi, lambda) in the cotangent bundle, xi != 0."""

    x: np.ndarray
    xi: np.ndarray
    lam: complex

    def __post_init__(self):
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=float)))
        object.__setattr__(self, "xi", np.atleast_1d(np.asarray(self.xi, dtype=float)))
        if np.linalg.norm(self.xi) == 0.0:
            raise ValueError("cotangent point requires xi != 0")


@dataclass(frozen=True)
class PrincipalSymbolEval:
    """Value of A(t,x,xi), 1-homogeneous in xi."""

    matrix: np.ndarray
    t: float
    x: np.ndarray
    xi: np.ndarray


@dataclass(frozen=True)
class CharPolyJet:
    """P and its partials (P_lam, P_lamlam exact; P_t, P_tt, P_tlam by FD)."""

    P: complex
    P_lam: complex
    P_lamlam: complex
    P_t: complex
    P_tt: complex
    P_tlam: complex
    omega: CotangentPoint
    t: float
    method: str
    t_step: float
    noise_warning: bool = False

    def as_dict(self) -> dict:
        return {
            "P": _c2pair(self.P), "P_lam": _c2pair(self.P_lam),
            "P_lamlam": _c2pair(self.P_lamlam), "P_t": _c2pair(self.P_t),
            "P_tt": _c2pair(self.P_tt), "P_tlam": _c2pair(self.P_tlam),
            "method": self.method, "t_step": self.t_step,
            "noise_warning": self.noise_warning,
        }


def _c2pair(z: complex):
    z = complex(z)
    return [z.real, z.imag]


# ---------------------------------------------------------------------------
# Characteristic polynomial machinery
# ---------------------------------------------------------------------------

def charpoly_coeffs(a: np.ndarray) -> np.ndarray:
    """Monic characteristic polynomial of `a` by the Faddeev-LeVerrier recursion.

    Returns ascending coefficients c with det(lambda I - a) = sum_k c[k] lambda^k,
    c[N] = 1.  Exact in terms of traces, no eigendecomposition involved.
    """
    a = np.asarray(a)
    n = a.shape[0]
    dt = complex if np.iscomplexobj(a) else float
    c = np.zeros(n + 1, dtype=dt)
    c[n] = 1.0
    m = np.eye(n, dtype=dt)
    for k in range(1, n + 1):
        am = a @ m
        ck = -np.trace(am) / k
        c[n - k] = ck
        m = am + ck * np.eye(n, dtype=dt)
    return c


def eval_charpoly(a: PrincipalSymbolEval | np.ndarray, lam: complex) -> complex:
    """det(lambda I - A) by LU factorization with partial pivoting."""
    mat = a.matrix if isinstance(a, PrincipalSymbolEval) else np.asarray(a)
    n = mat.shape[0]
    return complex(np.linalg.det(lam * np.eye(n) - mat.astype(complex)))


def aberth_roots(coeffs: np.ndarray, maxiter: int = 200, tol: float = 1e-13) -> np.ndarray:
    """All roots of a polynomial (ascending coefficients) by Aberth-Ehrlich.

    Falls back to the companion-matrix QR solver (numpy.roots) when the
    simultaneous iteration stalls, which happens at multiple roots.  Raises
    RuntimeError with the residuals when neither route converges.
    """
    c = np.asarray(coeffs, dtype=complex)
    while c.size > 1 and c[-1] == 0:
        c = c[:-1]
    n = c.size - 1
    if n < 1:
        return np.zeros(0, dtype=complex)
    c = c / c[-1]
    if n == 1:
        return np.array([-c[0]])
    dc = np.arange(1, n + 1) * c[1:]
    radius = 1.0 + np.max(np.abs(c[:-1]))
    k = np.arange(n)
    z = radius * np.exp(2j * np.pi * (k + 0.35) / n)
    scale = max(1.0, np.max(np.abs(c)))
    converged = False
    for _ in range(maxiter):
        p = npoly.polyval(z, c)
        dp = npoly.polyval(z, dc)
        newton = np.where(dp != 0, p / np.where(dp == 0, 1, dp), 0.0)
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, np.inf)
        s = np.sum(1.0 / diff, axis=1)
        denom = 1.0 - newton * s
        step = newton / np.where(denom == 0, 1, denom)
        z = z - step
        if np.max(np.abs(step)) <= tol * (1.0 + np.max(np.abs(z))):
            converged = True
            break
    resid = np.abs(npoly.polyval(z, c))
    if not converged or np.max(resid) > 1e-8 * scale * (1 + np.max(np.abs(z)) ** n):
        z = np.roots(c[::-1])
        resid = np.abs(npoly.polyval(z, c))
        if np.max(resid) > 1e-6 * scale * (1 + np.max(np.abs(z)) ** n):
            raise RuntimeError(f"polynomial root finding failed, residuals {resid}")
    return z


def sort_spectrum(vals: np.ndarray) -> np.ndarray:
    """Deterministic eigenvalue order: lexicographic by (real, imag)."""
    vals = np.asarray(vals, dtype=complex)
    order = np.lexsort((vals.imag, vals.real))
    return vals[order]


def spectrum(a: PrincipalSymbolEval | np.ndarray) -> np.ndarray:
    """Eigenvalues with multiplicity, Aberth-Ehrlich on the characteristic coefficients."""
    mat = a.matrix if isinstance(a, PrincipalSymbolEval) else np.asarray(a)
    vals = aberth_roots(charpoly_coeffs(mat))
    return sort_spectrum(vals)


def hyperbolicity_test(a: PrincipalSymbolEval | np.ndarray, tol: float = 1e-9) -> bool:
    """True iff all eigenvalues of A are real up to `tol`."""
    return bool(np.max(np.abs(spectrum(a).imag)) <= tol)


# ---------------------------------------------------------------------------
# Symbol fields: common interface for (system, phi) pairs and closed forms
# ---------------------------------------------------------------------------

def eval_principal_symbol(sys: SystemSpec, phi: ReferenceSolution | Callable,
                          t: float, x, xi) -> PrincipalSymbolEval:
    """A(t,x,xi) = sum_j xi_j A_j(t, x, phi(t,x))."""
    x = as_vec(x, sys.space_dim)
    xi = as_vec(xi, sys.space_dim)
    if np.linalg.norm(xi) == 0.0:
        raise ValueError("principal symbol requires xi != 0")
    u = np.asarray(phi(t, x), dtype=float)
    mat = np.zeros((sys.state_dim, sys.state_dim))
    for j in range(sys.space_dim):
        if xi[j] != 0.0:
            mat += xi[j] * sys.flux(j, t, x, u)
    return PrincipalSymbolEval(mat, t, x, xi)


class _BaseField:
    """Shared jet evaluation on top of a `coeffs(t,x,xi)` implementation."""

    state_dim: int
    space_dim: int

    def coeffs(self, t: float, x, xi) -> np.ndarray:
        raise NotImplementedError

    def symbol(self, t: float, x, xi) -> np.ndarray:
        raise NotImplementedError

    def P(self, t: float, x, xi, lam: complex) -> complex:
        return complex(npoly.polyval(lam, self.coeffs(t, x, xi)))

    def P_lam(self, t: float, x, xi, lam: complex) -> complex:
        return complex(npoly.polyval(lam, npoly.polyder(self.coeffs(t, x, xi))))

    def P_lamlam(self, t: float, x, xi, lam: complex) -> complex:
        return complex(npoly.polyval(lam, npoly.polyder(self.coeffs(t, x, xi), 2)))

    def spectrum_at(self, t: float, x, xi) -> np.ndarray:
        return sort_spectrum(aberth_roots(self.coeffs(t, x, xi)))

    def jet(self, omega: CotangentPoint, t: float = 0.0, step: float = 1e-4) -> CharPolyJet:
        """Six-entry jet of P at (t, omega).

        lambda-derivatives come exactly from the characteristic coefficients;
        t-derivatives from centered differences of the coefficients with one
        Richardson level (steps `step` and `step/2`).
        """
        x, xi, lam = omega.x, omega.xi, omega.lam
        c0 = self.coeffs(t, x, xi)

        def d1(s):
            return (self.coeffs(t + s, x, xi) - self.coeffs(t - s, x, xi)) / (2 * s)

        def d2(s):
            return (self.coeffs(t + s, x, xi) - 2 * c0 + self.coeffs(t - s, x, xi)) / (s * s)

        c1 = (4.0 * d1(step / 2) - d1(step)) / 3.0
        c2 = (4.0 * d2(step / 2) - d2(step)) / 3.0
        # noise heuristic: coefficient increments below the roundoff floor
        incr = np.max(np.abs(self.coeffs(t + step, x, xi) - c0))
        noise = bool(incr < 1e3 * np.finfo(float).eps * max(1.0, np.max(np.abs(c0))))
        return CharPolyJet(
            P=complex(npoly.polyval(lam, c0)),
            P_lam=complex(npoly.polyval(lam, npoly.polyder(c0))),
            P_lamlam=complex(npoly.polyval(lam, npoly.polyder(c0, 2))),
            P_t=complex(npoly.polyval(lam, c1)),
            P_tt=complex(npoly.polyval(lam, c2)),
            P_tlam=complex(npoly.polyval(lam, npoly.polyder(c1))),
            omega=omega, t=t,
            method="analytic-coefficients/fd-time(richardson2)",
            t_step=step, noise_warning=noise,
        )


class CharPolyField(_BaseField):
    """Characteristic polynomial field of a system linearized at phi."""

    def __init__(self, sys: SystemSpec, phi: ReferenceSolution):
        self.sys = sys
        self.phi = phi
        self.phi_t = time_sampler(sys, phi)
        self.state_dim = sys.state_dim
        self.space_dim = sys.space_dim

    def symbol(self, t: float, x, xi) -> np.ndarray:
        return eval_principal_symbol(self.sys, self.phi_t, t, x, xi).matrix

    def coeffs(self, t: float, x, xi) -> np.ndarray:
        return charpoly_coeffs(self.symbol(t, x, xi))


class SymbolField(_BaseField):
    """Field built from a closed-form matrix symbol A(t,x,xi)."""

    def __init__(self, symbol: Callable, space_dim: int, state_dim: int, name: str = "symbol"):
        self._symbol = symbol
        self.space_dim = space_dim
        self.state_dim = state_dim
        self.name = name

    def symbol(self, t: float, x, xi) -> np.ndarray:
        x = as_vec(x, self.space_dim)
        xi = as_vec(xi, self.space_dim)
        return np.asarray(self._symbol(t, x, xi))

    def coeffs(self, t: float, x, xi) -> np.ndarray:
        return charpoly_coeffs(self.symbol(t, x, xi))


def as_field(sys_or_field, phi: ReferenceSolution | None = None) -> _BaseField:
    """Normalize (SystemSpec, phi) pairs and ready-made fields to a field."""
    if isinstance(sys_or_field, _BaseField):
        return sys_or_field
    if isinstance(sys_or_field, SystemSpec):
        if phi is None:
            raise ValueError("a reference solution is required with a SystemSpec")
        return CharPolyField(sys_or_field, phi)
    raise TypeError(f"cannot build a symbol field from {type(sys_or_field)!r}")


def charpoly_jet(sys: SystemSpec, phi: ReferenceSolution, omega: CotangentPoint,
                 t: float = 0.0, step: float = 1e-4) -> CharPolyJet:
    """Jet of det(lambda I - A) at (t, omega) for a system linearized at phi."""
    return CharPolyField(sys, phi).jet(omega, t=t, step=step)
