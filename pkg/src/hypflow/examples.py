"""Registry of the example systems: Burgers (1D/2D), Van der Waals gas dynamics,
Klein-Gordon-wave couplings, the degenerate crossing family and the canonical
non-semisimple model blocks, each with reference states that realize the
documented regimes at the origin."""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dfield
from typing import Callable, Optional

import numpy as np

from .classifier import (ELLIPTIC, NONSEMISIMPLE, PERSISTENT, SEMISIMPLE,
                         SearchRegion)
from .system_model import Domain, ReferenceSolution, SymbolField, SystemSpec

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


# ---------------------------------------------------------------------------
# system factories
# ---------------------------------------------------------------------------

def burgers1d(b: Callable | float = 1.0, F: Callable | tuple = (0.0, 0.0)) -> SystemSpec:
    """2x2 Burgers-type system with flux matrix [[u1, -b(u)^2 u2],[u2, u1]]."""
    b_fn = b if callable(b) else (lambda u: float(b))
    if callable(F):
        f_fn = F
    else:
        f_const = np.asarray(F, dtype=float)
        f_fn = lambda u: f_const

    def a1(t, x, u):
        bb = b_fn(u) ** 2
        return np.array([[u[0], -bb * u[1]], [u[1], u[0]]])

    def src(t, x, u):
        return np.asarray(f_fn(u), dtype=float)

    def a1_vec(t, xs, us):
        out = np.empty((us.shape[0], 2, 2))
        bb = np.asarray([b_fn(u) ** 2 for u in us]) if callable(b) else float(b) ** 2
        out[:, 0, 0] = us[:, 0]
        out[:, 0, 1] = -bb * us[:, 1]
        out[:, 1, 0] = us[:, 1]
        out[:, 1, 1] = us[:, 0]
        return out

    def src_vec(t, xs, us):
        return np.asarray([f_fn(u) for u in us], dtype=float)

    du = None
    if not callable(b):
        bb = float(b) ** 2

        def du_a1(t, x, u):
            out = np.zeros((2, 2, 2))
            out[0, 0, 0] = 1.0
            out[1, 1, 0] = 1.0
            out[0, 1, 1] = -bb
            out[1, 0, 1] = 1.0
            return out
        du = (du_a1,)

    return SystemSpec("burgers1d", 1, 2, (a1,), src, du_fluxes=du,
                      fluxes_vec=(a1_vec,), source_vec=src_vec)


def burgers_conservation_fluxes(b_of_u2: Callable) -> tuple[Callable, Callable]:
    """Fluxes (f1, f2) of the conservation form when b depends on u2 only:
    f1 = u1^2/2 - int_0^{u2} y b(y)^2 dy, f2 = u1 u2."""
    def f1(u):
        u2 = u[1]
        ys = 0.5 * u2 * (_GL_NODES + 1.0)
        ws = 0.5 * u2 * _GL_WEIGHTS
        return 0.5 * u[0] ** 2 - float(np.sum(ws * ys * np.asarray(
            [b_of_u2(y) ** 2 for y in ys])))

    def f2(u):
        return u[0] * u[1]

    return f1, f2


def burgers2d(b: Callable | float = 1.0, F: Callable | tuple = (0.0, 0.0)) -> SystemSpec:
    """Two-dimensional Burgers system; classification only, no 2D evolution."""
    b_fn = b if callable(b) else (lambda u: float(b))
    if callable(F):
        f_fn = F
    else:
        f_const = np.asarray(F, dtype=float)
        f_fn = lambda u: f_const

    def a1(t, x, u):
        bb = b_fn(u) ** 2
        return np.array([[u[0], -bb * u[1]], [u[1], u[0]]])

    def a2(t, x, u):
        bb = b_fn(u) ** 2
        return np.array([[0.0, -bb * u[1]], [u[1], 0.0]])

    def src(t, x, u):
        return np.asarray(f_fn(u), dtype=float)

    return SystemSpec("burgers2d", 2, 2, (a1, a2), src)


def van_der_waals(p: Callable | None = None, dp: Callable | None = None,
                  d2p: Callable | None = None) -> SystemSpec:
    """Isentropic Euler in Lagrangian coordinates, flux [[0,1],[p'(u1),0]].

    The default pressure p(u) = u^3/3 - u has p' = u^2 - 1: negative on
    (-1, 1), vanishing at +-1, realizing both the elliptic and the
    non-semisimple regime.
    """
    if p is None:
        p = lambda u: u ** 3 / 3.0 - u
        dp = lambda u: u ** 2 - 1.0
        d2p = lambda u: 2.0 * u
    if dp is None:
        hp = 1e-6
        dp = lambda u: (p(u + hp) - p(u - hp)) / (2 * hp)

    def a1(t, x, u):
        return np.array([[0.0, 1.0], [dp(u[0]), 0.0]])

    def src(t, x, u):
        return np.zeros(2)

    du = None
    if d2p is not None:
        def du_a1(t, x, u):
            out = np.zeros((2, 2, 2))
            out[1, 0, 0] = d2p(u[0])
            return out
        du = (du_a1,)

    def a1_vec(t, xs, us):
        out = np.zeros((us.shape[0], 2, 2))
        out[:, 0, 1] = 1.0
        out[:, 1, 0] = np.asarray([dp(u) for u in us[:, 0]])
        return out

    def src_vec(t, xs, us):
        return np.zeros((us.shape[0], 2))

    return SystemSpec("van_der_waals", 1, 2, (a1,), src, du_fluxes=du,
                      fluxes_vec=(a1_vec,), source_vec=src_vec)


def kgz(alpha: float, c: float) -> SystemSpec:
    """Klein-Gordon operator coupled to a wave operator with velocity c,
    state (u, v, n, m); acoustic interaction strength alpha."""
    if abs(c) == 1.0:
        raise ValueError("acoustic velocity |c| = 1 resonates with the Klein-Gordon cone")

    def a1(t, x, u):
        return np.array([[0.0, 1.0, alpha, 0.0],
                         [1.0, 0.0, 0.0, 0.0],
                         [alpha, 0.0, 0.0, c],
                         [-2.0 * u[0], -2.0 * u[1], c, 0.0]])

    def src(t, x, u):
        return np.array([(u[2] + 1.0) * u[1], -(u[2] + 1.0) * u[0], 0.0, 0.0])

    def du_a1(t, x, u):
        out = np.zeros((4, 4, 4))
        out[3, 0, 0] = -2.0
        out[3, 1, 1] = -2.0
        return out

    def du_src(t, x, u):
        out = np.zeros((4, 4))
        out[0, 1] = u[2] + 1.0
        out[0, 2] = u[1]
        out[1, 0] = -(u[2] + 1.0)
        out[1, 2] = -u[0]
        return out

    def a1_vec(t, xs, us):
        n = us.shape[0]
        out = np.zeros((n, 4, 4))
        out[:, 0, 1] = 1.0; out[:, 0, 2] = alpha
        out[:, 1, 0] = 1.0
        out[:, 2, 0] = alpha; out[:, 2, 3] = c
        out[:, 3, 0] = -2.0 * us[:, 0]
        out[:, 3, 1] = -2.0 * us[:, 1]
        out[:, 3, 2] = c
        return out

    def src_vec(t, xs, us):
        out = np.zeros((us.shape[0], 4))
        out[:, 0] = (us[:, 2] + 1.0) * us[:, 1]
        out[:, 1] = -(us[:, 2] + 1.0) * us[:, 0]
        return out

    return SystemSpec("kgz", 1, 4, (a1,), src, du_fluxes=(du_a1,), du_source=du_src,
                      fluxes_vec=(a1_vec,), source_vec=src_vec)


def kgz_charpoly(lam, u, v, alpha, c):
    """Closed-form quartic (lam^2 - c^2)(lam^2 - 1) - alpha^2 lam^2 + 2 alpha c (v + u lam)."""
    return (lam ** 2 - c ** 2) * (lam ** 2 - 1.0) - alpha ** 2 * lam ** 2 \
        + 2.0 * alpha * c * (v + u * lam)


def kgz_semilinear(c: float) -> SystemSpec:
    """The semilinear conjugate of the alpha = 0 system.

    In characteristic variables u~ = u + v, v~ = u - v, n~ = (n + m) +
    a u~^2 + b v~^2, m~ = (n - m) + b u~^2 + a v~^2 with a = 1/(2(1-c)),
    b = -1/(2(1+c)), the quadratic x-derivative forcing cancels exactly and
    the flux becomes the constant diag(1, -1, c, -c); the source is cubic
    through the recovered density n.
    """
    if abs(c) == 1.0:
        raise ValueError("|c| = 1 not allowed")
    amat = np.diag([1.0, -1.0, c, -c])
    omc2 = 1.0 - c * c

    def n_of(w):
        return 0.5 * (w[..., 2] + w[..., 3]) \
            - c * (w[..., 0] ** 2 + w[..., 1] ** 2) / (2.0 * omc2)

    def a1(t, x, w):
        return amat

    def src(t, x, w):
        n = n_of(w)
        return np.array([-(n + 1.0) * w[1], (n + 1.0) * w[0],
                         -2.0 * (n + 1.0) * w[0] * w[1] / omc2,
                         2.0 * (n + 1.0) * w[0] * w[1] / omc2])

    def a1_vec(t, xs, ws):
        return np.broadcast_to(amat, (ws.shape[0], 4, 4))

    def src_vec(t, xs, ws):
        n = n_of(ws)
        out = np.empty((ws.shape[0], 4))
        out[:, 0] = -(n + 1.0) * ws[:, 1]
        out[:, 1] = (n + 1.0) * ws[:, 0]
        uv = 2.0 * (n + 1.0) * ws[:, 0] * ws[:, 1] / omc2
        out[:, 2] = -uv
        out[:, 3] = uv
        return out

    return SystemSpec("kgz_semilinear", 1, 4, (a1,), src,
                      fluxes_vec=(a1_vec,), source_vec=src_vec)


def kgz_semilinear_conjugation(state: np.ndarray, c: float,
                               inverse: bool = False) -> np.ndarray:
    """Change of variables between (u, v, n, m) and (u~, v~, n~, m~).

    Forward: u~ = u + v, v~ = u - v, n~ = (n + m) + a u~^2 + b v~^2,
    m~ = (n - m) + b u~^2 + a v~^2, a = 1/(2(1-c)), b = -1/(2(1+c)).
    Only defined for the alpha = 0 system.
    """
    if abs(c) == 1.0:
        raise ValueError("|c| = 1 not allowed")
    a = 1.0 / (2.0 * (1.0 - c))
    b = -1.0 / (2.0 * (1.0 + c))
    w = np.asarray(state, dtype=float)
    squeeze = (w.ndim == 1)
    w = np.atleast_2d(w)
    out = np.empty_like(w)
    if not inverse:
        ut = w[:, 0] + w[:, 1]
        vt = w[:, 0] - w[:, 1]
        out[:, 0] = ut
        out[:, 1] = vt
        out[:, 2] = (w[:, 2] + w[:, 3]) + a * ut ** 2 + b * vt ** 2
        out[:, 3] = (w[:, 2] - w[:, 3]) + b * ut ** 2 + a * vt ** 2
    else:
        ut, vt = w[:, 0], w[:, 1]
        p = w[:, 2] - a * ut ** 2 - b * vt ** 2
        q = w[:, 3] - b * ut ** 2 - a * vt ** 2
        out[:, 0] = 0.5 * (ut + vt)
        out[:, 1] = 0.5 * (ut - vt)
        out[:, 2] = 0.5 * (p + q)
        out[:, 3] = 0.5 * (p - q)
    return out[0] if squeeze else out


def symmetric_control() -> SystemSpec:
    """Symmetric (hence hyperbolic) 2x2 system used as the stable control."""
    def a1(t, x, u):
        return np.array([[u[0], u[1]], [u[1], u[0]]])

    def src(t, x, u):
        return np.zeros(2)

    def a1_vec(t, xs, us):
        out = np.empty((us.shape[0], 2, 2))
        out[:, 0, 0] = us[:, 0]
        out[:, 0, 1] = us[:, 1]
        out[:, 1, 0] = us[:, 1]
        out[:, 1, 1] = us[:, 0]
        return out

    def src_vec(t, xs, us):
        return np.zeros((us.shape[0], 2))

    return SystemSpec("symmetric_control", 1, 2, (a1,), src,
                      fluxes_vec=(a1_vec,), source_vec=src_vec)


# ---------------------------------------------------------------------------
# closed-form symbol families
# ---------------------------------------------------------------------------

@dataclass
class DegenerateCrossingFamily:
    """Symbol xi [[0,1],[g,0]], g = x^2 t - t^2 + t^3 a(x): eigenvalue crossing
    along a curve s(x) = x^2 + O(x^3), with the trivial crossing at t = 0
    deflated out of the Newton target."""

    a: Callable | float = 0.0

    def a_val(self, x: float) -> float:
        return float(self.a(x)) if callable(self.a) else float(self.a)

    def g(self, t: float, x: float) -> float:
        return x * x * t - t * t + t ** 3 * self.a_val(x)

    def crossing_function(self, t: float, x: float) -> float:
        # g/t: removes the root shared by every x
        return x * x - t + t * t * self.a_val(x)

    def symbol(self, t, x, xi):
        x = float(np.atleast_1d(x)[0])
        xi = float(np.atleast_1d(xi)[0])
        return xi * np.array([[0.0, 1.0], [self.g(t, x), 0.0]])

    def field(self) -> SymbolField:
        return SymbolField(lambda t, x, xi: self.symbol(t, x, xi), 1, 2,
                           name="degenerate-crossing")

    def eigenvalues(self, t, x, xi):
        root = complex(self.g(t, x)) ** 0.5
        return xi * root, -xi * root


def degenerate_symbol_ex_not(a: Callable | float = 0.0) -> DegenerateCrossingFamily:
    return DegenerateCrossingFamily(a)


@dataclass
class ModelBlockFamily:
    """Canonical non-semisimple block xi [[0,1],[sign t^a, 0]]; the negative
    sign branches into non-real, non-differentiable eigenvalues."""

    sign: int = -1
    a_exponent: int = 1

    def __post_init__(self):
        if self.a_exponent != 1:
            raise ValueError("only the linear-in-t block is modelled")

    def symbol(self, t, x, xi):
        xi = float(np.atleast_1d(xi)[0])
        return xi * np.array([[0.0, 1.0], [self.sign * t ** self.a_exponent, 0.0]])

    def field(self) -> SymbolField:
        return SymbolField(lambda t, x, xi: self.symbol(t, x, xi), 1, 2,
                           name=f"model-block({self.sign:+d})")

    def eigenvalues(self, t, xi=1.0):
        root = complex(self.sign * t ** self.a_exponent) ** 0.5
        return xi * root, -xi * root


def model_blocks(sign: int = -1, a_exponent: int = 1) -> ModelBlockFamily:
    return ModelBlockFamily(sign, a_exponent)


# ---------------------------------------------------------------------------
# reference states and the registry
# ---------------------------------------------------------------------------

@dataclass
class StateBundle:
    """A system plus a reference state hitting one documented regime."""

    sys: SystemSpec
    phi: ReferenceSolution
    expected_regime: str
    x0: np.ndarray
    xi0: np.ndarray
    search_region: SearchRegion
    phi_traj_vec: Optional[Callable] = None
    e_vec: Optional[np.ndarray] = None
    gamma_minus: Optional[float] = None
    notes: str = ""


def constant_reference(values, d=1, dvalues_dt=None):
    vals = np.asarray(values, dtype=float)

    if dvalues_dt is None:
        value = lambda t, x: vals
        vec = lambda t, xs: np.broadcast_to(vals, (np.atleast_1d(xs).shape[0], vals.size))
    else:
        dv = np.asarray(dvalues_dt, dtype=float)
        value = lambda t, x: vals + t * dv

        def vec(t, xs):
            return np.broadcast_to(vals + t * dv,
                                   (np.atleast_1d(xs).shape[0], vals.size))
    return ReferenceSolution(initial=lambda x: vals, domain=Domain(2 * np.pi, d),
                             value=value), vec


_XI_1D = (1.0,)
REGION_1D = SearchRegion.grid_1d([0.0, 0.5, -0.5], _XI_1D)


def _burgers_states():
    states = {}
    sys_f01 = burgers1d(1.0, (0.0, 1.0))
    phi, vec = constant_reference((0.3, 0.2), dvalues_dt=(0.0, 1.0))
    states["elliptic"] = StateBundle(sys_f01, phi, ELLIPTIC, np.zeros(1), np.ones(1),
                                     REGION_1D, vec, e_vec=np.array([1j, 1.0]) / np.sqrt(2))
    phi, vec = constant_reference((0.0, 0.0), dvalues_dt=(0.0, 1.0))
    states["semisimple"] = StateBundle(sys_f01, phi, SEMISIMPLE, np.zeros(1), np.ones(1),
                                       REGION_1D, vec,
                                       e_vec=np.array([1j, 1.0]) / np.sqrt(2),
                                       gamma_minus=0.5)
    sys_f0 = burgers1d(1.0, (0.0, 0.0))
    phi, vec = constant_reference((0.3, 0.0))
    states["persistent"] = StateBundle(sys_f0, phi, PERSISTENT, np.zeros(1), np.ones(1),
                                       REGION_1D, vec)
    sys_ill = burgers1d(lambda u: 1.0 + u[1] ** 2, lambda u: (0.0, u[0] ** 2))
    phi, vec = constant_reference((0.5, 0.0), dvalues_dt=(0.0, 0.25))
    states["ill-posed-all-data"] = StateBundle(sys_ill, phi, SEMISIMPLE, np.zeros(1),
                                               np.ones(1), REGION_1D, vec,
                                               gamma_minus=0.125,
                                               notes="b = 1 + u2^2, F = (0, u1^2)")
    return states


def _burgers2d_states():
    xi_grid = [(1.0, 0.0), (0.0, 1.0), (0.7071067811865476, 0.7071067811865476),
               (0.7071067811865476, -0.7071067811865476)]
    region = SearchRegion.grid_2d([(0.0, 0.0), (0.4, -0.2)], xi_grid)
    sys2 = burgers2d(1.0, (0.0, 1.0))
    vals = np.array([0.2, 0.0])
    dv = np.array([0.0, 1.0])
    phi = ReferenceSolution(initial=lambda x: vals, domain=Domain(2 * np.pi, 2),
                            value=lambda t, x: vals + t * dv)
    return {"semisimple": StateBundle(sys2, phi, SEMISIMPLE, np.zeros(2),
                                      np.array([1.0, 0.0]), region,
                                      notes="ell = 1 at every direction with xi1 + xi2 != 0")}


def _vdw_states():
    states = {}
    sysv = van_der_waals()
    phi, vec = constant_reference((0.0, 0.0))
    states["elliptic"] = StateBundle(sysv, phi, ELLIPTIC, np.zeros(1), np.ones(1),
                                     REGION_1D, vec, e_vec=np.array([1.0, 1j]) / np.sqrt(2))

    def make_witness(sign):
        def init(x):
            return np.array([2.0 - math.cos(x[0]), sign * 0.5 * math.sin(x[0])])

        def init_dx(x):
            return np.array([[math.sin(x[0])], [sign * 0.5 * math.cos(x[0])]])
        return ReferenceSolution(initial=init, domain=Domain(2 * np.pi, 1),
                                 initial_dx=init_dx)

    states["witness"] = StateBundle(sysv, make_witness(+1.0), NONSEMISIMPLE,
                                    np.zeros(1), np.ones(1), REGION_1D,
                                    notes="p'(phi1(0,0)) = 0, p'' dx phi2 > 0")
    states["decaying"] = StateBundle(sysv, make_witness(-1.0), PERSISTENT,
                                     np.zeros(1), np.ones(1), REGION_1D,
                                     notes="opposite sign: eigenvalues stay real")
    return states


def _kgz_states(alpha=1.0, c=0.5):
    states = {}
    sysk = kgz(alpha, c)

    def init(x):
        return np.array([math.sin(x[0]), -c / (2.0 * alpha), 0.0, 0.0])

    def init_dx(x):
        return np.array([[math.cos(x[0])], [0.0], [0.0], [0.0]])

    phi = ReferenceSolution(initial=init, domain=Domain(2 * np.pi, 1),
                            initial_dx=init_dx)
    states["witness"] = StateBundle(sysk, phi, NONSEMISIMPLE, np.zeros(1), np.ones(1),
                                    REGION_1D,
                                    notes="u(0,x0) = 0, v(0,x0) = -c/(2 alpha), alpha c dx u > 0")
    sys0 = kgz(0.0, c)

    def init0(x):
        return np.array([0.1 * math.sin(x[0]), 0.05 * math.cos(x[0]), 0.0, 0.0])

    phi0 = ReferenceSolution(initial=init0, domain=Domain(2 * np.pi, 1))
    states["hyperbolic"] = StateBundle(sys0, phi0, PERSISTENT, np.zeros(1), np.ones(1),
                                       REGION_1D, notes="alpha = 0: spectrum {+-1, +-c}")
    return states


def _control_states():
    sysc = symmetric_control()
    phi, vec = constant_reference((0.3, 0.1))
    return {"default": StateBundle(sysc, phi, PERSISTENT, np.zeros(1), np.ones(1),
                                   REGION_1D, vec,
                                   e_vec=np.array([1j, 1.0]) / np.sqrt(2))}


@dataclass
class ExampleRegistryEntry:
    name: str
    description: str
    make_states: Callable
    default_params: dict = dfield(default_factory=dict)
    symbol_only: bool = False
    citation: str = ""


REGISTRY = {
    "burgers1d": ExampleRegistryEntry(
        "burgers1d", "2x2 Burgers family [[u1,-b^2 u2],[u2,u1]]",
        lambda **kw: _burgers_states(),
        citation="one-dimensional Burgers systems"),
    "burgers2d": ExampleRegistryEntry(
        "burgers2d", "two-dimensional Burgers family (classification only)",
        lambda **kw: _burgers2d_states(), symbol_only=True,
        citation="two-dimensional Burgers systems"),
    "vdw": ExampleRegistryEntry(
        "vdw", "isentropic Euler with a Van der Waals pressure",
        lambda **kw: _vdw_states(),
        citation="Van der Waals gas dynamics"),
    "kgz": ExampleRegistryEntry(
        "kgz", "Klein-Gordon coupled to a wave equation, states (u,v,n,m)",
        lambda alpha=1.0, c=0.5, **kw: _kgz_states(alpha, c),
        default_params={"alpha": 1.0, "c": 0.5},
        citation="Klein-Gordon-Zakharov systems"),
    "symmetric-control": ExampleRegistryEntry(
        "symmetric-control", "symmetric hyperbolic control system",
        lambda **kw: _control_states(),
        citation="stable control for the ladder experiment"),
}


def list_examples() -> list[str]:
    return sorted(REGISTRY)


def get_states(name: str, **params) -> dict[str, StateBundle]:
    if name not in REGISTRY:
        raise KeyError(f"unknown example {name!r}; known: {', '.join(list_examples())}")
    entry = REGISTRY[name]
    kw = dict(entry.default_params)
    kw.update(params)
    return entry.make_states(**kw)


def get_state(name: str, state: str, **params) -> StateBundle:
    states = get_states(name, **params)
    if state not in states:
        raise KeyError(f"example {name!r} has states {sorted(states)}, not {state!r}")
    return states[state]
