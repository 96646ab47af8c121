"""Branching data of a coalescing eigenvalue pair and the associated growth rates.

Near a transition point the characteristic polynomial factors as
(lambda - mu)^2 = -(t - tau_star) e(t,x,xi,lambda): mu_star solves
dP/dlambda = 0, tau_star solves P(mu_star) = 0 in t, and the e-factor is a
ratio of two explicit integrals of jet entries.  From these come the branch
eigenvalues, the degeneracy-dependent growth rates gamma+- and the growth
envelopes exp(gamma ((t - t*)_+^{l+1} - (tau - t*)_+^{l+1})).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as npoly

from .system_model import as_field

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_GL01_NODES = 0.5 * (_GL_NODES + 1.0)
_GL01_WEIGHTS = 0.5 * _GL_WEIGHTS


class NewtonError(RuntimeError):
    def __init__(self, msg, residual):
        super().__init__(f"{msg} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class BranchData:
    """Implicit branching data frozen at one (x, xi)."""

    mu: float
    tau_star: float
    e0: float
    f0: float
    newton_iters: int
    newton_residual: float
    negative_tau_flag: bool = False

    def as_dict(self) -> dict:
        return {"mu": self.mu, "tau_star": self.tau_star, "e0": self.e0, "f0": self.f0,
                "newton_iters": self.newton_iters, "newton_residual": self.newton_residual,
                "negative_tau_flag": self.negative_tau_flag}


@dataclass
class GrowthEnvelope:
    """Rates gamma- <= gamma+ and the transition time entering the envelope."""

    gamma_minus: Callable | float
    gamma_plus: Callable | float
    ell: float
    t_star: Callable | float = 0.0

    def rate(self, which: str, x=0.0, xi=0.0) -> float:
        g = self.gamma_minus if which == "minus" else self.gamma_plus
        return float(g(x, xi)) if callable(g) else float(g)

    def t_star_at(self, x=0.0, xi=0.0) -> float:
        return float(self.t_star(x, xi)) if callable(self.t_star) else float(self.t_star)


def _dcoeffs_dt(field, t, x, xi, step=1e-4):
    d = lambda s: (field.coeffs(t + s, x, xi) - field.coeffs(t - s, x, xi)) / (2 * s)
    return (4.0 * d(step / 2) - d(step)) / 3.0


def solve_mu_star(sys, phi, t, x, xi, lam_init, tol: float = 1e-11,
                  maxiter: int = 50) -> float:
    """Newton on lambda -> dP/dlambda(t,x,xi,lambda) starting from lam_init."""
    field = as_field(sys, phi)
    c = field.coeffs(t, x, xi)
    c1 = npoly.polyder(c)
    c2 = npoly.polyder(c, 2)
    lam = float(np.real(lam_init))
    for it in range(maxiter):
        g = float(np.real(npoly.polyval(lam, c1)))
        if abs(g) <= tol:
            return lam
        gp = float(np.real(npoly.polyval(lam, c2)))
        if gp == 0.0:
            raise NewtonError("mu_star Newton hit a vanishing second derivative", abs(g))
        lam -= g / gp
        if not np.isfinite(lam):
            raise NewtonError("mu_star Newton diverged", np.inf)
    raise NewtonError("mu_star Newton did not converge", abs(float(np.real(npoly.polyval(lam, c1)))))


def solve_tau_star(sys, phi, x, xi, tol: float = 1e-11, lam_init=None,
                   maxiter: int = 50, t_init: float = 0.0) -> float:
    """Newton on t -> P(t, x, xi, mu_star(t,x,xi)), from t = 0.

    On the Newton path dP/dlambda(mu_star) = 0, so dP/dt matters alone:
    g'(t) = P_t(t, x, xi, mu_star(t)).
    """
    field = as_field(sys, phi)
    if lam_init is None:
        vals = field.spectrum_at(t_init, x, xi).real
        lam_init = _closest_pair_mean(vals)
    t = float(t_init)
    mu = float(lam_init)
    for _ in range(maxiter):
        mu = solve_mu_star(field, None, t, x, xi, mu, tol=tol)
        g = float(np.real(npoly.polyval(mu, field.coeffs(t, x, xi))))
        if abs(g) <= tol:
            if t < -tol * 10:
                warnings.warn(f"tau_star = {t:.3e} < 0: hyperbolicity already violated at t = 0")
            return t
        gp = float(np.real(npoly.polyval(mu, _dcoeffs_dt(field, t, x, xi))))
        if gp == 0.0 or not np.isfinite(gp):
            raise NewtonError("tau_star Newton hit a vanishing time derivative", abs(g))
        t -= g / gp
        if not np.isfinite(t):
            raise NewtonError("tau_star Newton diverged", np.inf)
    raise NewtonError("tau_star Newton did not converge", abs(g))


def _closest_pair_mean(vals: np.ndarray) -> float:
    vals = np.sort(np.asarray(vals, dtype=float))
    if vals.size < 2:
        return float(vals[0])
    gaps = np.diff(vals)
    i = int(np.argmin(gaps))
    return float(0.5 * (vals[i] + vals[i + 1]))


def eval_e_factor(sys, phi, t, x, xi, lam, mu: float | None = None,
                  tau_star: float | None = None, tol: float = 1e-12) -> float:
    """e = e1/e2 with the two 16-node Gauss-Legendre integrals of the lemma:
    e1 = int_0^1 P_t((1-s) tau* + s t, x, xi, mu) ds,
    e2 = int_0^1 (1-s) P_lamlam(t, x, xi, (1-s) mu + s lam) ds.
    """
    field = as_field(sys, phi)
    if tau_star is None:
        tau_star = solve_tau_star(field, None, x, xi, lam_init=np.real(lam))
    if mu is None:
        mu = solve_mu_star(field, None, tau_star, x, xi, np.real(lam))
    e1 = 0.0
    for s, w in zip(_GL01_NODES, _GL01_WEIGHTS):
        ts = (1.0 - s) * tau_star + s * t
        pt = float(np.real(npoly.polyval(mu, _dcoeffs_dt(field, ts, x, xi))))
        e1 += w * pt
    e2 = 0.0 + 0.0j
    c2 = npoly.polyder(field.coeffs(t, x, xi), 2)
    for s, w in zip(_GL01_NODES, _GL01_WEIGHTS):
        lam_s = (1.0 - s) * mu + s * lam
        e2 += w * (1.0 - s) * npoly.polyval(lam_s, c2)
    if abs(e2) < tol:
        raise ValueError(f"degenerate quadratic part: |e2| = {abs(e2):.3e} < {tol:g}")
    e = e1 / e2
    return float(np.real(e))


def compute_branch_data(sys, phi, x, xi, lam_init=None, tol: float = 1e-11) -> BranchData:
    """Solve mu_star/tau_star and freeze the e-factor at lambda = mu."""
    field = as_field(sys, phi)
    if lam_init is None:
        lam_init = _closest_pair_mean(field.spectrum_at(0.0, x, xi).real)
    tau = solve_tau_star(field, None, x, xi, tol=tol, lam_init=lam_init)
    mu = solve_mu_star(field, None, tau, x, xi, lam_init, tol=tol)
    e0 = eval_e_factor(field, None, tau, x, xi, mu, mu=mu, tau_star=tau)
    resid = abs(float(np.real(npoly.polyval(mu, field.coeffs(tau, x, xi)))))
    return BranchData(mu=mu, tau_star=tau, e0=e0, f0=e0,
                      newton_iters=0, newton_residual=resid,
                      negative_tau_flag=bool(tau < -10 * tol))


def branch_eigenvalues(branch: BranchData, t: float, x=0.0, xi=0.0) -> tuple[complex, complex]:
    """lambda+- = mu +- i((t-tau*)_+ e0)^(1/2) past the transition, real before it."""
    dt = t - branch.tau_star
    if dt >= 0.0:
        s = 1j * np.sqrt(dt * branch.e0)
    else:
        s = np.sqrt(-dt * branch.e0)
    return complex(branch.mu + s), complex(branch.mu - s)


def _hermitian_sup(field, t, x, xi, lam0):
    a = field.symbol(t, x, xi).astype(complex)
    m = 1j * (a - lam0 * np.eye(a.shape[0]))
    herm = 0.5 * (m + m.conj().T)
    return float(np.max(np.abs(np.linalg.eigvalsh(herm))))


def lipschitz_c0(field, x0, xi0, lam0, delta: float = 0.1, nsamples: int = 8,
                 seed: int = 0) -> float:
    """Lipschitz slope of the Hermitian-part eigenvalue bound over the delta-ball."""
    rng = np.random.default_rng(seed)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    xi0 = np.atleast_1d(np.asarray(xi0, dtype=float))
    h0 = _hermitian_sup(field, 0.0, x0, xi0, lam0)
    c0 = 0.0
    for _ in range(nsamples):
        dx = rng.normal(size=x0.shape)
        dxi = rng.normal(size=xi0.shape)
        dx *= delta / max(np.linalg.norm(dx), 1e-12)
        dxi *= delta / max(np.linalg.norm(dxi), 1e-12)
        h = _hermitian_sup(field, 0.0, x0 + dx, xi0 + dxi, lam0)
        c0 = max(c0, abs(h - h0) / (np.sum(np.abs(dx)) + np.sum(np.abs(dxi))))
    return c0


def growth_rate(classification, branch: BranchData | None, x=None, xi=None,
                field=None, c0: float | None = None) -> tuple[float, float]:
    """(gamma-, gamma+) for the classified regime.

    ell = 0:   Im lambda0 -+ c0 (|x - x0| + |xi - xi0|), c0 a sampled Lipschitz slope;
    ell = 1/2: both equal (2/3) f0^{1/2};
    ell = 1:   both equal Im(dt lambda+)/2, from the quadratic (p3) in dt lambda.
    """
    regime = classification.regime
    if regime in ("HyperbolicPersistent", "Indeterminate"):
        raise ValueError(f"no growth rate in regime {regime}")
    w = classification.witness
    if classification.ell == 0.0:
        lam0 = complex(w.lam)
        if c0 is None:
            c0 = lipschitz_c0(field, w.x, w.xi, lam0) if field is not None else 0.0
        off = 0.0
        if x is not None:
            off += float(np.sum(np.abs(np.atleast_1d(x) - w.x)))
        if xi is not None:
            off += float(np.sum(np.abs(np.atleast_1d(xi) - w.xi)))
        return lam0.imag - c0 * off, lam0.imag + c0 * off
    if classification.ell == 0.5:
        if branch is None:
            raise ValueError("ell = 1/2 rate requires branch data")
        g = (2.0 / 3.0) * np.sqrt(branch.f0)
        return float(g), float(g)
    jet = classification.jet
    disc = np.real(jet.P_tt * jet.P_lamlam - jet.P_tlam ** 2)
    if disc <= 0:
        raise ValueError("jet discriminant is not positive; no branching rate")
    im_dt_lam = np.sqrt(disc) / abs(np.real(jet.P_lamlam))
    g = 0.5 * im_dt_lam
    return float(g), float(g)


def eval_growth(env: GrowthEnvelope, gamma_choice: str, tau: float, t: float,
                x=0.0, xi=0.0) -> float:
    """Envelope value exp(gamma ((t - t*)_+^{l+1} - (tau - t*)_+^{l+1})), tau <= t."""
    if tau > t:
        raise ValueError("eval_growth requires tau <= t")
    g = env.rate(gamma_choice, x, xi)
    ts = env.t_star_at(x, xi)
    p = env.ell + 1.0
    return float(np.exp(g * (max(t - ts, 0.0) ** p - max(tau - ts, 0.0) ** p)))


def make_t_star(sys, phi, x0, eps: float, h: float, xi0=None):
    """Transition time t*(eps,x,xi) = eps^-h theta*(eps^{1-h} x, xi), theta*(y,xi) = tau*(x0+y, xi)."""
    field = as_field(sys, phi)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))

    def t_star(x, xi):
        y = eps ** (1.0 - h) * np.atleast_1d(np.asarray(x, dtype=float))
        return eps ** (-h) * max(solve_tau_star(field, None, x0 + y, xi), 0.0)

    return t_star
