"""One-dimensional measure engine.

Normalization of exp(-V) dx on a truncated window, moments, Psi_1 norms,
Cramer tilting and its inversion, certified log-Sobolev lower bounds,
total-variation and L^p density-ratio quadrature, and the first/second
order decomposition of potential increments.

Every measure carries one cached composite Gauss-Legendre rule, adapted
at construction; all later expectations are dot products over it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import logsumexp

from . import quadrature
from .errors import (DegenerateWindow, InvalidBound, MissingDerivative,
                     NonIntegrable, NotAbsolutelyContinuous,
                     NotSubExponential, NotWeaklyGaussian, OutOfRange,
                     QuadratureDiverges, TiltDiverges)
from .potentials import C2, LIPSCHITZ, Potential1D

TAIL_TOL = 1e-12        # admissible relative mass outside the window
NORMALIZATION_TOL = 1e-10
PSI1_CAP = 1e6
PSI1_RTOL = 1e-8


def _tail_estimate(potential: Potential1D, x: float, side: int, log_z: float) -> float:
    """Upper estimate of the normalized mass beyond x (side=+1 right, -1 left).

    Uses exp(-V(x)) / V'(x), the exact tail of the tangent-line
    extrapolation; an upper bound whenever V is convex beyond x.
    Returns inf when the potential is not increasing outward.
    """
    if potential.dv is not None:
        slope = side * float(potential.dv(x))
    else:
        h = 1e-6 * max(1.0, abs(x))
        slope = side * float((potential.v(x) - potential.v(x - side * h)) / (side * h))
    if slope <= 0:
        return math.inf
    return math.exp(-float(potential.v(x)) - log_z) / slope


class Measure1D:
    """Normalized probability measure exp(-V(x) - log_z) dx on [a, b]."""

    def __init__(self, potential: Potential1D, window, nodes, weights, log_z):
        self.potential = potential
        self.window = (float(window[0]), float(window[1]))
        self.nodes = nodes
        self.weights = weights
        self.log_z = float(log_z)
        self._log_dens_nodes = -np.asarray(potential.v(nodes), float) - self.log_z
        self.mass = weights * np.exp(self._log_dens_nodes)
        self.barycenter = float(self.mass @ nodes)
        self._moments: dict = {}
        self._inv_cdf = None

    # -- basic quadrature -----------------------------------------------------

    def expect(self, fn: Callable) -> float:
        """E[fn(X)] over the cached rule."""
        return float(self.mass @ np.asarray(fn(self.nodes), float))

    def expect_values(self, values) -> float:
        return float(self.mass @ np.asarray(values, float))

    def rule_with_breakpoints(self, extra_breakpoints=(), rtol=1e-13):
        """A fresh (nodes, prob-mass) rule whose panel edges include the
        given breakpoints; for observables with kinks off the potential's
        own kink set (e.g. shifted-potential increments)."""
        a, b = self.window
        bps = sorted({*self.potential.breakpoints, *extra_breakpoints})

        def fn(x):
            return self.density(x) * (1.0 + x * x)

        edges = quadrature.adaptive_edges(fn, a, b, breakpoints=bps, rtol=rtol)
        nodes, weights = quadrature.panel_rule(edges)
        return nodes, weights * self.density(nodes)

    def integrate(self, fn: Callable, extra_breakpoints=(), rtol=1e-13) -> float:
        """E[fn(X)] on a dedicated rule honoring extra kink locations."""
        nodes, mass = self.rule_with_breakpoints(extra_breakpoints, rtol)
        return float(mass @ np.asarray(fn(nodes), float))

    def log_density(self, x):
        x = np.asarray(x, float)
        out = -np.asarray(self.potential.v(x), float) - self.log_z
        a, b = self.window
        return np.where((x >= a) & (x <= b), out, -np.inf)

    def density(self, x):
        return np.exp(self.log_density(x))

    @property
    def total_mass(self) -> float:
        return float(self.mass.sum())

    def moment(self, p: float) -> float:
        """Absolute moment M_p = E|X|^p, cached."""
        p = float(p)
        if p not in self._moments:
            self._moments[p] = self.expect(lambda x: np.abs(x) ** p)
        return self._moments[p]

    @property
    def var(self) -> float:
        return self.moment(2.0) - self.barycenter ** 2

    # -- sampling -------------------------------------------------------------

    def _build_inv_cdf(self):
        a, b = self.window
        xf = np.linspace(a, b, 8193)
        dens = self.density(xf)
        cdf = np.concatenate(([0.0], np.cumsum((dens[1:] + dens[:-1]) * 0.5 * np.diff(xf))))
        cdf /= cdf[-1]
        keep = np.concatenate(([True], np.diff(cdf) > 1e-15))
        self._inv_cdf = PchipInterpolator(cdf[keep], xf[keep])

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """Inverse-CDF sampling on the quadrature window (rejection-free)."""
        if self._inv_cdf is None:
            self._build_inv_cdf()
        return np.asarray(self._inv_cdf(rng.random(size)), float)

    def __repr__(self):
        return (f"Measure1D({self.potential.family}, window={self.window}, "
                f"log_z={self.log_z:.6g}, barycenter={self.barycenter:.6g})")


# -- construction -------------------------------------------------------------


def _build(potential: Potential1D, window, rtol=1e-13) -> Measure1D:
    a, b = float(window[0]), float(window[1])
    if not b > a:
        raise DegenerateWindow(f"window [{a}, {b}] is degenerate")
    probe = np.linspace(a, b, 4097)
    vmin = float(np.min(np.asarray(potential.v(probe), float)))
    if not math.isfinite(vmin):
        raise NonIntegrable("potential is not bounded below on the window")

    def fn(x):
        return np.exp(-(np.asarray(potential.v(x), float) - vmin)) * (1.0 + x * x)

    edges = quadrature.adaptive_edges(fn, a, b, breakpoints=potential.breakpoints, rtol=rtol)
    nodes, weights = quadrature.panel_rule(edges)
    pot_vals = np.asarray(potential.v(nodes), float)
    z_shift = float(weights @ np.exp(-(pot_vals - vmin)))
    if not (math.isfinite(z_shift) and z_shift > 0):
        raise NonIntegrable("normalization integral is not finite and positive")
    log_z = math.log(z_shift) - vmin
    return Measure1D(potential, (a, b), nodes, weights, log_z)


def normalize(potential: Potential1D, window=None, *, extend: Optional[bool] = None,
              rtol=1e-13) -> Measure1D:
    """Normalize exp(-V) dx on the window into a Measure1D.

    With extend=True (the default when no explicit window is supplied)
    the window grows until the extrapolated tail mass drops below 1e-12;
    an explicit window that fails the tail test raises NonIntegrable
    instead.
    """
    if window is None:
        window = potential.default_window or (-12.0, 12.0)
        if extend is None:
            extend = True
    extend = bool(extend) if extend is not None else False
    if potential.hard_support:
        return _build(potential, window, rtol)

    a, b = float(window[0]), float(window[1])
    for _ in range(200):
        m = _build(potential, (a, b), rtol)
        tail_r = _tail_estimate(potential, b, +1, m.log_z)
        tail_l = _tail_estimate(potential, a, -1, m.log_z)
        if tail_r < TAIL_TOL and tail_l < TAIL_TOL:
            return m
        if not extend:
            raise NonIntegrable(
                f"tail mass beyond [{a}, {b}] is not negligible "
                f"(left {tail_l:.2e}, right {tail_r:.2e})")
        width = b - a
        if tail_r >= TAIL_TOL:
            b += 0.5 * width
        if tail_l >= TAIL_TOL:
            a -= 0.5 * width
    raise NonIntegrable("window extension did not reach negligible tail mass")


def moment(measure: Measure1D, p: float) -> float:
    return measure.moment(p)


# -- Psi_1 norms ---------------------------------------------------------------


def _psi1_on_rule(mass, values, rtol: float = PSI1_RTOL, cap: float = PSI1_CAP) -> float:
    y = np.abs(np.asarray(values, float))
    log_mass = np.log(np.maximum(np.asarray(mass, float), 1e-300))

    def log_mgf(lam: float) -> float:
        return float(logsumexp(y / lam + log_mass))

    if log_mgf(cap) > 1.0:
        raise NotSubExponential(f"E exp(|Y|/{cap:g}) still exceeds e")
    hi = 1.0
    while log_mgf(hi) > 1.0:
        hi *= 4.0
        if hi > cap:
            hi = cap
            break
    lo = hi
    while log_mgf(lo) <= 1.0:
        lo /= 4.0
        if lo < 1e-12:
            return 0.0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if log_mgf(mid) <= 1.0:
            hi = mid
        else:
            lo = mid
    return hi


def psi1_norm(measure: Measure1D, observable: Callable, rtol: float = PSI1_RTOL,
              cap: float = PSI1_CAP) -> float:
    """inf{lambda > 0 : E exp(|Y|/lambda) <= e} by bisection.

    The map lambda -> E exp(|Y|/lambda) is non-increasing, so a single
    bracket-and-bisect applies; expectations run in the log domain.
    """
    return _psi1_on_rule(measure.mass, np.asarray(observable(measure.nodes), float),
                         rtol, cap)


# -- summary statistics ---------------------------------------------------------


@dataclass(frozen=True)
class MeasureStats:
    """Parameters of a single-site measure entering the spin-system bounds."""

    m2: float
    m3: float
    var: float
    d1_psi1: float
    d2_delta: float
    d2_psi1_delta: float
    delta: float
    density_sup: float
    kappa: float
    barycenter: float = 0.0


def _refined_extremum(fn, grid, minimize=True):
    """Grid extremum of fn polished by a local bounded search."""
    from scipy.optimize import minimize_scalar

    vals = np.asarray(fn(grid), float)
    i = int(np.argmin(vals) if minimize else np.argmax(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    if hi <= lo:
        return float(vals[i])
    sgn = 1.0 if minimize else -1.0
    res = minimize_scalar(lambda x: sgn * float(fn(np.array([x]))[0]),
                          bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-10})
    polished = res.fun if minimize else -res.fun
    return float(min(vals[i], polished) if minimize else max(vals[i], polished))


def _windowed_sup_abs_d2(potential: Potential1D, nodes, delta: float):
    """Y(x) = sup over [x-delta, x+delta] of |V''|, on the quadrature nodes."""
    offsets = np.linspace(-delta, delta, 65)
    vals = np.abs(np.asarray(potential.d2v(nodes[:, None] + offsets[None, :]), float))
    return vals.max(axis=1)


def _w2_values(potential: Potential1D, nodes, eps: float):
    w = np.asarray(potential.v(nodes + eps), float) - np.asarray(potential.v(nodes), float)
    return np.abs((np.expm1(-w) + w) * 2.0 / eps ** 2)


def stats(measure: Measure1D, delta: float) -> MeasureStats:
    """Moments, Psi_1 norms of |V'|, windowed second-derivative parameters,
    density sup and curvature defect of the measure.

    Non-C2 potentials get their second-order parameters through the
    increment decomposition (sup over a small grid of eps in (0, delta]),
    so Lipschitz potentials like |x| are handled without V''.
    """
    pot = measure.potential
    m2 = measure.moment(2.0)
    m3 = measure.moment(3.0)
    if pot.dv is None:
        raise MissingDerivative("stats needs a first derivative (declare dv)")
    d1 = psi1_norm(measure, lambda x: np.asarray(pot.dv(x), float))

    a, b = measure.window
    grid = np.linspace(a, b, 4097)
    density_sup = _refined_extremum(measure.density, grid, minimize=False)

    if pot.smoothness == C2 and pot.d2v is not None:
        y0 = _windowed_sup_abs_d2(pot, measure.nodes, delta)
        d2_delta = measure.expect_values(y0)
        d2_psi1 = _psi1_of_values(measure, y0)
        sampled_inf = _refined_extremum(lambda x: np.asarray(pot.d2v(x), float), grid)
        hess_lo = max(sampled_inf, pot.hessian_lower)
        kappa = max(0.0, -hess_lo)
    else:
        eps_grid = [delta * f for f in (1.0, 0.5, 0.25, 0.125)]
        eps_grid += [-e for e in eps_grid]
        d2_delta = 0.0
        d2_psi1 = 0.0
        for e in eps_grid:
            # W2's kinks sit at the potential's kinks shifted by -eps
            extra = [bp - e for bp in pot.breakpoints]
            nodes, mass = measure.rule_with_breakpoints(extra)
            w2 = _w2_values(pot, nodes, e)
            d2_delta = max(d2_delta, float(mass @ w2))
            d2_psi1 = max(d2_psi1, _psi1_on_rule(mass, w2))
        kappa = max(0.0, -pot.hessian_lower) if math.isfinite(pot.hessian_lower) else math.nan
    return MeasureStats(m2=m2, m3=m3, var=measure.var, d1_psi1=d1,
                        d2_delta=float(d2_delta), d2_psi1_delta=float(d2_psi1),
                        delta=float(delta), density_sup=float(density_sup),
                        kappa=float(kappa), barycenter=measure.barycenter)


def _psi1_of_values(measure: Measure1D, values) -> float:
    vals = np.abs(np.asarray(values, float))
    return psi1_norm(measure, lambda x, _v=vals: _v)


# -- tilting ---------------------------------------------------------------------


def tilt(measure: Measure1D, a: float) -> Measure1D:
    """The exponential tilt: density multiplied by exp(a x), renormalized.

    The window is auto-extended until the tilted tail invariant holds.
    """
    a = float(a)
    if a == 0.0:
        return measure
    a_minus, a_plus = measure.potential.growth_slopes()
    if not (a_minus + 1e-12 < a < a_plus - 1e-12):
        raise TiltDiverges(
            f"tilt a={a} outside the integrability interval ({a_minus}, {a_plus})")
    return normalize(measure.potential.tilted(a), measure.window, extend=True)


def recentred_tilt(measure: Measure1D, a: float) -> Measure1D:
    """The tilt translated back to barycenter 0."""
    t = tilt(measure, a)
    s_a = t.barycenter
    win = (t.window[0] - s_a, t.window[1] - s_a)
    return normalize(t.potential.shifted(s_a), win,
                     extend=not t.potential.hard_support)


def invert_tilt(measure: Measure1D, s: float, tol: float = 1e-10,
                max_iter: int = 200) -> float:
    """The tilt parameter a(s) with barycenter(tilt(mu, a)) = s.

    Newton iteration with derivative Var(tilt(mu, a)), safeguarded by a
    bracket and bisection fallback.
    """
    s = float(s)
    a_minus, a_plus = measure.potential.growth_slopes()
    if measure.potential.hard_support and not (measure.window[0] < s < measure.window[1]):
        raise OutOfRange(f"mean {s} outside the support {measure.window}")

    cache: dict = {}

    def bary_var(a: float):
        if a not in cache:
            if abs(a) > 1e7:
                raise OutOfRange(f"mean {s} unreachable (tilt parameter exploded)")
            try:
                t = tilt(measure, a)
            except NonIntegrable as exc:
                raise OutOfRange(f"mean {s} unreachable: {exc}") from exc
            cache[a] = (t.barycenter, t.var)
        return cache[a]

    # bracket s between the barycenters of two tilts; approach a finite
    # integrability boundary geometrically
    b0, _ = bary_var(0.0)
    if abs(b0 - s) <= tol:
        return 0.0

    def advance(a, towards_plus: bool):
        bound = a_plus if towards_plus else a_minus
        if math.isfinite(bound):
            nxt = a + 0.5 * (bound - a)
            if abs(bound - nxt) < 1e-10 * (1.0 + abs(bound)):
                raise OutOfRange(
                    f"mean {s} unreachable within tilts ({a_minus}, {a_plus})")
            return nxt
        return (1.0 if a == 0.0 else 2.0 * a) if towards_plus else (-1.0 if a == 0.0 else 2.0 * a)

    if s > b0:
        lo, hi = 0.0, advance(0.0, True)
        while bary_var(hi)[0] < s:
            lo, hi = hi, advance(hi, True)
    else:
        lo, hi = advance(0.0, False), 0.0
        while bary_var(lo)[0] > s:
            lo, hi = advance(lo, False), lo

    a = 0.5 * (lo + hi)
    for _ in range(max_iter):
        bar, var = bary_var(a)
        if abs(bar - s) <= tol:
            return a
        if bar < s:
            lo = a
        else:
            hi = a
        a_newton = a + (s - bar) / max(var, 1e-300)
        a = a_newton if lo < a_newton < hi else 0.5 * (lo + hi)
    raise OutOfRange(f"tilt inversion did not converge to {s}")


# -- certified LSI lower bounds ---------------------------------------------------


def bakry_emery_lsi(potential: Potential1D, window=None) -> Optional[float]:
    """inf V'' if positive (a certified LSI(rho) lower bound), else None.

    A declared hessian_lower overrides the sampled infimum when tighter.
    """
    lo, hi = window or potential.default_window or (-12.0, 12.0)
    candidates = []
    if potential.d2v is not None:
        grid = np.linspace(lo, hi, 8193)
        candidates.append(_refined_extremum(
            lambda x: np.asarray(potential.d2v(x), float), grid))
    if math.isfinite(potential.hessian_lower):
        candidates.append(potential.hessian_lower)
    if not candidates:
        return None
    rho = max(candidates)
    return rho if rho > 0 else None


def holley_stroock(rho: float, l1: float, l2: float) -> float:
    """Bounded-perturbation transfer: rho / (L1 L2)."""
    if l1 < 1.0 or l2 < 1.0:
        raise InvalidBound("Holley-Stroock factors must be >= 1")
    return rho / (l1 * l2)


def weakly_gaussian_certificate(alpha: float, beta: float, omega: float,
                                potential: Optional[Potential1D] = None,
                                window=None) -> dict:
    """Uniform-in-tilt bounds for an (alpha, beta, omega) weakly Gaussian
    measure: rho_lower = alpha e^{-omega} for every recentred tilt,
    kappa = rho_lower / 8, and the two-sided Hessian level
    d2_upper = max(beta, kappa).

    When a potential is supplied, its convex decomposition and the
    Hessian sandwich -kappa <= V'' <= beta are validated first.
    """
    if alpha <= 0 or beta <= 0 or omega < 0:
        raise NotWeaklyGaussian("need alpha, beta > 0 and omega >= 0")
    rho_lower = alpha * math.exp(-omega)
    kappa = rho_lower / 8.0
    if potential is not None:
        if potential.convex_decomposition is None:
            raise NotWeaklyGaussian("potential declares no convex decomposition")
        dec_alpha, dec_omega = potential.convex_decomposition[2], potential.convex_decomposition[3]
        if dec_alpha < alpha - 1e-12 or dec_omega > omega + 1e-12:
            raise NotWeaklyGaussian("declared decomposition weaker than requested (alpha, omega)")
        potential.check_invariants(window=window)
        if potential.d2v is not None:
            lo, hi = window or potential.default_window or (-12.0, 12.0)
            grid = np.linspace(lo, hi, 4097)
            d2 = np.asarray(potential.d2v(grid), float)
            if d2.min() < -kappa - 1e-9 or d2.max() > beta + 1e-9:
                raise NotWeaklyGaussian("sampled V'' leaves [-kappa, beta]")
    return {"rho_lower": rho_lower, "kappa": kappa, "d2_upper": max(beta, kappa)}


# -- distances and density ratios ---------------------------------------------------


def tv_distance(mu1: Measure1D, mu2: Measure1D) -> float:
    """Total variation: half the L^1 distance of the densities."""
    a = min(mu1.window[0], mu2.window[0])
    b = max(mu1.window[1], mu2.window[1])
    bps = set(mu1.potential.breakpoints) | set(mu2.potential.breakpoints)
    bps |= set(mu1.window) | set(mu2.window)

    def fn(x):
        return np.abs(mu1.density(x) - mu2.density(x))

    edges = quadrature.adaptive_edges(fn, a, b, breakpoints=sorted(bps), rtol=1e-11)
    nodes, weights = quadrature.panel_rule(edges)
    return min(1.0, 0.5 * float(weights @ fn(nodes)))


def lp_density_ratio(mu2: Measure1D, mu1: Measure1D, p: float,
                     max_extensions: int = 60) -> float:
    """(integral of (dmu2/dmu1)^p dmu1)^(1/p); >= 1 by Jensen.

    The integrand exp(phi) with phi = -p(V2 + log Z2) + (p-1)(V1 + log Z1)
    is integrated on a window extended until its own tails are negligible;
    a phi that never decays raises QuadratureDiverges.
    """
    if p <= 1.0:
        raise InvalidBound("lp_density_ratio needs p > 1")
    p = float(p)
    pot1, pot2 = mu1.potential, mu2.potential

    if pot2.hard_support and pot1.hard_support:
        if mu2.window[0] < mu1.window[0] - 1e-12 or mu2.window[1] > mu1.window[1] + 1e-12:
            raise NotAbsolutelyContinuous("support of mu2 exceeds the support of mu1")

    def phi(x):
        x = np.asarray(x, float)
        return (-p * (np.asarray(pot2.v(x), float) + mu2.log_z)
                + (p - 1.0) * (np.asarray(pot1.v(x), float) + mu1.log_z))

    # integration region: mu2's support, extended for soft supports
    a, b = mu2.window
    if not pot2.hard_support:
        a, b = min(a, mu1.window[0]), max(b, mu1.window[1])
    if pot1.hard_support:
        if not pot2.hard_support:
            # a.c. requires mu2's (soft) tails to vanish outside mu1's support
            probes = np.array([mu1.window[0] - 0.05 * (b - a), mu1.window[1] + 0.05 * (b - a)])
            if np.any(mu2.density(probes) > 1e-15):
                raise NotAbsolutelyContinuous("mu2 has mass outside the support of mu1")
        a = max(a, mu1.window[0])
        b = min(b, mu1.window[1])

    width0 = b - a
    soft = not pot2.hard_support and not pot1.hard_support
    for _ in range(max_extensions):
        probe = np.linspace(a, b, 4097)
        shift = float(np.max(phi(probe)))
        if not soft:
            break
        # the integrand decays rightward iff phi is decreasing at b, leftward
        # iff phi is increasing at a; tail ~ exp(phi - shift)/|phi'|
        h = 1e-6 * (b - a)
        d_r = float((phi(b) - phi(b - h)) / h)
        d_l = float((phi(a + h) - phi(a)) / h)
        tail_r = (math.exp(min(float(phi(b)) - shift, 700.0)) / (-d_r)
                  if d_r < 0 else math.inf)
        tail_l = (math.exp(min(float(phi(a)) - shift, 700.0)) / d_l
                  if d_l > 0 else math.inf)
        interior = b - a  # overestimate of the shifted integral (max is 1)
        if tail_r < 1e-13 * interior and tail_l < 1e-13 * interior:
            break
        if (b - a) > 40.0 * width0:
            raise QuadratureDiverges(
                f"(dmu2/dmu1)^{p} dmu1 does not stabilize under window extension")
        if tail_r >= 1e-13 * interior:
            b += 0.5 * (b - a)
        if tail_l >= 1e-13 * interior:
            a -= 0.5 * (b - a)
    bps = sorted(x for x in set(pot1.breakpoints) | set(pot2.breakpoints) if a < x < b)

    def fn(x):
        return np.exp(phi(x) - shift)

    edges = quadrature.adaptive_edges(fn, a, b, breakpoints=bps, rtol=1e-12)
    nodes, weights = quadrature.panel_rule(edges)
    total = float(weights @ fn(nodes))
    if not math.isfinite(total) or total <= 0:
        raise QuadratureDiverges("density-ratio integral overflowed")
    return math.exp((shift + math.log(total)) / p)


# -- increment decomposition (non-smooth second-order control) -------------------------


def w_decompose(potential: Potential1D, eps: float):
    """First/second-order splitting of the increment V(x+eps) - V(x).

    Returns (W1, W2) with the exact identity
    V(x+eps) - V(x) = eps W1(x) + (eps^2/2) W2(x) and the exact centering
    integral of W1 exp(-V) dx = 0.
    """
    if eps == 0.0:
        raise InvalidBound("eps must be nonzero")
    eps = float(eps)
    v = potential.v

    def w1(x):
        x = np.asarray(x, float)
        w = np.asarray(v(x + eps), float) - np.asarray(v(x), float)
        return -np.expm1(-w) / eps

    def w2(x):
        x = np.asarray(x, float)
        w = np.asarray(v(x + eps), float) - np.asarray(v(x), float)
        return (np.expm1(-w) + w) * 2.0 / eps ** 2

    return w1, w2
