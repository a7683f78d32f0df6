"""Reduction of arbitrary mean-spin and boundary terms to the zero-spin
case for the weakly-interacting model.

The system F(b_i + u_0 + 2 (A t)_i) = t_i, sum t_i = s n is solved by
Banach iteration of the map G (t -> barycenters after re-tilting onto
the mean-spin hyperplane); the contraction rate is bounded by
2 Mbar_2 |A|_op where Mbar_2 = sup_a Var of the tilted site.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (MaxIterations, NoContraction, TiltDiverges, Unreachable,
                     ValidationError)
from .measure1d import Measure1D, normalize
from . import quadrature


class TiltedFamily:
    """Barycenter and variance of every exponential tilt of one site.

    A single quadrature rule is adapted to the most extreme tilts in the
    current range and shared by all evaluations, so F(a) = barycenter of
    the a-tilt and F'(a) = its variance are exact (to quadrature) and
    cost one vectorized pass each.
    """

    def __init__(self, site: Measure1D, a_cap: float = 1.0):
        self.site = site
        self._a_minus, self._a_plus = site.potential.growth_slopes()
        self.a_cap = 0.0
        self._nodes = None
        self._log_base = None
        self._ensure(a_cap)

    def _ensure(self, a_cap: float):
        a_cap = abs(float(a_cap))
        if self._nodes is not None and a_cap <= self.a_cap:
            return
        margin = 1e-9 + 1e-9 * a_cap
        if a_cap >= min(self._a_plus, -self._a_minus) - margin:
            raise TiltDiverges(
                f"tilts up to |a|={a_cap:g} leave the integrability interval "
                f"({self._a_minus:g}, {self._a_plus:g})")
        pot = self.site.potential
        a, b = self.site.window
        if not pot.hard_support:
            # widen until both extreme tilted potentials rise >= 35 above
            # their minimum and still climb at the window ends
            for _ in range(300):
                grid = np.linspace(a, b, 1025)
                vg = np.asarray(pot.v(grid), float)
                ok = True
                for aa in (a_cap, -a_cap):
                    vt = vg - aa * grid
                    if (vt[-1] - vt.min() < 35.0 or vt[0] - vt.min() < 35.0
                            or vt[-1] <= vt[-2] or vt[0] <= vt[1]):
                        ok = False
                        break
                if ok:
                    break
                width = b - a
                a -= 0.4 * width
                b += 0.4 * width
        probe = np.linspace(a, b, 2049)
        vp = np.asarray(pot.v(probe), float)
        edge_sets = []
        for aa in (0.0, a_cap, -a_cap):
            shift = float(np.max(-vp + aa * probe))

            def fn(x, _a=aa, _sh=shift):
                x = np.asarray(x, float)
                e = -np.asarray(pot.v(x), float) + _a * x - _sh
                return np.exp(np.minimum(e, 50.0)) * (1.0 + x * x)

            edge_sets.append(quadrature.adaptive_edges(
                fn, a, b, breakpoints=pot.breakpoints, rtol=1e-13))
        edges = np.unique(np.concatenate(edge_sets))
        nodes, weights = quadrature.panel_rule(edges)
        self._nodes = nodes
        self._log_base = np.log(weights) - np.asarray(pot.v(nodes), float)
        self.a_cap = a_cap

    def _moments(self, a: float):
        self._ensure(abs(a) * 1.25 + 1e-6)
        lw = self._log_base + a * self._nodes
        lw = lw - lw.max()
        w = np.exp(lw)
        z = w.sum()
        m1 = float((w @ self._nodes) / z)
        m2 = float((w @ (self._nodes * self._nodes)) / z)
        return m1, m2 - m1 * m1

    def barycenter(self, a: float) -> float:
        return self._moments(a)[0]

    def variance(self, a: float) -> float:
        return self._moments(a)[1]

    def invert(self, s: float, tol: float = 1e-12, max_iter: int = 200) -> float:
        """a with barycenter(a) = s (Newton, bisection fallback)."""
        a = 0.0
        lo = hi = None
        for _ in range(max_iter):
            bar, var = self._moments(a)
            if abs(bar - s) <= tol:
                return a
            if bar < s:
                lo = a if lo is None else max(lo, a)
            else:
                hi = a if hi is None else min(hi, a)
            step = (s - bar) / max(var, 1e-300)
            a_new = a + step
            if lo is not None and hi is not None and not (lo < a_new < hi):
                a_new = 0.5 * (lo + hi)
            elif abs(a_new) > 1e8:
                raise Unreachable(f"mean {s} unreachable by exponential tilts")
            try:
                self._ensure(abs(a_new) * 1.25 + 1e-6)
            except TiltDiverges as exc:
                raise Unreachable(str(exc)) from exc
            a = a_new
        raise Unreachable(f"tilt inversion did not converge to mean {s}")


@dataclass
class TiltProblem:
    """Site, interaction, boundary and target mean-spin, plus the
    contraction certificate Mbar_2 (estimated unless supplied)."""

    site: Measure1D
    a_matrix: np.ndarray
    b: Optional[np.ndarray] = None
    s: float = 0.0
    m2_bar: Optional[float] = None

    def __post_init__(self):
        a = np.asarray(self.a_matrix, float)
        n = a.shape[0]
        if a.shape != (n, n):
            raise ValidationError("interaction matrix must be square")
        if not np.array_equal(a, a.T) or np.any(np.diagonal(a) != 0.0):
            raise ValidationError("interaction matrix must be symmetric with zero diagonal")
        self.a_matrix = a
        self.n = n
        if self.b is None:
            self.b = np.zeros(n)
        else:
            self.b = np.asarray(self.b, float)
            if self.b.shape != (n,):
                raise ValidationError("boundary vector has wrong length")
        self.family = TiltedFamily(self.site, a_cap=max(1.0, abs(self.s)))
        if self.m2_bar is None:
            self.m2_bar = estimate_m2_bar(self.family)
        self.a_op = float(np.max(np.abs(np.linalg.eigvalsh(a)))) if n else 0.0
        if not self.a_op < 1.0 / (2.0 * self.m2_bar):
            raise NoContraction(
                f"|A|_op = {self.a_op:.6g} is not < 1/(2 Mbar_2) = "
                f"{1.0 / (2.0 * self.m2_bar):.6g}")


def estimate_m2_bar(family: TiltedFamily, coverage: float = 0.999,
                    grid_points: int = 41, safety: float = 1.05) -> float:
    """sup_a Var of the tilted site over the tilts whose barycenters span
    the central ``coverage`` mass range of the site, times a safety factor."""
    site = family.site
    if site._inv_cdf is None:
        site._build_inv_cdf()
    q = (1.0 - coverage) / 2.0
    lo_q, hi_q = float(site._inv_cdf(q)), float(site._inv_cdf(1.0 - q))
    a_lo = family.invert(lo_q)
    a_hi = family.invert(hi_q)
    grid = np.linspace(a_lo, a_hi, grid_points)
    return safety * max(family.variance(a) for a in grid)


@dataclass
class TiltSolution:
    u0: float
    t: np.ndarray
    residual: float
    iterations: int
    contraction_observed: float


def barycenter_map(problem: TiltProblem, z: float) -> float:
    """F(z): the barycenter of the z-tilted site."""
    return problem.family.barycenter(z)


def solve_u0(problem: TiltProblem, t: np.ndarray, tol: float = 1e-12,
             max_iter: int = 200) -> float:
    """The unique u_0 with sum_i F(b_i + u_0 + 2 (A t)_i) = s n.

    Newton on the strictly increasing map u_0 -> sum F(z_i), bracketed
    bisection fallback.
    """
    t = np.asarray(t, float)
    shift = problem.b + 2.0 * (problem.a_matrix @ t)
    target = problem.s * problem.n
    fam = problem.family

    def total(u0: float):
        fs = vs = 0.0
        for c in shift:
            m, v = fam._moments(u0 + c)
            fs += m
            vs += v
        return fs, vs

    u0 = float(fam.invert(problem.s) - np.mean(shift))
    lo = hi = None
    for _ in range(max_iter):
        fs, vs = total(u0)
        if abs(fs - target) <= tol:
            return u0
        if fs < target:
            lo = u0 if lo is None else max(lo, u0)
        else:
            hi = u0 if hi is None else min(hi, u0)
        u0_new = u0 + (target - fs) / max(vs, 1e-300)
        if lo is not None and hi is not None and not (lo < u0_new < hi):
            u0_new = 0.5 * (lo + hi)
        elif abs(u0_new) > 1e8:
            raise Unreachable(f"mean-spin {problem.s} unreachable")
        u0 = u0_new
    raise Unreachable("inner tilt equation did not converge")


def _g_map(problem: TiltProblem, t: np.ndarray):
    u0 = solve_u0(problem, t)
    z = problem.b + u0 + 2.0 * (problem.a_matrix @ np.asarray(t, float))
    g = np.array([problem.family.barycenter(zi) for zi in z])
    return g, u0, z


def fixed_point_solve(problem: TiltProblem, tol: float = 1e-10,
                      max_iter: int = 500) -> TiltSolution:
    """Banach iteration t <- G(t) from t0 = (s, ..., s)."""
    t = np.full(problem.n, float(problem.s))
    prev_resid = None
    worst_ratio = 0.0
    non_contracting = 0
    for it in range(1, max_iter + 1):
        g, u0, _ = _g_map(problem, t)
        resid = float(np.linalg.norm(g - t))
        if prev_resid is not None and prev_resid > 10 * tol:
            ratio = resid / prev_resid
            worst_ratio = max(worst_ratio, ratio)
            non_contracting = non_contracting + 1 if ratio >= 1.0 else 0
            if non_contracting >= 5:
                raise NoContraction("fixed-point iteration stalled (ratio >= 1 five times)")
        if resid <= tol:
            # report the residual of the returned iterate itself
            g2, u0_2, _ = _g_map(problem, g)
            return TiltSolution(u0=u0_2, t=g, residual=float(np.linalg.norm(g2 - g)),
                                iterations=it, contraction_observed=worst_ratio)
        prev_resid = resid
        t = g
    raise MaxIterations(f"no fixed point within {max_iter} iterations")


def jacobian(problem: TiltProblem, t: np.ndarray):
    """Closed-form dG/dt = (Diag(F'(z)) - F'(z) x F'(z)/|F'(z)|_1) 2A at t.

    Returns (matrix, operator norm, theoretical bound 2 Mbar_2 |A|_op).
    """
    _, u0, z = _g_map(problem, t)
    fp = np.array([problem.family.variance(zi) for zi in z])
    b_mat = np.diag(fp) - np.outer(fp, fp) / fp.sum()
    jac = b_mat @ (2.0 * problem.a_matrix)
    opnorm = float(np.linalg.norm(jac, 2))
    return jac, opnorm, 2.0 * problem.m2_bar * problem.a_op


def reduce_to_zero_spin(problem: TiltProblem, solution: Optional[TiltSolution] = None) -> np.ndarray:
    """Per-site tilts u_i = b_i + u_0 + 2 (A t)_i mapping the mean-spin-s
    ensemble isometrically onto a zero-spin ensemble of tilted sites."""
    if solution is None:
        solution = fixed_point_solve(problem)
    return problem.b + solution.u0 + 2.0 * (problem.a_matrix @ solution.t)


# -- n = 2 verification hook -----------------------------------------------------


def conditioned_density_mismatch_n2(problem: TiltProblem,
                                    solution: Optional[TiltSolution] = None,
                                    grid_size: int = 2001, half_width: float = 12.0):
    """Sup distance between the 1D conditioned density of the original
    mean-spin-s system and the (translated) density of its zero-spin
    reduction, for n = 2. Both sides are normalized on a common grid."""
    if problem.n != 2:
        raise ValidationError("the density-match hook is for n = 2")
    if solution is None:
        solution = fixed_point_solve(problem)
    u = reduce_to_zero_spin(problem, solution)
    site_pot = problem.site.potential
    a12 = float(problem.a_matrix[0, 1])
    b = problem.b
    s = problem.s
    fam = problem.family
    t1, t2 = solution.t
    tau0 = (t1 - t2) / math.sqrt(2.0)

    # reduced sites: recentred tilts of the site at u_1, u_2
    shifts = [fam.barycenter(ui) for ui in u]

    tau = np.linspace(-half_width, half_width, grid_size)

    # sign convention: the reduction z_i = b_i + u_0 + 2(At)_i matches the
    # ensemble whose log-density carries +<b, x> (b enters as a per-site tilt)
    def log_orig(tau_arr):
        x1 = s + tau_arr / math.sqrt(2.0)
        x2 = s - tau_arr / math.sqrt(2.0)
        lv = (-np.asarray(site_pot.v(x1), float) - np.asarray(site_pot.v(x2), float)
              + b[0] * x1 + b[1] * x2 + 2.0 * a12 * x1 * x2)
        return lv

    def log_red(tau_arr):
        y1 = tau_arr / math.sqrt(2.0)
        y2 = -tau_arr / math.sqrt(2.0)
        lv = np.zeros_like(tau_arr)
        for yi, ui, sh in ((y1, u[0], shifts[0]), (y2, u[1], shifts[1])):
            xs = yi + sh
            lv = lv - np.asarray(site_pot.v(xs), float) + ui * xs
        return lv + 2.0 * a12 * y1 * y2

    def normalized(logf, grid):
        lv = logf(grid)
        lv = lv - lv.max()
        f = np.exp(lv)
        z = np.trapz(f, grid)
        return f / z

    f_orig = normalized(log_orig, tau)
    f_red = normalized(log_red, tau - tau0)
    return float(np.max(np.abs(f_orig - f_red)))
