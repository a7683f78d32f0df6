"""Single-site potentials V with derivative and smoothness metadata.

A potential is the data of the energy x -> V(x) defining the measure
exp(-V(x)) dx, together with whatever is declared about it: derivatives,
smoothness class, Lipschitz constant, a certified lower bound on V'',
and (for the weakly-Gaussian family) a convex-plus-bounded splitting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln

from .errors import NotWeaklyGaussian, ValidationError

C2, C1, LIPSCHITZ = "C2", "C1", "lipschitz"
_SMOOTHNESS_ORDER = {LIPSCHITZ: 0, C1: 1, C2: 2}


@dataclass(frozen=True)
class Potential1D:
    """A potential with declared metadata; immutable after construction."""

    v: Callable
    dv: Optional[Callable] = None
    d2v: Optional[Callable] = None
    smoothness: str = C2
    lipschitz_const: Optional[float] = None
    hessian_lower: float = -math.inf
    convex_decomposition: Optional[tuple] = None  # (v_conv, v_pert, alpha, omega)
    breakpoints: tuple = ()
    family: str = "custom"
    default_window: Optional[tuple] = None
    hard_support: bool = False

    def __post_init__(self):
        if self.smoothness not in _SMOOTHNESS_ORDER:
            raise ValidationError(f"unknown smoothness class {self.smoothness!r}")

    # -- transforms ---------------------------------------------------------

    def tilted(self, a: float) -> "Potential1D":
        """The potential of the unnormalized tilt: x -> V(x) - a*x."""
        a = float(a)
        v, dv, d2v = self.v, self.dv, self.d2v
        dec = self.convex_decomposition
        if dec is not None:
            vc, vp, alpha, omega = dec
            dec = ((lambda x, _vc=vc: _vc(x) - a * np.asarray(x, float)), vp, alpha, omega)
        return replace(
            self,
            v=lambda x: v(x) - a * np.asarray(x, float),
            dv=(None if dv is None else (lambda x: dv(x) - a)),
            d2v=d2v,
            lipschitz_const=(None if self.lipschitz_const is None
                             else self.lipschitz_const + abs(a)),
            convex_decomposition=dec,
            family=self.family if self.family.endswith("*") else self.family + "*",
        )

    def shifted(self, c: float) -> "Potential1D":
        """The potential of the translated measure: x -> V(x + c)."""
        c = float(c)
        v, dv, d2v = self.v, self.dv, self.d2v
        dec = self.convex_decomposition
        if dec is not None:
            vc, vp, alpha, omega = dec
            dec = ((lambda x, _f=vc: _f(np.asarray(x, float) + c)),
                   (lambda x, _f=vp: _f(np.asarray(x, float) + c)), alpha, omega)
        win = self.default_window
        if win is not None:
            win = (win[0] - c, win[1] - c)
        return replace(
            self,
            v=lambda x: v(np.asarray(x, float) + c),
            dv=(None if dv is None else (lambda x: dv(np.asarray(x, float) + c))),
            d2v=(None if d2v is None else (lambda x: d2v(np.asarray(x, float) + c))),
            convex_decomposition=dec,
            breakpoints=tuple(b - c for b in self.breakpoints),
            default_window=win,
            family=self.family if self.family.endswith("*") else self.family + "*",
        )

    # -- declared-vs-actual checks -------------------------------------------

    def growth_slopes(self):
        """(a_minus, a_plus): asymptotic slopes of V at -inf / +inf.

        These bound the integrability interval of exponential tilts:
        exp(a*x) dmu is finite iff a_minus < a < a_plus.
        """
        if self.hard_support:
            return -math.inf, math.inf
        big = 1e8

        def slope(x):
            if self.dv is not None:
                return float(self.dv(x))
            h = max(1.0, abs(x) * 1e-8)
            return float((self.v(x) - self.v(x - h)) / h)

        a_plus = slope(big)
        a_minus = slope(-big)
        if a_plus > 1e7:
            a_plus = math.inf
        if a_minus < -1e7:
            a_minus = -math.inf
        return a_minus, a_plus

    def check_invariants(self, window=None, tol=1e-5, n_probe=64, seed=0):
        """Verify the declared metadata against sampled values.

        Raises ValidationError (NotWeaklyGaussian for the decomposition
        checks) on failure.
        """
        lo, hi = window or self.default_window or (-10.0, 10.0)
        rng = np.random.default_rng(seed)
        x = rng.uniform(lo, hi, n_probe)
        x = x[np.min(np.abs(x[:, None] - np.array((lo, hi) + self.breakpoints)[None, :]),
                     axis=1) > 1e-3]
        if self.smoothness == C2 and self.dv is not None and self.d2v is not None:
            h = 1e-5
            fd = (np.asarray(self.dv(x + h)) - np.asarray(self.dv(x - h))) / (2 * h)
            err = np.max(np.abs(fd - np.asarray(self.d2v(x))) / (1 + np.abs(fd)))
            if err > max(tol, 1e-7):
                raise ValidationError(f"d2v disagrees with finite differences of dv ({err:.2e})")
        if math.isfinite(self.hessian_lower) and self.d2v is not None:
            if np.min(np.asarray(self.d2v(x))) < self.hessian_lower - tol:
                raise ValidationError("sampled V'' violates the declared lower bound")
        if self.convex_decomposition is not None:
            vc, vp, alpha, omega = self.convex_decomposition
            resid = np.max(np.abs(np.asarray(self.v(x)) - np.asarray(vc(x)) - np.asarray(vp(x))))
            if resid > tol:
                raise NotWeaklyGaussian(f"v != v_conv + v_pert (residual {resid:.2e})")
            h = 1e-4
            d2c = (np.asarray(vc(x + h)) - 2 * np.asarray(vc(x)) + np.asarray(vc(x - h))) / h**2
            if np.min(d2c) < alpha - max(tol, 1e-4):
                raise NotWeaklyGaussian("v_conv is not alpha-strongly convex on probes")
            grid = np.linspace(lo, hi, 2048)
            pv = np.asarray(vp(grid))
            if pv.max() - pv.min() > omega + tol:
                raise NotWeaklyGaussian("oscillation of v_pert exceeds omega")
        return True


# -- builtin families --------------------------------------------------------

def gaussian(sigma: float = 1.0) -> Potential1D:
    """exp(-x^2/(2 sigma^2)) / (sigma sqrt(2 pi))."""
    s2 = float(sigma) ** 2
    c = math.log(sigma * math.sqrt(2 * math.pi))
    return Potential1D(
        v=lambda x: np.asarray(x, float) ** 2 / (2 * s2) + c,
        dv=lambda x: np.asarray(x, float) / s2,
        d2v=lambda x: np.full_like(np.asarray(x, float), 1.0 / s2),
        smoothness=C2,
        hessian_lower=1.0 / s2,
        family="gaussian",
        default_window=(-12.0 * sigma, 12.0 * sigma),
    )


def two_sided_exp() -> Potential1D:
    """The two-sided exponential measure (1/2) exp(-|x|)."""
    log2 = math.log(2.0)
    return Potential1D(
        v=lambda x: np.abs(np.asarray(x, float)) + log2,
        dv=lambda x: np.sign(np.asarray(x, float)),
        d2v=None,
        smoothness=LIPSCHITZ,
        lipschitz_const=1.0,
        hessian_lower=0.0,
        breakpoints=(0.0,),
        family="two_sided_exp",
        default_window=(-40.0, 40.0),
    )


def power(p: float) -> Potential1D:
    """exp(-|x|^p) normalized; C2 for p >= 2, C1 below."""
    if p <= 1.0:
        raise ValidationError("power family needs p > 1")
    logz = math.log(2.0) + gammaln(1.0 + 1.0 / p)

    def d2(x):
        x = np.asarray(x, float)
        ax = np.abs(x)
        with np.errstate(divide="ignore"):
            out = p * (p - 1.0) * ax ** (p - 2.0)
        return out

    w = max(6.0, 45.0 ** (1.0 / p) + 2.0)
    return Potential1D(
        v=lambda x: np.abs(np.asarray(x, float)) ** p + logz,
        dv=lambda x: p * np.sign(np.asarray(x, float)) * np.abs(np.asarray(x, float)) ** (p - 1.0),
        d2v=d2,
        smoothness=C2 if p >= 2.0 else C1,
        hessian_lower=0.0,
        breakpoints=(0.0,),
        family=f"power({p})",
        default_window=(-w, w),
    )


def uniform(half_width: float = 1.0) -> Potential1D:
    """Uniform measure on [-h, h] (hard support; flat potential)."""
    h = float(half_width)
    c = math.log(2 * h)
    return Potential1D(
        v=lambda x: np.full_like(np.asarray(x, float), c),
        dv=lambda x: np.zeros_like(np.asarray(x, float)),
        d2v=lambda x: np.zeros_like(np.asarray(x, float)),
        smoothness=C2,
        hessian_lower=0.0,
        family="uniform",
        default_window=(-h, h),
        hard_support=True,
    )


def weakly_gaussian(alpha: float, omega: float,
                    bump_amplitude: Optional[float] = None,
                    bump_width: Optional[float] = None) -> Potential1D:
    """alpha-strongly-convex quadratic core plus a cosine bump of
    oscillation <= omega.

    The default bump keeps |V_pert''| <= alpha/2, so V'' stays in
    [alpha/2, 3 alpha/2] and the weakly-Gaussian Hessian sandwich holds
    with plenty of room.
    """
    if alpha <= 0 or omega < 0:
        raise ValidationError("weakly_gaussian needs alpha > 0, omega >= 0")
    amp = omega / 2.0 if bump_amplitude is None else float(bump_amplitude)
    if 2 * amp > omega + 1e-12:
        raise ValidationError("bump oscillation 2*amplitude exceeds omega")
    if bump_width is None:
        bump_width = max(1.0, math.sqrt(2.0 * amp / alpha)) if amp > 0 else 1.0
    wdt = float(bump_width)
    c = 0.5 * math.log(2 * math.pi / alpha)

    def v_conv(x):
        return alpha * np.asarray(x, float) ** 2 / 2 + c

    def v_pert(x):
        return amp * np.cos(np.asarray(x, float) / wdt)

    half = 12.0 / math.sqrt(alpha) + 2.0
    return Potential1D(
        v=lambda x: v_conv(x) + v_pert(x),
        dv=lambda x: alpha * np.asarray(x, float) - (amp / wdt) * np.sin(np.asarray(x, float) / wdt),
        d2v=lambda x: alpha - (amp / wdt ** 2) * np.cos(np.asarray(x, float) / wdt),
        smoothness=C2,
        hessian_lower=alpha - amp / wdt ** 2,
        convex_decomposition=(v_conv, v_pert, alpha, omega),
        family="weakly_gaussian",
        default_window=(-half, half),
    )


def tabulated(x, v, dv=None, d2v=None) -> Potential1D:
    """Monotone-cubic interpolation of tabulated (x, V[, V', V''])."""
    from scipy.interpolate import PchipInterpolator

    x = np.asarray(x, float)
    if np.any(np.diff(x) <= 0):
        raise ValidationError("tabulated x must be strictly increasing")
    v_ip = PchipInterpolator(x, np.asarray(v, float))
    dv_ip = PchipInterpolator(x, np.asarray(dv, float)) if dv is not None else v_ip.derivative()
    d2v_ip = PchipInterpolator(x, np.asarray(d2v, float)) if d2v is not None else None
    return Potential1D(
        v=v_ip,
        dv=dv_ip,
        d2v=d2v_ip,
        smoothness=C1 if d2v is None else C2,
        family="tabulated",
        default_window=(float(x[0]), float(x[-1])),
        hard_support=True,
    )


FAMILIES = {
    "gaussian": gaussian,
    "two_sided_exp": two_sided_exp,
    "power": power,
    "uniform": uniform,
    "weakly_gaussian": weakly_gaussian,
}
