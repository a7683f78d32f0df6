"""Concentration-profile algebra and explicit transference constants.

Profiles are non-increasing bounds r -> K(r) in [0, 1/2] on the mass
outside the r-enlargement of a half-mass set. Transfer operations push a
profile of a source measure to a target measure that is absolutely
continuous with respect to it, given control of the density ratio; the
constant calculators evaluate the packaged LS/SG transfer formulas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Callable, Optional

import numpy as np

from .errors import (CurvatureTooNegative, InvalidL, TooFewSamples,
                     ValidationError)


@dataclass(frozen=True)
class UniversalConstants:
    """The otherwise-unspecified universal constants, all configurable.

    Defaults are 1; results depending on them are compared for shape and
    monotonicity, never for absolute value.
    """

    c_ls: float = 1.0      # front constant, LS transfer
    C_ls: float = 1.0      # exponent constant, LS transfer (kappa > 0 branch)
    c_sg: float = 1.0      # front constant, SG transfer family
    c_gm: float = 1.0      # exponential-concentration rate from a spectral gap
    c_bern: float = 1.0    # Bernstein exponent
    c2_chaos: float = 1.0  # chaos tail exponent
    C2_chaos: float = 1.0  # chaos tail front factor
    c_mom: float = 1.0     # front/exponent constant of the slab moment bounds
    c3_int: float = 1.0    # interaction smallness numerator
    c4_int: float = 1.0    # interaction width coupling
    c5_int: float = 1.0    # interaction moment bound front factor
    c6_int: float = 1.0    # interaction moment bound exponent
    c_lsi: float = 1.0     # front constant of rho/Q^C reports
    C_lsi: float = 1.0     # exponent of rho/Q^C reports
    c_small: float = 1.0   # smallness coefficient in |A|_op <= c rho
    c_gap: float = 1.0     # front constant of the spin SG lower bounds
    C_gap: float = 1.0     # front constant of the spin SG upper bound
    c_clt: float = 1.0     # Berry-Esseen front constants

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) <= 0:
                raise ValidationError(f"constant {f.name} must be positive")

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


DEFAULT_CONSTANTS = UniversalConstants()


@dataclass(frozen=True)
class ConcentrationProfile:
    """Non-increasing bound r -> K(r), clipped at 1/2.

    ``support_note`` records the threshold radius above which the bound
    is actually proven; below it the trivial 1/2 applies.
    """

    raw: Callable
    kind: str = "analytic"
    support_note: Optional[float] = None

    def bound(self, r):
        r = np.asarray(r, float)
        val = np.minimum(0.5, np.asarray(self.raw(r), float))
        if self.support_note is not None:
            val = np.where(r < self.support_note, 0.5, val)
        return val if val.ndim else float(val)

    def __call__(self, r):
        return self.bound(r)


@dataclass(frozen=True)
class DensityTailModel:
    """Right-continuous non-increasing eps -> M(eps) on (0, 1/4]."""

    m: Callable

    def beta(self, eps: float) -> float:
        if eps <= 0.0:
            return 0.0
        return eps / float(self.m(eps))

    def beta_inverse(self, y: float) -> float:
        """inf{eps in [0, 1/4] : beta(eps) >= y} (monotone bisection)."""
        if y <= 0.0:
            return 0.0
        if self.beta(0.25) < y:
            return 0.25
        lo, hi = 0.0, 0.25
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.beta(mid) >= y:
                hi = mid
            else:
                lo = mid
            if hi - lo <= 1e-16 * 0.25:
                break
        return hi


def _bisect_increasing(fn, target, lo=0.0, hi=1.0, max_expand=2000):
    """Leftmost x with fn(x) >= target for a non-decreasing fn."""
    while fn(hi) < target:
        lo, hi = hi, hi * 2.0
        max_expand -= 1
        if max_expand <= 0 or not math.isfinite(hi):
            return math.inf
    for _ in range(260):
        mid = 0.5 * (lo + hi)
        if fn(mid) >= target:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-16 * max(1.0, hi):
            break
    return hi


def pessimistic_inverse(profile: ConcentrationProfile, eps: float,
                        r_max: float = 1e9) -> float:
    """inf{r > 0 : K(r) < eps}; inf when the profile never drops below eps."""
    if not 0.0 < eps <= 0.5:
        raise ValidationError("eps must lie in (0, 1/2]")
    hi = 1.0
    while profile.bound(hi) >= eps:
        hi *= 2.0
        if hi > r_max:
            return math.inf
    lo = 0.0
    for _ in range(260):
        mid = 0.5 * (lo + hi)
        if profile.bound(mid) < eps:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-16 * max(1.0, hi):
            break
    return hi


# -- profile transfer ----------------------------------------------------------


def transfer_pointwise(k1: ConcentrationProfile, m: DensityTailModel) -> ConcentrationProfile:
    """Target profile r -> 2 beta^{-1}(K1(r/2)), valid above the threshold
    2 K1^{-1}(beta(1/4)) and clipped to 1/2 below it."""
    threshold = 2.0 * pessimistic_inverse(k1, min(0.5, m.beta(0.25)))

    def raw(r):
        r = np.atleast_1d(np.asarray(r, float))
        out = np.array([2.0 * m.beta_inverse(k1.bound(ri / 2.0)) for ri in r])
        return out if out.size > 1 else out[0]

    return ConcentrationProfile(raw=raw, kind=k1.kind,
                                support_note=threshold if math.isfinite(threshold) else None)


def transfer_integral(k1: ConcentrationProfile, g: Callable, l: float) -> ConcentrationProfile:
    """Target profile r -> 2 K1(r/2) F^{-1}(l / K1(r/2)) with F(x) = x g(x),
    given integral of F(dmu2/dmu1) dmu1 <= l."""
    if l <= 0:
        raise ValidationError("the integral level l must be positive")

    def f(x):
        return x * float(g(x))

    def raw(r):
        r = np.atleast_1d(np.asarray(r, float))
        out = np.empty_like(r)
        for i, ri in enumerate(r):
            k = k1.bound(ri / 2.0)
            if k <= 0.0:
                out[i] = 0.0
                continue
            finv = _bisect_increasing(f, l / k)
            out[i] = 2.0 * k * finv
        return out if out.size > 1 else out[0]

    return ConcentrationProfile(raw=raw, kind=k1.kind)


def profile_from_lsi(rho: float) -> ConcentrationProfile:
    """Gaussian profile exp(-(rho/2)(r - sqrt(2 log 2 / rho))_+^2)."""
    if rho <= 0:
        raise ValidationError("rho must be positive")
    r0 = math.sqrt(2.0 * math.log(2.0) / rho)

    def raw(r):
        r = np.asarray(r, float)
        return np.exp(-(rho / 2.0) * np.maximum(r - r0, 0.0) ** 2)

    return ConcentrationProfile(raw=raw)


def profile_from_sg(rho: float, consts: UniversalConstants = DEFAULT_CONSTANTS) -> ConcentrationProfile:
    """Exponential profile exp(-c_gm sqrt(rho) r)."""
    if rho <= 0:
        raise ValidationError("rho must be positive")
    rate = consts.c_gm * math.sqrt(rho)

    def raw(r):
        return np.exp(-rate * np.asarray(r, float))

    return ConcentrationProfile(raw=raw)


# -- constant calculators ---------------------------------------------------------


def ls_transfer_constant(rho: float, kappa: float, l: float, p: float,
                         consts: UniversalConstants = DEFAULT_CONSTANTS) -> float:
    """Log-Sobolev constant transferred through an L^p density-ratio bound.

    Requires rho > 4 p kappa / (p - 1); the kappa = 0 branch carries the
    sharper 1/(1 + log L) dependence.
    """
    if p <= 1.0:
        raise ValidationError("p must exceed 1")
    if l < 1.0:
        raise InvalidL("L >= 1 by Jensen's inequality")
    if kappa < 0.0:
        raise ValidationError("kappa must be nonnegative")
    if rho <= 4.0 * p * kappa / (p - 1.0):
        raise CurvatureTooNegative(
            f"need rho > 4p kappa/(p-1) = {4.0 * p * kappa / (p - 1.0):.6g}, got {rho:.6g}")
    base = consts.c_ls * rho * (p - 1.0) / p
    if kappa == 0.0:
        return base / (1.0 + math.log(l))
    theta = 1.0 - 4.0 * p * kappa / ((p - 1.0) * rho)
    return base * math.exp(-consts.C_ls * (1.0 + math.log(l)) / theta)


_TV_CASES = {"sup_ratio": 1, "inv_sup_ratio": 2, "tv": 3}


def sg_transfer_tv(case: str, l: float,
                   consts: UniversalConstants = DEFAULT_CONSTANTS) -> float:
    """Spectral-gap multiplier C_i(L)^2 of the log-concave transfer cases:
    bounded ratio, bounded inverse ratio, or total-variation closeness."""
    if case not in _TV_CASES:
        raise ValidationError(f"unknown case {case!r}")
    if l <= 1.0:
        raise InvalidL("these transfer cases need L > 1")
    i = _TV_CASES[case]
    c = consts.c_sg
    if i == 1:
        ci = c / (1.0 + math.log(l))
    elif i == 2:
        ci = c / l ** 2
    else:
        ci = c / (l ** 2 * (1.0 + math.log(l)))
    return ci ** 2


def tv_from_density_tail(d: float, delta: float) -> float:
    """TV bound 1 - (1 - delta)/max(1, D) from a density-ratio tail level."""
    if not 0.0 <= delta < 1.0:
        raise ValidationError("delta must lie in [0, 1)")
    if d <= 0.0:
        raise ValidationError("D must be positive")
    return 1.0 - (1.0 - delta) / max(1.0, d)


def sg_transfer_lp(l: float, p: float,
                   consts: UniversalConstants = DEFAULT_CONSTANTS) -> float:
    """Spectral-gap multiplier C(L,p)^2 with C = c (p-1)/p / (1 + log L)."""
    if l < 1.0:
        raise InvalidL("L >= 1 by Jensen's inequality")
    if p <= 1.0:
        raise ValidationError("p must exceed 1")
    c = consts.c_sg * (p - 1.0) / p / (1.0 + math.log(l))
    return c ** 2


def sg_transfer_median(l: float,
                       consts: UniversalConstants = DEFAULT_CONSTANTS) -> float:
    """Spectral-gap multiplier c / log(8L)^2 under a 1/8 ratio-tail bound."""
    if l < 7.0 / 8.0:
        raise InvalidL("the ratio-tail hypothesis forces L >= 7/8")
    return consts.c_sg / math.log(8.0 * l) ** 2


def superimpose_lp_bound(f_moments, g_moments, p: float) -> float:
    """Cauchy-Schwarz chain bound on |dmu2/dmu1|_{L^p}^p for mu2 ~ f g mu1:
    (int f^{2p})^{1/2} (int g^{2p})^{1/2} (int f^{-2})^{p/2} (int g^{-2})^{p/2}."""
    f2p, fm2 = f_moments
    g2p, gm2 = g_moments
    if min(f2p, fm2, g2p, gm2) <= 0:
        raise ValidationError("all four moments must be positive")
    if p <= 1.0:
        raise ValidationError("p must exceed 1")
    return math.sqrt(f2p) * math.sqrt(g2p) * fm2 ** (p / 2.0) * gm2 ** (p / 2.0)


# -- empirical profiles -------------------------------------------------------------


def empirical_profile(samples, directions=None) -> ConcentrationProfile:
    """Concentration profile of a sample cloud over half-space test sets.

    For each direction u the mass beyond the median half-space shifted by
    r is estimated; the profile is the max over directions.
    """
    samples = np.asarray(samples, float)
    if samples.ndim == 1:
        samples = samples[:, None]
    n, d = samples.shape
    if n < 1000:
        raise TooFewSamples(f"need >= 1000 samples, got {n}")
    if directions is None:
        directions = np.vstack([np.eye(d), -np.eye(d)])
    directions = np.asarray(directions, float)
    directions = directions / np.linalg.norm(directions, axis=1, keepdims=True)

    sorted_projs = []
    medians = []
    for u in directions:
        proj = np.sort(samples @ u)
        sorted_projs.append(proj)
        medians.append(float(np.median(proj)))

    def raw(r):
        r = np.atleast_1d(np.asarray(r, float))
        out = np.zeros_like(r)
        for proj, med in zip(sorted_projs, medians):
            idx = np.searchsorted(proj, med + r, side="right")
            out = np.maximum(out, (n - idx) / n)
        return out if out.size > 1 else out[0]

    return ConcentrationProfile(raw=raw, kind="empirical")
