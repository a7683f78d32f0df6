"""Deviation-bound evaluators and their Monte-Carlo verifiers.

Bernstein sums of sub-exponential variables, sub-Gaussian linear
Chernoff tails, order-2 chaos (Hanson-Wright shaped) bounds in the
(|A|_HS, |A|_op) norms, empirical tail harnesses, and the
moment-comparison chain against the Gaussian chaos.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (NotSubGaussian, TooFewSamples, ValidationError,
                     ZeroMatrix)
from .measure1d import Measure1D
from .spin import rng_stream
from .transference import DEFAULT_CONSTANTS, UniversalConstants


def _norms(a_matrix) -> tuple:
    a = np.asarray(a_matrix, float)
    if not np.array_equal(a, a.T) or np.any(np.diagonal(a) != 0.0):
        raise ValidationError("chaos matrix must be symmetric with zero diagonal")
    if not a.any():
        raise ZeroMatrix("chaos statistic is identically zero")
    op = float(np.max(np.abs(np.linalg.eigvalsh(a))))
    hs = float(np.linalg.norm(a))
    return op, hs


def bernstein_bound(t: float, a, d_psi1: float,
                    consts: UniversalConstants = DEFAULT_CONSTANTS) -> float:
    """exp(-c min(t^2/(|a|_2^2 D^2), t/(|a|_inf D))) for sums sum a_i Y_i
    of centered variables with Psi_1 norms <= D."""
    a = np.asarray(a, float)
    if not a.any():
        raise ValidationError("coefficient vector must be nonzero")
    if d_psi1 <= 0:
        raise ValidationError("d_psi1 must be positive")
    if t <= 0:
        return 1.0
    l2 = float(np.linalg.norm(a))
    linf = float(np.max(np.abs(a)))
    shape = min(t * t / (l2 * l2 * d_psi1 ** 2), t / (linf * d_psi1))
    return math.exp(-consts.c_bern * shape)


def chaos_shape(t, a_op: float, a_hs: float, rho: float):
    """min(rho^2 t^2/|A|_HS^2, rho t/|A|_op): the two-regime exponent."""
    t = np.asarray(t, float)
    return np.minimum(rho ** 2 * t ** 2 / a_hs ** 2, rho * t / a_op)


def chaos_bound(t: float, a_matrix, rho: float,
                consts: UniversalConstants = DEFAULT_CONSTANTS) -> float:
    """C2 exp(-c2 min(rho^2 t^2 / |A|_HS^2, rho t / |A|_op)) for the tail
    of |sum a_ij X_i X_j| under independent sub-Gaussian(rho) sites."""
    op, hs = _norms(a_matrix)
    if t <= 0:
        return consts.C2_chaos
    return consts.C2_chaos * math.exp(-consts.c2_chaos * float(chaos_shape(t, op, hs, rho)))


def chaos_bound_subgaussian(t: float, a_matrix, alpha: float,
                            consts: UniversalConstants = DEFAULT_CONSTANTS) -> float:
    """The alpha-sub-Gaussian parametrization:
    C2 exp(-c2 min(t^2/(alpha^4 |A|_HS^2), t/(alpha^2 |A|_op)))."""
    op, hs = _norms(a_matrix)
    if t <= 0:
        return consts.C2_chaos
    shape = min(t * t / (alpha ** 4 * hs * hs), t / (alpha ** 2 * op))
    return consts.C2_chaos * math.exp(-consts.c2_chaos * shape)


def linear_subgaussian_tail(t: float, alpha_vec, rho: float) -> float:
    """Chernoff bound exp(-rho t^2 / (2 sum alpha_i^2))."""
    alpha_vec = np.asarray(alpha_vec, float)
    if not alpha_vec.any():
        raise ValidationError("coefficient vector must be nonzero")
    if t <= 0:
        return 1.0
    return math.exp(-rho * t * t / (2.0 * float(alpha_vec @ alpha_vec)))


# -- Monte-Carlo tail harness ------------------------------------------------------


@dataclass
class TailBound:
    """Analytic bound vs empirical exceedance over a threshold grid."""

    thresholds: np.ndarray
    bound_values: np.ndarray
    empirical: np.ndarray
    stderr: np.ndarray
    fitted_c: float
    fit_mask: np.ndarray
    kind: str
    reps: int


def mc_tail(kind: str, coeffs, site: Measure1D, thresholds, reps: int,
            seed: int = 0, rho: float = 1.0, d_psi1: Optional[float] = None,
            consts: UniversalConstants = DEFAULT_CONSTANTS,
            chunk: int = 200_000) -> TailBound:
    """Empirical tail of a linear or chaos statistic under i.i.d. sites.

    kind='linear' uses one-sided exceedance of sum a_i X_i against the
    Bernstein bound; kind='chaos' uses |x^T A x| against the chaos bound.
    fitted_c is the least-squares coefficient of -log(frequency) on the
    bound's min(quadratic, linear) shape, over thresholds with at least
    30 exceedances and frequency <= 1/4.
    """
    if reps < 100_000:
        raise TooFewSamples("mc_tail needs >= 1e5 replications for quoted stderr")
    thresholds = np.asarray(thresholds, float)
    rng = rng_stream(seed, 3)
    counts = np.zeros(len(thresholds))

    if kind == "linear":
        a = np.asarray(coeffs, float)
        n = len(a)
        if d_psi1 is None:
            from .measure1d import psi1_norm
            d_psi1 = psi1_norm(site, lambda x: x)
        shape = np.minimum(thresholds ** 2 / (float(a @ a) * d_psi1 ** 2),
                           thresholds / (float(np.max(np.abs(a))) * d_psi1))
        bound = np.exp(-consts.c_bern * np.where(thresholds > 0, shape, 0.0))
        bound = np.where(thresholds > 0, bound, 1.0)
    elif kind == "chaos":
        amat = np.asarray(coeffs, float)
        n = amat.shape[0]
        op, hs = _norms(amat)
        shape = np.asarray(chaos_shape(np.maximum(thresholds, 0.0), op, hs, rho), float)
        bound = consts.C2_chaos * np.exp(-consts.c2_chaos * shape)
    else:
        raise ValidationError(f"unknown statistic kind {kind!r}")

    done = 0
    while done < reps:
        m = min(chunk, reps - done)
        x = site.sample((m, n), rng)
        if kind == "linear":
            stat = x @ a
            counts += (stat[:, None] >= thresholds[None, :]).sum(axis=0)
        else:
            stat = np.abs(np.einsum("ki,ij,kj->k", x, amat, x, optimize=True))
            counts += (stat[:, None] >= thresholds[None, :]).sum(axis=0)
        done += m

    emp = counts / reps
    stderr = np.sqrt(emp * (1.0 - emp) / reps)
    mask = (counts >= 30) & (emp <= 0.25) & (shape > 0)
    if mask.any():
        y = -np.log(emp[mask])
        sh = shape[mask]
        fitted_c = float((sh @ y) / (sh @ sh))
    else:
        fitted_c = float("nan")
    return TailBound(thresholds=thresholds, bound_values=bound, empirical=emp,
                     stderr=stderr, fitted_c=fitted_c, fit_mask=mask,
                     kind=kind, reps=reps)


def fit_crossover(tail: TailBound, a_op: float, a_hs: float, rho: float = 1.0):
    """Separate quadratic/linear regime fits of the empirical log-tail;
    returns (fitted crossover, analytic crossover |A|_HS^2/(rho |A|_op))."""
    t_star = a_hs ** 2 / (rho * a_op)
    t = tail.thresholds
    ok = tail.fit_mask
    quad = ok & (t <= t_star)
    lin = ok & (t > t_star)
    if quad.sum() < 2 or lin.sum() < 2:
        return float("nan"), t_star
    yq = -np.log(tail.empirical[quad])
    cq = float((t[quad] ** 2 @ yq) / (t[quad] ** 2 @ t[quad] ** 2))
    yl = -np.log(tail.empirical[lin])
    cl = float((t[lin] @ yl) / (t[lin] @ t[lin]))
    if cq <= 0 or cl <= 0:
        return float("nan"), t_star
    return cl / cq, t_star


# -- moment comparison against the Gaussian chaos --------------------------------------


def gaussian_abs_moment(p: float) -> float:
    """E|G|^p for a standard Gaussian."""
    return 2.0 ** (p / 2.0) * math.gamma((p + 1.0) / 2.0) / math.sqrt(math.pi)


def subgaussian_alpha(site: Measure1D, kmax: int = 5) -> float:
    """Even-moment comparison constant: max_k |X|_{2k}/|G|_{2k}, k <= kmax.

    Raises NotSubGaussian when the ratios keep growing across the range
    (the hallmark of heavier-than-Gaussian tails).
    """
    ratios = []
    for k in range(1, kmax + 1):
        mx = site.moment(2 * k) ** (1.0 / (2 * k))
        mg = gaussian_abs_moment(2 * k) ** (1.0 / (2 * k))
        ratios.append(mx / mg)
    ratios = np.array(ratios)
    if np.all(np.diff(ratios) > 0) and ratios[-1] > 1.05 * ratios[0]:
        raise NotSubGaussian(
            f"even-moment ratios grow with k: {np.round(ratios, 4).tolist()}")
    return float(ratios.max())


def moment_compare(site: Measure1D, a_matrix, p_list=(2, 4, 6), reps: int = 200_000,
                   seed: int = 0, chunk: int = 200_000) -> dict:
    """MC p-norms of the chaos under the site law vs under the Gaussian.

    Returns the ratio table and the implied comparison constant
    C = max_p ratio_p / alpha^2.
    """
    amat = np.asarray(a_matrix, float)
    if not amat.any():
        return {"alpha": 1.0, "p": list(p_list),
                "ratio": [1.0] * len(p_list), "implied_c": 1.0}
    n = amat.shape[0]
    _norms(amat)
    alpha = subgaussian_alpha(site)
    rng_x = rng_stream(seed, 4)
    rng_g = rng_stream(seed, 5)

    sums_x = np.zeros(len(p_list))
    sums_g = np.zeros(len(p_list))
    done = 0
    while done < reps:
        m = min(chunk, reps - done)
        x = site.sample((m, n), rng_x)
        g = rng_g.standard_normal((m, n))
        sx = np.abs(np.einsum("ki,ij,kj->k", x, amat, x, optimize=True))
        sg = np.abs(np.einsum("ki,ij,kj->k", g, amat, g, optimize=True))
        for idx, p in enumerate(p_list):
            sums_x[idx] += float((sx ** p).sum())
            sums_g[idx] += float((sg ** p).sum())
        done += m
    norms_x = (sums_x / reps) ** (1.0 / np.asarray(p_list, float))
    norms_g = (sums_g / reps) ** (1.0 / np.asarray(p_list, float))
    ratio = norms_x / norms_g
    return {
        "alpha": alpha,
        "p": list(p_list),
        "norm_site": norms_x.tolist(),
        "norm_gauss": norms_g.tolist(),
        "ratio": ratio.tolist(),
        "implied_c": float(np.max(ratio) / alpha ** 2),
    }
