"""Finite-size scaling fits, loss-threshold extrapolation, optimal-L search and delay-line fits."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable

import numpy as np
from scipy.optimize import least_squares


class FitError(ValueError):
    """Data cannot support the requested fit."""


# --- threshold ansatz ---------------------------------------------------------------

@dataclass(frozen=True)
class ThresholdFit:
    p_th: float
    nu: float
    a: float
    b: float
    c: float
    residual_norm: float
    stderr: dict
    n_points: int

    def to_dict(self) -> dict:
        return asdict(self)

    def summary(self) -> str:
        return (f"p_th = {self.p_th:.5f} +/- {self.stderr['p_th']:.5f}  "
                f"nu = {self.nu:.3f} +/- {self.stderr['nu']:.3f}  "
                f"(chi = {self.residual_norm:.3f}, {self.n_points} points)")


def scaling_ansatz(p, L, p_th, nu, a, b, c):
    """Quadratic finite-size scaling form in x = (p - p_th) d^(1/nu), d = (L+1)/2."""
    d = (np.asarray(L, dtype=float) + 1) / 2
    x = (np.asarray(p, dtype=float) - p_th) * d ** (1 / nu)
    return a + b * x + c * x * x


def _merge_points(points) -> tuple[np.ndarray, ...]:
    """Group duplicate (p, L) points, averaging with inverse-variance weights."""
    groups: dict[tuple[float, int], list[tuple[float, float]]] = {}
    for p, L, pbar, sigma in points:
        if not sigma > 0:
            raise FitError(f"point (p={p}, L={L}) lacks a positive uncertainty")
        groups.setdefault((float(p), int(L)), []).append((float(pbar), float(sigma)))
    keys = sorted(groups)
    P, Ls, Y, S = [], [], [], []
    for key in keys:
        vals = np.array(groups[key])
        w = 1 / vals[:, 1] ** 2
        P.append(key[0])
        Ls.append(key[1])
        Y.append(float((w * vals[:, 0]).sum() / w.sum()))
        S.append(float(1 / math.sqrt(w.sum())))
    return np.array(P), np.array(Ls), np.array(Y), np.array(S)


def _linear_abc(P, Ls, Y, S, p_th, nu):
    d = (Ls + 1) / 2
    x = (P - p_th) * d ** (1 / nu)
    A = np.stack([np.ones_like(x), x, x * x], axis=1) / S[:, None]
    coef, *_ = np.linalg.lstsq(A, Y / S, rcond=None)
    return coef


def _fit_once(P, Ls, Y, S):
    lo, hi = P.min(), P.max()

    def resid(theta):
        return (scaling_ansatz(P, Ls, *theta) - Y) / S

    best = None
    for p0 in np.linspace(lo, hi, 7):
        for nu0 in (0.7, 1.0, 1.4, 2.0):
            a, b, c = _linear_abc(P, Ls, Y, S, p0, nu0)
            try:
                r = least_squares(resid, [p0, nu0, a, b, c],
                                  bounds=([lo - (hi - lo), 0.2, -np.inf, -np.inf, -np.inf],
                                          [hi + (hi - lo), 5.0, np.inf, np.inf, np.inf]),
                                  x_scale=[hi - lo, 1.0, 0.1, 1.0, 1.0], max_nfev=2000)
            except ValueError:
                continue
            if best is None or r.cost < best.cost - 1e-12:
                best = r
    return best


def fit_threshold(points: Iterable, window: float = 0.3, rounds: int = 2) -> ThresholdFit:
    """Weighted least-squares fit of the quadratic scaling ansatz.

    ``points`` are (p, L, p_bar, sigma).  After a fit on everything, points
    further than ``window * p_th`` from the estimate are dropped and the fit
    repeated, ``rounds`` times, as long as enough points remain.
    """
    P, Ls, Y, S = _merge_points(points)

    def enough(mask):
        return len(set(Ls[mask])) >= 3 and len(set(P[mask])) >= 4

    mask = np.ones(len(P), dtype=bool)
    if not enough(mask):
        raise FitError("insufficient points: need at least 3 distinct L and 4 distinct p")
    res = _fit_once(P, Ls, Y, S)
    for _ in range(rounds):
        new = np.abs(P - res.x[0]) <= window * abs(res.x[0])
        if not enough(new) or np.array_equal(new, mask):
            break
        mask = new
        res = _fit_once(P[mask], Ls[mask], Y[mask], S[mask])
    p_th, nu, a, b, c = res.x
    if not (P[mask].min() <= p_th <= P[mask].max()):
        raise FitError(f"no crossing in the data window: fitted p_th = {p_th:.5g} lies outside "
                       f"[{P[mask].min():.5g}, {P[mask].max():.5g}]")
    J = res.jac
    try:
        cov = np.linalg.inv(J.T @ J)
        err = np.sqrt(np.clip(np.diag(cov), 0, None))
    except np.linalg.LinAlgError:
        err = np.full(5, np.nan)
    names = ("p_th", "nu", "a", "b", "c")
    return ThresholdFit(float(p_th), float(nu), float(a), float(b), float(c),
                        float(np.sqrt(2 * res.cost)), {k: float(e) for k, e in zip(names, err)},
                        int(mask.sum()))


# --- loss threshold -----------------------------------------------------------------

def extrapolate_loss_threshold(curve: Iterable[tuple[float, float]]) -> float:
    """Positive root of a quadratic fit of p_th against p_loss."""
    pts = sorted((float(x), float(y)) for x, y in curve)
    if len(pts) < 3:
        raise FitError("need at least 3 (p_loss, p_th) points")
    x, y = np.array(pts).T
    coef = np.polyfit(x, y, 2)
    roots = np.roots(coef)
    real = sorted(r.real for r in roots if abs(r.imag) <= 1e-12 * max(1.0, abs(r)) and r.real > 0)
    beyond = [r for r in real if r >= x.max()]
    if beyond:
        return float(beyond[0])
    if real:
        return float(real[0])
    raise FitError("quadratic fit has no positive root")


# --- optimal L -----------------------------------------------------------------------

@dataclass(frozen=True)
class OptimalL:
    L_star: int
    p_star: float
    sigma: float
    trace: tuple                  # ((L, p_bar, sigma, censored), ...)
    interior: bool                # False when p_bar still fell at the largest L tried
    censored: bool

    def to_dict(self) -> dict:
        return {"L_star": self.L_star, "p_star": self.p_star, "sigma": self.sigma,
                "trace": [list(t) for t in self.trace], "interior": self.interior,
                "censored": self.censored}


def find_optimal_L(estimate: Callable[[int], object], L_values: Iterable[int], patience: int = 2) -> OptimalL:
    """Scan ascending odd L until p_bar has risen above the running minimum
    ``patience`` times in a row.

    ``estimate(L)`` returns an object with ``p_bar``, ``sigma`` and
    ``censored`` (a montecarlo Estimate, typically).
    """
    Ls = list(L_values)
    if any(L % 2 == 0 for L in Ls) or Ls != sorted(Ls) or len(set(Ls)) != len(Ls):
        raise ValueError("L values must be odd and strictly ascending")
    trace = []
    best = None
    rises = 0
    for L in Ls:
        est = estimate(L)
        trace.append((L, est.p_bar, est.sigma, bool(est.censored)))
        if best is None or est.p_bar < best[1]:
            best = (L, est.p_bar, est.sigma, bool(est.censored))
            rises = 0
        else:
            rises += 1
            if rises >= patience:
                break
    interior = rises >= patience
    return OptimalL(best[0], best[1], best[2], tuple(trace), interior,
                    best[3] or any(t[3] for t in trace))


# --- delay-line scaling --------------------------------------------------------------

@dataclass(frozen=True)
class DelayFit:
    c1: float                     # slope c' of ln(1/p_*) against eta^(-1/2)
    c2: float                     # intercept c''
    residual_norm: float
    stderr: tuple = (math.nan, math.nan)

    def to_dict(self) -> dict:
        return {"c_prime": self.c1, "c_double_prime": self.c2,
                "residual_norm": self.residual_norm, "stderr": list(self.stderr)}

    def summary(self) -> str:
        return (f"ln(1/p_*) = {self.c1:.4f} eta^-1/2 + {self.c2:.4f}  "
                f"(+/- {self.stderr[0]:.4f}, {self.stderr[1]:.4f})")


def fit_delay(points: Iterable) -> DelayFit:
    """Weighted line through (eta^(-1/2), ln(1/p_*)).

    ``points`` are (eta, p_star) or (eta, p_star, sigma); sigma propagates
    to the log scale as sigma / p_star.
    """
    pts = [tuple(map(float, p)) for p in points]
    if len({p[0] for p in pts}) < 3:
        raise FitError("need at least 3 distinct eta values")
    for p in pts:
        if p[1] <= 0 or p[0] <= 0:
            raise FitError(f"eta and p_* must be positive, got {p[:2]}")
    x = np.array([p[0] ** -0.5 for p in pts])
    y = np.array([-math.log(p[1]) for p in pts])
    if all(len(p) > 2 and p[2] > 0 for p in pts):
        sy = np.array([p[2] / p[1] for p in pts])
    else:
        sy = np.ones(len(pts))
    w = 1 / sy
    A = np.stack([x, np.ones_like(x)], axis=1) * w[:, None]
    coef, *_ = np.linalg.lstsq(A, y * w, rcond=None)
    resid = (A @ coef - y * w)
    try:
        err = np.sqrt(np.diag(np.linalg.inv(A.T @ A)))
    except np.linalg.LinAlgError:
        err = (math.nan, math.nan)
    return DelayFit(float(coef[0]), float(coef[1]), float(np.linalg.norm(resid)),
                    (float(err[0]), float(err[1])))


def break_even(fit, p_target: float) -> float:
    """Delay-line rate at which the optimal logical error rate reaches ``p_target``."""
    c1, c2 = (fit.c1, fit.c2) if isinstance(fit, DelayFit) else fit
    gap = math.log(1 / p_target) - c2
    if not (0 < p_target < 1) or gap <= 0:
        raise ValueError(f"need ln(1/p_target) > c'' = {c2}; got p_target = {p_target}")
    return (c1 / gap) ** 2


def eta_from_tau_ratio(r: float) -> float:
    """Per-step dephasing rate for gate time tau and coherence time T2, r = tau/T2."""
    if r < 0:
        raise ValueError("tau/T2 must be nonnegative")
    return 3 * r


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of log y against log x."""
    lx, ly = np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float))
    return float(np.polyfit(lx, ly, 1)[0])


def fit_report(obj) -> str:
    return json.dumps(obj.to_dict() if hasattr(obj, "to_dict") else obj, indent=2, sort_keys=True)
