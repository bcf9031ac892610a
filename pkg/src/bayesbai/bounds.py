"""Closed-form misidentification bounds and Gaussian-integral identities.

Every formula is available as a plain function returning a float, and through
:func:`evaluate`, which also reports the natural-log value and whether the
result underflowed. Bounds are not clamped; use :func:`clamp01` for plotting.

An adaptive 2-D quadrature oracle is included to check the integral
identities against their defining integrals.
"""
from __future__ import annotations

import math
import sys
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import cubature
from scipy.optimize import minimize
from scipy.special import logsumexp

from .core import elimination_schedule

_TINY = sys.float_info.min


@dataclass(frozen=True)
class BoundInput:
    K: int
    n: float
    sigma_sq: tuple[float, ...]
    sigma0_sq: float
    nu: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "sigma_sq", tuple(float(v) for v in self.sigma_sq))
        object.__setattr__(self, "nu", tuple(float(v) for v in self.nu))
        if self.K < 2:
            raise ValueError(f"need K >= 2, got {self.K}")
        if not (len(self.sigma_sq) == len(self.nu) == self.K):
            raise ValueError("sigma_sq and nu must both have K entries")
        if not self.n >= 1:
            raise ValueError(f"need n >= 1, got {self.n}")
        if not self.sigma0_sq > 0:
            raise ValueError(f"sigma0_sq must be > 0, got {self.sigma0_sq}")
        if any(not v >= 0 for v in self.sigma_sq) or sum(self.sigma_sq) <= 0:
            raise ValueError("reward variances must be >= 0 with a positive total")

    @property
    def R(self) -> int:
        return elimination_schedule(self.K).rounds

    @property
    def R_sigma(self) -> float:
        """R times the total reward variance."""
        return self.R * sum(self.sigma_sq)


@dataclass(frozen=True)
class BoundResult:
    formula_id: str
    inputs: dict
    value: float
    log_value: float
    underflow: bool = False
    note: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        if not self.note:
            d.pop("note")
        return d


def _combine(prefactor: float, exponents: Sequence[float]) -> tuple[float, float]:
    """prefactor * sum(exp(-e)), together with its log."""
    e = np.asarray(exponents, dtype=float)
    log_value = math.log(prefactor) + float(logsumexp(-e))
    if log_value < math.log(_TINY):
        return 0.0, log_value
    if log_value > math.log(sys.float_info.max):
        return math.inf, log_value
    top = float(np.max(-e))
    if top > 700:
        # rescale so that the terms cannot overflow on their own
        return prefactor * math.exp(top) * float(np.sum(np.exp(-e - top))), log_value
    return prefactor * float(np.sum(np.exp(-e))), log_value


def _pair_gaps_sq(nu: Sequence[float]) -> list[float]:
    K = len(nu)
    return [(nu[i] - nu[j]) ** 2 for i in range(K) for j in range(i + 1, K)]


def _check_positive(name: str, x: float) -> None:
    if not x > 0:
        raise ValueError(f"{name} must be > 0, got {x}")


# -- elimination upper bounds -------------------------------------------------

def _bayes_elim(inp: BoundInput):
    RS = inp.R_sigma
    pre = 2 * math.log2(inp.K) * math.sqrt(RS / (inp.n * inp.sigma0_sq + RS))
    return _combine(pre, [g / (4 * inp.sigma0_sq) for g in _pair_gaps_sq(inp.nu)])


def _freq_elim(inp: BoundInput):
    RS = inp.R_sigma
    ns0 = inp.n * inp.sigma0_sq
    pre = 2 * math.log2(inp.K) * math.sqrt(RS / (ns0 + RS))
    shrink = ns0 / (ns0 + RS)
    return _combine(pre, [shrink * g / (4 * inp.sigma0_sq) for g in _pair_gaps_sq(inp.nu)])


def _freq_elim_limit(inp: BoundInput):
    c = inp.n / inp.R_sigma
    return _combine(2 * math.log2(inp.K), [c * g / 4 for g in _pair_gaps_sq(inp.nu)])


def bayes_elim_upper_bound(inp: BoundInput) -> float:
    """Upper bound on the prior-averaged misidentification probability of BayesElim."""
    return _bayes_elim(inp)[0]


def freq_elim_upper_bound(inp: BoundInput) -> float:
    """Same bound for frequentist elimination; the exponents shrink by n s0 / (n s0 + R sum s)."""
    return _freq_elim(inp)[0]


def freq_elim_limit_bound(inp: BoundInput) -> float:
    """Limit of :func:`freq_elim_upper_bound` as the prior variance goes to 0.

    ``sigma0_sq`` is ignored.
    """
    return _freq_elim_limit(inp)[0]


# -- two-armed bounds ----------------------------------------------------------

def _two_arm_args(n, sigma_sq, sigma0_sq):
    if not n >= 1:
        raise ValueError(f"need n >= 1, got {n}")
    _check_positive("sigma0_sq", sigma0_sq)
    _check_positive("sigma_sq", sigma_sq)


def _two_arm_upper(n, sigma_sq, sigma0_sq, nu1, nu2):
    _two_arm_args(n, sigma_sq, sigma0_sq)
    RS = 2 * sigma_sq
    pre = 2 * math.sqrt(RS / (n * sigma0_sq + RS))
    return _combine(pre, [(nu1 - nu2) ** 2 / (4 * sigma0_sq)])


def _two_arm_lower(n, sigma_sq, sigma0_sq, nu1, nu2):
    _two_arm_args(n, sigma_sq, sigma0_sq)
    denom = 2 * n * (8 * math.log(2 * n) + 1) * sigma0_sq + sigma_sq
    pre = math.sqrt(sigma_sq / denom) / (2 * math.e)
    return _combine(pre, [(nu1 - nu2) ** 2 / (4 * sigma0_sq)])


def bayes_elim_two_arm_bound(n, sigma_sq, sigma0_sq, nu1, nu2) -> float:
    """BayesElim upper bound for two arms with a common reward variance."""
    return _two_arm_upper(n, sigma_sq, sigma0_sq, nu1, nu2)[0]


def two_arm_lower_bound(n, sigma_sq, sigma0_sq, nu1, nu2) -> float:
    """Lower bound for any two-armed policy (natural log inside)."""
    return _two_arm_lower(n, sigma_sq, sigma0_sq, nu1, nu2)[0]


def _freq_lower(n, K, nu, star):
    nu = [float(v) for v in nu]
    if not n >= 1 or K < 2 or len(nu) != K:
        raise ValueError("need n >= 1, K >= 2 and K prior means")
    if not 0 <= star < K or any(nu[j] >= nu[star] for j in range(K) if j != star):
        raise ValueError(f"arm {star} is not the strict prior-mean maximizer")
    D = sum((nu[j] - nu[star]) ** -2 for j in range(K) if j != star)
    e = 12 * n / D + math.sqrt(48 * n * math.log(6 * K * n) / D)
    return _combine(1 / 6, [e])


def freq_policy_lower_bound(n, K, nu, star) -> float:
    """Lower bound for prior-oblivious policies in the vanishing prior-variance limit."""
    return _freq_lower(n, K, nu, star)[0]


# -- Gaussian integral identities ----------------------------------------------
# Both integrals are written in the dimensionless t = c * sigma0_sq so that the
# special cases reduce to each other without extra rounding.

def _shifted_gaussian_mgf(c1, c2, sigma0_sq, nu_i, nu_j):
    _check_positive("sigma0_sq", sigma0_sq)
    if c1 < 0:
        raise ValueError(f"c1 must be >= 0, got {c1}")
    t = c1 * sigma0_sq
    d = 4 * t + 1
    e = (t + c2 * (1 - c2)) / d * ((nu_j - nu_i) ** 2 / sigma0_sq)
    return _combine(1 / math.sqrt(d), [e])


def _gaussian_mgf(C, sigma0_sq, nu_i, nu_j):
    _check_positive("sigma0_sq", sigma0_sq)
    if C < 0:
        raise ValueError(f"C must be >= 0, got {C}")
    t = C * sigma0_sq
    d = 4 * t + 1
    return _combine(1 / math.sqrt(d), [t / d * ((nu_i - nu_j) ** 2 / sigma0_sq)])


def gaussian_integral_lemma1(c1, c2, sigma0_sq, nu_i, nu_j) -> float:
    """E[exp(-c1 D^2 - c2 D (nu_i - nu_j) / s0)] for D = mu_i - mu_j under the prior."""
    return _shifted_gaussian_mgf(c1, c2, sigma0_sq, nu_i, nu_j)[0]


def gaussian_integral_lemma2(C, sigma0_sq, nu_i, nu_j) -> float:
    """E[exp(-C D^2)] for D = mu_i - mu_j under the prior."""
    return _gaussian_mgf(C, sigma0_sq, nu_i, nu_j)[0]


def _first_round_expectation(inp: BoundInput, i: int, j: int):
    if not (0 <= i < inp.K and 0 <= j < inp.K):
        raise IndexError(f"arms {i}, {j} out of range for K={inp.K}")
    RS = inp.R_sigma
    pre = math.sqrt(RS / (inp.n * inp.sigma0_sq + RS))
    return _combine(pre, [(inp.nu[j] - inp.nu[i]) ** 2 / (4 * inp.sigma0_sq)])


def proposition_final_ub(inp: BoundInput, i: int, j: int) -> float:
    """Prior expectation of exp(-g_1(i, j)), the first-round biased gap."""
    return _first_round_expectation(inp, i, j)[0]


def clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


# -- quadrature oracle -----------------------------------------------------------

class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadratureSpec:
    atol: float = 0.0
    rtol: float = 1e-10
    half_width: float = 10.0
    max_subdivisions: int = 20000

    def __post_init__(self):
        if self.atol < 0 or not self.rtol > 0 or (self.atol == 0 and self.rtol <= 0):
            raise ValueError("tolerances must be positive")
        if self.half_width < 8:
            raise ValueError("half_width must be at least 8 prior standard deviations")


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error: float
    subdivisions: int


def quadrature_oracle(integrand: Callable[[np.ndarray, np.ndarray], np.ndarray],
                      spec: QuadratureSpec, centers: tuple[float, float],
                      sigma0_sq: float) -> QuadratureResult:
    """Adaptive Gauss-Kronrod integral of ``integrand(x, y)`` over a square box.

    The box is ``centers +- half_width * sigma0``; ``integrand`` is called with
    coordinate arrays and must be vectorized.
    """
    _check_positive("sigma0_sq", sigma0_sq)
    h = spec.half_width * math.sqrt(sigma0_sq)
    a = [centers[0] - h, centers[1] - h]
    b = [centers[0] + h, centers[1] + h]

    def f(x):
        return integrand(x[:, 0], x[:, 1])

    res = cubature(f, a, b, rtol=spec.rtol, atol=spec.atol,
                   max_subdivisions=spec.max_subdivisions)
    if res.status != "converged":
        raise QuadratureError(
            f"no convergence after {res.subdivisions} subdivisions "
            f"(estimate {res.estimate}, error {res.error})")
    return QuadratureResult(float(res.estimate), float(res.error), int(res.subdivisions))


def integrand_mode(log_integrand: Callable[[np.ndarray, np.ndarray], np.ndarray],
                   start: tuple[float, float]) -> tuple[float, float]:
    """Numerical maximizer of a 2-D log-integrand, for centering the box."""
    res = minimize(lambda p: -float(log_integrand(np.array([p[0]]), np.array([p[1]]))[0]),
                   np.asarray(start, dtype=float), method="BFGS", options={"gtol": 1e-10})
    return float(res.x[0]), float(res.x[1])


# -- formula registry --------------------------------------------------------------

def _as_tuple(x) -> tuple[float, ...]:
    if isinstance(x, (int, float)):
        return (float(x),)
    return tuple(float(v) for v in x)


def _bound_input(p: dict) -> BoundInput:
    nu = _as_tuple(p["nu"])
    sigma_sq = _as_tuple(p["sigma_sq"])
    if len(sigma_sq) == 1 and len(nu) > 1:
        sigma_sq = sigma_sq * len(nu)
    return BoundInput(len(nu), p["n"], sigma_sq, p["sigma0_sq"], nu)


_LOWER_BOUND_NOTE = ("existence statement: the bound is guaranteed for some prior of this "
                  "form; evaluated at the supplied parameters")

FORMULAS = {
    "theorem1": (("n", "sigma_sq", "sigma0_sq", "nu"),
                 lambda p: _bayes_elim(_bound_input(p))),
    "theorem2": (("n", "sigma_sq", "sigma0_sq", "nu"),
                 lambda p: _freq_elim(_bound_input(p))),
    "theorem2_limit": (("n", "sigma_sq", "nu"),
                       lambda p: _freq_elim_limit(_bound_input({**p, "sigma0_sq": 1.0}))),
    "corollary": (("n", "sigma_sq", "sigma0_sq", "nu1", "nu2"),
                  lambda p: _two_arm_upper(p["n"], p["sigma_sq"], p["sigma0_sq"], p["nu1"], p["nu2"])),
    "theorem3": (("n", "sigma_sq", "sigma0_sq", "nu1", "nu2"),
                 lambda p: _two_arm_lower(p["n"], p["sigma_sq"], p["sigma0_sq"], p["nu1"], p["nu2"])),
    "freq_lower": (("n", "nu", "star"),
                   lambda p: _freq_lower(p["n"], len(_as_tuple(p["nu"])), _as_tuple(p["nu"]),
                                         int(p["star"]))),
    "lemma1": (("c1", "c2", "sigma0_sq", "nu_i", "nu_j"),
               lambda p: _shifted_gaussian_mgf(p["c1"], p["c2"], p["sigma0_sq"], p["nu_i"], p["nu_j"])),
    "lemma2": (("C", "sigma0_sq", "nu_i", "nu_j"),
               lambda p: _gaussian_mgf(p["C"], p["sigma0_sq"], p["nu_i"], p["nu_j"])),
    "proposition": (("n", "sigma_sq", "sigma0_sq", "nu", "i", "j"),
                    lambda p: _first_round_expectation(_bound_input(p), int(p["i"]), int(p["j"]))),
}


def evaluate(formula_id: str, **params) -> BoundResult:
    """Evaluate a named formula; raises KeyError/ValueError on bad ids or parameters."""
    if formula_id not in FORMULAS:
        raise KeyError(f"unknown formula {formula_id!r}; expected one of {sorted(FORMULAS)}")
    names, fn = FORMULAS[formula_id]
    missing = [k for k in names if k not in params]
    extra = [k for k in params if k not in names]
    if missing or extra:
        raise ValueError(f"{formula_id} takes {', '.join(names)}"
                         + (f"; missing {missing}" if missing else "")
                         + (f"; unexpected {extra}" if extra else ""))
    value, log_value = fn(params)
    note = _LOWER_BOUND_NOTE if formula_id == "theorem3" else ""
    return BoundResult(formula_id, dict(params), value, log_value,
                       underflow=value == 0.0 and math.isfinite(log_value), note=note)
