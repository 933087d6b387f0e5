"""Closed-form tail bounds for random resolvability codes.

Doubly exponential quantities are also offered in log form (``log_*``)
because they underflow double precision from moderate block lengths on.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special

from .errors import DegenerateDispersionError, DomainError, HypothesisViolation, NoValidParamsError

SQRT_3PI_2 = math.sqrt(3 * math.pi / 2)
THEOREM3_CONSTANT = 7 / 6 + SQRT_3PI_2 * math.exp(0.75)
# Shevtsova's i.i.d. Berry-Esseen constant; only used when explicitly requested
SHARP_BERRY_ESSEEN = 0.4748


def q_function(a):
    """Standard normal upper tail 1 - Phi(a)."""
    out = special.ndtr(-np.asarray(a, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def q_inverse(p):
    """Inverse of :func:`q_function` on (0, 1)."""
    arr = np.asarray(p, dtype=float)
    if ((arr <= 0) | (arr >= 1) | np.isnan(arr)).any():
        raise DomainError("Q^-1 needs p in (0, 1)")
    out = -special.ndtri(arr)
    return float(out) if np.ndim(out) == 0 else out


# --------------------------------------------------------------------------
# Lemma-level bounds
# --------------------------------------------------------------------------


def log_lemma1_bound(mu, delta, n, R, codebook_size=None):
    if not 0 <= mu <= 1 or not 0 <= delta <= 1:
        raise DomainError("need mu and delta in [0, 1]")
    if delta == 0 or mu == 0:
        return 0.0
    log_size = n * R if codebook_size is None else math.log(codebook_size)
    log_mag = 2 * math.log(delta) + math.log(mu) + log_size - math.log(3.0)
    return -math.inf if log_mag > 709.0 else -math.exp(log_mag)


def lemma1_bound(mu, delta, n, R, codebook_size=None) -> float:
    """exp(-delta^2 mu exp(nR) / 3): chance that the atypical mass exceeds mu(1+delta).

    ``codebook_size`` replaces exp(nR) by the actual number of codewords.
    """
    return math.exp(log_lemma1_bound(mu, delta, n, R, codebook_size))


def log_lemma2_bound(delta, lam, n, R, I, epsilon) -> float:
    if not (delta > 0 and lam > 0):
        raise DomainError("need delta > 0 and lambda > 0")
    log_r = n * (R - I - epsilon)
    if log_r - math.log(6 * lam) < 0:
        raise HypothesisViolation(f"r/(6 lambda) = exp({log_r - math.log(6 * lam):.4g}) < 1")
    # log(sqrt(3pi/2) exp(3 lam^2 / 4r) lam / sqrt(r))
    log_mid = math.log(SQRT_3PI_2) + 0.75 * math.exp(2 * math.log(lam) - log_r) + math.log(lam) - 0.5 * log_r
    return float(np.logaddexp.reduce([0.0, log_mid, -lam])) - delta * lam


def lemma2_bound(delta, lam, n, R, I, epsilon) -> float:
    """Tail bound on the typical part exceeding ``delta``; needs r/(6 lambda) >= 1."""
    return math.exp(log_lemma2_bound(delta, lam, n, R, I, epsilon))


def chernoff_atypical_bound(alpha, I, epsilon, D_alpha, n) -> float:
    """exp(-n (alpha-1)(I + eps - D_alpha)), an upper bound on the atypical probability."""
    if not alpha > 1:
        raise DomainError("alpha must exceed 1")
    return math.exp(-n * (alpha - 1) * (I + epsilon - D_alpha))


# --------------------------------------------------------------------------
# First order
# --------------------------------------------------------------------------


@dataclass
class FirstOrderParams:
    epsilon: float
    alpha: float
    beta1: float
    beta2: float
    gamma1: float
    gamma2: float
    n_min: int
    I: float = float("nan")
    R: float = float("nan")
    D_alpha: float = float("nan")

    def to_dict(self):
        return asdict(self)


def first_order_violations(p: FirstOrderParams, I: float, R: float, D_alpha: float) -> list[str]:
    """Return the defining inequalities that ``p`` breaks (empty when valid)."""
    gap = R - I - p.epsilon
    bad = []
    if not 0 < p.epsilon < R - I:
        bad.append("0 < epsilon < R - I")
    if not 0 < p.beta1 <= (p.alpha - 1) * (I + p.epsilon - D_alpha):
        bad.append("beta1 <= (alpha-1)(I + epsilon - D_alpha)")
    if not p.beta1 < p.beta2 < gap / 2:
        bad.append("beta1 < beta2 < (R - I - epsilon)/2")
    if not 0 < p.gamma1 < p.beta1:
        bad.append("0 < gamma1 < beta1")
    if not 0 < p.gamma2 < min(R - p.beta1, p.beta2 - p.beta1):
        bad.append("0 < gamma2 < min(R - beta1, beta2 - beta1)")
    return bad


def select_first_order_params(I, D_alpha_curve, R, search_grid=None, margin=0.05) -> FirstOrderParams:
    """Grid search for (epsilon, alpha, beta1, beta2, gamma1, gamma2).

    ``D_alpha_curve`` is a callable alpha -> D_alpha or a pair of arrays
    ``(alphas, values)``. ``search_grid`` may override ``{"alpha": ...,
    "epsilon": ...}``. Strict inequalities are met by backing off a
    fraction ``margin`` from each supremum. The choice maximises gamma1,
    then gamma2, then prefers the smaller alpha.
    """
    if not R > I:
        raise NoValidParamsError(f"R = {R} does not exceed I = {I}")
    grid = dict(search_grid or {})
    if callable(D_alpha_curve):
        alphas = np.asarray(grid.get("alpha", np.round(np.arange(1.01, 2.0001, 0.01), 10)))
        d_vals = np.array([D_alpha_curve(a) for a in alphas], dtype=float)
    else:
        alphas, d_vals = (np.asarray(v, dtype=float) for v in D_alpha_curve)
    eps_grid = np.asarray(grid.get("epsilon", np.linspace(0, R - I, 52)[1:-1]))
    keep = np.isfinite(d_vals) & (alphas > 1)
    if not keep.any():
        raise NoValidParamsError("D_alpha is infinite on the whole alpha grid")
    alphas, d_vals = alphas[keep], d_vals[keep]

    best = None
    shrink = 1.0 - margin
    for eps in eps_grid:
        half = (R - I - eps) / 2
        if not 0 < eps < R - I:
            continue
        for a, d in zip(alphas, d_vals):
            cap = (a - 1) * (I + eps - d)
            if cap <= 0:
                continue
            b1 = min(cap, shrink * half)
            b2 = b1 + shrink * (half - b1)
            g1 = shrink * b1
            g2 = shrink * min(R - b1, b2 - b1)
            key = (g1, g2, -a)
            if best is None or key > best[0]:
                best = (key, eps, a, d, b1, b2, g1, g2)
    if best is None:
        raise NoValidParamsError("no grid point gives a positive beta1")
    _, eps, a, d, b1, b2, g1, g2 = best
    n_min = math.ceil(math.log(6) / (R - I - eps - b2))
    return FirstOrderParams(
        float(eps), float(a), float(b1), float(b2), float(g1), float(g2), max(1, n_min), I=float(I), R=float(R), D_alpha=float(d)
    )


def theorem2_threshold(gamma1, n) -> float:
    return math.exp(-gamma1 * n)


def log_theorem2_rhs(gamma2, n) -> float:
    return -math.exp(gamma2 * n)


def theorem2_rhs(gamma2, n) -> float:
    """exp(-exp(gamma2 n)); underflows to 0 quickly, see :func:`log_theorem2_rhs`."""
    return math.exp(log_theorem2_rhs(gamma2, n))


def theorem2_union_terms(p: FirstOrderParams, n: int, I: float, R: float) -> dict:
    """Log of the two union-bound terms behind the first-order result at finite n.

    Returns ``{"atypical": ..., "typical": ...}`` for the event
    TV > 3 exp(-n beta1), with lambda = exp(n beta2) and delta = exp(-n beta1).
    """
    atyp = log_lemma1_bound(math.exp(-n * p.beta1), 1.0, n, R)
    typ = log_lemma2_bound(math.exp(-n * p.beta1), math.exp(n * p.beta2), n, R, I, p.epsilon)
    return {"atypical": atyp, "typical": typ}


# --------------------------------------------------------------------------
# Second order
# --------------------------------------------------------------------------


@dataclass
class SecondOrderParams:
    xi: float
    c: float
    d: float
    n: int
    rate_R: float
    epsilon: float
    mu: float
    berry_esseen_gap: float

    def to_dict(self):
        return asdict(self)


def second_order_rate(I, V, xi, c, n) -> float:
    return I + math.sqrt(V / n) * q_inverse(xi) + c * math.log(n) / n


def second_order_schedule(I, V, rho, xi, c, d, n, berry_esseen_constant=1.0) -> SecondOrderParams:
    """Rate, typicality slack and atypical-mass bound mu at block length n."""
    if not V > 0:
        raise DegenerateDispersionError("V = 0: second-order expansion is degenerate")
    if not 0 < xi < 1:
        raise DomainError("xi must lie in (0, 1)")
    if not c > 1:
        raise DomainError("c must exceed 1")
    if not 0 < d < c - 1:
        raise DomainError("d must lie in (0, c - 1)")
    if n ** ((c - d) / 2) < 6:
        raise HypothesisViolation(f"n^((c-d)/2) = {n ** ((c - d) / 2):.4g} < 6")
    qi = q_inverse(xi)
    eps = math.sqrt(V / n) * qi + d * math.log(n) / n
    gap = berry_esseen_gap(I, V, rho, n, constant=berry_esseen_constant)
    mu = q_function(qi + d * math.log(n) / math.sqrt(n * V)) + gap
    return SecondOrderParams(xi, c, d, int(n), second_order_rate(I, V, xi, c, n), eps, mu, gap)


def log_theorem3_terms(mu, n, R, c, d, proven_exponent=False):
    """Logs of the atypical and typical terms of the second-order tail bound.

    The stated atypical exponent is n mu exp(nR)/3. The codebook-tail bound with
    delta = 1/sqrt(n) gives mu exp(nR)/(3n); ``proven_exponent=True``
    selects that weaker form.
    """
    factor = 1.0 / n if proven_exponent else float(n)
    atyp = -factor * mu * math.exp(min(n * R, 700.0)) / 3.0
    typ = math.log(THEOREM3_CONSTANT) - n ** ((c - d - 1) / 2)
    return atyp, typ


def theorem3_rhs(mu, n, R, c, d, proven_exponent=False) -> float:
    """exp(-n mu exp(nR)/3) + (7/6 + sqrt(3 pi/2) e^(3/4)) exp(-n^((c-d-1)/2))."""
    atyp, typ = log_theorem3_terms(mu, n, R, c, d, proven_exponent)
    return math.exp(atyp) + math.exp(typ)


def berry_esseen_gap(I, V, rho, n, a=None, constant=1.0) -> float:
    """constant * rho / (V^(3/2) sqrt(n)); the slack added to Q(a).

    ``a`` is accepted for symmetry with the tail being compared; the slack
    is uniform in it.
    """
    if not V > 0:
        raise DegenerateDispersionError("V = 0: Berry-Esseen slack undefined")
    return constant * rho / (V**1.5 * math.sqrt(n))


@dataclass
class BoundReport:
    """Evaluated bound values with every input echoed."""

    inputs: dict
    values: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"inputs": self.inputs, "values": self.values}, sort_keys=True, default=float)
