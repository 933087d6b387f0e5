"""Information density and its moments.

Exact sums for finite channels, closed forms for Gaussian input into AWGN,
semi-closed forms (1-D Gauss-Laguerre over the fading gain) for Rayleigh
fading, and Monte Carlo for everything else. All values are in nats.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special

from .channels import (
    AWGNChannel,
    Channel,
    DiscreteChannel,
    Distribution,
    Gaussian,
    Pmf,
    RayleighChannel,
    make_rng,
    output_distribution,
)
from .errors import DomainError, EstimationError, InfiniteInformationError

DEFAULT_MC_SAMPLES = 10**6
DEFAULT_SEED = 20240601
_CHUNK = 200_000


class MCEstimate(float):
    """A float carrying the standard error and sample count of its estimate."""

    def __new__(cls, value, std_error, samples):
        obj = super().__new__(cls, value)
        obj.std_error = float(std_error)
        obj.samples = int(samples)
        return obj

    def __repr__(self):
        return f"MCEstimate({float(self)!r}, std_error={self.std_error!r}, samples={self.samples})"


def information_density(ch: Channel, qy: Distribution, x, y) -> np.ndarray:
    """log dK(x,.)/dQ_Y at y, elementwise.

    +inf where the kernel has mass that Q_Y lacks, -inf where the kernel
    density vanishes.
    """
    lk = np.asarray(ch.log_prob(x, y), dtype=float)
    lq = np.asarray(qy.log_prob(y), dtype=float)
    with np.errstate(invalid="ignore"):
        out = lk - lq
    out = np.where(np.isneginf(lk), -np.inf, out)
    out = np.where(np.isneginf(lq) & ~np.isneginf(lk), np.inf, out)
    return out


def block_information_density(ch: Channel, qy: Distribution, x_block, y_block) -> np.ndarray:
    """Sum of per-letter densities over the block axis; +inf absorbs first."""
    x = np.asarray(x_block)
    if x.ndim == 0 or x.shape[-1] < 1:
        raise DomainError("blocks must have length n >= 1")
    dens = information_density(ch, qy, x, y_block)
    total = np.where(np.isposinf(dens).any(axis=-1), np.inf, np.sum(np.where(np.isposinf(dens), 0.0, dens), axis=-1))
    return total if total.ndim else float(total)


def joint_table(ch: DiscreteChannel, qx: Pmf, qy: Pmf | None = None):
    """Joint weights Q_X(x)K(x,y) and the density matrix i(x,y)."""
    if qy is None:
        qy = output_distribution(ch, qx)
    weights = qx.probs[:, None] * ch.matrix
    xs, ys = np.meshgrid(np.arange(ch.matrix.shape[0]), np.arange(ch.matrix.shape[1]), indexing="ij")
    return weights, information_density(ch, qy, xs, ys)


def _kind(ch: Channel, qx: Distribution) -> str:
    if isinstance(ch, DiscreteChannel):
        if not isinstance(qx, Pmf):
            raise DomainError("finite channels need a pmf input")
        return "finite"
    if isinstance(ch, AWGNChannel) and isinstance(qx, Gaussian):
        return "awgn"
    if isinstance(ch, RayleighChannel) and isinstance(qx, Gaussian) and qx.mean == 0.0:
        return "rayleigh"
    return "mc"


def _snr(ch, qx):
    return qx.variance / ch.noise_variance


def _laguerre(order=64):
    # E f(g) for g ~ Exp(1)
    return np.polynomial.laguerre.laggauss(order)


def _rayleigh_snr_nodes(ch, qx, order=64):
    g, w = _laguerre(order)
    return ch.fading_power * g * qx.variance / ch.noise_variance, w


def sample_information_density(ch, qx, num_samples=DEFAULT_MC_SAMPLES, seed=DEFAULT_SEED, qy=None, quadrature_order=64):
    """Draw ``(X, Y) ~ Q_{X,Y}`` and return the information density samples."""
    if qy is None:
        qy = output_distribution(ch, qx, quadrature_order=quadrature_order)
    rng = make_rng(seed)
    parts = []
    left = int(num_samples)
    while left > 0:
        k = min(left, _CHUNK)
        x = qx.sample(rng, k)
        y = ch.sample(x, rng)
        parts.append(information_density(ch, qy, x, y))
        left -= k
    out = np.concatenate(parts)
    if np.isnan(out).any():
        raise EstimationError(f"NaN information density in {np.isnan(out).sum()} of {out.size} samples")
    return out


def _mean_estimate(values):
    if not np.isfinite(values).all():
        raise EstimationError(
            f"non-finite samples: {np.isposinf(values).sum()} +inf, {np.isneginf(values).sum()} -inf of {values.size}"
        )
    return MCEstimate(values.mean(), values.std(ddof=1) / math.sqrt(values.size), values.size)


def mutual_information(ch: Channel, qx: Distribution, num_samples=DEFAULT_MC_SAMPLES, seed=DEFAULT_SEED, quadrature_order=64) -> float:
    """I(X;Y) in nats; an :class:`MCEstimate` when no exact route exists."""
    kind = _kind(ch, qx)
    if kind == "finite":
        w, d = joint_table(ch, qx)
        mask = w > 0
        if np.isposinf(d[mask]).any():
            raise InfiniteInformationError("kernel not absolutely continuous w.r.t. Q_Y")
        return float(np.sum(w[mask] * d[mask]))
    if kind == "awgn":
        return 0.5 * math.log1p(_snr(ch, qx))
    if kind == "rayleigh":
        z = ch.noise_variance / (ch.fading_power * qx.variance)
        if z < 700:
            return 0.5 * math.exp(z) * float(special.exp1(z))
        s, w = _rayleigh_snr_nodes(ch, qx)
        return float(0.5 * np.dot(w, np.log1p(s)))
    est = _mean_estimate(sample_information_density(ch, qx, num_samples, seed, quadrature_order=quadrature_order))
    if not math.isfinite(est):
        raise InfiniteInformationError("mutual information estimate diverged")
    return est


def dispersion_moments(ch: Channel, qx: Distribution, num_samples=DEFAULT_MC_SAMPLES, seed=DEFAULT_SEED, quadrature_order=64):
    """Central second moment V and absolute third moment rho of i(X;Y)."""
    kind = _kind(ch, qx)
    if kind == "finite":
        w, d = joint_table(ch, qx)
        mask = w > 0
        c = d[mask] - np.sum(w[mask] * d[mask])
        return float(np.sum(w[mask] * c**2)), float(np.sum(w[mask] * np.abs(c) ** 3))
    if kind == "awgn":
        u = _snr(ch, qx) / (1.0 + _snr(ch, qx))
        return u, 8.0 / math.pi * u**1.5
    if kind == "rayleigh":
        s, w = _rayleigh_snr_nodes(ch, qx)
        cond_mi = 0.5 * np.log1p(s)
        mi = float(np.dot(w, cond_mi))
        v = float(np.dot(w, s / (1 + s) + (cond_mi - mi) ** 2))
        samples = sample_information_density(ch, qx, num_samples, seed)
        third = np.abs(samples - mi) ** 3
        return v, _mean_estimate(third)
    samples = sample_information_density(ch, qx, num_samples, seed, quadrature_order=quadrature_order)
    mi = samples.mean()
    return _mean_estimate((samples - mi) ** 2), _mean_estimate(np.abs(samples - mi) ** 3)


def log_info_density_mgf(ch: Channel, qx: Distribution, t: float, num_samples=DEFAULT_MC_SAMPLES, seed=DEFAULT_SEED, quadrature_order=64) -> float:
    """log E exp(t i(X;Y)); +inf when the expectation diverges."""
    t = float(t)
    if t == 0.0:
        return 0.0
    kind = _kind(ch, qx)
    if kind == "finite":
        w, d = joint_table(ch, qx)
        mask = w > 0
        if t > 0 and np.isposinf(d[mask]).any():
            return math.inf
        return float(special.logsumexp(np.log(w[mask]) + t * d[mask]))
    if kind == "awgn":
        u = _snr(ch, qx) / (1.0 + _snr(ch, qx))
        inner = 1.0 - t * t * u
        if inner <= 0:
            return math.inf
        return t * mutual_information(ch, qx) - 0.5 * math.log(inner)
    if kind == "rayleigh":
        s, w = _rayleigh_snr_nodes(ch, qx, order=128)
        inner = 1.0 - t * t * s / (1 + s)
        if (inner <= 0).any():
            return math.inf
        return float(special.logsumexp(0.5 * t * np.log1p(s) - 0.5 * np.log(inner), b=w))
    samples = sample_information_density(ch, qx, num_samples, seed, quadrature_order=quadrature_order)
    return float(special.logsumexp(t * samples) - math.log(samples.size))


def info_density_mgf(ch: Channel, qx: Distribution, t: float, **kw) -> float:
    """E_{Q_{X,Y}} exp(t i(X;Y)), possibly +inf."""
    lm = log_info_density_mgf(ch, qx, t, **kw)
    return math.inf if lm > 709.0 else math.exp(lm)


def renyi_divergence(ch: Channel, qx: Distribution, alpha: float, **kw) -> float:
    """D_alpha(Q_{X,Y} || Q_X Q_Y) for alpha > 1, through the MGF at alpha - 1."""
    if not alpha > 1.0:
        raise DomainError("Renyi order must exceed 1")
    return log_info_density_mgf(ch, qx, alpha - 1.0, **kw) / (alpha - 1.0)


@dataclass
class InfoStats:
    mutual_information_nats: float
    central_second_moment_V: float
    abs_third_moment_rho: float
    mgf_grid: list = field(default_factory=list)
    renyi_grid: list = field(default_factory=list)

    def to_dict(self):
        d = asdict(self)
        for key in ("mutual_information_nats", "central_second_moment_V", "abs_third_moment_rho"):
            d[key] = float(d[key])
        return d

    def renyi_curve(self):
        alphas, values = zip(*self.renyi_grid) if self.renyi_grid else ((), ())
        return np.array(alphas), np.array(values)


DEFAULT_ALPHA_GRID = tuple(np.round(np.arange(1.01, 2.0001, 0.01), 10))


def info_stats(ch: Channel, qx: Distribution, t_grid=(0.25, 0.5, 1.0), alpha_grid=DEFAULT_ALPHA_GRID, **kw) -> InfoStats:
    mi = mutual_information(ch, qx, **kw)
    v, rho = dispersion_moments(ch, qx, **kw)
    mgf = [(float(t), info_density_mgf(ch, qx, t, **kw)) for t in t_grid]
    renyi = [(float(a), renyi_divergence(ch, qx, a, **kw)) for a in alpha_grid]
    return InfoStats(mi, v, rho, mgf, renyi)
