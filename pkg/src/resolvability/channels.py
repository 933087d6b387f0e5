"""Channel and distribution models.

Finite alphabets are evaluated exactly from a row-stochastic matrix. The
real-line families (AWGN, Rayleigh fading with receiver side information)
carry a log-density and a sampler. Every log quantity is in nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .errors import DomainError, UnsupportedCompositionError

LOG_2PI = math.log(2.0 * math.pi)
PMF_TOL = 1e-12
DENSITY_TOL = 1e-6


def make_rng(seed):
    """Return a numpy Generator for an int seed, SeedSequence or Generator."""
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class Alphabet:
    """Symbol set of a channel input or output.

    ``kind`` is ``"finite"`` (symbols ``0..size-1``) or ``"real"``. Real
    alphabets with ``dim=2`` hold pairs, used for fading outputs where the
    gain is observed alongside the received value.
    """

    kind: str
    size: int | None = None
    labels: tuple[str, ...] | None = None
    dim: int = 1

    def __post_init__(self):
        if self.kind == "finite":
            if self.size is None or int(self.size) < 1:
                raise DomainError("finite alphabet needs size >= 1")
            if self.labels is not None and len(self.labels) != self.size:
                raise DomainError("one label per symbol required")
        elif self.kind == "real":
            if self.size is not None:
                raise DomainError("real alphabet has no size")
        else:
            raise DomainError(f"unknown alphabet kind {self.kind!r}")

    @property
    def is_finite(self) -> bool:
        return self.kind == "finite"

    def check(self, values) -> np.ndarray:
        """Validate ``values`` and return them as an array."""
        arr = np.asarray(values)
        if self.is_finite:
            if arr.dtype.kind not in "iu":
                if arr.dtype.kind == "f" and np.all(np.mod(arr, 1) == 0):
                    arr = arr.astype(np.int64)
                else:
                    raise DomainError(f"finite symbols must be integers, got {arr.dtype}")
            if arr.size and (arr.min() < 0 or arr.max() >= self.size):
                raise DomainError(f"symbol outside alphabet of size {self.size}")
            return arr
        arr = arr.astype(float)
        if self.dim > 1 and (arr.ndim == 0 or arr.shape[-1] != self.dim):
            raise DomainError(f"expected trailing dimension {self.dim}")
        if np.isnan(arr).any():
            raise DomainError("NaN is not a real symbol")
        return arr


def finite(size: int, labels=None) -> Alphabet:
    return Alphabet("finite", size=int(size), labels=tuple(labels) if labels else None)


REAL = Alphabet("real")
REAL_PAIR = Alphabet("real", dim=2)


# --------------------------------------------------------------------------
# Distributions
# --------------------------------------------------------------------------


class Distribution:
    """A probability law on an alphabet, evaluated in log space."""

    alphabet: Alphabet

    def log_prob(self, y) -> np.ndarray:
        raise NotImplementedError

    def sample(self, rng, size) -> np.ndarray:
        raise NotImplementedError

    def quadrature(self, order: int):
        """Nodes and weights integrating against this law."""
        raise UnsupportedCompositionError(f"{type(self).__name__} has no quadrature rule")

    def describe(self) -> str:
        return type(self).__name__.lower()


@dataclass(frozen=True, eq=False)
class Pmf(Distribution):
    probs: np.ndarray
    alphabet: Alphabet = field(default=None)

    def __post_init__(self):
        p = np.array(self.probs, dtype=float).ravel()
        if p.size == 0 or (p < 0).any():
            raise DomainError("pmf entries must be nonnegative")
        if abs(p.sum() - 1.0) > PMF_TOL:
            raise DomainError(f"pmf sums to {p.sum()!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)
        if self.alphabet is None:
            object.__setattr__(self, "alphabet", finite(p.size))
        elif self.alphabet.size != p.size:
            raise DomainError("pmf length does not match alphabet")

    @property
    def log_probs(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.probs)

    def log_prob(self, y):
        y = self.alphabet.check(y)
        return self.log_probs[y]

    def sample(self, rng, size):
        return _inverse_cdf_draw(np.cumsum(self.probs), make_rng(rng), size)

    def describe(self):
        return "pmf(" + ",".join(f"{v:.6g}" for v in self.probs) + ")"


def uniform_pmf(k: int) -> Pmf:
    return Pmf(np.full(k, 1.0 / k))


def point_mass(k: int, symbol: int) -> Pmf:
    p = np.zeros(k)
    p[symbol] = 1.0
    return Pmf(p)


def _inverse_cdf_draw(cum, rng, size):
    # 1 - U lies in (0, 1], so a zero-probability leading symbol is never drawn
    u = 1.0 - rng.random(size)
    out = np.searchsorted(cum, u, side="left")
    return np.minimum(out, len(cum) - 1).astype(np.int64)


def _check_density(logpdf, lo=-np.inf, hi=np.inf):
    total, _ = integrate.quad(lambda t: math.exp(logpdf(t)), lo, hi, limit=200)
    if abs(total - 1.0) > DENSITY_TOL:
        raise DomainError(f"density integrates to {total}, not 1")


@dataclass(frozen=True, eq=False)
class Gaussian(Distribution):
    variance: float
    mean: float = 0.0
    alphabet: Alphabet = field(default=REAL, init=False)

    def __post_init__(self):
        if not self.variance > 0:
            raise DomainError("Gaussian variance must be positive")
        _check_density(lambda t: float(self.log_prob(t)))

    def log_prob(self, y):
        y = np.asarray(y, dtype=float)
        return -0.5 * (LOG_2PI + math.log(self.variance)) - (y - self.mean) ** 2 / (2 * self.variance)

    def sample(self, rng, size):
        return self.mean + math.sqrt(self.variance) * make_rng(rng).standard_normal(size)

    def quadrature(self, order=64):
        nodes, weights = np.polynomial.hermite_e.hermegauss(order)
        return self.mean + math.sqrt(self.variance) * nodes, weights / math.sqrt(2 * math.pi)

    def describe(self):
        return f"gaussian(var={self.variance:g})"


@dataclass(frozen=True, eq=False)
class Uniform(Distribution):
    low: float
    high: float
    alphabet: Alphabet = field(default=REAL, init=False)

    def __post_init__(self):
        if not self.high > self.low:
            raise DomainError("uniform needs low < high")

    def log_prob(self, y):
        y = np.asarray(y, dtype=float)
        inside = (y >= self.low) & (y <= self.high)
        return np.where(inside, -math.log(self.high - self.low), -np.inf)

    def sample(self, rng, size):
        return make_rng(rng).uniform(self.low, self.high, size)

    def quadrature(self, order=64):
        nodes, weights = np.polynomial.legendre.leggauss(order)
        half = 0.5 * (self.high - self.low)
        return self.low + half * (nodes + 1.0), weights / 2.0

    def describe(self):
        return f"uniform({self.low:g},{self.high:g})"


def rayleigh_log_pdf(h, fading_power):
    h = np.asarray(h, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(2.0 * h / fading_power) - h**2 / fading_power
    return np.where(h > 0, out, -np.inf)


@dataclass(frozen=True, eq=False)
class FadedGaussian(Distribution):
    """Law of ``(h, h*X + Z)`` with Rayleigh ``h``, ``X ~ N(0, P)``, ``Z ~ N(0, N)``."""

    fading_power: float
    signal_variance: float
    noise_variance: float
    alphabet: Alphabet = field(default=REAL_PAIR, init=False)

    def __post_init__(self):
        if min(self.fading_power, self.noise_variance) <= 0 or self.signal_variance < 0:
            raise DomainError("fading power and noise variance must be positive")
        _check_density(lambda t: float(rayleigh_log_pdf(t, self.fading_power)), 0.0, np.inf)

    def log_prob(self, y):
        y = self.alphabet.check(y)
        h, v = y[..., 0], y[..., 1]
        var = h**2 * self.signal_variance + self.noise_variance
        return rayleigh_log_pdf(h, self.fading_power) - 0.5 * (LOG_2PI + np.log(var)) - v**2 / (2 * var)

    def sample(self, rng, size):
        rng = make_rng(rng)
        size = (size,) if np.isscalar(size) else tuple(size)
        h = np.sqrt(self.fading_power * rng.standard_exponential(size))
        v = np.sqrt(h**2 * self.signal_variance + self.noise_variance) * rng.standard_normal(size)
        return np.stack([h, v], axis=-1)

    def describe(self):
        return f"faded-gaussian(omega={self.fading_power:g},P={self.signal_variance:g},N={self.noise_variance:g})"


@dataclass(frozen=True, eq=False)
class QuadratureMixture(Distribution):
    """Output law approximated as a finite mixture over quadrature nodes.

    Sampling is exact (draw the input, then the channel); only the density
    is approximated.
    """

    channel: "Channel"
    source: Distribution
    order: int = 64

    @property
    def alphabet(self):
        return self.channel.output

    def log_prob(self, y):
        nodes, weights = self.source.quadrature(self.order)
        y = np.asarray(y, dtype=float)
        terms = [math.log(w) + self.channel.log_prob(x, y) for x, w in zip(nodes, weights) if w > 0]
        return special.logsumexp(np.stack(terms), axis=0)

    def sample(self, rng, size):
        rng = make_rng(rng)
        return self.channel.sample(self.source.sample(rng, size), rng)

    def describe(self):
        return f"quadrature[{self.order}]({self.source.describe()})"


# --------------------------------------------------------------------------
# Channels
# --------------------------------------------------------------------------


class Channel:
    """Memoryless stochastic kernel from ``input`` to ``output``."""

    family: str
    input: Alphabet
    output: Alphabet

    def log_prob(self, x, y) -> np.ndarray:
        raise NotImplementedError

    def sample(self, x, rng) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> str:
        return self.family

    def block_log_likelihoods(self, codewords, y_blocks) -> np.ndarray:
        """``out[s, m] = log K^n(codewords[m], y_blocks[s])``.

        Generic broadcasting version; subclasses override with cheaper forms.
        """
        codewords = np.asarray(codewords)
        y_blocks = np.asarray(y_blocks)
        m, n = codewords.shape[:2]
        out = np.zeros((len(y_blocks), m))
        for j in range(n):
            out += self.log_prob(codewords[None, :, j], y_blocks[:, None, j])
        return out


class DiscreteChannel(Channel):
    """Finite-input, finite-output channel given by a row-stochastic matrix."""

    def __init__(self, matrix, family="DMC", params=None, input_alphabet=None):
        k = np.array(matrix, dtype=float)
        if k.ndim != 2 or (k < 0).any():
            raise DomainError("kernel must be a nonnegative matrix")
        bad = np.abs(k.sum(axis=1) - 1.0) > PMF_TOL
        if bad.any():
            raise DomainError(f"kernel rows {np.flatnonzero(bad).tolist()} do not sum to 1")
        k.setflags(write=False)
        self.matrix = k
        self.family = family
        self.params = dict(params or {})
        self.input = input_alphabet or finite(k.shape[0])
        self.output = finite(k.shape[1])
        with np.errstate(divide="ignore"):
            self.log_matrix = np.log(k)
        self._cum = np.cumsum(k, axis=1)

    def describe(self):
        if self.params:
            inner = ",".join(f"{k}={v:g}" for k, v in self.params.items())
            return f"{self.family}({inner})"
        return f"{self.family}({self.matrix.shape[0]}x{self.matrix.shape[1]})"

    def kernel_rows(self, x) -> np.ndarray:
        return self.matrix[np.asarray(x)]

    def log_prob(self, x, y):
        return self.log_matrix[np.asarray(x), np.asarray(y)]

    def sample(self, x, rng):
        x = np.asarray(x)
        u = 1.0 - make_rng(rng).random(x.shape)
        cum = self._cum[x]
        y = (u[..., None] > cum).sum(axis=-1)
        return np.minimum(y, self.matrix.shape[1] - 1).astype(np.int64)

    def block_log_likelihoods(self, codewords, y_blocks):
        codewords = np.asarray(codewords)
        y_blocks = np.asarray(y_blocks)
        out = np.zeros((len(y_blocks), len(codewords)))
        for j in range(codewords.shape[1]):
            # (|Y|, M) table for position j, gathered by observed symbol
            table = self.log_matrix[codewords[:, j]].T
            out += table[y_blocks[:, j]]
        return out


def bsc(p: float) -> DiscreteChannel:
    if not 0.0 <= p <= 1.0:
        raise DomainError("crossover probability must lie in [0, 1]")
    return DiscreteChannel([[1 - p, p], [p, 1 - p]], family="BSC", params={"p": p})


def noiseless(k: int = 2) -> DiscreteChannel:
    return DiscreteChannel(np.eye(k), family="noiseless", params={"k": k})


def dmc(rows) -> DiscreteChannel:
    return DiscreteChannel(rows)


class AWGNChannel(Channel):
    family = "AWGN"
    input = REAL
    output = REAL

    def __init__(self, noise_variance: float):
        if not noise_variance > 0:
            raise DomainError("noise variance must be positive")
        self.noise_variance = float(noise_variance)

    def describe(self):
        return f"AWGN(N={self.noise_variance:g})"

    def log_prob(self, x, y):
        d = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
        return -0.5 * (LOG_2PI + math.log(self.noise_variance)) - d**2 / (2 * self.noise_variance)

    def sample(self, x, rng):
        x = np.asarray(x, dtype=float)
        return x + math.sqrt(self.noise_variance) * make_rng(rng).standard_normal(x.shape)

    def cdf(self, x, t):
        return special.ndtr((np.asarray(t) - np.asarray(x)) / math.sqrt(self.noise_variance))

    def block_log_likelihoods(self, codewords, y_blocks):
        c = np.asarray(codewords, dtype=float)
        y = np.asarray(y_blocks, dtype=float)
        n = c.shape[1]
        sq = (y**2).sum(1)[:, None] - 2.0 * y @ c.T + (c**2).sum(1)[None, :]
        return -0.5 * n * (LOG_2PI + math.log(self.noise_variance)) - np.maximum(sq, 0.0) / (2 * self.noise_variance)


class RayleighChannel(Channel):
    """``Y = (h, h*x + Z)`` with Rayleigh gain ``h`` known at the receiver."""

    family = "Rayleigh"
    input = REAL
    output = REAL_PAIR

    def __init__(self, fading_power: float, noise_variance: float):
        if not (fading_power > 0 and noise_variance > 0):
            raise DomainError("fading power and noise variance must be positive")
        self.fading_power = float(fading_power)
        self.noise_variance = float(noise_variance)

    def describe(self):
        return f"Rayleigh(omega={self.fading_power:g},N={self.noise_variance:g})"

    def log_prob(self, x, y):
        y = np.asarray(y, dtype=float)
        h, v = y[..., 0], y[..., 1]
        d = v - h * np.asarray(x, dtype=float)
        return (
            rayleigh_log_pdf(h, self.fading_power)
            - 0.5 * (LOG_2PI + math.log(self.noise_variance))
            - d**2 / (2 * self.noise_variance)
        )

    def sample(self, x, rng):
        rng = make_rng(rng)
        x = np.asarray(x, dtype=float)
        h = np.sqrt(self.fading_power * rng.standard_exponential(x.shape))
        v = h * x + math.sqrt(self.noise_variance) * rng.standard_normal(x.shape)
        return np.stack([h, v], axis=-1)

    def block_log_likelihoods(self, codewords, y_blocks):
        c = np.asarray(codewords, dtype=float)
        y = np.asarray(y_blocks, dtype=float)
        h, v = y[..., 0], y[..., 1]
        n = c.shape[1]
        base = rayleigh_log_pdf(h, self.fading_power).sum(1) - 0.5 * n * (LOG_2PI + math.log(self.noise_variance))
        sq = (v**2).sum(1)[:, None] - 2.0 * (v * h) @ c.T + (h**2) @ (c**2).T
        return base[:, None] - np.maximum(sq, 0.0) / (2 * self.noise_variance)


# --------------------------------------------------------------------------
# Operations
# --------------------------------------------------------------------------


def kernel_log_prob(ch: Channel, x, y) -> float:
    """log K(x, {y}) for finite outputs, log conditional density otherwise."""
    x = ch.input.check(x)
    y = ch.output.check(y)
    return float(ch.log_prob(x, y))


def output_distribution(ch: Channel, qx: Distribution, quadrature_order: int | None = None) -> Distribution:
    """Output law induced by feeding ``qx`` through ``ch``.

    Closed forms: matrix-vector product for finite channels, Gaussian input
    into AWGN, and centred Gaussian input into Rayleigh fading. Any other
    real-input pairing needs ``quadrature_order``.
    """
    if isinstance(ch, DiscreteChannel):
        if not isinstance(qx, Pmf) or qx.probs.size != ch.matrix.shape[0]:
            raise DomainError("input pmf must match the channel input alphabet")
        return Pmf(qx.probs @ ch.matrix)
    if isinstance(ch, AWGNChannel) and isinstance(qx, Gaussian):
        return Gaussian(qx.variance + ch.noise_variance, qx.mean)
    if isinstance(ch, RayleighChannel) and isinstance(qx, Gaussian) and qx.mean == 0.0:
        return FadedGaussian(ch.fading_power, qx.variance, ch.noise_variance)
    if quadrature_order is not None and not ch.input.is_finite:
        qx.quadrature(quadrature_order)  # raises if the input has no rule
        return QuadratureMixture(ch, qx, int(quadrature_order))
    raise UnsupportedCompositionError(
        f"no closed-form output for {ch.describe()} with {qx.describe()}; pass quadrature_order"
    )


def sample_block(ch: Channel, x_block, rng_seed) -> np.ndarray:
    """Draw ``y_j ~ K(x_j, .)`` independently; deterministic given the seed."""
    x = ch.input.check(x_block)
    if x.ndim == 0 or x.shape[0] < 1:
        raise DomainError("block length must be at least 1")
    return ch.sample(x, make_rng(rng_seed))


def product_log_prob(ch: Channel, dist: Distribution, y_block) -> float:
    """sum_j log dist(y_j) for a block over ``ch``'s output alphabet."""
    if dist.alphabet != ch.output:
        raise DomainError("distribution is not over the channel output alphabet")
    y = ch.output.check(y_block)
    return float(np.sum(dist.log_prob(y)))
