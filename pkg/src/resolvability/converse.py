"""Finite-scale converse checks.

A real output is reduced to finitely many bins, the codebook is collapsed to
its position-averaged input law, and the mutual information that law
achieves is compared with the rate plus a slack driven by the measured
variational distance.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import special

from .channels import (
    AWGNChannel,
    Alphabet,
    Channel,
    DiscreteChannel,
    Distribution,
    Gaussian,
    Pmf,
    finite,
    make_rng,
)
from .codebook import Codebook, DEFAULT_ENUM_CAP, tv_exact, tv_monte_carlo
from .errors import (
    DomainError,
    EnumerationTooLargeError,
    HypothesisViolation,
    RequiresInputQuantizerError,
    UnsupportedCompositionError,
)
from .info import mutual_information

CONVERSE_TOL = 1e-9
DEFAULT_INPUT_LEVELS = 64


@dataclass(frozen=True)
class Quantizer:
    """Finite partition of the output space.

    Real outputs use interior ``edges`` (bins ``(-inf, e1], (e1, e2], ...``);
    finite outputs use ``groups[y]`` = atom index, or the identity when both
    are ``None``.
    """

    level: int
    edges: tuple | None = None
    groups: tuple | None = None

    def __post_init__(self):
        if self.level < 1:
            raise DomainError("quantizer needs at least one atom")
        if self.edges is not None:
            e = np.asarray(self.edges, dtype=float)
            if len(e) != self.level - 1 or (np.diff(e) <= 0).any():
                raise DomainError("edges must be strictly increasing, one fewer than the level")
        if self.groups is not None and set(self.groups) != set(range(self.level)):
            raise DomainError("groups must hit every atom")

    @property
    def trivial(self) -> bool:
        return self.edges is None and self.groups is None

    @property
    def atoms(self) -> Alphabet:
        return finite(self.level)

    def refines(self, coarser: "Quantizer") -> bool:
        """True if every cell of ``coarser`` is a union of cells of ``self``."""
        if self.edges is not None and coarser.edges is not None:
            return set(coarser.edges) <= set(self.edges)
        if self.groups is not None and coarser.groups is not None:
            pairs = {}
            for fine, coarse in zip(self.groups, coarser.groups):
                if pairs.setdefault(fine, coarse) != coarse:
                    return False
            return True
        return self.trivial

    def assign(self, y) -> np.ndarray:
        if self.edges is not None:
            return np.searchsorted(np.asarray(self.edges), np.asarray(y, dtype=float), side="left")
        y = np.asarray(y)
        return y if self.groups is None else np.asarray(self.groups)[y]


def trivial_quantizer(alphabet: Alphabet) -> Quantizer:
    if not alphabet.is_finite:
        raise DomainError("trivial quantizer only exists for finite outputs")
    return Quantizer(alphabet.size)


def equiprobable_quantizer(qy: Distribution, k: int) -> Quantizer:
    """Bins of equal target probability; powers of two give nested partitions."""
    if not isinstance(qy, Gaussian):
        raise UnsupportedCompositionError("equiprobable bins need a Gaussian target")
    probs = np.arange(1, k) / k
    edges = qy.mean + math.sqrt(qy.variance) * special.ndtri(probs)
    return Quantizer(k, tuple(float(e) for e in edges))


class QuantizedChannel(Channel):
    """Real-output channel observed through a finite partition."""

    def __init__(self, parent: Channel, quantizer: Quantizer):
        if quantizer.edges is None:
            raise DomainError("real outputs need a quantizer with edges")
        self.parent = parent
        self.quantizer = quantizer
        self.family = f"{parent.family}/q{quantizer.level}"
        self.input = parent.input
        self.output = quantizer.atoms
        self._edges = np.asarray(quantizer.edges)

    def describe(self):
        return f"{self.parent.describe()}/q{self.quantizer.level}"

    def kernel_rows(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        cdf = self.parent.cdf(x[..., None], self._edges)
        pad = np.zeros(x.shape + (1,))
        return np.diff(np.concatenate([pad, cdf, pad + 1.0], axis=-1), axis=-1)

    def log_prob(self, x, y):
        rows = self.kernel_rows(x)
        with np.errstate(divide="ignore"):
            return np.log(np.take_along_axis(rows, np.asarray(y)[..., None], axis=-1)[..., 0])

    def sample(self, x, rng):
        return self.quantizer.assign(self.parent.sample(x, rng))

    def block_log_likelihoods(self, codewords, y_blocks):
        with np.errstate(divide="ignore"):
            log_rows = np.log(self.kernel_rows(codewords))
        y_blocks = np.asarray(y_blocks)
        out = np.zeros((len(y_blocks), len(log_rows)))
        for j in range(log_rows.shape[1]):
            out += log_rows[:, j, :].T[y_blocks[:, j]]
        return out


def quantize_channel(ch: Channel, quant: Quantizer) -> Channel:
    """Channel whose output is the atom of ``quant`` containing the original output."""
    if isinstance(ch, DiscreteChannel):
        if quant.trivial:
            return ch
        if quant.groups is None:
            raise DomainError("finite outputs are quantized by grouping symbols")
        agg = np.zeros((ch.matrix.shape[1], quant.level))
        agg[np.arange(ch.matrix.shape[1]), quant.groups] = 1.0
        return DiscreteChannel(ch.matrix @ agg, family=f"{ch.family}/q{quant.level}", params=ch.params)
    if isinstance(ch, AWGNChannel):
        return QuantizedChannel(ch, quant)
    raise UnsupportedCompositionError(f"no CDF available to quantize {ch.describe()}")


def quantize_distribution(dist: Distribution, quant: Quantizer) -> Pmf:
    if isinstance(dist, Pmf):
        if quant.trivial:
            return dist
        return Pmf(np.bincount(np.asarray(quant.groups), weights=dist.probs, minlength=quant.level))
    if isinstance(dist, Gaussian) and quant.edges is not None:
        cdf = special.ndtr((np.asarray(quant.edges) - dist.mean) / math.sqrt(dist.variance))
        p = np.diff(np.concatenate([[0.0], cdf, [1.0]]))
        return Pmf(p / p.sum())
    raise UnsupportedCompositionError(f"cannot quantize {dist.describe()}")


# --------------------------------------------------------------------------
# Averaged input and the converse inequality
# --------------------------------------------------------------------------


def uniform_input_grid(halfwidth: float, levels: int = DEFAULT_INPUT_LEVELS) -> np.ndarray:
    return np.linspace(-halfwidth, halfwidth, levels)


@dataclass(frozen=True, eq=False)
class AveragedInput:
    q_x_ell: Pmf
    n_ell: int
    points: np.ndarray | None = None
    source_codebook: Codebook | None = None


def averaged_input(cb: Codebook, input_grid=None, alphabet_size: int | None = None) -> AveragedInput:
    """(1/n) sum_j of the empirical law of the j-th codeword symbol.

    Real-valued codebooks are first snapped to the nearest point of
    ``input_grid``.
    """
    words = cb.codewords
    if words.dtype.kind in "iu":
        size = alphabet_size or (cb.alphabet.size if cb.alphabet and cb.alphabet.is_finite else int(words.max()) + 1)
        counts = np.bincount(words.ravel(), minlength=size)
        return AveragedInput(Pmf(counts / counts.sum()), cb.n, None, cb)
    if input_grid is None:
        raise RequiresInputQuantizerError("real-valued codebook: pass input_grid")
    grid = np.sort(np.asarray(input_grid, dtype=float))
    mids = 0.5 * (grid[1:] + grid[:-1])
    idx = np.searchsorted(mids, words.ravel())
    counts = np.bincount(idx, minlength=len(grid))
    return AveragedInput(Pmf(counts / counts.sum()), cb.n, grid, cb)


def averaged_channel(ch: Channel, avg: AveragedInput) -> DiscreteChannel:
    """Finite-input view of ``ch`` on the support points of ``avg``."""
    if avg.points is None:
        if not isinstance(ch, DiscreteChannel):
            raise DomainError("finite codebook needs a finite-input channel")
        return ch
    if not hasattr(ch, "kernel_rows"):
        raise DomainError("quantize the channel output before averaging")
    rows = ch.kernel_rows(avg.points)
    return DiscreteChannel(rows / rows.sum(axis=1, keepdims=True), family=ch.family)


@dataclass
class ConverseReport:
    n: int
    R: float
    delta: float
    output_size: int
    I_ell: float
    slack: float
    holds: bool

    def to_dict(self):
        return asdict(self)


def converse_slack(delta: float, output_size: int) -> float:
    """-delta log(delta / (2|Y|)), zero at delta = 0."""
    if delta == 0:
        return 0.0
    return -delta * math.log(delta / (2 * output_size))


def converse_check(ch: Channel, cb: Codebook, qy_target: Distribution, tv_measured: float, input_grid=None, tol=CONVERSE_TOL) -> ConverseReport:
    """Check I(Q_X^(l) K) <= R - delta log(delta / (2|Y|)) on a finite output.

    ``qy_target`` must be the (quantized) target on the same finite output.
    """
    if not ch.output.is_finite:
        raise DomainError("converse check needs a finite output; quantize first")
    if isinstance(qy_target, Pmf) and qy_target.probs.size != ch.output.size:
        raise DomainError("target and channel outputs differ")
    if not 0 <= tv_measured <= 0.25:
        raise HypothesisViolation(f"delta = {tv_measured} exceeds 1/4")
    avg = averaged_input(cb, input_grid, ch.input.size if ch.input.is_finite else None)
    mi = float(mutual_information(averaged_channel(ch, avg), avg.q_x_ell))
    slack = converse_slack(tv_measured, ch.output.size)
    return ConverseReport(cb.n, cb.rate, float(tv_measured), ch.output.size, mi, slack, bool(mi <= cb.rate + slack + tol))


def averaged_output(ch: Channel, cb: Codebook) -> np.ndarray:
    """(1/n) sum_j P_{Y_j|C}: the kernel row averaged over every codeword symbol."""
    if not hasattr(ch, "kernel_rows"):
        raise DomainError("averaged output needs finite kernel rows")
    return ch.kernel_rows(cb.codewords).reshape(-1, ch.output.size).mean(axis=0)


def per_letter_tv(ch: Channel, cb: Codebook, qy_target: Pmf) -> float:
    return float(np.sum(np.maximum(averaged_output(ch, cb) - qy_target.probs, 0.0)))


def per_letter_tv_sides(cb: Codebook, ch: Channel, qy_target: Pmf, cap=DEFAULT_ENUM_CAP, num_samples=10**5, seed=0):
    """``(lhs, rhs, rhs_std_error)``; rhs is exact when the output space fits the cap."""
    lhs = per_letter_tv(ch, cb, qy_target)
    try:
        return lhs, tv_exact(ch, cb, qy_target, cap=cap).tv, 0.0
    except EnumerationTooLargeError:
        rep = tv_monte_carlo(ch, cb, qy_target, num_samples, make_rng(seed))
        return lhs, rep.tv, rep.std_error


def per_letter_tv_bound_check(cb: Codebook, ch: Channel, qy_target: Pmf, cap=DEFAULT_ENUM_CAP, num_samples=10**5, seed=0, z=3.0) -> bool:
    """Averaged single-letter TV never exceeds the block TV.

    Falls back to a Monte Carlo right side with ``z`` standard errors of
    slack when enumeration is too large.
    """
    lhs, rhs, se = per_letter_tv_sides(cb, ch, qy_target, cap, num_samples, seed)
    return bool(lhs <= rhs + z * se + 1e-12)
