"""Random codebooks and the distance between their output and the target.

The codebook-induced output law is the uniform mixture over codewords of
the n-fold kernel. Variational distance uses the one-sided convention
``sup_A (P(A) - Q(A))``, i.e. half the L1 norm.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import special

from .channels import Alphabet, Channel, Distribution, Pmf, finite, make_rng, REAL
from .errors import (
    AbsoluteContinuityError,
    CodebookSizeError,
    DomainError,
    EnumerationTooLargeError,
    EstimationError,
)
from .info import MCEstimate, block_information_density, joint_table, mutual_information, sample_information_density

DEFAULT_MAX_CODEWORDS = 2**24
DEFAULT_ENUM_CAP = 2**20
DEFAULT_TV_SAMPLES = 10**5
_CHUNK_ELEMS = 2**22
# relative guard so that exp(n * log 2) = 15.999... still yields 16 codewords
_FLOOR_RTOL = 1e-12


def codebook_size(n: int, rate: float) -> int:
    """M = max(1, floor(exp(n R)))."""
    if n < 1 or rate < 0:
        raise DomainError("need n >= 1 and R >= 0")
    log_m = n * rate
    if log_m > 700:
        raise CodebookSizeError(f"exp(nR) = exp({log_m:.1f}) codewords")
    return max(1, math.floor(math.exp(log_m) * (1 + _FLOOR_RTOL)))


def is_atypical(density, threshold):
    """Block densities strictly above ``threshold`` (ties count as typical)."""
    tol = 1e-9 * max(1.0, abs(threshold))
    with np.errstate(invalid="ignore"):
        return np.asarray(density) > threshold + tol


@dataclass(frozen=True, eq=False)
class Codebook:
    n: int
    rate: float
    codewords: np.ndarray
    seed: int | None = None
    alphabet: Alphabet | None = None

    def __post_init__(self):
        cw = np.asarray(self.codewords)
        if cw.ndim != 2 or cw.shape[1] != self.n or cw.shape[0] < 1:
            raise DomainError(f"codewords must be an M x {self.n} array")
        cw = cw.copy()
        cw.setflags(write=False)
        object.__setattr__(self, "codewords", cw)

    @property
    def M(self) -> int:
        return self.codewords.shape[0]

    def unique(self):
        """Distinct codewords and their multiplicities."""
        return np.unique(self.codewords, axis=0, return_counts=True)


def draw_codebook(qx: Distribution, n: int, rate: float, seed, max_size: int = DEFAULT_MAX_CODEWORDS) -> Codebook:
    """Draw M x n symbols i.i.d. from ``qx``."""
    m = codebook_size(n, rate)
    if m > max_size:
        raise CodebookSizeError(f"M = {m} exceeds max_size = {max_size}")
    words = qx.sample(make_rng(seed), (m, n))
    return Codebook(n, float(rate), words, seed=seed if isinstance(seed, int) else None, alphabet=qx.alphabet)


def save_codebook(cb: Codebook, path) -> None:
    """Write ``n,R,M,alphabet,seed`` header line, its values, then one row per codeword."""
    alph = cb.alphabet or (finite(int(cb.codewords.max()) + 1) if cb.codewords.dtype.kind in "iu" else REAL)
    tag = f"finite:{alph.size}" if alph.is_finite else "real"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "R", "M", "alphabet", "seed"])
        w.writerow([cb.n, repr(cb.rate), cb.M, tag, "" if cb.seed is None else cb.seed])
        for row in cb.codewords:
            w.writerow([int(v) if alph.is_finite else repr(float(v)) for v in row])


def load_codebook(path) -> Codebook:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        next(r)
        n, rate, m, tag, seed = next(r)
        rows = [row for row in r if row]
    if len(rows) != int(m):
        raise DomainError(f"{path}: header says M={m}, found {len(rows)} rows")
    if tag.startswith("finite:"):
        alph = finite(int(tag.split(":")[1]))
        words = np.array(rows, dtype=np.int64)
    else:
        alph = REAL
        words = np.array(rows, dtype=float)
    return Codebook(int(n), float(rate), words.reshape(int(m), int(n)), seed=int(seed) if seed else None, alphabet=alph)


# --------------------------------------------------------------------------
# Induced output law
# --------------------------------------------------------------------------


def _s_chunk(m):
    return max(1, _CHUNK_ELEMS // max(1, m))


def codeword_log_likelihoods(ch: Channel, cb: Codebook, y_blocks) -> np.ndarray:
    """``(S, M)`` array of log K^n(C(m), y_s)."""
    return ch.block_log_likelihoods(cb.codewords, y_blocks)


def induced_output_log_prob(ch: Channel, cb: Codebook, y_block):
    """log of M^-1 sum_m K^n(C(m), y), for one block or a stack of blocks."""
    y = ch.output.check(y_block)
    single = y.ndim == 1 + (ch.output.dim > 1)
    if single:
        y = y[None]
    if y.shape[1] != cb.n:
        raise DomainError(f"block length {y.shape[1]} != codebook n {cb.n}")
    out = np.empty(len(y))
    step = _s_chunk(cb.M)
    for s in range(0, len(y), step):
        ll = codeword_log_likelihoods(ch, cb, y[s : s + step])
        out[s : s + step] = special.logsumexp(ll, axis=1) - math.log(cb.M)
    return float(out[0]) if single else out


def _require_enumerable(ch, n, cap):
    if not ch.output.is_finite:
        raise DomainError("exact enumeration needs a finite output alphabet; quantize first")
    total = ch.output.size**n
    if total > cap:
        raise EnumerationTooLargeError(f"|Y|^n = {ch.output.size}^{n} = {total} exceeds cap {cap}")
    return total


def product_pmf(qy: Pmf, n: int) -> np.ndarray:
    """Q_{Y^n} over all blocks, flattened with y_1 most significant."""
    out = np.ones(1)
    for _ in range(n):
        out = np.multiply.outer(out, qy.probs).ravel()
    return out


def product_log_pmf(qy: Pmf, n: int) -> np.ndarray:
    out = np.zeros(1)
    for _ in range(n):
        out = np.add.outer(out, qy.log_probs).ravel()
    return out


def _kernel_rows(ch, x):
    if not hasattr(ch, "kernel_rows"):
        raise DomainError(f"{ch.describe()} has no finite kernel rows")
    return ch.kernel_rows(x)


def induced_output_pmf(ch: Channel, cb: Codebook, cap: int = DEFAULT_ENUM_CAP) -> np.ndarray:
    """P_{Y^n|C} over every output block (flattened)."""
    total = _require_enumerable(ch, cb.n, cap)
    words, counts = cb.unique()
    weights = counts / cb.M
    if ch.input.is_finite and hasattr(ch, "matrix"):
        n_inputs = ch.input.size**cb.n
        if n_inputs <= min(len(words) * total, _CHUNK_ELEMS * 4):
            # push the codeword histogram through K one axis at a time
            hist = np.zeros(n_inputs)
            hist[np.ravel_multi_index(words.T, (ch.input.size,) * cb.n)] = weights
            t = hist.reshape((ch.input.size,) * cb.n)
            for _ in range(cb.n):
                t = np.tensordot(t, ch.matrix, axes=([0], [0]))
            return t.ravel()
    out = np.zeros(total)
    for lt, w in _block_log_kernels(ch, words, weights, total):
        out += w @ np.exp(lt)
    return out


def _block_log_kernels(ch, words, weights, total):
    """Yield ``(log K^n(c, y) for all y, weight)`` in codeword chunks."""
    with np.errstate(divide="ignore"):
        log_rows = np.log(_kernel_rows(ch, words))
    step = max(1, _CHUNK_ELEMS // total)
    for s in range(0, len(words), step):
        lr = log_rows[s : s + step]
        lt = lr[:, 0, :]
        for j in range(1, lr.shape[1]):
            lt = (lt[:, :, None] + lr[:, j, None, :]).reshape(len(lr), -1)
        yield lt, weights[s : s + step]


@dataclass
class TVReport:
    tv: float
    method: str
    std_error: float | None = None
    samples: int | None = None
    n: int | None = None
    rate_R: float | None = None
    codebook_seed: int | None = None
    convention: str = "sup"

    def to_dict(self):
        return asdict(self)


def _check_convention(convention):
    if convention not in ("sup", "l1"):
        raise DomainError("convention must be 'sup' or 'l1'")
    return 1.0 if convention == "sup" else 2.0


def tv_exact(ch: Channel, cb: Codebook, qy: Pmf, cap: int = DEFAULT_ENUM_CAP, convention: str = "sup") -> TVReport:
    """Exact sum over all output blocks of (P_{Y^n|C} - Q_{Y^n})^+."""
    scale = _check_convention(convention)
    p = induced_output_pmf(ch, cb, cap)
    q = product_pmf(qy, cb.n)
    stray = p[q == 0]
    if stray.size and stray.max() > 0:
        raise AbsoluteContinuityError(f"induced output has mass {stray.sum():.3g} outside the target support")
    tv = float(np.clip(np.sum(np.maximum(p - q, 0.0)), 0.0, 1.0))
    return TVReport(scale * tv, "exact-enumeration", n=cb.n, rate_R=cb.rate, codebook_seed=cb.seed, convention=convention)


def half_l1(p, q) -> float:
    return 0.5 * float(np.sum(np.abs(np.asarray(p) - np.asarray(q))))


def tv_monte_carlo(
    ch: Channel,
    cb: Codebook,
    qy: Distribution,
    num_samples: int = DEFAULT_TV_SAMPLES,
    seed=0,
    convention: str = "sup",
) -> TVReport:
    """Unbiased estimate of E_{Q_{Y^n}} (dP/dQ - 1)^+ from i.i.d. target draws."""
    scale = _check_convention(convention)
    rng = make_rng(seed)
    total = total_sq = 0.0
    step = _s_chunk(cb.M)
    done = 0
    while done < num_samples:
        k = min(step, num_samples - done)
        y = qy.sample(rng, (k, cb.n))
        log_q = np.sum(qy.log_prob(y), axis=1)
        ll = codeword_log_likelihoods(ch, cb, y)
        log_ratio = special.logsumexp(ll, axis=1) - math.log(cb.M) - log_q
        if np.isnan(log_ratio).any():
            raise EstimationError("NaN likelihood ratio")
        with np.errstate(over="ignore"):
            f = np.maximum(np.expm1(log_ratio), 0.0)
        if not np.isfinite(f).all():
            raise EstimationError(f"likelihood ratio overflow (max log ratio {log_ratio.max():.1f})")
        total += f.sum()
        total_sq += np.dot(f, f)
        done += k
    mean = total / num_samples
    var = max(total_sq / num_samples - mean * mean, 0.0) * num_samples / max(num_samples - 1, 1)
    return TVReport(
        scale * mean,
        "monte-carlo",
        std_error=scale * math.sqrt(var / num_samples),
        samples=int(num_samples),
        n=cb.n,
        rate_R=cb.rate,
        codebook_seed=cb.seed,
        convention=convention,
    )


# --------------------------------------------------------------------------
# Typical / atypical split
# --------------------------------------------------------------------------


@dataclass
class TypicalSplit:
    epsilon: float
    p2_mass: float
    typical_tv_part: float
    tv: float | None = None
    method: str = "exact"
    p2_std_error: float | None = None
    typical_std_error: float | None = None

    def to_dict(self):
        return asdict(self)


def split_measures(ch: Channel, cb: Codebook, qy: Pmf, epsilon: float, mi: float, cap: int = DEFAULT_ENUM_CAP):
    """Return flattened ``(P, P1, P2, Q)`` over all output blocks.

    P1 keeps, for each codeword, only the outputs jointly typical with it;
    P2 keeps the rest.
    """
    total = _require_enumerable(ch, cb.n, cap)
    threshold = cb.n * (mi + epsilon)
    log_q = product_log_pmf(qy, cb.n)
    words, counts = cb.unique()
    p = np.zeros(total)
    p1 = np.zeros(total)
    p2 = np.zeros(total)
    for lt, w in _block_log_kernels(ch, words, counts / cb.M, total):
        prob = np.exp(lt)
        with np.errstate(invalid="ignore"):
            dens = lt - log_q
        dens = np.where(np.isneginf(log_q) & ~np.isneginf(lt), np.inf, dens)
        atyp = is_atypical(np.where(np.isneginf(lt), -np.inf, dens), threshold)
        p += w @ prob
        p1 += w @ np.where(atyp, 0.0, prob)
        p2 += w @ np.where(atyp, prob, 0.0)
    return p, p1, p2, np.exp(log_q)


def typical_split(
    ch: Channel,
    cb: Codebook,
    qx: Distribution,
    qy: Distribution,
    epsilon: float,
    method: str = "exact",
    mi: float | None = None,
    num_samples: int = DEFAULT_TV_SAMPLES,
    seed=0,
    cap: int = DEFAULT_ENUM_CAP,
) -> TypicalSplit:
    """Atypical mass P2(Y^n) and typical part E_Q (dP1/dQ - 1)^+."""
    if mi is None:
        mi = float(mutual_information(ch, qx))
    if method == "exact":
        p, p1, p2, q = split_measures(ch, cb, qy, epsilon, mi, cap)
        if (p[q == 0] > 0).any():
            raise AbsoluteContinuityError("induced output not absolutely continuous w.r.t. target")
        return TypicalSplit(
            epsilon,
            float(np.clip(p2.sum(), 0.0, 1.0)),
            float(np.sum(np.maximum(p1 - q, 0.0))),
            tv=float(np.sum(np.maximum(p - q, 0.0))),
            method="exact",
        )
    if method != "monte-carlo":
        raise DomainError(f"unknown method {method!r}")
    threshold = cb.n * (mi + epsilon)
    rng = make_rng(seed)
    # atypical mass: pick a codeword uniformly, pass it through the channel
    idx = rng.integers(0, cb.M, num_samples)
    x = cb.codewords[idx]
    y = ch.sample(x, rng)
    atyp = is_atypical(block_information_density(ch, qy, x, y), threshold).astype(float)
    p2 = atyp.mean()
    p2_se = float(atyp.std(ddof=1) / math.sqrt(num_samples)) if num_samples > 1 else None
    # typical part: importance weights under the target
    total = total_sq = 0.0
    step = _s_chunk(cb.M)
    done = 0
    while done < num_samples:
        k = min(step, num_samples - done)
        yq = qy.sample(rng, (k, cb.n))
        log_q = np.sum(qy.log_prob(yq), axis=1)
        ll = codeword_log_likelihoods(ch, cb, yq)
        dens = ll - log_q[:, None]
        masked = np.where(is_atypical(dens, threshold), -np.inf, dens)
        log_ratio = special.logsumexp(masked, axis=1) - math.log(cb.M)
        with np.errstate(over="ignore"):
            f = np.maximum(np.expm1(log_ratio), 0.0)
        if not np.isfinite(f).all():
            raise EstimationError("likelihood ratio overflow")
        total += f.sum()
        total_sq += np.dot(f, f)
        done += k
    mean = total / num_samples
    var = max(total_sq / num_samples - mean * mean, 0.0)
    return TypicalSplit(
        epsilon,
        float(p2),
        float(mean),
        method="monte-carlo",
        p2_std_error=p2_se,
        typical_std_error=math.sqrt(var / num_samples),
    )


def atypical_mass_expectation(
    ch: Channel,
    qx: Distribution,
    n: int,
    epsilon: float,
    method: str = "exact",
    mi: float | None = None,
    num_samples: int = 10**6,
    seed=0,
    support_cap: int = 2**21,
):
    """P(sum_j i(X_j;Y_j) > n(I + eps)) under i.i.d. Q_{X,Y}.

    The exact route convolves the finite law of the per-letter density n
    times, merging equal sums.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    if mi is None:
        mi = float(mutual_information(ch, qx))
    threshold = n * (mi + epsilon)
    if method == "exact":
        w, d = joint_table(ch, qx)
        mask = w > 0
        vals, probs = d[mask], w[mask]
        inf_mass = probs[np.isposinf(vals)].sum()
        keep = np.isfinite(vals)
        letter_vals, letter_probs = _merge(vals[keep], probs[keep])
        sums, mass = np.zeros(1), np.ones(1)
        for _ in range(n):
            sums, mass = _merge(np.add.outer(sums, letter_vals).ravel(), np.multiply.outer(mass, letter_probs).ravel())
            if sums.size > support_cap:
                raise EnumerationTooLargeError(f"density-sum support exceeds {support_cap}; use method='monte-carlo'")
        tail = float(mass[is_atypical(sums, threshold)].sum())
        # blocks containing a singular letter are atypical regardless of the rest
        return tail - math.expm1(n * math.log1p(-inf_mass)) if inf_mass > 0 else tail
    if method != "monte-carlo":
        raise DomainError(f"unknown method {method!r}")
    rng = make_rng(seed)
    hits = 0
    done = 0
    step = max(1, _CHUNK_ELEMS // n)
    while done < num_samples:
        k = min(step, num_samples - done)
        dens = sample_information_density(ch, qx, k * n, rng).reshape(k, n)
        hits += int(is_atypical(dens.sum(axis=1), threshold).sum())
        done += k
    p = hits / num_samples
    return MCEstimate(p, math.sqrt(max(p * (1 - p), 0.0) / num_samples), num_samples)


def _merge(values, probs, decimals=9):
    keys, inv = np.unique(np.round(values, decimals), return_inverse=True)
    total = np.bincount(inv.ravel(), weights=probs)
    # representative: probability-weighted mean of merged exact values
    rep = np.bincount(inv.ravel(), weights=probs * values) / np.where(total > 0, total, 1)
    rep = np.where(total > 0, rep, keys)
    return rep, total
