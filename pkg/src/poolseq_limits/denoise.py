"""Block-wise read denoising: exhaustive maximum likelihood and spectral.

A denoise block is a window of kappa biallelic SNP loci with n noisy
observation rows over {-1, +1} (-1 = major allele), each row a read's
content restricted to the window, assuming the read spans the whole
window. ML decoding scores every M-subset of the 2^kappa possible
sequences under the symmetric-flip channel; spectral decoding thresholds
the sample cross-correlation into a graph, clusters its top eigenvector
embedding, and majority-votes per cluster.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

from .core import CapacityError, RandomStream, ValidationError

__all__ = [
    "HypothesisSet",
    "DenoiseBlock",
    "CorrelationGraph",
    "SpectralResult",
    "observation_likelihood",
    "ml_denoise",
    "default_threshold",
    "nu_min_for_mode",
    "build_correlation_graph",
    "spectral_denoise",
    "majority_vote",
    "seq_to_int",
    "int_to_seq",
    "extract_block",
]

ML_CANDIDATE_CAP = 10_000_000

WORST_CASE = "worst_case"
AVERAGE_CASE = "average_case"


def seq_to_int(seq) -> int:
    """Encode a +-1 sequence as an integer, first position most significant,
    so integer order matches lexicographic order with -1 < +1."""
    v = 0
    for a in seq:
        v = (v << 1) | (1 if a > 0 else 0)
    return v


def int_to_seq(v: int, kappa: int) -> tuple[int, ...]:
    return tuple(1 if (v >> (kappa - 1 - k)) & 1 else -1 for k in range(kappa))


@dataclass(frozen=True)
class HypothesisSet:
    """A candidate set of M distinct length-kappa sequences over {-1, +1}."""

    sequences: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if not self.sequences:
            raise ValidationError("hypothesis set cannot be empty")
        kappa = len(self.sequences[0])
        for s in self.sequences:
            if len(s) != kappa:
                raise ValidationError("hypothesis sequences must share one length")
            if any(a not in (-1, 1) for a in s):
                raise ValidationError("hypothesis alleles must be -1 or +1")
        if len(set(self.sequences)) != len(self.sequences):
            raise ValidationError("hypothesis sequences must be distinct")
        object.__setattr__(self, "sequences", tuple(sorted(self.sequences)))

    @classmethod
    def from_matrix(cls, arr) -> "HypothesisSet":
        return cls(tuple(tuple(int(a) for a in row) for row in np.asarray(arr)))

    @property
    def matrix(self) -> np.ndarray:
        return np.asarray(self.sequences, dtype=np.int8)

    @property
    def M(self) -> int:
        return len(self.sequences)

    @property
    def kappa(self) -> int:
        return len(self.sequences[0])


@dataclass
class DenoiseBlock:
    """n noisy full-window observations of kappa SNPs."""

    kappa: int
    observations: np.ndarray  # (n, kappa) int8 over {-1, +1}
    window: tuple[float, float]
    M: int
    eps: float

    def __post_init__(self):
        obs = np.asarray(self.observations, dtype=np.int8)
        if obs.ndim != 2 or (obs.size and obs.shape[1] != self.kappa):
            raise ValidationError("observations must be an (n, kappa) matrix")
        if obs.size and not np.isin(obs, (-1, 1)).all():
            raise ValidationError("observations must be -1/+1 valued")
        self.observations = obs

    @property
    def n(self) -> int:
        return int(self.observations.shape[0])


@dataclass
class CorrelationGraph:
    C: np.ndarray
    A: np.ndarray
    tau_c: float


@dataclass
class SpectralResult:
    sequences: np.ndarray      # (M, kappa) int8 consensus rows
    labels: np.ndarray         # (n,) cluster assignment
    degraded: bool
    reseeds: int

    def hypothesis(self) -> HypothesisSet | None:
        rows = {tuple(int(a) for a in r) for r in self.sequences}
        if len(rows) != self.sequences.shape[0]:
            return None
        return HypothesisSet(tuple(sorted(rows)))


def _popcount_table(kappa: int) -> np.ndarray:
    return np.array([bin(i).count("1") for i in range(1 << kappa)], dtype=np.int64)


def mixture_distribution(hset: HypothesisSet, eps: float) -> np.ndarray:
    """Observation distribution over all 2^kappa sequences for a hypothesis.

    P(phi | psi) = ((1-eps)^kappa / M) * sum_j x^hamming(phi, psi_j) with
    x = eps / (1 - eps).
    """
    if eps >= 1.0:
        raise ValidationError("eps must be < 1")
    kappa = hset.kappa
    x = eps / (1.0 - eps)
    pop = _popcount_table(kappa)
    members = np.array([seq_to_int(s) for s in hset.sequences])
    phis = np.arange(1 << kappa)
    dist = pop[np.bitwise_xor.outer(phis, members)]  # (2^kappa, M)
    with np.errstate(divide="ignore"):
        mix = (x ** dist.astype(np.float64)).sum(axis=1)
    return ((1.0 - eps) ** kappa / hset.M) * mix


def observation_likelihood(phi, hset: HypothesisSet, eps: float) -> float:
    """Probability of observing one row phi under a hypothesis set."""
    phi = tuple(int(a) for a in phi)
    if len(phi) != hset.kappa:
        raise ValidationError("observation length must match the hypothesis")
    return float(mixture_distribution(hset, eps)[seq_to_int(phi)])


def ml_denoise(block: DenoiseBlock) -> HypothesisSet:
    """Exact maximum-likelihood decoding over all M-subsets of sequences.

    Ties are broken by lexicographic order of the candidate set, so the
    result is deterministic. Raises CapacityError when the candidate count
    C(2^kappa, M) exceeds the enumeration cap and ValidationError for an
    empty block.
    """
    if block.n == 0:
        raise ValidationError("cannot denoise a block with no observations")
    kappa, M = block.kappa, block.M
    n_cand = comb(1 << kappa, M)
    if n_cand > ML_CANDIDATE_CAP:
        raise CapacityError(
            f"ML enumeration needs {n_cand} candidates (cap {ML_CANDIDATE_CAP})")
    x = block.eps / (1.0 - block.eps)
    pop = _popcount_table(kappa)
    obs_ints = np.array([seq_to_int(r) for r in block.observations])
    distinct, counts = np.unique(obs_ints, return_counts=True)
    xpow = x ** pop[np.bitwise_xor.outer(distinct, np.arange(1 << kappa))].astype(float)
    best_ll = -np.inf
    best: tuple[int, ...] | None = None
    with np.errstate(divide="ignore"):
        for cand in combinations(range(1 << kappa), M):
            mix = xpow[:, cand].sum(axis=1)  # constants drop out of the argmax
            ll = float(counts @ np.log(mix))
            if best is None or ll > best_ll:
                best_ll, best = ll, cand
    assert best is not None
    return HypothesisSet(tuple(int_to_seq(v, kappa) for v in best))


def nu_min_for_mode(mode: str, kappa: int, eta: float | None) -> float:
    """Minimum pairwise Hamming distance assumed by the analysis mode."""
    if mode == WORST_CASE:
        return min(1.0, float(kappa)) if kappa > 0 else 0.0
    if mode == AVERAGE_CASE:
        if eta is None:
            raise ValidationError("average_case mode needs eta")
        return kappa * (1.0 - eta)
    raise ValidationError(f"unknown mode {mode!r}")


def default_threshold(kappa: int, eps: float, nu_min: float) -> float:
    """Edge threshold (1-2 eps)^2 (1 - nu_min / kappa) separating the expected
    same-individual correlation from the closest cross-individual one."""
    return (1.0 - 2.0 * eps) ** 2 * (1.0 - nu_min / kappa)


def build_correlation_graph(block: DenoiseBlock, tau_c: float | None = None,
                            mode: str = WORST_CASE,
                            eta: float | None = None) -> CorrelationGraph:
    """Sample cross-correlation C = X X^T / kappa thresholded into an
    adjacency matrix A[i, j] = 1 iff C[i, j] >= tau_c."""
    if block.n < 1:
        raise ValidationError("correlation graph needs at least one observation")
    if tau_c is None:
        tau_c = default_threshold(block.kappa, block.eps,
                                  nu_min_for_mode(mode, block.kappa, eta))
    X = block.observations.astype(np.float64)
    C = X @ X.T / block.kappa
    A = (C >= tau_c).astype(np.int8)
    return CorrelationGraph(C=C, A=A, tau_c=float(tau_c))


def majority_vote(rows: np.ndarray) -> np.ndarray:
    """Per-column majority over observation rows; ties go to the major
    allele (-1)."""
    rows = np.asarray(rows)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise ValidationError("majority vote needs a non-empty row set")
    sums = rows.sum(axis=0)
    return np.where(sums > 0, 1, -1).astype(np.int8)


def _farthest_point_seed(emb: np.ndarray, M: int) -> np.ndarray:
    norms = np.einsum("ij,ij->i", emb, emb)
    centers = [int(np.argmax(norms))]
    d2 = ((emb - emb[centers[0]]) ** 2).sum(axis=1)
    for _ in range(1, M):
        nxt = int(np.argmax(d2))
        centers.append(nxt)
        d2 = np.minimum(d2, ((emb - emb[nxt]) ** 2).sum(axis=1))
    return emb[centers].copy()


def _lloyd(emb: np.ndarray, centers: np.ndarray,
           max_iter: int) -> tuple[np.ndarray, bool]:
    M = centers.shape[0]
    labels = None
    for _ in range(max_iter):
        d2 = ((emb[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = np.argmin(d2, axis=1)
        if (np.bincount(new_labels, minlength=M) == 0).any():
            return new_labels, False
        if labels is not None and (new_labels == labels).all():
            break
        labels = new_labels
        for m in range(M):
            centers[m] = emb[labels == m].mean(axis=0)
    return labels, True


def spectral_denoise(block: DenoiseBlock, mode: str = WORST_CASE,
                     eta: float | None = None, tau_c: float | None = None,
                     stream: RandomStream | None = None,
                     max_iter: int = 50, reseed_attempts: int = 5) -> SpectralResult:
    """Cluster observations into M communities and majority-vote per cluster.

    Embeds the rows of the thresholded adjacency matrix into its top-M
    eigenvector span, seeds M centers by farthest-point traversal, runs
    bounded Lloyd iterations, and reseeds (perturbed, from the stream) when
    a cluster empties; after the attempt budget the result is flagged
    degraded. Deterministic for a fixed block and stream.
    """
    if block.n < block.M:
        raise ValidationError("spectral denoising needs at least M observations")
    M = block.M
    graph = build_correlation_graph(block, tau_c=tau_c, mode=mode, eta=eta)
    w, v = np.linalg.eigh(graph.A.astype(np.float64))
    emb = v[:, -M:]
    centers = _farthest_point_seed(emb, M)
    labels, okay = _lloyd(emb, centers, max_iter)
    reseeds = 0
    if not okay:
        rng = (stream or RandomStream(0)).child("spectral_reseed")
        while not okay and reseeds < reseed_attempts:
            reseeds += 1
            idx = rng.child(reseeds).gen.choice(block.n, size=M, replace=False)
            labels, okay = _lloyd(emb, emb[idx].copy(), max_iter)
    degraded = not okay
    sequences = np.empty((M, block.kappa), dtype=np.int8)
    for m in range(M):
        members = block.observations[labels == m]
        if members.shape[0] == 0:
            sequences[m] = majority_vote(block.observations)
        else:
            sequences[m] = majority_vote(members)
    if len({r.tobytes() for r in sequences}) != M:
        degraded = True
    return SpectralResult(sequences=sequences, labels=labels,
                          degraded=degraded, reseeds=reseeds)


def extract_block(rs, window: tuple[float, float], eps: float) -> DenoiseBlock:
    """Build a denoise block from the reads fully covering a window.

    Only reads with start <= window start and start + L >= window end
    contribute; each contributes its alleles at the SNP indices inside the
    window as one full-length row.
    """
    lo_pos, hi_pos = window
    pop = rs.population
    L = rs.config.L
    snp_lo = int(np.searchsorted(pop.snp_positions, lo_pos, side="left"))
    snp_hi = int(np.searchsorted(pop.snp_positions, hi_pos, side="left"))
    kappa = snp_hi - snp_lo
    r_hi = int(np.searchsorted(rs.starts, lo_pos, side="right"))
    r_lo = int(np.searchsorted(rs.starts, hi_pos - L, side="left"))
    offsets, values = rs.observations()
    rows = []
    for r in range(r_lo, r_hi):
        base = offsets[r] + (snp_lo - rs.cover_lo[r])
        rows.append(values[base:base + kappa])
    obs = np.asarray(rows, dtype=np.int8) if rows else np.empty((0, kappa), np.int8)
    return DenoiseBlock(kappa=kappa, observations=obs, window=window,
                        M=rs.config.M, eps=eps)
