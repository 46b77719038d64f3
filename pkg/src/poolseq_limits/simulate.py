"""Synthetic population and pooled read-set generation.

Populations carry SNP positions on [0, G) and an M x S allele matrix.
Biallelic alleles are stored as +-1 with -1 the major allele; 4-ary alleles
as codes 0..3. Reads are single-end, length L, with start positions sampled
on [-L, G) so that coverage statistics over [0, G) are stationary: a read
starting before 0 models a fragment mapped partially onto the left end of
the reference window. Read records keep only SNP-locus content (non-SNP
bases match the reference by assumption), stored columnar for speed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import IO, Optional

import numpy as np

from .core import (
    AlleleLaw,
    Empirical,
    FixedBiallelic,
    FixedEta,
    ModelConfig,
    RandomStream,
    UnsupportedModelError,
    ValidationError,
    sample_poisson_positions,
)

__all__ = [
    "Population",
    "ReadSet",
    "generate_population",
    "generate_reads",
    "apply_noise",
    "discriminating_positions",
    "discriminating_indices",
    "dump_population",
    "dump_readset",
]


@dataclass
class Population:
    """Latent SNP positions plus per-individual allele rows."""

    snp_positions: np.ndarray  # (S,) float64, ascending, in [0, G)
    alleles: np.ndarray        # (M, S) int8
    law: AlleleLaw

    @property
    def S(self) -> int:
        return int(self.snp_positions.size)

    @property
    def M(self) -> int:
        return int(self.alleles.shape[0])

    @property
    def is_biallelic(self) -> bool:
        return self.S == 0 or bool(np.isin(self.alleles, (-1, 1)).all())


@dataclass
class ReadSet:
    """Aligned reads stored columnar, sorted by start position.

    Each read covers SNP indices [cover_lo[r], cover_hi[r]). The hidden
    individual labels exist for ground-truth condition checking only; the
    assembler must not consult them. Observed allele values are derived
    lazily from the population for noiseless sets and stored explicitly
    once noise has been applied.
    """

    starts: np.ndarray     # (N,) float64 ascending, in [-L, G)
    hidden: np.ndarray     # (N,) int32
    cover_lo: np.ndarray   # (N,) int64
    cover_hi: np.ndarray   # (N,) int64
    config: ModelConfig
    population: Population
    noisy: bool = False
    _values: Optional[np.ndarray] = field(default=None, repr=False)
    _offsets: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n_reads(self) -> int:
        return int(self.starts.size)

    def observations(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (offsets, values): values[offsets[r]:offsets[r+1]] are the
        observed alleles of read r at SNP indices cover_lo[r]..cover_hi[r]."""
        if self._offsets is None:
            lengths = self.cover_hi - self.cover_lo
            self._offsets = np.concatenate(([0], np.cumsum(lengths)))
        if self._values is None:
            total = int(self._offsets[-1])
            rows = np.repeat(self.hidden, self.cover_hi - self.cover_lo)
            cols = _flat_ranges(self.cover_lo, self.cover_hi, total)
            self._values = self.population.alleles[rows, cols]
        return self._offsets, self._values

    def read_alleles(self, r: int) -> np.ndarray:
        off, vals = self.observations()
        return vals[off[r]:off[r + 1]]


def _flat_ranges(lo: np.ndarray, hi: np.ndarray, total: int) -> np.ndarray:
    """Concatenate arange(lo[r], hi[r]) for all r without a Python loop."""
    keep = hi > lo
    lo_k = lo[keep].astype(np.int64)
    hi_k = hi[keep].astype(np.int64)
    if lo_k.size == 0:
        return np.empty(0, dtype=np.int64)
    lengths = hi_k - lo_k
    out = np.ones(total, dtype=np.int64)
    block_starts = np.zeros(lengths.size, dtype=np.int64)
    np.cumsum(lengths[:-1], out=block_starts[1:])
    out[block_starts[0]] = lo_k[0]
    out[block_starts[1:]] = lo_k[1:] - hi_k[:-1] + 1
    return np.cumsum(out)


def generate_population(config: ModelConfig, stream: RandomStream) -> Population:
    """Draw SNP positions (Poisson rate p over [0, G)) and allele rows."""
    if isinstance(config.law, FixedEta):
        raise UnsupportedModelError(
            "FixedEta laws are for bound evaluation only and cannot be sampled")
    positions = sample_poisson_positions(config.p, float(config.G),
                                         stream.child("snp_positions"))
    S = positions.size
    gen = stream.child("alleles").gen
    if isinstance(config.law, FixedBiallelic):
        f = config.law.minor_frequency
        alleles = np.where(gen.random((config.M, S)) < f, 1, -1).astype(np.int8)
    else:
        law: Empirical = config.law
        table = np.asarray(law.frequencies, dtype=np.float64)
        which = gen.integers(0, len(table), size=S)
        cum = np.cumsum(table[which], axis=1)  # (S, 4)
        u = gen.random((config.M, S))
        alleles = (u[:, :, None] > cum[None, :, :]).sum(axis=2).astype(np.int8)
    return Population(snp_positions=positions, alleles=alleles, law=config.law)


def generate_reads(pop: Population, config: ModelConfig,
                   stream: RandomStream) -> ReadSet:
    """Sample per-individual Poisson(lambda) read starts and merge them.

    Starts live on [-L, G) so every SNP in [0, G) sees the stationary
    coverage window of length L; per-individual counts are therefore
    Poisson(lambda * (G + L)).
    """
    L = config.L
    all_starts = []
    all_hidden = []
    for m in range(config.M):
        s = sample_poisson_positions(config.lam, float(config.G) + L,
                                     stream.child("reads", m)) - L
        all_starts.append(s)
        all_hidden.append(np.full(s.size, m, dtype=np.int32))
    starts = np.concatenate(all_starts) if all_starts else np.empty(0)
    hidden = np.concatenate(all_hidden) if all_hidden else np.empty(0, np.int32)
    order = np.argsort(starts, kind="stable")
    starts = starts[order]
    hidden = hidden[order]
    pos = pop.snp_positions
    cover_lo = np.searchsorted(pos, starts, side="left")
    cover_hi = np.searchsorted(pos, starts + L, side="left")
    return ReadSet(starts=starts, hidden=hidden, cover_lo=cover_lo,
                   cover_hi=cover_hi, config=config, population=pop,
                   noisy=False)


def apply_noise(rs: ReadSet, eps: float, stream: RandomStream) -> ReadSet:
    """Flip each observed biallelic allele independently with probability eps."""
    if not (0.0 <= eps <= 0.5):
        raise ValidationError(f"eps must be in [0, 0.5], got {eps}")
    if eps > 0.0 and not rs.population.is_biallelic:
        raise UnsupportedModelError(
            "symmetric flip noise is defined for biallelic populations only")
    offsets, values = rs.observations()
    gen = stream.child("noise").gen
    flips = gen.random(values.size) < eps
    noisy_values = np.where(flips, -values, values).astype(np.int8)
    return ReadSet(starts=rs.starts, hidden=rs.hidden, cover_lo=rs.cover_lo,
                   cover_hi=rs.cover_hi, config=rs.config,
                   population=rs.population, noisy=True,
                   _values=noisy_values, _offsets=offsets)


def discriminating_indices(pop: Population, i: int, j: int) -> np.ndarray:
    """SNP indices at which individuals i and j carry different alleles."""
    if i == j:
        raise ValidationError("discriminating positions need two distinct individuals")
    return np.nonzero(pop.alleles[i] != pop.alleles[j])[0]


def discriminating_positions(pop: Population, i: int, j: int) -> np.ndarray:
    """Positions of SNPs that differ between individuals i and j (ascending)."""
    return pop.snp_positions[discriminating_indices(pop, i, j)]


def dump_population(pop: Population, fh: IO[str]) -> None:
    """Debug text dump: one SNP line then one row line per individual."""
    fh.write(f"SNPS {' '.join(f'{x:.6f}' for x in pop.snp_positions)}\n")
    for m in range(pop.M):
        fh.write(f"IND {m} {' '.join(str(int(a)) for a in pop.alleles[m])}\n")


def dump_readset(rs: ReadSet, fh: IO[str]) -> None:
    """Debug text dump: `READ <start> <hidden_id> <idx:allele,...>` per read."""
    offsets, values = rs.observations()
    for r in range(rs.n_reads):
        lo, hi = int(rs.cover_lo[r]), int(rs.cover_hi[r])
        content = ",".join(
            f"{idx}:{int(values[offsets[r] + k])}" for k, idx in enumerate(range(lo, hi)))
        fh.write(f"READ {rs.starts[r]:.6f} {int(rs.hidden[r])} {content}\n")
