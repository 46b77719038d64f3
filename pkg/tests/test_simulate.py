import io

import numpy as np
import pytest
from scipy import stats

from poolseq_limits.core import (FixedBiallelic, FixedEta, ModelConfig,
                                 RandomStream, UnsupportedModelError,
                                 ValidationError)
from poolseq_limits.simulate import (apply_noise, discriminating_positions,
                                     dump_readset, generate_population,
                                     generate_reads)

LAW = FixedBiallelic(0.1)


def _config(**kw):
    base = dict(G=10**5, M=2, p=1e-3, L=1000.0, lam=1e-2, law=LAW)
    base.update(kw)
    return ModelConfig(**base)


def test_zero_snp_rate_gives_empty_population():
    pop = generate_population(_config(p=0.0), RandomStream(0))
    assert pop.S == 0


def test_fixed_eta_law_cannot_be_sampled():
    with pytest.raises(UnsupportedModelError):
        generate_population(_config(law=FixedEta(0.82)), RandomStream(0))


def test_snp_count_tracks_rate():
    pop = generate_population(_config(G=10**6), RandomStream(1))
    assert pop.S == pytest.approx(1000, abs=4 * 1000 ** 0.5)


def test_discriminating_fraction_matches_one_minus_eta():
    """Two individuals differ per locus with probability 1 - eta = 0.18."""
    cfg = _config(G=10**5, p=1.0 - 1e-9)  # dense loci: ~1e5 of them
    pop = generate_population(cfg, RandomStream(2))
    frac = discriminating_positions(pop, 0, 1).size / pop.S
    sigma = (0.18 * 0.82 / pop.S) ** 0.5
    assert abs(frac - 0.18) < 3 * sigma


def test_zero_read_rate_gives_empty_readset():
    pop = generate_population(_config(), RandomStream(3))
    rs = generate_reads(pop, _config(lam=0.0), RandomStream(3))
    assert rs.n_reads == 0


def test_read_counts_poisson_over_stationary_domain():
    """Total reads are Poisson(M * lam * (G + L)): starts live on [-L, G)."""
    cfg = _config(G=10**5, M=2, lam=1e-2, L=1000.0)
    pop = generate_population(cfg, RandomStream(4))
    root = RandomStream(5)
    counts = np.array([
        generate_reads(pop, cfg, root.child(i)).n_reads for i in range(3000)])
    mu = cfg.M * cfg.lam * (cfg.G + cfg.L)
    assert counts.mean() == pytest.approx(mu, rel=0.01)
    z = (counts.mean() - mu) / (mu / len(counts)) ** 0.5
    assert abs(z) < 4


def test_read_covers_exactly_window_snps():
    cfg = _config()
    pop = generate_population(cfg, RandomStream(6))
    rs = generate_reads(pop, cfg, RandomStream(7))
    pos = pop.snp_positions
    for r in range(0, rs.n_reads, 37):
        lo, hi = rs.cover_lo[r], rs.cover_hi[r]
        inside = (pos >= rs.starts[r]) & (pos < rs.starts[r] + cfg.L)
        np.testing.assert_array_equal(np.nonzero(inside)[0], np.arange(lo, hi))
        np.testing.assert_array_equal(
            rs.read_alleles(r), pop.alleles[rs.hidden[r], lo:hi])


def test_noise_zero_is_identity():
    cfg = _config()
    pop = generate_population(cfg, RandomStream(8))
    rs = generate_reads(pop, cfg, RandomStream(9))
    noisy = apply_noise(rs, 0.0, RandomStream(10))
    assert noisy.noisy
    np.testing.assert_array_equal(noisy.observations()[1], rs.observations()[1])


def test_noise_flip_fraction():
    cfg = _config(G=10**6, lam=4e-3, L=2000.0)
    pop = generate_population(cfg, RandomStream(11))
    rs = generate_reads(pop, cfg, RandomStream(12))
    noisy = apply_noise(rs, 0.2, RandomStream(13))
    flipped = (noisy.observations()[1] != rs.observations()[1]).mean()
    n = rs.observations()[1].size
    assert n > 10**4
    assert abs(flipped - 0.2) < 3 * (0.2 * 0.8 / n) ** 0.5


def test_noise_half_is_uninformative():
    cfg = _config(G=10**6, lam=4e-3, L=2000.0)
    pop = generate_population(cfg, RandomStream(14))
    rs = generate_reads(pop, cfg, RandomStream(15))
    noisy = apply_noise(rs, 0.5, RandomStream(16))
    truth = rs.observations()[1].astype(float)
    obs = noisy.observations()[1].astype(float)
    n = truth.size
    corr = float(np.mean(truth * obs))  # +-1 values: correlation estimate
    assert abs(corr) < 3 / n ** 0.5


def test_noise_requires_biallelic():
    from poolseq_limits.core import Empirical
    law = Empirical(((0.4, 0.3, 0.2, 0.1),))
    cfg = _config(law=law)
    pop = generate_population(cfg, RandomStream(17))
    rs = generate_reads(pop, cfg, RandomStream(18))
    with pytest.raises(UnsupportedModelError):
        apply_noise(rs, 0.1, RandomStream(19))


def test_discriminating_positions_basics():
    cfg = _config()
    pop = generate_population(cfg, RandomStream(20))
    pop.alleles[1] = pop.alleles[0]
    assert discriminating_positions(pop, 0, 1).size == 0
    pop.alleles[1, 5] = -pop.alleles[0, 5]
    np.testing.assert_array_equal(discriminating_positions(pop, 0, 1),
                                  pop.snp_positions[5:6])
    with pytest.raises(ValidationError):
        discriminating_positions(pop, 1, 1)


def test_discriminating_gaps_exponential():
    cfg = _config(G=4 * 10**6)
    pop = generate_population(cfg, RandomStream(21))
    gaps = np.diff(discriminating_positions(pop, 0, 1))
    rate = cfg.p * (1.0 - cfg.eta)
    assert stats.kstest(gaps, "expon", args=(0, 1 / rate)).pvalue > 0.01


def test_noise_commutes_with_read_subsetting():
    """Flips are independent per observation slot, so restricting to any
    read subset leaves the per-slot flip law unchanged."""
    cfg = _config(G=2 * 10**5)
    pop = generate_population(cfg, RandomStream(22))
    rs = generate_reads(pop, cfg, RandomStream(23))
    noisy = apply_noise(rs, 0.3, RandomStream(24))
    off, truth = rs.observations()
    _, obs = noisy.observations()
    flips = obs != truth
    half = rs.n_reads // 2
    a = flips[:off[half]].mean()
    b = flips[off[half]:].mean()
    sig = (0.3 * 0.7) ** 0.5 * (1 / off[half] + 1 / (flips.size - off[half])) ** 0.5
    assert abs(a - b) < 4 * sig


def test_dump_readset_format():
    cfg = _config(G=2000, p=5e-3, lam=5e-3, L=500.0)
    pop = generate_population(cfg, RandomStream(25))
    rs = generate_reads(pop, cfg, RandomStream(26))
    buf = io.StringIO()
    dump_readset(rs, buf)
    lines = buf.getvalue().splitlines()
    assert len(lines) == rs.n_reads
    assert all(line.startswith("READ ") for line in lines)
