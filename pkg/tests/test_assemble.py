import numpy as np

from poolseq_limits.assemble import (UNSET, check_bridging, check_conditions,
                                     check_coverage, enumerate_assemblies,
                                     greedy_assemble, score_assembly,
                                     unique_and_correct)
from poolseq_limits.core import FixedBiallelic, ModelConfig, RandomStream
from poolseq_limits.simulate import (Population, ReadSet, generate_population,
                                     generate_reads)

LAW = FixedBiallelic(0.3)


def _config(**kw):
    base = dict(G=100, M=2, p=0.03, L=60.0, lam=0.05, law=LAW)
    base.update(kw)
    return ModelConfig(**base)


def make_readset(config, pop, starts, hidden):
    """Hand-built read set for geometric scenarios."""
    starts = np.asarray(starts, dtype=float)
    hidden = np.asarray(hidden, dtype=np.int32)
    order = np.argsort(starts, kind="stable")
    starts, hidden = starts[order], hidden[order]
    pos = pop.snp_positions
    return ReadSet(starts=starts, hidden=hidden,
                   cover_lo=np.searchsorted(pos, starts, side="left"),
                   cover_hi=np.searchsorted(pos, starts + config.L, side="left"),
                   config=config, population=pop)


def fig_scenario():
    """Discriminating SNPs at 10, 50, 90 on G=100 with L=60 reads at 0, 35."""
    config = _config()
    pop = Population(snp_positions=np.array([10.0, 50.0, 90.0]),
                     alleles=np.array([[1, 1, 1], [-1, -1, -1]], dtype=np.int8),
                     law=LAW)
    rs = make_readset(config, pop, [0.0, 35.0, 0.0, 35.0], [0, 0, 1, 1])
    return config, pop, rs


def test_empty_readset_violates_every_pair():
    config = _config()
    pop = generate_population(config, RandomStream(0))
    rs = make_readset(config, pop, [], [])
    rep = check_coverage(pop, rs)
    assert not rep.ok
    assert len(rep.violations) == pop.M * pop.S


def test_single_read_covers_lone_snp():
    config = _config(M=1)
    pop = Population(snp_positions=np.array([30.0]),
                     alleles=np.array([[1]], dtype=np.int8), law=LAW)
    rs = make_readset(config, pop, [10.0], [0])
    assert check_coverage(pop, rs).ok


def test_bridging_vacuous_without_two_discriminating_snps():
    config = _config()
    pop = Population(snp_positions=np.array([10.0, 50.0]),
                     alleles=np.array([[1, 1], [1, 1]], dtype=np.int8), law=LAW)
    rs = make_readset(config, pop, [], [])
    assert check_bridging(pop, rs).ok


def test_region_longer_than_read_is_unbridgeable():
    config = _config(L=30.0)
    pop = Population(snp_positions=np.array([10.0, 90.0]),
                     alleles=np.array([[1, 1], [-1, -1]], dtype=np.int8),
                     law=LAW)
    rs = make_readset(config, pop, [0.0, 5.0, 60.0, 65.0], [0, 1, 0, 1])
    rep = check_bridging(pop, rs)
    assert not rep.ok
    assert rep.violations == [(0, 1, 10.0, 90.0)]


def test_fig_scenario_bridged_and_assembled():
    config, pop, rs = fig_scenario()
    assert check_conditions(pop, rs).ok
    contigs = greedy_assemble(rs, RandomStream(1))
    assert score_assembly(contigs, pop, rs)
    assert unique_and_correct(pop, rs)


def test_fig_scenario_unbridged_region_splits_outcomes():
    """Dropping the reads that bridge (50, 90) leaves two consistent
    assemblies; greedy then matches truth about half the time."""
    config, pop, _ = fig_scenario()
    rs = make_readset(config, pop, [0.0, 55.0, 0.0, 55.0], [0, 0, 1, 1])
    # reads at 55 cover only the SNP at 90: region (50, 90) is unbridged
    assert not check_bridging(pop, rs).ok
    assert len(enumerate_assemblies(pop, rs, max_outcomes=4)) == 2
    wins = 0
    trials = 4000
    root = RandomStream(2)
    for t in range(trials):
        contigs = greedy_assemble(rs, root.child(t))
        wins += score_assembly(contigs, pop, rs)
    sigma = (0.25 / trials) ** 0.5
    assert abs(wins / trials - 0.5) < 3 * sigma


def test_greedy_single_individual_single_contig():
    config = _config(M=1, p=0.05, lam=0.1)
    pop = generate_population(config, RandomStream(3))
    rs = generate_reads(pop, config, RandomStream(4))
    contigs = greedy_assemble(rs, RandomStream(5))
    assert len(contigs) == 1
    assert len(contigs[0].read_indices) == rs.n_reads


def test_score_assembly_examples():
    config, pop, rs = fig_scenario()
    contigs = greedy_assemble(rs, RandomStream(6))
    assert score_assembly(contigs, pop, rs)
    # swapped labels still succeed
    assert score_assembly(list(reversed(contigs)), pop, rs)
    # one flipped allele fails
    bad = [c for c in contigs]
    bad[0].consensus[1] = -bad[0].consensus[1]
    assert not score_assembly(bad, pop, rs)


def test_score_assembly_requires_full_determination_without_readset():
    config, pop, rs = fig_scenario()
    contigs = greedy_assemble(rs, RandomStream(7))
    assert score_assembly(contigs, pop)
    contigs[0].consensus[2] = UNSET
    assert not score_assembly(contigs, pop)


def test_uniqueness_oracle_counts_coverage_gaps():
    """With one individual's SNP uncovered no complete assembly exists."""
    config = _config(L=30.0)
    pop = Population(snp_positions=np.array([10.0, 50.0]),
                     alleles=np.array([[1, 1], [-1, -1]], dtype=np.int8),
                     law=LAW)
    rs = make_readset(config, pop, [5.0, 30.0, 5.0], [0, 0, 1])
    assert not check_coverage(pop, rs).ok
    assert enumerate_assemblies(pop, rs) == []
    assert not unique_and_correct(pop, rs)


def _random_small_instance(rng, root, t, M=2):
    G = int(rng.integers(60, 160))
    p = min(0.5, int(rng.integers(1, 13)) / G)
    lam = float(rng.uniform(0.01, 0.09))
    L = float(rng.uniform(0.2, 0.6)) * G
    config = ModelConfig(G=G, M=M, p=p, L=L, lam=lam, law=LAW)
    st = root.child(t, "inst")
    pop = generate_population(config, st.child("pop"))
    if len({pop.alleles[m].tobytes() for m in range(M)}) < M:
        return None  # the model assumes distinct individuals
    rs = generate_reads(pop, config, st.child("reads"))
    if pop.S > 12 or rs.n_reads > 40 or rs.n_reads == 0:
        return None
    return config, pop, rs, st


def test_equivalence_on_random_instances():
    """Fast version of the full acceptance check: conditions imply greedy
    and oracle success; coverage violation implies failure."""
    rng = np.random.default_rng(31)
    root = RandomStream(37)
    used = t = 0
    while used < 200:
        t += 1
        inst = _random_small_instance(rng, root, t)
        if inst is None:
            continue
        used += 1
        config, pop, rs, st = inst
        cond = check_conditions(pop, rs)
        greedy_ok = score_assembly(greedy_assemble(rs, st.child("greedy")),
                                   pop, rs)
        if cond.ok:
            assert greedy_ok
            assert unique_and_correct(pop, rs)
        if not cond.coverage_ok:
            assert not greedy_ok
