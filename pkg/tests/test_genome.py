import itertools

import numpy as np
import pytest

from srsearch import genome
from srsearch.genome import (
    CellGene,
    Chromosome,
    ConvKind,
    GenomeError,
    MacroGenome,
    SearchConfig,
    chromosome_from_json,
    chromosome_to_json,
    decode,
    encode,
    encode_compact,
    macro_index,
    macro_length,
    operator_set,
    sample_random,
    space_size,
)


def test_operator_set_size_and_uniqueness():
    ops = operator_set()
    assert len(ops) == 192
    assert len(set(ops)) == 192
    assert operator_set() is ops  # stable across calls


def test_operator_set_contains_published_block():
    tokens = {g.token() for g in operator_set()}
    assert "conv_f64_k3_b4_isskip" in tokens
    assert "groupConG4_f16_k3_b4_noskip" in tokens


def test_operator_set_plain_conv_count_matches_enumeration():
    # oracle: enumerate the product domain for the plain-conv kind
    expected = sum(
        1
        for _ in itertools.product(
            genome.CHANNEL_CHOICES, genome.KERNEL_CHOICES, (False, True), genome.REPEAT_CHOICES
        )
    )
    assert expected == 48
    assert sum(1 for g in operator_set() if g.conv_kind is ConvKind.CONV2D) == expected


@pytest.mark.parametrize("n,expected", [(0, 1), (1, 384), (7, 192**7 * 2**28)])
def test_space_size_values(n, expected):
    assert space_size(n) == expected


def test_space_size_exact_for_first_ten():
    for n in range(1, 11):
        assert space_size(n) == 192**n * 2 ** (n * (n + 1) // 2)


def test_space_size_matches_enumeration_small_n():
    # brute-force count of distinct (micro, macro) pairs
    for n in (1, 2):
        seen = set()
        for micro_ids in itertools.product(range(192), repeat=n):
            for macro_val in range(2 ** macro_length(n)):
                seen.add((micro_ids, macro_val))
        assert len(seen) == space_size(n)


def test_sample_random_shapes():
    rng = np.random.default_rng(1)
    c = sample_random(7, rng)
    assert len(c.micro) == 7
    assert len(c.macro.bits) == 28
    assert len(sample_random(1, rng).macro.bits) == 1


def test_sample_random_position_frequencies():
    rng = np.random.default_rng(7)
    draws = 10_000
    counts = np.zeros(192, dtype=int)
    idx = {g: i for i, g in enumerate(operator_set())}
    for _ in range(draws):
        c = sample_random(2, rng)
        counts[idx[c.micro[0]]] += 1
    p = 1.0 / 192
    bound = 5 * np.sqrt(draws * p * (1 - p))
    assert np.all(np.abs(counts - draws * p) <= bound)


def test_encode_tokens_match_published_labels():
    g1 = CellGene(ConvKind.CONV2D, 64, 3, True, 4)
    assert g1.token() == "conv_f64_k3_b4_isskip"
    g2 = CellGene(ConvKind.GROUP_CONV_G4, 16, 3, False, 4)
    assert g2.token() == "groupConG4_f16_k3_b4_noskip"


def test_decode_rejects_out_of_domain_channel():
    with pytest.raises(GenomeError, match="f99"):
        decode("conv_f99_k3_b4_isskip\nmacro=0")


def test_decode_rejects_unknown_kind():
    with pytest.raises(GenomeError, match="dilatedConv"):
        decode("dilatedConv_f16_k3_b1_noskip\nmacro=0")


def test_decode_rejects_bit_length_mismatch():
    with pytest.raises(GenomeError, match="length"):
        decode("conv_f16_k3_b1_noskip\nmacro=01")


def test_round_trip_random_chromosomes():
    rng = np.random.default_rng(42)
    for n in range(1, 9):
        for _ in range(1250):
            c = sample_random(n, rng)
            assert decode(encode(c)) == c
            assert decode(encode_compact(c)) == c


def test_json_round_trip():
    rng = np.random.default_rng(3)
    c = sample_random(5, rng)
    assert chromosome_from_json(chromosome_to_json(c)) == c


def test_macro_index_is_bijection():
    for n in range(1, 17):
        seen = [macro_index(n, i, j) for i in range(1, n + 1) for j in range(i, n + 1)]
        assert sorted(seen) == list(range(macro_length(n)))


def test_macro_genome_validation():
    with pytest.raises(GenomeError):
        MacroGenome(3, (0, 1))  # wrong length
    with pytest.raises(GenomeError):
        MacroGenome(1, (2,))  # not a bit


def test_chromosome_requires_matching_lengths():
    ops = operator_set()
    with pytest.raises(GenomeError):
        Chromosome((ops[0],), MacroGenome(2, (0, 0, 0)))


def test_search_config_validation():
    SearchConfig()  # defaults valid
    with pytest.raises(GenomeError):
        SearchConfig(p_r=0.8, p_den=0.4)
    with pytest.raises(GenomeError):
        SearchConfig(p_mr=0.9, p_mf=0.5)
    with pytest.raises(GenomeError):
        SearchConfig(population_size=1)
