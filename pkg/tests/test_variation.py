import numpy as np
import pytest

from srsearch.cost_model import standalone_cell_cost
from srsearch.genome import (
    Chromosome,
    GenomeError,
    SearchConfig,
    decode,
    encode,
    macro_length,
    macro_row_span,
    operator_index,
    operator_set,
    sample_random,
)
from srsearch.variation import (
    InitialConnections,
    MutationStrategy,
    RwsObjective,
    crossover,
    draw_initial_connections,
    draw_mutation_strategy,
    initialize,
    mutate,
    rws_table,
    rws_weights,
)


def test_initialize_full_operator_coverage():
    cfg = SearchConfig(n=7, population_size=192)
    pop = initialize(cfg, np.random.default_rng(0))
    assert len(pop) == 192
    micros = {c.micro for c in pop}
    assert len(micros) == 192  # without replacement
    for c in pop:
        assert len(set(c.micro)) == 1  # one operator repeated n times
        assert c.n == 7


def test_initialize_beyond_operator_set():
    cfg = SearchConfig(n=3, population_size=200)
    pop = initialize(cfg, np.random.default_rng(1))
    assert len(pop) == 200
    assert len({c.micro for c in pop[:192]}) == 192


def test_initialize_dense_and_empty_degenerate():
    dense_cfg = SearchConfig(n=7, population_size=8, p_r=0.0, p_den=1.0)
    for c in initialize(dense_cfg, np.random.default_rng(2)):
        assert sum(c.macro.bits) == 28
    none_cfg = SearchConfig(n=7, population_size=8, p_r=0.0, p_den=0.0)
    for c in initialize(none_cfg, np.random.default_rng(3)):
        assert sum(c.macro.bits) == 0


def test_initial_connection_category_frequencies():
    rng = np.random.default_rng(4)
    p_r, p_den = 0.3, 0.3
    draws = 10_000
    counts = {k: 0 for k in InitialConnections}
    for _ in range(draws):
        counts[draw_initial_connections(p_r, p_den, rng)] += 1
    for kind, p in [
        (InitialConnections.RANDOM, p_r),
        (InitialConnections.DENSE, p_den),
        (InitialConnections.NONE, 1 - p_r - p_den),
    ]:
        bound = 5 * np.sqrt(draws * p * (1 - p))
        assert abs(counts[kind] - draws * p) <= bound


def test_crossover_identity_on_equal_parents():
    rng = np.random.default_rng(5)
    for _ in range(50):
        a = sample_random(6, rng)
        assert crossover(a, a, rng) == a


def test_crossover_n1_returns_other_parent():
    rng = np.random.default_rng(6)
    a, b = sample_random(1, rng), sample_random(1, rng)
    child = crossover(a, b, rng)
    assert child == b  # with n=1 both chosen positions must be 1


def test_crossover_structural_bounds():
    rng = np.random.default_rng(7)
    n = 7
    for _ in range(200):
        a, b = sample_random(n, rng), sample_random(n, rng)
        child = crossover(a, b, rng)
        micro_diff = sum(x != y for x, y in zip(child.micro, a.micro))
        assert micro_diff <= 1
        bit_diff = sum(x != y for x, y in zip(child.macro.bits, a.macro.bits))
        assert bit_diff <= n  # one replaced row has at most n - j + 1 <= n bits
        # bits outside a single row must match parent a
        changed = [k for k, (x, y) in enumerate(zip(child.macro.bits, a.macro.bits)) if x != y]
        if changed:
            rows = [
                j for j in range(1, n + 1)
                if all(macro_row_span(n, j)[0] <= k < macro_row_span(n, j)[1] for k in changed)
            ]
            assert rows, f"changed bits {changed} span multiple rows"


def test_crossover_rejects_mismatched_n():
    rng = np.random.default_rng(8)
    with pytest.raises(GenomeError):
        crossover(sample_random(3, rng), sample_random(4, rng), rng)


def test_rws_weights_properties():
    w = rws_weights([10.0, 10.0, 20.0])
    assert w[0] == pytest.approx(w[1])
    assert w[0] > w[2]
    assert abs(w.sum() - 1.0) <= 1e-12


def test_rws_weights_scale_invariance():
    rng = np.random.default_rng(9)
    costs = rng.uniform(1, 1e6, size=192)
    w1 = rws_weights(costs)
    w2 = rws_weights(costs * 737.5)
    np.testing.assert_allclose(w1, w2, atol=1e-12)


def test_rws_table_prefers_cheap_operators():
    table = rws_table(RwsObjective.FLOPS, 32)
    ops = operator_set()
    tokens = {g.token(): i for i, g in enumerate(ops)}
    cheap = tokens["conv_f16_k1_b1_noskip"]
    expensive = tokens["conv_f64_k3_b4_noskip"]
    assert table.weights[cheap] > table.weights[expensive]
    assert abs(table.weights.sum() - 1.0) <= 1e-12
    assert np.all(table.weights > 0)


def test_rws_direction_toggle():
    cheap_first = rws_table(RwsObjective.PARAMS, 32, toward_cheap=True)
    expensive_first = rws_table(RwsObjective.PARAMS, 32, toward_cheap=False)
    ops = operator_set()
    costs = np.array([float(standalone_cell_cost(g, 32).params) for g in ops])
    assert np.argmax(cheap_first.weights) == np.argmin(costs)
    assert np.argmax(expensive_first.weights) == np.argmax(costs)


def test_mutation_strategy_frequencies():
    rng = np.random.default_rng(10)
    p_mr, p_mf = 0.6, 0.8
    draws = 10_000
    counts = {k: 0 for k in MutationStrategy}
    for _ in range(draws):
        counts[draw_mutation_strategy(p_mr, p_mf, rng)] += 1
    for kind, p in [
        (MutationStrategy.RANDOM, p_mr),
        (MutationStrategy.RWS_FLOPS, p_mf - p_mr),
        (MutationStrategy.RWS_PARAMS, 1 - p_mf),
    ]:
        bound = 5 * np.sqrt(draws * p * (1 - p))
        assert abs(counts[kind] - draws * p) <= bound


def test_random_mutation_changes_exactly_one_gene_and_bit():
    rng = np.random.default_rng(11)
    cfg = SearchConfig(n=7, p_mr=1.0, p_mf=1.0)
    for _ in range(200):
        m = sample_random(7, rng)
        child = mutate(m, cfg, rng)
        assert sum(x != y for x, y in zip(child.micro, m.micro)) == 1
        assert sum(x != y for x, y in zip(child.macro.bits, m.macro.bits)) == 1


def test_rws_mutation_keeps_macro():
    rng = np.random.default_rng(12)
    cfg = SearchConfig(n=7, p_mr=0.0, p_mf=1.0)
    for _ in range(100):
        m = sample_random(7, rng)
        child = mutate(m, cfg, rng)
        assert child.macro == m.macro


def test_rws_operator_frequencies_match_weights():
    rng = np.random.default_rng(13)
    table = rws_table(RwsObjective.FLOPS, 32)
    draws = 100_000
    counts = np.zeros(192, dtype=np.int64)
    for _ in range(draws):
        counts[table.sample(rng)] += 1
    expected = draws * table.weights
    bounds = 5 * np.sqrt(draws * table.weights * (1 - table.weights))
    assert np.all(np.abs(counts - expected) <= bounds)


def test_closure_under_crossover_and_mutation():
    rng = np.random.default_rng(14)
    cfg = SearchConfig(n=5)
    a, b = sample_random(5, rng), sample_random(5, rng)
    for _ in range(2000):
        child = mutate(crossover(a, b, rng), cfg, rng)
        assert decode(encode(child)) == child
        a, b = b, child
