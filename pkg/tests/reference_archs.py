"""Published reference architectures used for cost-model cross-checks.

Models A and B are transcribed from their published diagrams (cell list
plus skip-connection chart).  The publication gives no diagram for the
mid-budget model C, only that it uses 8 connections, so C here is a
frozen reconstruction in the same budget class; A and B carry the real
calibration power.
"""

from srsearch.genome import Chromosome, MacroGenome, macro_index, macro_length, operator_set

_OPS = {g.token(): g for g in operator_set()}

# published budgets: (mult_adds at 480x480, params)
BUDGET_A = (234.7e9, 1_021_000)
BUDGET_B = (74.7e9, 326_000)
BUDGET_C = (93.7e9, 408_000)


def build_reference(cell_tokens, edges, n=7) -> Chromosome:
    bits = [0] * macro_length(n)
    for i, j in edges:
        bits[macro_index(n, i, j)] = 1
    micro = tuple(_OPS[t] for t in cell_tokens)
    return Chromosome(micro, MacroGenome(n, tuple(bits)))


def model_a() -> Chromosome:
    return build_reference(
        [
            "conv_f64_k3_b4_isskip",
            "conv_f48_k1_b1_isskip",
            "conv_f64_k3_b4_isskip",
            "conv_f64_k3_b4_isskip",
            "conv_f64_k3_b4_isskip",
            "conv_f64_k1_b4_noskip",
            "conv_f64_k3_b4_isskip",
        ],
        [(1, 5), (1, 7), (3, 4), (3, 5), (3, 7), (6, 7)],
    )


def model_b() -> Chromosome:
    return build_reference(
        [
            "invertBotConE2_f16_k3_b1_isskip",
            "invertBotConE2_f48_k1_b2_isskip",
            "conv_f16_k1_b2_isskip",
            "invertBotConE2_f32_k3_b4_noskip",
            "conv_f64_k3_b2_noskip",
            "groupConG4_f16_k3_b4_noskip",
            "conv_f16_k3_b1_isskip",
        ],
        [(1, 2), (1, 3), (1, 7), (2, 3), (2, 7), (3, 5), (3, 6), (3, 7), (4, 5), (5, 6)],
    )


def model_c() -> Chromosome:
    # reconstruction: 8 sparse connections, mid-sized mixed cells
    return build_reference(
        [
            "conv_f32_k3_b2_isskip",
            "conv_f48_k3_b2_isskip",
            "conv_f32_k3_b2_noskip",
            "conv_f32_k3_b2_isskip",
            "conv_f48_k3_b2_noskip",
            "conv_f32_k3_b2_isskip",
            "conv_f32_k3_b2_isskip",
        ],
        [(1, 3), (1, 5), (2, 4), (2, 7), (3, 6), (4, 7), (5, 7), (6, 7)],
    )
