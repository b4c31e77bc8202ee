"""Shared test utilities: random circuit generation and bit conversions."""

import random

from tabverify.circuit import Circuit

LINEAR_TTS = (0b0110, 0b1001, 0b0001, 0b0000, 0b1111)


def random_circuit(rng, n_inputs, n_gates, n_outputs=1, max_mult_depth=None):
    """Random topologically valid circuit, optionally depth-capped."""
    gates = []
    depth = [0] * n_inputs
    for j in range(n_gates):
        l = rng.randrange(n_inputs + j)
        r = rng.randrange(n_inputs + j)
        tt = rng.randrange(16)
        d = max(depth[l], depth[r])
        if tt not in LINEAR_TTS:
            if max_mult_depth is not None and d + 1 > max_mult_depth:
                tt = rng.choice(LINEAR_TTS)
            else:
                d += 1
        gates.append((l, r, tt))
        depth.append(d)
    outputs = tuple(rng.randrange(n_inputs + n_gates) for _ in range(n_outputs))
    return Circuit(n_inputs, tuple(gates), outputs)


def random_bits(rng, n):
    return tuple(rng.randrange(2) for _ in range(n))


def fresh_rng(seed):
    return random.Random(seed)
