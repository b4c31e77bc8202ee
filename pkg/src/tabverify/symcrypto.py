"""Deterministic symmetric encryption and the pseudorandom generator.

SE is a balanced Feistel network with a quadratic (single-AND) round
function, so its encryption map has a small circuit: 8 rounds give
multiplicative depth 8, inside the integer backend's budget. The same
routine, parameterized over bit operations, produces both the plain
evaluation and the circuit, which keeps the two extensionally equal by
construction.

The PRG iterates the same permutation in counter mode.
"""

from functools import lru_cache

from .circuit import Builder

ROUNDS = 8
_RC = 0x9E3779B97F4A7C15  # round-constant bit source
_PRG_BLOCK = 32


class SymError(Exception):
    pass


class _PlainOps:
    @staticmethod
    def const(v):
        return int(v)

    @staticmethod
    def xor(a, b):
        return a ^ b

    @staticmethod
    def and_(a, b):
        return a & b


class _BuildOps:
    def __init__(self, builder):
        self.b = builder

    def const(self, v):
        return self.b.constant(v)

    def xor(self, a, b):
        return self.b.xor(a, b)

    def and_(self, a, b):
        return self.b.and_(a, b)


def _rc_bit(i, j):
    return (_RC >> ((i * 13 + j) % 64)) & 1


def _round_keys(ops, key, w, rounds):
    folded = [ops.const(0)] * w
    for t, k in enumerate(key):
        folded[t % w] = ops.xor(folded[t % w], k)
    rks = []
    for i in range(rounds):
        rks.append(
            [ops.xor(folded[(j + i) % w], ops.const(_rc_bit(i, j))) for j in range(w)]
        )
    return rks

def _round_fn(ops, R, rk, w):
    s = max(2, w // 2)
    return [
        ops.xor(
            ops.xor(ops.and_(R[(j + 1) % w], R[(j + s) % w]), R[(j + 2) % w]),
            rk[j],
        )
        for j in range(w)
    ]


def _feistel_enc(ops, key, block, rounds=ROUNDS):
    w = len(block) // 2
    if w < 2 or len(block) % 2:
        raise SymError(f"block width {len(block)} unsupported (need even >= 4)")
    L, R = list(block[:w]), list(block[w:])
    for rk in _round_keys(ops, key, w, rounds):
        f = _round_fn(ops, R, rk, w)
        L, R = R, [ops.xor(a, b) for a, b in zip(L, f)]
    return tuple(L + R)


def _feistel_dec(key, block, rounds=ROUNDS):
    ops = _PlainOps()
    w = len(block) // 2
    if w < 2 or len(block) % 2:
        raise SymError(f"block width {len(block)} unsupported (need even >= 4)")
    L, R = list(block[:w]), list(block[w:])
    for rk in reversed(_round_keys(ops, key, w, rounds)):
        f = _round_fn(ops, L, rk, w)
        L, R = [a ^ b for a, b in zip(R, f)], L
    return tuple(L + R)


# --- public SE interface -----------------------------------------------------


def se_keygen(K, rng):
    if K < 8:
        raise SymError("key size too small (need K >= 8)")
    return tuple(rng.getrandbits(1) for _ in range(K))


def se_enc(sk, M):
    """Deterministic permutation of the |M|-bit block under sk."""
    _check_block(M)
    return _feistel_enc(_PlainOps(), tuple(sk), tuple(int(b) for b in M))


def se_dec(sk, C):
    _check_block(C)
    return _feistel_dec(tuple(sk), tuple(int(b) for b in C))


def _check_block(M):
    if len(M) < 4 or len(M) % 2:
        raise SymError(f"block width {len(M)} unsupported (need even >= 4)")
    if any(b not in (0, 1, True, False) for b in M):
        raise SymError("block must be bits")


def se_enc_circuit(key_bits, width):
    """Circuit over (key || message) computing se_enc; |key| = key_bits."""
    if width < 4 or width % 2:
        raise SymError(f"block width {width} unsupported (need even >= 4)")
    b = Builder(key_bits + width)
    ops = _BuildOps(b)
    key = list(range(key_bits))
    block = list(range(key_bits, key_bits + width))
    return b.finish(list(_feistel_enc(ops, key, block)))


# --- PRG -----------------------------------------------------------------------


@lru_cache(maxsize=8192)
def _prg_block(seed, index):
    counter = tuple((index >> i) & 1 for i in range(_PRG_BLOCK))
    return _feistel_enc(_PlainOps(), seed, counter)


def prg(s, n):
    """First n output bits for seed s; prefixes are consistent."""
    if n < 1:
        raise SymError("length must be positive")
    s = tuple(int(b) for b in s)
    out = []
    for blk in range((n + _PRG_BLOCK - 1) // _PRG_BLOCK):
        out.extend(_prg_block(s, blk))
    return tuple(out[:n])


def bit_at(s, i):
    """Output bit i (0-based) for seed s."""
    if i < 0:
        raise SymError("negative index")
    s = tuple(int(b) for b in s)
    return _prg_block(s, i // _PRG_BLOCK)[i % _PRG_BLOCK]
