"""Bit-level homomorphic encryption behind one interface.

Two backends share the same ciphertext container and operations:

  transparent   carries the plaintext bit plus a nonce; eval simulates the
                circuit on plaintexts and derives the output nonce
                deterministically from (key, circuit, inputs). A testing
                oracle, not encryption.
  integer-she   toy somewhat-homomorphic scheme over the integers:
                c = m + 2r + 2*(subset sum of public zeros) mod x0 with
                x0 = p*q0; XOR is addition, AND is multiplication. Noise is
                tracked per ciphertext and an explicit error is raised when
                an AND would exceed the budget; results are never silently
                corrupted.

Ciphertexts are fixed-length byte strings: backend tag, 8-byte key id, then
the backend payload padded to the key pair's length.
"""

import hashlib
import os
from collections import OrderedDict
from dataclasses import dataclass

from .circuit import simulate_wires

TAG_TRANSPARENT = 1
TAG_SHE = 2

KINDS = ("transparent", "integer-she")


class HeError(Exception):
    pass


class DepthBudgetError(HeError):
    pass


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "transparent"
    eta: int = 8192  # secret modulus bits
    rho: int = 16  # fresh noise bits
    tau: int = 32  # public encryptions of zero
    gamma_extra: int = 1024  # public modulus slack bits

    @property
    def gamma(self):
        return self.eta + self.gamma_extra

    @property
    def fresh_noise_bits(self):
        # fresh ciphertext: m + 2r + 2 * subset sum of tau public zeros
        return self.rho + self.tau.bit_length() + 2

    @property
    def depth_budget(self):
        """Multiplicative levels before noise can reach the modulus."""
        d, noise = 0, self.fresh_noise_bits
        while 2 * noise + 1 <= self.eta - 2:
            noise = 2 * noise + 1
            d += 1
        return d


@dataclass(frozen=True)
class Hpk:
    kind: str
    key_id: bytes  # 8 bytes
    lam_bytes: int
    config: BackendConfig
    x0: int = 0
    zeros: tuple = ()  # tau public encryptions of zero


@dataclass(frozen=True)
class Hsk:
    kind: str
    key_id: bytes
    lam_bytes: int
    p: int = 0


@dataclass(frozen=True)
class HeKeyPair:
    hpk: Hpk
    hsk: Hsk


def _randbits(rng, n):
    if rng is None:
        return int.from_bytes(os.urandom((n + 7) // 8), "big") >> (
            (8 - n % 8) % 8
        )
    return rng.getrandbits(n)


def keygen(K, kind="transparent", config=None, rng=None):
    if K < 8:
        raise HeError("security parameter too small (need K >= 8)")
    if kind not in KINDS:
        raise HeError(f"unknown backend '{kind}'")
    config = config or BackendConfig(kind=kind)
    key_id = _randbits(rng, 64).to_bytes(8, "big")

    if kind == "transparent":
        lam_bytes = 1 + 8 + 1 + 24  # tag, key id, bit, nonce
        hpk = Hpk(kind=kind, key_id=key_id, lam_bytes=lam_bytes, config=config)
        return HeKeyPair(hpk, Hsk(kind=kind, key_id=key_id, lam_bytes=lam_bytes))

    if config.depth_budget < 1:
        raise HeError("parameter set infeasible: depth budget is zero")
    eta, gamma = config.eta, config.gamma
    p = _randbits(rng, eta) | (1 << (eta - 1)) | 1  # odd, full width
    q0 = _randbits(rng, gamma - eta) | (1 << (gamma - eta - 1)) | 1
    x0 = p * q0
    zeros = []
    for _ in range(config.tau):
        q = _randbits(rng, gamma - eta - 2)
        r = _randbits(rng, config.rho)
        zeros.append((p * q + 2 * r) % x0)
    lam_bytes = 1 + 8 + 2 + (gamma + 7) // 8
    hpk = Hpk(
        kind=kind,
        key_id=key_id,
        lam_bytes=lam_bytes,
        config=config,
        x0=x0,
        zeros=tuple(zeros),
    )
    return HeKeyPair(hpk, Hsk(kind=kind, key_id=key_id, lam_bytes=lam_bytes, p=p))


# --- ciphertext packing -------------------------------------------------------


def _pack(hpk, payload):
    tag = TAG_TRANSPARENT if hpk.kind == "transparent" else TAG_SHE
    blob = bytes([tag]) + hpk.key_id + payload
    if len(blob) != hpk.lam_bytes:
        raise HeError("internal: ciphertext payload size drift")
    return blob

def _unpack(hpk_or_hsk, ct):
    want_tag = TAG_TRANSPARENT if hpk_or_hsk.kind == "transparent" else TAG_SHE
    if not isinstance(ct, (bytes, bytearray)):
        raise HeError("ciphertext must be bytes")
    if len(ct) != hpk_or_hsk.lam_bytes:
        raise HeError("malformed ciphertext length")
    if ct[0] != want_tag:
        raise HeError("malformed ciphertext (backend tag)")
    if ct[1:9] != hpk_or_hsk.key_id:
        raise HeError("ciphertext does not match this key pair")
    return bytes(ct[9:])


def lam_bits(hpk):
    return hpk.lam_bytes * 8


def _tr_payload(bit, nonce):
    return bytes([bit]) + nonce


def _she_payload(hpk, value, noise_bits):
    gb = (hpk.config.gamma + 7) // 8
    return noise_bits.to_bytes(2, "big") + value.to_bytes(gb, "big")


def _she_open(hpk, payload):
    gb = (hpk.config.gamma + 7) // 8
    if len(payload) != 2 + gb:
        raise HeError("malformed ciphertext length")
    return int.from_bytes(payload[2:], "big"), int.from_bytes(payload[:2], "big")


# --- enc / dec ------------------------------------------------------------------


def enc(hpk, bit, rng=None):
    if bit not in (0, 1, True, False):
        raise HeError("plaintext must be a bit")
    bit = int(bit)
    if hpk.kind == "transparent":
        nonce = _randbits(rng, 24 * 8).to_bytes(24, "big")
        return _pack(hpk, _tr_payload(bit, nonce))
    cfg = hpk.config
    r = _randbits(rng, cfg.rho)
    acc = bit + 2 * r
    for z in hpk.zeros:
        if _randbits(rng, 1):
            acc += z  # z carries an even noise term, so parity is preserved
    return _pack(hpk, _she_payload(hpk, acc % hpk.x0, cfg.fresh_noise_bits))


def enc_word(hpk, bits, rng=None):
    return [enc(hpk, b, rng) for b in bits]


def dec(hsk, ct):
    payload = _unpack(hsk, ct)
    if hsk.kind == "transparent":
        if len(payload) != 25:
            raise HeError("malformed ciphertext length")
        return payload[0] & 1
    if len(payload) < 3:
        raise HeError("malformed ciphertext length")
    value = int.from_bytes(payload[2:], "big")
    p = hsk.p
    v = value % p
    if v > p // 2:
        v -= p
    return v & 1


def dec_word(hsk, cts):
    return tuple(dec(hsk, ct) for ct in cts)


# --- homomorphic evaluation ------------------------------------------------------

_SIM_CACHE = OrderedDict()
_SIM_CACHE_MAX = 512


def _cached_wires(circuit, bits):
    key = (circuit.gates_digest(), bits)
    hit = _SIM_CACHE.get(key)
    if hit is not None:
        _SIM_CACHE.move_to_end(key)
        return hit
    wires = simulate_wires(circuit, list(bits))
    _SIM_CACHE[key] = wires
    if len(_SIM_CACHE) > _SIM_CACHE_MAX:
        _SIM_CACHE.popitem(last=False)
    return wires


def _tr_out_nonce(hpk, proj_digest, input_blob):
    h = hashlib.sha256()
    h.update(b"tr-eval")
    h.update(hpk.key_id)
    h.update(proj_digest.encode())
    h.update(input_blob)
    return h.digest()[:24]


def _eval_transparent(hpk, circuit, cts):
    bits = tuple(_unpack(hpk, ct)[0] & 1 for ct in cts)
    input_blob = b"".join(cts)
    wires = _cached_wires(circuit, bits)
    gd = circuit.gates_digest()
    outs = []
    for w in circuit.outputs:
        # matches with_outputs((w,)).digest() without building the projection
        h = hashlib.sha256()
        h.update(gd.encode())
        h.update(str([w]).encode())
        nonce = _tr_out_nonce(hpk, h.hexdigest(), input_blob)
        outs.append(_pack(hpk, _tr_payload(wires[w], nonce)))
    return outs


_ANF = {}  # tt -> (c0, c1, c2, c3): f(a,b) = c0 ^ c1 b ^ c2 a ^ c3 ab
for tt in range(16):
    t00, t01, t10, t11 = (tt >> 0) & 1, (tt >> 1) & 1, (tt >> 2) & 1, (tt >> 3) & 1
    _ANF[tt] = (t00, t01 ^ t00, t10 ^ t00, t11 ^ t10 ^ t01 ^ t00)


def _eval_she(hpk, circuit, cts):
    cfg = hpk.config
    x0 = hpk.x0
    limit = cfg.eta - 2
    wires = []
    for ct in cts:
        wires.append(_she_open(hpk, _unpack(hpk, ct)))
    for l, r, tt in circuit.gates:
        (av, an), (bv, bn) = wires[l], wires[r]
        if l == r:
            # unary: f(a) = g0 xor (g0 xor g1) a, no multiplication needed
            g0, g1 = tt & 1, (tt >> 3) & 1
            if g0 == g1:
                wires.append((g0, 0))
            elif (g0, g1) == (0, 1):
                wires.append((av, an))
            else:
                if an + 1 > limit:
                    raise DepthBudgetError(
                        f"noise {an + 1} bits exceeds budget {limit}"
                    )
                wires.append(((1 + av) % x0, an + 1))
            continue
        c0, c1, c2, c3 = _ANF[tt]
        val, noise = c0, 0
        if c1:
            val += bv
            noise = max(noise, bn) + 1
        if c2:
            val += av
            noise = max(noise, an) + 1
        if c3:
            mn = an + bn + 1
            if mn > limit:
                raise DepthBudgetError(
                    f"noise {mn} bits exceeds budget {limit} at an AND gate"
                )
            val += av * bv
            noise = max(noise, mn) + 1
        if noise > limit:
            raise DepthBudgetError(f"noise {noise} bits exceeds budget {limit}")
        wires.append((val % x0, noise))
    outs = []
    for w in circuit.outputs:
        val, noise = wires[w]
        outs.append(_pack(hpk, _she_payload(hpk, val, noise)))
    return outs


def eval_word(hpk, circuit, cts):
    """Homomorphically evaluate every output of the circuit.

    Deterministic: identical (key, circuit, inputs) give byte-identical
    results, which the audit's recomputation checks rely on. Output k equals
    eval() of the single-output projection for wire k.
    """
    if len(cts) != circuit.n_inputs:
        raise HeError(
            f"circuit expects {circuit.n_inputs} ciphertexts, got {len(cts)}"
        )
    if hpk.kind == "transparent":
        return _eval_transparent(hpk, circuit, cts)
    return _eval_she(hpk, circuit, cts)


def eval(hpk, circuit, cts):  # noqa: A001 - interface name
    if len(circuit.outputs) != 1:
        raise HeError("eval expects a single-output circuit; use eval_word")
    return eval_word(hpk, circuit, cts)[0]


def hpk_to_dict(hpk):
    d = {
        "kind": hpk.kind,
        "key_id": hpk.key_id.hex(),
        "lam_bytes": hpk.lam_bytes,
        "config": {
            "eta": hpk.config.eta,
            "rho": hpk.config.rho,
            "tau": hpk.config.tau,
            "gamma_extra": hpk.config.gamma_extra,
        },
    }
    if hpk.kind == "integer-she":
        d["x0"] = hex(hpk.x0)
        d["zeros"] = [hex(z) for z in hpk.zeros]
    return d


def hpk_from_dict(d):
    cfg = BackendConfig(kind=d["kind"], **d["config"])
    return Hpk(
        kind=d["kind"],
        key_id=bytes.fromhex(d["key_id"]),
        lam_bytes=d["lam_bytes"],
        config=cfg,
        x0=int(d["x0"], 16) if "x0" in d else 0,
        zeros=tuple(int(z, 16) for z in d.get("zeros", ())),
    )


def eval_star(hpk, circuits, cts):
    """Chain evaluations; each stage consumes the previous stage's outputs."""
    current = list(cts)
    for i, c in enumerate(circuits):
        if c.n_inputs != len(current):
            raise HeError(
                f"stage {i} expects {c.n_inputs} inputs, got {len(current)}"
            )
        current = eval_word(hpk, c, current)
    return current
