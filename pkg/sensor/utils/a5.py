"""
A5/1 reference implementation: key/count loading, majority-clocked keystream, inversion of the
linear loading phase (session key from an initial state) and known-plaintext keystream recovery.

Register constants are the published A5/1 ones. Bit 0 of each register is the feedback input,
the top bit is the output tap.
"""
from functools import lru_cache
from dataclasses import dataclass
import numpy as np
from utils.errors import CipherError, FrameNumberOutOfRange, LengthMismatch
from utils.gf2 import bits_to_int, gf2_inverse, gf2_matvec, int_to_bits

R1_LEN, R2_LEN, R3_LEN = 19, 22, 23
R1_MASK, R2_MASK, R3_MASK = (1 << R1_LEN) - 1, (1 << R2_LEN) - 1, (1 << R3_LEN) - 1
R1_TAPS = (1 << 13) | (1 << 16) | (1 << 17) | (1 << 18)
R2_TAPS = (1 << 20) | (1 << 21)
R3_TAPS = (1 << 7) | (1 << 20) | (1 << 21) | (1 << 22)
R1_CLOCK_BIT, R2_CLOCK_BIT, R3_CLOCK_BIT = 8, 10, 10

KEY_BITS = 64
COUNT_BITS = 22
STATE_BITS = R1_LEN + R2_LEN + R3_LEN
MIXING_ROUNDS = 100
BURST_BITS = 114
KEYSTREAM_BITS = 2 * BURST_BITS

HYPERFRAME = 26 * 51 * 2048


@dataclass(frozen=True)
class SessionKey:
    """Kc. Bit i of `kc` is the i-th bit loaded, i.e. bit (i % 8) of key octet i // 8."""
    kc: int

    def __post_init__(self):
        if not 0 <= self.kc < 1 << KEY_BITS:
            raise CipherError(f"Kc must fit in {KEY_BITS} bits")

    @classmethod
    def from_hex(cls, text):
        """Key octets in loading order, as in the reference vector ('1223456789abcdef')."""
        text = text.lower().removeprefix("0x")
        if not text or len(text) > 16 or any(c not in "0123456789abcdef" for c in text):
            raise CipherError(f"Kc must be 1-16 hex digits, got '{text}'")
        return cls(int.from_bytes(bytes.fromhex(text.zfill(16)), 'little'))

    def hex(self):
        return self.kc.to_bytes(8, 'little').hex()


@dataclass(frozen=True)
class FrameCount:
    count: int

    def __post_init__(self):
        if not 0 <= self.count < 1 << COUNT_BITS:
            raise CipherError(f"COUNT must fit in {COUNT_BITS} bits")


@dataclass(frozen=True)
class A5State:
    r1: int
    r2: int
    r3: int

    def __post_init__(self):
        if self.r1 >> R1_LEN or self.r2 >> R2_LEN or self.r3 >> R3_LEN:
            raise CipherError("register value exceeds its width")

    def pack(self):
        return self.r1 | self.r2 << R1_LEN | self.r3 << (R1_LEN + R2_LEN)

    @classmethod
    def unpack(cls, value):
        if not 0 <= value < 1 << STATE_BITS:
            raise CipherError(f"state must fit in {STATE_BITS} bits")
        return cls(value & R1_MASK, (value >> R1_LEN) & R2_MASK, value >> (R1_LEN + R2_LEN))

    @classmethod
    def from_hex(cls, text):
        text = text.lower().removeprefix("0x")
        if not text or len(text) > 16:
            raise CipherError(f"state must be 1-16 hex digits, got '{text}'")
        try:
            return cls.unpack(int(text, 16))
        except ValueError as error:
            raise CipherError(f"state is not hex: '{text}'") from error

    def hex(self):
        return f"{self.pack():016x}"

    def __xor__(self, other):
        return A5State(self.r1 ^ other.r1, self.r2 ^ other.r2, self.r3 ^ other.r3)


def _kc(value):
    return value.kc if isinstance(value, SessionKey) else SessionKey(value).kc


def _count(value):
    return value.count if isinstance(value, FrameCount) else FrameCount(value).count


def majority(a, b, c):
    return (a & b) | (a & c) | (b & c)


def _step(register, mask, taps):
    return ((register << 1) & mask) | ((register & taps).bit_count() & 1)


def a5_init(kc, count):
    """Load Kc then COUNT (LSB first), clocking all three registers per bit without the majority rule."""
    kc, count = _kc(kc), _count(count)
    r1 = r2 = r3 = 0
    for value, width in ((kc, KEY_BITS), (count, COUNT_BITS)):
        for i in range(width):
            bit = (value >> i) & 1
            r1 = _step(r1, R1_MASK, R1_TAPS) ^ bit
            r2 = _step(r2, R2_MASK, R2_TAPS) ^ bit
            r3 = _step(r3, R3_MASK, R3_TAPS) ^ bit
    return A5State(r1, r2, r3)


def a5_keystream(state):
    """100 discarded majority-clocked rounds, then 228 output bits: downlink burst first, uplink second."""
    r1, r2, r3 = state.r1, state.r2, state.r3
    bits = []
    for round_index in range(MIXING_ROUNDS + KEYSTREAM_BITS):
        c1 = (r1 >> R1_CLOCK_BIT) & 1
        c2 = (r2 >> R2_CLOCK_BIT) & 1
        c3 = (r3 >> R3_CLOCK_BIT) & 1
        m = majority(c1, c2, c3)
        if c1 == m:
            r1 = _step(r1, R1_MASK, R1_TAPS)
        if c2 == m:
            r2 = _step(r2, R2_MASK, R2_TAPS)
        if c3 == m:
            r3 = _step(r3, R3_MASK, R3_TAPS)
        if round_index >= MIXING_ROUNDS:
            bits.append((r1 >> (R1_LEN - 1)) ^ (r2 >> (R2_LEN - 1)) ^ (r3 >> (R3_LEN - 1)))
    return bits


def keystream_bytes(bits):
    """Pack bits MSB-first into octets, last octet zero-filled (114 bits -> 15 octets)."""
    packed = bytearray((len(bits) + 7) // 8)
    for i, bit in enumerate(bits):
        packed[i // 8] |= bit << (7 - (i % 8))
    return bytes(packed)


def bytes_to_bits(data, length=None):
    bits = [(octet >> (7 - i)) & 1 for octet in data for i in range(8)]
    return bits if length is None else bits[:length]


@lru_cache(maxsize=1)
def loading_matrices():
    """
    (A, B, A^-1) with initial_state = A*kc xor B*count over GF(2), probed on basis vectors.
    Computed once; NotInvertible here means the loading constants are wrong.
    """
    a = np.zeros((STATE_BITS, KEY_BITS), dtype=np.uint8)
    b = np.zeros((STATE_BITS, COUNT_BITS), dtype=np.uint8)
    for j in range(KEY_BITS):
        a[:, j] = int_to_bits(a5_init(1 << j, 0).pack(), STATE_BITS)
    for j in range(COUNT_BITS):
        b[:, j] = int_to_bits(a5_init(0, 1 << j).pack(), STATE_BITS)
    a.flags.writeable = False
    b.flags.writeable = False
    a_inv = gf2_inverse(a)
    a_inv.flags.writeable = False
    return a, b, a_inv


def recover_kc(state, count):
    """Back-clock the loading phase: kc = A^-1 (state xor B*count)."""
    _, b, a_inv = loading_matrices()
    count = _count(count)
    key_part = int_to_bits(state.pack(), STATE_BITS) ^ gf2_matvec(b, int_to_bits(count, COUNT_BITS)).astype(np.uint8)
    return SessionKey(bits_to_int(gf2_matvec(a_inv, key_part)))


def count_from_fn(fn):
    """COUNT = T1 << 11 | T3 << 5 | T2 with T1 = fn div 1326, T3 = fn mod 51, T2 = fn mod 26."""
    if not 0 <= fn < HYPERFRAME:
        raise FrameNumberOutOfRange(f"frame number {fn} outside 0..{HYPERFRAME - 1}")
    t1 = (fn // (26 * 51)) & 0x7FF
    t3 = fn % 51
    t2 = fn % 26
    return FrameCount(t1 << 11 | t3 << 5 | t2)


def recover_keystream(ciphertext, plaintext):
    if len(ciphertext) != len(plaintext):
        raise LengthMismatch(f"ciphertext has {len(ciphertext)} bits, plaintext {len(plaintext)}")
    return [c ^ p for c, p in zip(ciphertext, plaintext)]


def encrypt_burst(kc, count, plaintext_bits, uplink=False):
    """XOR up to 114 plaintext bits with the downlink (or uplink) half of the keystream."""
    if len(plaintext_bits) > BURST_BITS:
        raise LengthMismatch(f"a burst carries at most {BURST_BITS} bits")
    keystream = a5_keystream(a5_init(kc, count))
    half = keystream[BURST_BITS:] if uplink else keystream[:BURST_BITS]
    return [p ^ k for p, k in zip(plaintext_bits, half)]
