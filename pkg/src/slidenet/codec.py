"""Erasure coding layer: messages <-> codewords <-> packets.

The code is a systematic Reed-Solomon (MDS) erasure code over GF(2^16).
A codeword consists of D fragments; any ceil((1-lam)*D) distinct fragments
recover the message.  Only erasures occur in this system: fragments with
bad signatures are discarded before decoding, never fed to the decoder.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Optional

import numpy as np

from .util import parse_fraction, register_packer

GF_BITS = 16
GF_SIZE = 1 << GF_BITS          # 65536
GF_MOD = GF_SIZE - 1            # multiplicative group order
_PRIM_POLY = 0x1100B            # x^16 + x^12 + x^3 + x + 1


def _build_tables():
    exp = np.zeros(2 * GF_MOD, dtype=np.int64)
    log = np.zeros(GF_SIZE, dtype=np.int64)
    x = 1
    for i in range(GF_MOD):
        exp[i] = x
        log[x] = i
        x <<= 1
        if x & GF_SIZE:
            x ^= _PRIM_POLY
    exp[GF_MOD:] = exp[:GF_MOD]
    return exp, log


_GF_EXP, _GF_LOG = _build_tables()


class CodecError(ValueError):
    """Invalid coding parameters or malformed encode/decode input."""


@dataclass(frozen=True)
class CodingParams:
    """Network-wide coding configuration.

    n: node count, lam/sigma: error and information rate of the code,
    k: signature security parameter in bits (informational; the simulator
    treats signatures as opaque tags).
    """

    n: int
    lam: Fraction
    sigma: Fraction
    k: int = 128
    fragment_bytes: int = 2

    @property
    def packets_per_codeword(self) -> int:
        """D: fragments per codeword, 6*n^3/lam."""
        return int(6 * self.n**3 / self.lam)

    @property
    def decode_threshold(self) -> int:
        """Distinct fragments needed to decode: (1-lam)*D = D - 6n^3."""
        return self.packets_per_codeword - 6 * self.n**3

    @property
    def data_fragments(self) -> int:
        """Number of information-bearing (systematic) fragments: sigma*D."""
        return int(self.sigma * self.packets_per_codeword)

    @property
    def message_bytes(self) -> int:
        return self.data_fragments * self.fragment_bytes


@dataclass(frozen=True)
class Message:
    index: int                  # 1-based sequence number
    payload: bytes


@dataclass(frozen=True)
class Packet:
    codeword_index: int
    fragment_index: int
    payload: bytes
    sender_signature: object = None

    def label(self):
        return (self.codeword_index, self.fragment_index)

    def signed_body(self):
        return ("packet", self.codeword_index, self.fragment_index, self.payload)


register_packer(Packet, lambda p: ("~packet", p.codeword_index, p.fragment_index,
                                   p.payload, p.sender_signature))


@dataclass(frozen=True)
class Codeword:
    message_index: int
    fragments: tuple


def derive_params(n, lam, sigma=None, k: int = 128,
                  fragment_bytes: int = 2) -> CodingParams:
    """Validate and freeze coding parameters.

    Requires n >= 4, 0 < lam < 1/2 with 6n^3/lam integral, and
    0 < sigma <= 1 - lam with sigma*D integral.  sigma defaults to 1 - lam
    (maximal information rate for an MDS code at this decode threshold).
    """
    if not isinstance(n, int) or n < 4:
        raise CodecError(f"node count must be an integer >= 4, got {n!r}")
    lam = parse_fraction(lam)
    if not (0 < lam < Fraction(1, 2)):
        raise CodecError(f"error rate must satisfy 0 < lam < 1/2, got {lam}")
    d = Fraction(6 * n**3) / lam
    if d.denominator != 1:
        raise CodecError(f"6*n^3/lam = {d} is not an integer")
    d = int(d)
    if d > GF_SIZE:
        raise CodecError(f"D = {d} exceeds the field size {GF_SIZE}")
    sigma = Fraction(1) - lam if sigma is None else parse_fraction(sigma)
    if not (0 < sigma <= 1):
        raise CodecError(f"information rate must satisfy 0 < sigma <= 1, got {sigma}")
    if sigma > 1 - lam:
        raise CodecError(f"sigma = {sigma} exceeds 1 - lam = {1 - lam}; "
                         "no MDS code reaches that rate at this threshold")
    if (sigma * d).denominator != 1:
        raise CodecError(f"sigma*D = {sigma * d} is not an integer")
    if fragment_bytes < 2 or fragment_bytes % 2:
        raise CodecError("fragment_bytes must be a positive multiple of 2")
    return CodingParams(n=n, lam=lam, sigma=sigma, k=k, fragment_bytes=fragment_bytes)


def _to_words(payload: bytes) -> np.ndarray:
    return np.frombuffer(payload, dtype=">u2").astype(np.int64)


def _to_bytes(words: np.ndarray) -> bytes:
    return words.astype(">u2").tobytes()


def _lagrange_eval(xs: np.ndarray, values: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Evaluate, at each target point, the unique polynomial of degree
    < len(xs) interpolating values[i] at xs[i].  Barycentric form over
    GF(2^16); targets must be disjoint from xs.  values has shape
    (len(xs), words); returns (len(targets), words).
    """
    k = len(xs)
    words = values.shape[1]
    diff = xs[:, None] ^ xs[None, :]
    np.fill_diagonal(diff, 1)
    log_denom = _GF_LOG[diff].sum(axis=1) % GF_MOD          # (k,)

    tdiff = targets[:, None] ^ xs[None, :]                  # (m, k), all nonzero
    log_tdiff = _GF_LOG[tdiff]
    log_numer = log_tdiff.sum(axis=1) % GF_MOD              # (m,)

    out = np.zeros((len(targets), words), dtype=np.int64)
    for w in range(words):
        v = values[:, w]
        nz = v != 0
        if not nz.any():
            continue
        log_v = _GF_LOG[v[nz]]
        # weight_ij = v_j / ((t_i ^ x_j) * denom_j)
        log_w = (log_v[None, :] - log_tdiff[:, nz] - log_denom[None, nz]) % GF_MOD
        terms = _GF_EXP[log_w]
        s = np.bitwise_xor.reduce(terms, axis=1)            # (m,)
        snz = s != 0
        out[snz, w] = _GF_EXP[(log_numer[snz] + _GF_LOG[s[snz]]) % GF_MOD]
    return out


def encode(msg: Message, params: CodingParams,
           sign: Optional[Callable[[tuple], object]] = None) -> Codeword:
    """Expand a message into its D-fragment codeword.

    Fragments 0..K-1 carry the message verbatim (systematic); the rest are
    parity evaluations.  `sign` maps a packet body to the sender's signature;
    omit it for the unauthenticated protocol.
    """
    d = params.packets_per_codeword
    kdata = params.data_fragments
    if len(msg.payload) != params.message_bytes:
        raise CodecError(f"payload must be {params.message_bytes} bytes, "
                         f"got {len(msg.payload)}")
    words_per_frag = params.fragment_bytes // 2
    data = _to_words(msg.payload).reshape(kdata, words_per_frag)
    xs = np.arange(kdata, dtype=np.int64)
    targets = np.arange(kdata, d, dtype=np.int64)
    parity = _lagrange_eval(xs, data, targets)

    fragments = []
    for i in range(d):
        payload = _to_bytes(data[i] if i < kdata else parity[i - kdata])
        pkt = Packet(codeword_index=msg.index, fragment_index=i, payload=payload)
        if sign is not None:
            pkt = Packet(pkt.codeword_index, pkt.fragment_index, pkt.payload,
                         sign(pkt.signed_body()))
        fragments.append(pkt)
    return Codeword(message_index=msg.index, fragments=tuple(fragments))


def decode(fragments: Iterable[Packet], params: CodingParams,
           verify: Optional[Callable[[Packet], bool]] = None) -> Optional[Message]:
    """Recover the message from a set of fragments, or None if fewer than
    (1-lam)*D distinct valid fragments are available.

    Fragments failing `verify` are treated as absent.  Mixing fragments of
    different codewords is a caller error.
    """
    by_index = {}
    cw = None
    for frag in fragments:
        if verify is not None and not verify(frag):
            continue
        if cw is None:
            cw = frag.codeword_index
        elif frag.codeword_index != cw:
            raise CodecError("fragments from different codewords")
        by_index.setdefault(frag.fragment_index, frag)
    if cw is None or len(by_index) < params.decode_threshold:
        return None

    kdata = params.data_fragments
    words_per_frag = params.fragment_bytes // 2
    have = sorted(by_index)[:kdata]
    xs = np.array(have, dtype=np.int64)
    values = np.stack([_to_words(by_index[i].payload) for i in have])

    data = np.zeros((kdata, words_per_frag), dtype=np.int64)
    known = [i for i in have if i < kdata]
    for i in known:
        data[i] = _to_words(by_index[i].payload)
    missing = np.array([i for i in range(kdata) if i not in set(known)],
                       dtype=np.int64)
    if len(missing):
        data[missing] = _lagrange_eval(xs, values, missing)
    return Message(index=cw, payload=_to_bytes(data.reshape(-1)))
