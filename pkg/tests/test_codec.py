import random

import pytest
from fractions import Fraction
from hypothesis import given, settings
from hypothesis import strategies as st

from slidenet import codec
from slidenet.codec import CodecError, Message, decode, derive_params, encode


def make_params(n=4, lam="3/8", sigma=None, fragment_bytes=2):
    return derive_params(n, lam, sigma, fragment_bytes=fragment_bytes)


def random_message(params, seed=0):
    rng = random.Random(seed)
    payload = bytes(rng.getrandbits(8) for _ in range(params.message_bytes))
    return Message(1, payload)


class TestDeriveParams:
    def test_reference_values(self):
        p = make_params(4, "3/8", "1/2")
        assert p.packets_per_codeword == 1024
        assert p.decode_threshold == 640

    def test_n5(self):
        p = make_params(5, "3/8")
        assert p.packets_per_codeword == 2000
        assert p.decode_threshold == 2000 - 6 * 125

    def test_half_rejected(self):
        with pytest.raises(CodecError):
            derive_params(4, "1/2")

    def test_degenerate_graph_rejected(self):
        with pytest.raises(CodecError):
            derive_params(1, "3/8")

    def test_non_integral_d_rejected(self):
        with pytest.raises(CodecError):
            derive_params(4, "5/11")

    def test_sigma_above_mds_limit_rejected(self):
        with pytest.raises(CodecError):
            derive_params(4, "3/8", "3/4")

    def test_default_sigma_is_max_rate(self):
        p = make_params(4, "3/8")
        assert p.sigma == Fraction(5, 8)
        assert p.data_fragments == p.decode_threshold


class TestRoundTrip:
    def test_all_fragments(self):
        p = make_params()
        msg = random_message(p, 1)
        cw = encode(msg, p)
        assert len(cw.fragments) == p.packets_per_codeword
        assert decode(cw.fragments, p) == msg

    def test_threshold_subsets(self):
        p = make_params()
        msg = random_message(p, 7)
        cw = encode(msg, p)
        rng = random.Random(7)
        for _ in range(20):
            subset = rng.sample(cw.fragments, p.decode_threshold)
            assert decode(subset, p) == msg

    def test_below_threshold_insufficient(self):
        p = make_params()
        msg = random_message(p, 3)
        cw = encode(msg, p)
        rng = random.Random(3)
        for _ in range(20):
            subset = rng.sample(cw.fragments, p.decode_threshold - 1)
            assert decode(subset, p) is None

    def test_mixed_codewords_rejected(self):
        p = make_params()
        cw1 = encode(random_message(p, 1), p)
        m2 = Message(2, random_message(p, 2).payload)
        cw2 = encode(m2, p)
        mixed = list(cw1.fragments[: p.decode_threshold]) + [cw2.fragments[-1]]
        with pytest.raises(CodecError):
            decode(mixed, p)

    def test_wrong_payload_length(self):
        p = make_params()
        with pytest.raises(CodecError):
            encode(Message(1, b"\x00" * (p.message_bytes - 2)), p)

    def test_verify_filter_drops_fragments(self):
        p = make_params()
        msg = random_message(p, 9)
        cw = encode(msg, p)
        subset = cw.fragments[: p.decode_threshold]
        # rejecting one fragment pushes the set below threshold
        bad = subset[0].fragment_index
        assert decode(subset, p,
                      verify=lambda f: f.fragment_index != bad) is None


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.integers(64, 200))
def test_roundtrip_property_small_code(seed, size_hint):
    # small parameter set so hypothesis can afford many cases
    p = derive_params(4, "3/8", "1/4")
    rng = random.Random(seed)
    payload = bytes(rng.getrandbits(8) for _ in range(p.message_bytes))
    msg = Message(1, payload)
    cw = encode(msg, p)
    subset = rng.sample(cw.fragments, p.decode_threshold)
    assert decode(subset, p) == msg


def test_wide_fragments():
    p = derive_params(4, "3/8", fragment_bytes=8)
    msg = random_message(p, 5)
    cw = encode(msg, p)
    rng = random.Random(5)
    subset = rng.sample(cw.fragments, p.decode_threshold)
    assert decode(subset, p) == msg


def test_signature_binds_each_fragment():
    # flipping one payload byte invalidates exactly that fragment
    from slidenet.codec import Packet
    from slidenet.crypto import keygen
    ring = keygen([0, 1, 2, 3], seed=3)
    key = ring.keypair(0)
    p = make_params()
    msg = random_message(p, 6)
    cw = encode(msg, p, sign=lambda body: ring.sign(key, body))

    def valid(frag):
        return (ring.verify_as(frag.sender_signature, 0)
                and frag.sender_signature.value == frag.signed_body())

    assert all(valid(f) for f in cw.fragments)
    victim = cw.fragments[7]
    payload = bytes([victim.payload[0] ^ 1]) + victim.payload[1:]
    tampered = Packet(victim.codeword_index, victim.fragment_index, payload,
                      victim.sender_signature)
    assert not valid(tampered)
    others = [f for f in cw.fragments if f.fragment_index != 7]
    assert all(valid(f) for f in others)
    # the tampered fragment is treated as absent but does not spoil decode
    mixed = [tampered] + others[: p.decode_threshold]
    assert decode(mixed, p, verify=valid) == msg
