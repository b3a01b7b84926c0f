"""PKI bootstrap and signing for packets, receipts, reports, and parcels.

Two interchangeable backends:

* "oracle": a trusted in-simulator authority holding one secret per node;
  signatures are keyed digests recomputed on verification.  Within the
  simulation forgery is impossible by construction (no code path can
  produce a tag without the node's key handle), which makes unforgeability
  assertions exact rather than probabilistic.  This is the default.
* "ed25519": real asymmetric signatures via the `cryptography` package,
  with keys derived deterministically from the run seed.

Corrupt nodes hold their own key handles and may sign arbitrary values as
themselves; nothing in the simulator can sign on behalf of another node.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .util import pack, register_packer


class CryptoError(Exception):
    pass


@dataclass(frozen=True)
class Signed:
    value: object
    signer: object
    signature: bytes


register_packer(Signed, lambda s: ("~signed", s.value, s.signer, s.signature))


@dataclass(frozen=True)
class KeyPair:
    node_id: object
    _secret: bytes


class _OracleBackend:
    name = "oracle"

    def __init__(self, node_ids, seed):
        root = pack(("oracle-root", str(seed)))
        self._secrets = {
            nid: hashlib.blake2b(pack(("node-key", nid)) + root,
                                 digest_size=32).digest()
            for nid in node_ids
        }

    def keypair(self, node_id):
        return KeyPair(node_id, self._secrets[node_id])

    def sign(self, key: KeyPair, body: bytes) -> bytes:
        if self._secrets.get(key.node_id) != key._secret:
            raise CryptoError(f"bad key handle for {key.node_id}")
        return hashlib.blake2b(body, key=key._secret, digest_size=16).digest()

    def verify(self, node_id, body: bytes, signature: bytes) -> bool:
        secret = self._secrets.get(node_id)
        if secret is None:
            return False
        expect = hashlib.blake2b(body, key=secret, digest_size=16).digest()
        return signature == expect


class _Ed25519Backend:
    name = "ed25519"

    def __init__(self, node_ids, seed):
        from cryptography.hazmat.primitives.asymmetric.ed25519 import (
            Ed25519PrivateKey,
        )
        root = pack(("ed25519-root", str(seed)))
        self._private = {}
        self._public = {}
        for nid in node_ids:
            raw = hashlib.blake2b(pack(("node-key", nid)) + root,
                                  digest_size=32).digest()
            sk = Ed25519PrivateKey.from_private_bytes(raw)
            self._private[nid] = (raw, sk)
            self._public[nid] = sk.public_key()

    def keypair(self, node_id):
        return KeyPair(node_id, self._private[node_id][0])

    def sign(self, key: KeyPair, body: bytes) -> bytes:
        raw, sk = self._private[key.node_id]
        if raw != key._secret:
            raise CryptoError(f"bad key handle for {key.node_id}")
        return sk.sign(body)

    def verify(self, node_id, body: bytes, signature: bytes) -> bool:
        pub = self._public.get(node_id)
        if pub is None:
            return False
        try:
            pub.verify(signature, body)
            return True
        except Exception:
            return False


_BACKENDS = {"oracle": _OracleBackend, "ed25519": _Ed25519Backend}


class KeyRing:
    """Key directory produced by `keygen`: every node can verify every
    other node's signatures; signing requires the node's KeyPair handle."""

    def __init__(self, node_ids, backend="oracle", seed=0):
        node_ids = list(node_ids)
        if len(set(node_ids)) != len(node_ids):
            raise CryptoError("duplicate node ids")
        if backend not in _BACKENDS:
            raise CryptoError(f"unknown crypto backend {backend!r}")
        self.node_ids = node_ids
        self._backend = _BACKENDS[backend](node_ids, seed)

    @property
    def backend_name(self):
        return self._backend.name

    def keypair(self, node_id) -> KeyPair:
        if node_id not in self.node_ids:
            raise CryptoError(f"unknown node id {node_id!r}")
        return self._backend.keypair(node_id)

    def sign(self, key: KeyPair, value) -> Signed:
        return Signed(value, key.node_id, self._backend.sign(key, pack(value)))

    def verify(self, signed: Signed) -> bool:
        if not isinstance(signed, Signed):
            return False
        return self._backend.verify(signed.signer, pack(signed.value),
                                    signed.signature)

    def verify_as(self, signed: Signed, expected_signer) -> bool:
        return (isinstance(signed, Signed)
                and signed.signer == expected_signer
                and self.verify(signed))


def keygen(node_ids, backend="oracle", seed=0) -> KeyRing:
    """Run key generation for all nodes, returning the shared directory."""
    return KeyRing(node_ids, backend=backend, seed=seed)
