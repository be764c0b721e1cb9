"""Identity material: fedIDs, keypairs, access tokens."""

import random

import pytest

from comverse.errors import InvalidArgument, InvalidKey
from comverse.identity import (
    FedId,
    KeyPair,
    TokenStatus,
    generate_token,
    member_fed_id,
    sign,
    validate_token,
    verify,
)


class TestFedId:
    def test_accepts_url_safe_charset(self):
        assert FedId("com-42.alice_x~y").value == "com-42.alice_x~y"

    @pytest.mark.parametrize("bad", ["", "has space", "slash/inside", "a" * 129, "héllo"])
    def test_rejects_bad_values(self, bad):
        with pytest.raises(InvalidArgument):
            FedId(bad)

    def test_member_fed_id_is_per_community(self):
        mid = member_fed_id(FedId("alice"), FedId("com-42"))
        assert mid.value == "alice.com-42"


class TestKeyPair:
    def test_sign_verify_round_trip(self):
        kp = KeyPair.generate()
        msg = b"hello federation"
        assert verify(msg, sign(msg, kp), kp.public_key)

    def test_empty_message_round_trip(self):
        kp = KeyPair.generate()
        assert verify(b"", sign(b"", kp), kp.public_key)

    def test_flipped_payload_byte_fails(self):
        kp = KeyPair.generate()
        msg = bytearray(b"payload")
        sig = sign(bytes(msg), kp)
        msg[0] ^= 0x01
        assert not verify(bytes(msg), sig, kp.public_key)

    def test_unrelated_public_key_fails(self):
        kp, other = KeyPair.generate(), KeyPair.generate()
        sig = sign(b"msg", kp)
        assert not verify(b"msg", sig, other.public_key)

    def test_malformed_key_material(self):
        with pytest.raises(InvalidKey):
            sign(b"msg", KeyPair(public_key=b"short", private_key=b"short"))
        with pytest.raises(InvalidKey):
            verify(b"msg", b"sig", b"not a key")

    def test_seeded_generation_is_deterministic(self):
        a = KeyPair.generate(b"\x07" * 32)
        b = KeyPair.generate(b"\x07" * 32)
        assert a.public_key == b.public_key

    def test_agreement_secret_is_symmetric(self):
        from comverse.identity import agree

        a, b = KeyPair.generate(), KeyPair.generate()
        assert agree(a, b.agreement_public_bytes()) == agree(b, a.agreement_public_bytes())


class TestGenerateToken:
    def test_deterministic_for_identical_inputs(self):
        cid = FedId("com-42")
        nonce = bytes(range(16))
        t1 = generate_token(cid, nonce, 1000, 3600)
        t2 = generate_token(cid, nonce, 1000, 3600)
        assert t1.token == t2.token
        assert t1.expires_at == 4600

    def test_ten_thousand_fresh_nonces_no_collision(self):
        # Oracle: enumerate every generated value and assert set cardinality.
        rng = random.Random(20260811)
        cid = FedId("com-42")
        values = {generate_token(cid, rng.randbytes(16), 1000, 3600).token for _ in range(10_000)}
        assert len(values) == 10_000

    @pytest.mark.parametrize("ttl", [0, -1])
    def test_non_positive_ttl_rejected(self, ttl):
        with pytest.raises(InvalidArgument):
            generate_token(FedId("c"), bytes(16), 1000, ttl)

    def test_wrong_nonce_length_rejected(self):
        with pytest.raises(InvalidArgument):
            generate_token(FedId("c"), bytes(8), 1000, 60)


class TestValidateToken:
    def _token(self):
        return generate_token(FedId("com-42"), bytes(range(16)), 1000, 3600)

    def test_valid_before_expiry(self):
        tok = self._token()
        assert validate_token(tok.token, tok, now=4599) is TokenStatus.VALID

    def test_expiry_boundary_is_exclusive(self):
        tok = self._token()
        assert validate_token(tok.token, tok, now=4600) is TokenStatus.EXPIRED

    def test_expired_past_boundary(self):
        tok = self._token()
        assert validate_token(tok.token, tok, now=9999) is TokenStatus.EXPIRED

    def test_single_bit_flip_is_mismatch(self):
        tok = self._token()
        presented = bytearray(tok.token)
        presented[0] ^= 0x01
        assert validate_token(bytes(presented), tok, now=1001) is TokenStatus.MISMATCH

    def test_mismatch_beats_expiry(self):
        tok = self._token()
        assert validate_token(b"\x00" * 32, tok, now=9999) is TokenStatus.MISMATCH
