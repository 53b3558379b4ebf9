import numpy as np
import pytest

from cet import ChecksumError, init_params, load_checkpoint, save_checkpoint
from cet.checkpoint import MAGIC
from synth import assembled, tiny_corpus


@pytest.fixture
def setup():
    vocab, dataset, graph, *_ = assembled(tiny_corpus())
    params = init_params(vocab, 6, seed=3)
    config = {"alpha": 0.5, "beta": 4.0, "loss_kind": "fna", "use_tan": True}
    return vocab, params, config


class TestRoundTrip:
    def test_params_vocab_config_survive(self, setup, tmp_path):
        vocab, params, config = setup
        path = tmp_path / "model.cet"
        save_checkpoint(path, params, vocab, config)
        loaded_params, loaded_vocab, loaded_config = load_checkpoint(path)
        np.testing.assert_array_equal(loaded_params.entity_emb, params.entity_emb)
        np.testing.assert_array_equal(loaded_params.W, params.W)
        np.testing.assert_array_equal(loaded_params.b, params.b)
        assert loaded_vocab.entity_ids == vocab.entity_ids
        assert loaded_vocab.relation_ids == vocab.relation_ids
        assert loaded_vocab.type_ids == vocab.type_ids
        assert loaded_config == config

    def test_save_load_save_is_byte_identical(self, setup, tmp_path):
        vocab, params, config = setup
        first = tmp_path / "a.cet"
        second = tmp_path / "b.cet"
        save_checkpoint(first, params, vocab, config)
        save_checkpoint(second, *load_checkpoint(first))
        assert first.read_bytes() == second.read_bytes()

    def test_separate_heads_round_trip(self, setup, tmp_path):
        vocab, _, config = setup
        params = init_params(vocab, 6, seed=3, separate_heads=True)
        path = tmp_path / "heads.cet"
        save_checkpoint(path, params, vocab, config)
        loaded, _, _ = load_checkpoint(path)
        assert loaded.separate_heads
        np.testing.assert_array_equal(loaded.agg_W, params.agg_W)

    def test_float64_params_stored_as_float32(self, setup, tmp_path):
        vocab, params, config = setup
        path = tmp_path / "f64.cet"
        save_checkpoint(path, params.astype(np.float64), vocab, config)
        loaded, _, _ = load_checkpoint(path)
        assert loaded.dtype == np.float32
        np.testing.assert_array_equal(loaded.W, params.W)


class TestCorruption:
    def test_flipped_payload_byte_detected(self, setup, tmp_path):
        vocab, params, config = setup
        path = tmp_path / "model.cet"
        save_checkpoint(path, params, vocab, config)
        raw = bytearray(path.read_bytes())
        for offset in (len(MAGIC) + 2, len(raw) // 2, len(raw) - 9):
            corrupted = bytearray(raw)
            corrupted[offset] ^= 0xFF
            path.write_bytes(bytes(corrupted))
            with pytest.raises(ChecksumError):
                load_checkpoint(path)

    def test_truncation_detected(self, setup, tmp_path):
        vocab, params, config = setup
        path = tmp_path / "model.cet"
        save_checkpoint(path, params, vocab, config)
        raw = path.read_bytes()
        path.write_bytes(raw[:-20])
        with pytest.raises(ChecksumError):
            load_checkpoint(path)

    def test_wrong_magic_detected(self, setup, tmp_path):
        vocab, params, config = setup
        path = tmp_path / "model.cet"
        save_checkpoint(path, params, vocab, config)
        raw = path.read_bytes()
        path.write_bytes(b"NOPE!" + raw[5:])
        with pytest.raises(ChecksumError):
            load_checkpoint(path)

    def test_not_a_checkpoint(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"tiny")
        with pytest.raises(ChecksumError):
            load_checkpoint(path)

    def test_valid_checksum_but_garbage_header(self, tmp_path):
        # A crafted file can checksum cleanly yet carry an unusable header;
        # that is still a checkpoint error, not a crash.
        import hashlib
        import struct

        header = b"not json"
        payload = struct.pack("<Q", len(header)) + header
        digest = hashlib.blake2b(payload, digest_size=8).digest()
        path = tmp_path / "crafted.cet"
        path.write_bytes(MAGIC + payload + digest)
        with pytest.raises(ChecksumError, match="header"):
            load_checkpoint(path)
