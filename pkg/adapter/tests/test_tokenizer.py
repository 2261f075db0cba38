import pytest

from iuseg_adapter.errors import DataError
from iuseg_adapter.tokenizer import BOUNDARY_MARKER, MARKER, UNK, Tokenizer


class TestMarker:
    def test_single_stable_id(self):
        # the marker id must not depend on what else is in the vocabulary
        a = Tokenizer.build(["a b c"])
        b = Tokenizer.build(["completely different words here !!!!!"])
        assert a.marker_id == b.marker_id == MARKER
        assert a.vocab[MARKER] == BOUNDARY_MARKER

    def test_marker_encodes_to_exactly_one_id(self):
        t = Tokenizer.build(["a b"])
        ids = t.encode(f"a {BOUNDARY_MARKER} b")
        assert ids.count(t.marker_id) == 1

    def test_marker_never_duplicated_in_vocab(self):
        t = Tokenizer.build([f"x {BOUNDARY_MARKER} y", BOUNDARY_MARKER])
        assert t.vocab.count(BOUNDARY_MARKER) == 1


class TestRoundTrip:
    @pytest.mark.parametrize(
        "text",
        ["", "hello", "a !!!!! b c !!!!!", "so anyway !!!!! we left !!!!!"],
    )
    def test_encode_decode_identity(self, text):
        t = Tokenizer.build(["hello", "a b c", "so anyway we left"])
        assert t.decode(t.encode(text)) == text

    def test_unknown_word_maps_to_unk(self):
        t = Tokenizer.build(["a b"])
        assert UNK in t.encode("a zzz b")

    def test_build_order_independent(self):
        texts = ["b a", "c a !!!!!"]
        assert Tokenizer.build(texts) == Tokenizer.build(reversed(texts))

    def test_save_load(self, tmp_path):
        t = Tokenizer.build(["some words !!!!! here"])
        t.save(tmp_path / "vocab.json")
        assert Tokenizer.load(tmp_path / "vocab.json") == t


class TestValidation:
    def test_rejects_vocab_without_reserved_prefix(self):
        with pytest.raises(DataError):
            Tokenizer(("a", "b"))

    def test_rejects_duplicates(self):
        with pytest.raises(DataError):
            Tokenizer(("<pad>", "<s>", "</s>", "<unk>", "!!!!!", "a", "a"))

    def test_decode_rejects_out_of_range(self):
        t = Tokenizer.build(["a"])
        with pytest.raises(DataError):
            t.decode([len(t) + 5])
