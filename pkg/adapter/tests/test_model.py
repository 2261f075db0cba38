import numpy as np
import torch

from conftest import pair_features
from iuseg_adapter.data import Example
from iuseg_adapter.model import ModelConfig, Seq2Seq, _conv_out_len, loss_for_batch
from iuseg_adapter.tokenizer import Tokenizer
from iuseg_adapter.train import pad_batch

TINY = ModelConfig(d_model=16, n_heads=2, encoder_layers=1, decoder_layers=1, ff_dim=32)


def _examples(tok):
    return [
        Example("c1", pair_features(0, frames=40), tuple(tok.encode("a b"))),
        Example("c2", pair_features(1, frames=64), tuple(tok.encode("c !!!!! d"))),
    ]


class TestShapes:
    def test_conv_length_formula_matches_frontend(self):
        torch.manual_seed(0)
        model = Seq2Seq(10, TINY)
        for frames in (1, 2, 3, 40, 96, 97):
            x = torch.zeros(1, 80, frames)
            assert model.frontend(x).shape[2] == _conv_out_len(frames)

    def test_padding(self):
        tok = Tokenizer.build(["a b", "c d"])
        feats, lengths, targets = pad_batch(_examples(tok))
        assert feats.shape == (2, 80, 64)
        assert lengths.tolist() == [40, 64]
        assert targets.shape[1] == 5  # BOS c marker d EOS
        assert float(feats[0, :, 40:].abs().sum()) == 0.0
        assert targets[0, -1].item() == 0  # PAD fill

    def test_loss_is_finite(self):
        torch.manual_seed(0)
        tok = Tokenizer.build(["a b", "c !!!!! d"])
        model = Seq2Seq(len(tok), TINY)
        loss = loss_for_batch(model, *pad_batch(_examples(tok)))
        assert float(loss.item()) > 0.0
        assert np.isfinite(float(loss.item()))


class TestDecode:
    def test_greedy_is_deterministic(self):
        torch.manual_seed(1)
        tok = Tokenizer.build(["a b", "c d"])
        model = Seq2Seq(len(tok), TINY)
        feats, lengths, _ = pad_batch(_examples(tok))
        assert model.greedy_decode(feats, lengths) == model.greedy_decode(feats, lengths)

    def test_decode_respects_vocab_and_cap(self):
        torch.manual_seed(2)
        tok = Tokenizer.build(["a b c d e"])
        model = Seq2Seq(len(tok), ModelConfig(
            d_model=16, n_heads=2, encoder_layers=1, decoder_layers=1,
            ff_dim=32, max_decode_len=6,
        ))
        feats, lengths, _ = pad_batch(_examples(tok))
        for ids in model.greedy_decode(feats, lengths):
            assert len(ids) <= 6
            assert all(0 <= i < len(tok) for i in ids)
