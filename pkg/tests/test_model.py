import numpy as np
import pytest

from headline_sentiment.errors import ValidationError
from headline_sentiment.lexicon_store import LexiconStore, load_affective, load_embeddings
from headline_sentiment.model import (ModelConfig, SentenceEncoder, Vocabulary, concat_width, forward,
                                      init, predict, represent)
from headline_sentiment.tensor_core import Tape, backward, total
from headline_sentiment.text_pipeline import RawInstance, TokenSequence, preprocess
from conftest import SAMPLE
from oracles import central_differences, relative_error

SMALL = ModelConfig(filters_per_width=3, dropout_rate=0.0)


def sample_setup(store, scorer, config=SMALL):
    encoder = SentenceEncoder(config, store, scorer)
    inst = RawInstance(*SAMPLE)
    vocab = encoder.vocabulary([inst])
    return encoder, inst, vocab


class TestConfig:
    def test_defaults(self):
        cfg = ModelConfig()
        assert cfg.filter_widths == (2, 3, 4) and cfg.max_width == 4
        assert cfg.dropout_rate == 0.5

    @pytest.mark.parametrize("bad", [dict(filter_widths=()), dict(dropout_rate=1.0),
                                     dict(filter_widths=(2, 60)), dict(filter_widths=(0,)), dict(dropout_position="x"),
                                     dict(vader_position="x"), dict(filters_per_width=0)])
    def test_invalid(self, bad):
        with pytest.raises(ValidationError):
            ModelConfig(**bad)

    def test_round_trip(self):
        cfg = ModelConfig(filter_widths=(3, 5), hidden_units=8, use_affective=False)
        assert ModelConfig.from_dict(cfg.to_dict()) == cfg


class TestVocabulary:
    def test_reserved_first(self):
        vocab = Vocabulary.from_sequences([["b", "a"], ["a"]])
        assert vocab.tokens[:4] == ["<pad>", "<oov>", "<company>", "<number>"]
        assert vocab.tokens[4:] == ["a", "b"]
        assert vocab.pad_id == 0

    def test_unknown_is_oov(self):
        vocab = Vocabulary(["a"])
        assert vocab.ids(["a", "zzz"]).tolist() == [vocab.ids(["a"])[0], 1]


class TestRepresent:
    def test_single_token_padded_to_widest_filter(self):
        vocab = Vocabulary(["x"])
        rep = represent(TokenSequence(("x",)), vocab, ModelConfig(use_vader=False))
        assert rep.token_ids.shape == (4,)
        assert rep.token_ids[1:].tolist() == [vocab.pad_id] * 3

    def test_sample_rows(self, tiny_store, tiny_scorer):
        encoder, inst, vocab = sample_setup(tiny_store, tiny_scorer)
        rep = encoder.represent(inst, vocab)
        assert rep.tokens[0] == "<company>"
        matrix = rep.token_matrix(encoder.init(0, vocab))
        assert matrix.shape == (len(rep.tokens) + 3, tiny_store.dim)
        np.testing.assert_array_equal(matrix[-3:], 0.0)

    def test_truncation(self):
        cfg = ModelConfig(max_sequence_length=10, use_vader=False)
        rep = represent(TokenSequence(tuple("abcdefghijklmno")), Vocabulary([]), cfg)
        assert rep.token_ids.shape == (10,) and rep.length == 7

    def test_vader_feature(self, tiny_store, tiny_scorer):
        encoder, inst, vocab = sample_setup(tiny_store, tiny_scorer)
        rep = encoder.represent(inst, vocab)
        assert rep.vader_score == pytest.approx(tiny_scorer.score(preprocess(inst)))
        assert rep.vader_score > 0


class TestInit:
    def test_embedding_rows(self, tiny_store, tiny_scorer):
        encoder, _, vocab = sample_setup(tiny_store, tiny_scorer)
        params = encoder.init(0, vocab)
        emb = params.embedding.value
        row = emb[vocab.ids(["growth"])[0]]
        np.testing.assert_array_equal(row, [0.3, -0.2, 0.1, 0.0, 0.7, 0.1])
        np.testing.assert_array_equal(emb[vocab.pad_id], 0.0)

    def test_deterministic(self, tiny_store, tiny_scorer):
        encoder, _, vocab = sample_setup(tiny_store, tiny_scorer)
        a, b = encoder.init(5, vocab), encoder.init(5, vocab)
        for name in a.names():
            np.testing.assert_array_equal(a[name].value, b[name].value)
        c = encoder.init(6, vocab)
        assert not np.array_equal(a["conv2.filters"].value, c["conv2.filters"].value)

    def test_concat_width(self):
        assert concat_width(ModelConfig(filters_per_width=5)) == 16
        assert concat_width(ModelConfig(filters_per_width=5, use_vader=False)) == 15
        assert concat_width(ModelConfig(filters_per_width=5, vader_position="sequence")) == 15

    def test_shapes(self, tiny_store):
        cfg = ModelConfig(filters_per_width=7, hidden_units=5, use_vader=False)
        params = init(cfg, tiny_store, 0, Vocabulary(["a"]))
        assert params["conv3.filters"].shape == (7, 3, 6)
        assert params["hidden.weights"].shape == (5, 21)
        assert params["output.weights"].shape == (1, 5)
        assert params["output.bias"].value.tolist() == [0.0]


class TestForward:
    def test_zero_parameters_give_zero(self, tiny_store, tiny_scorer):
        encoder, inst, vocab = sample_setup(tiny_store, tiny_scorer)
        params = encoder.init(0, vocab)
        zeros = params.with_values({k: np.zeros_like(v) for k, v in params.values().items()})
        assert predict(encoder.represent(inst, vocab), zeros, SMALL) == 0.0

    def test_deterministic_in_inference(self, tiny_store, tiny_scorer):
        cfg = SMALL.replace(dropout_rate=0.5)
        encoder, inst, vocab = sample_setup(tiny_store, tiny_scorer, cfg)
        params = encoder.init(1, vocab)
        rep = encoder.represent(inst, vocab)
        out = predict(rep, params, cfg)
        assert -1 < out < 1
        assert predict(rep, params, cfg) == out

    def test_dropout_changes_training_output(self, tiny_store, tiny_scorer):
        cfg = SMALL.replace(dropout_rate=0.5)
        encoder, inst, vocab = sample_setup(tiny_store, tiny_scorer, cfg)
        params = encoder.init(1, vocab)
        rep = encoder.represent(inst, vocab)
        outs = {forward(rep, params, cfg, True, np.random.default_rng(s)).item() for s in range(5)}
        assert len(outs) > 1

    def test_vader_ignored_when_disabled(self, tiny_store, tiny_scorer):
        cfg = SMALL.replace(use_vader=False)
        encoder, inst, vocab = sample_setup(tiny_store, None, cfg)
        params = encoder.init(0, vocab)
        rep = encoder.represent(inst, vocab)
        rep.vader[:] = 0.9
        assert predict(rep, params, cfg) == predict(encoder.represent(inst, vocab), params, cfg)

    def test_vader_matters_when_enabled(self, tiny_store, tiny_scorer):
        encoder, inst, vocab = sample_setup(tiny_store, tiny_scorer)
        params = encoder.init(0, vocab)
        rep = encoder.represent(inst, vocab)
        before = predict(rep, params, SMALL)
        rep.vader[:] = -0.9
        assert predict(rep, params, SMALL) != before

    def test_no_embeddings_ignores_lexicon_contents(self, tmp_path, tiny_lexica, tiny_scorer):
        cfg = SMALL.replace(use_embeddings=False)
        emb, aff, _ = tiny_lexica
        other = tmp_path / "other.txt"
        other.write_text("book 9 9 9 9\nsales 1 1 1 1\n")
        results = []
        for path in (emb, other):
            store = LexiconStore(load_embeddings(path), load_affective(aff))
            encoder = SentenceEncoder(cfg, store, tiny_scorer)
            inst = RawInstance(*SAMPLE)
            vocab = encoder.vocabulary([inst])
            results.append(predict(encoder.represent(inst, vocab), encoder.init(0, vocab), cfg))
        assert results[0] == results[1]

    def test_extra_padding_is_neutral(self, tiny_store, tiny_scorer):
        encoder, inst, vocab = sample_setup(tiny_store, tiny_scorer)
        params = encoder.init(2, vocab)
        rep = encoder.represent(inst, vocab)
        base = predict(rep, params, SMALL)
        for extra in (1, 5, 20):
            rep.token_ids = np.concatenate([rep.token_ids, np.full(extra, vocab.pad_id)])
            assert predict(rep, params, SMALL) == pytest.approx(base, abs=1e-12)

    def test_sequence_position(self, tiny_store, tiny_scorer):
        cfg = SMALL.replace(vader_position="sequence")
        encoder, inst, vocab = sample_setup(tiny_store, tiny_scorer, cfg)
        out = predict(encoder.represent(inst, vocab), encoder.init(0, vocab), cfg)
        assert -1 < out < 1

    def test_encoder_requires_scorer(self, tiny_store):
        with pytest.raises(ValidationError):
            SentenceEncoder(ModelConfig(), tiny_store, None)


@pytest.mark.parametrize("cfg", [SMALL, SMALL.replace(hidden_units=4),
                                 SMALL.replace(vader_position="sequence")],
                         ids=["plain", "hidden", "sequence"])
def test_end_to_end_gradients(cfg, tiny_store, tiny_scorer):
    encoder, inst, vocab = sample_setup(tiny_store, tiny_scorer, cfg)
    params = encoder.init(3, vocab)
    rep = encoder.represent(inst, vocab)
    names = params.names()
    initial = [params[n].value.copy() for n in names]

    def score(values, tape=None):
        p = params.with_values(dict(zip(names, values)))
        return total(forward(rep, p, cfg, tape=tape), tape), p

    tape = Tape()
    out, p = score([v.copy() for v in initial], tape)
    grads = backward(tape, out)
    numeric = central_differences(lambda vals: score(vals)[0].item(), initial)
    for n, num in zip(names, numeric):
        assert relative_error(grads[p[n]], num) < 1e-5, n
