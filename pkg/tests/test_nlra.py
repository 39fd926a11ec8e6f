import math
import warnings

import numpy as np
import pytest

from gradcases import nlra_loss_errors
from relata.corpus import TripleStore
from relata.embeddings import EmbeddingTable, Vocabulary
from relata.errors import ArgumentError, OOVError, TrainingDataError
from relata.nlra import (
    UNK,
    NegativeSampler,
    NlraModel,
    TrainingConfig,
    nlra_loss,
    train,
)

WORDS = ["dog", "animal", "car", "wheel", "cat", "pet", "is", "a", "has", "such", "as", "of"]


def table(dim=6, seed=0, words=WORDS):
    rng = np.random.default_rng(seed)
    return EmbeddingTable(Vocabulary(words), rng.normal(size=(len(words), dim)).astype(np.float32))


def toy_store():
    return TripleStore({
        ("dog", "animal", ("is", "a")): 5,
        ("animal", "dog", ("such", "as")): 2,
        ("car", "wheel", ("has", "a")): 4,
        ("wheel", "car", ("of", "a")): 3,
        ("cat", "pet", ("is", "a")): 2,
    })


def model(hidden=5, dim=6, seed=0, **kw):
    m = NlraModel.init(table(dim, seed), TrainingConfig(hidden=hidden, **kw), rng=np.random.default_rng(seed))
    m.set_training(False)
    return m


def test_pair_encoder_width_and_range():
    m = model(hidden=7)
    h = m.encode_pair("dog", "animal")
    assert h.shape == (7,)
    assert np.all(np.abs(h) < 1)
    assert not np.allclose(h, m.encode_pair("animal", "dog"))


def test_default_widths():
    m = NlraModel.init(table(dim=300), TrainingConfig(), rng=np.random.default_rng(0))
    m.set_training(False)
    assert m.pair_encoder.layers[0][0].weight.shape == (900, 300)
    assert m.pair_encoder.layers[1][0].weight.shape == (300, 300)
    assert m.encode_pair("dog", "animal").shape == (300,)
    assert m.encode_pattern(("is", "a")).shape == (300,)
    assert m.pair_representation("dog", "car").shape == (600,)


def test_pattern_encoder_properties():
    m = model()
    one = m.encode_pattern(("is",))
    assert one.shape == (5,) and np.all(np.abs(one) < 1)
    assert not np.allclose(m.encode_pattern(("such", "as")), m.encode_pattern(("as", "such")))
    with pytest.raises(ArgumentError):
        m.encode_pattern(())


def test_oov_pattern_tokens_use_unk():
    m = model()
    assert m.pattern_ids(("zzz", "is")) == (m.unk, m.table.vocab.index("is"))
    assert np.all(np.isfinite(m.encode_pattern(("zzz",))))


def test_oov_pair_word_is_an_error():
    m = model()
    with pytest.raises(OOVError, match="zebra"):
        m.encode_pair("zebra", "dog")
    with pytest.raises(OOVError):
        m.pair_representation("dog", UNK)


def test_pair_representation_half_swap_symmetry():
    m = model(hidden=4)
    fwd = m.pair_representation("dog", "animal")
    rev = m.pair_representation("animal", "dog")
    assert fwd.shape == (8,)
    assert np.array_equal(rev, np.concatenate([fwd[4:], fwd[:4]]))
    assert np.allclose(fwd[:4], m.encode_pair("dog", "animal"), atol=1e-6)


def test_pair_representation_batch_equals_single():
    m = model()
    pairs = [("dog", "animal"), ("car", "pet"), ("of", "is"), ("animal", "dog")]
    batch = m.pair_representations(pairs)
    for p, row in zip(pairs, batch):
        assert np.array_equal(row, m.pair_representation(*p))


def test_zero_dot_products_give_known_loss():
    m = model(negatives=10)
    m.set_training(True)
    # zero pattern embeddings force every dot product to 0
    for p in m.pattern_encoder.parameters().values():
        p.data[...] = 0
    store = toy_store()
    patterns = sorted({p for (_, _, p) in store.counts})
    sampler = NegativeSampler(np.ones(len(patterns)), 0)
    positives = [("dog", "animal", ("is", "a")), ("car", "wheel", ("has", "a"))]
    total = nlra_loss(m, positives, sampler, patterns).item()
    assert total / 2 == pytest.approx(11 * math.log(0.5), rel=1e-6)
    assert 11 * math.log(0.5) == pytest.approx(-7.625, abs=1e-3)


def test_loss_is_nonpositive():
    m = model(negatives=3)
    m.set_training(True)
    patterns = sorted({p for (_, _, p) in toy_store().counts})
    sampler = NegativeSampler(np.arange(1, len(patterns) + 1), 1)
    for _ in range(5):
        positives = [("dog", "animal", patterns[0]), ("cat", "pet", patterns[1]), ("car", "wheel", patterns[2])]
        assert nlra_loss(m, positives, sampler, patterns).item() <= 0
    with pytest.raises(ArgumentError):
        nlra_loss(m, [], sampler, patterns)


@pytest.mark.parametrize("seed", range(3))
def test_full_loss_gradient(seed):
    errors = nlra_loss_errors(seed)
    assert {"embeddings", "pair.0.weight", "pair.2.bn.gamma", "pattern.w_hidden"} <= set(errors)
    assert max(errors.values()) < 1e-3, errors


def test_negative_sampler_distribution_and_rejection():
    s = NegativeSampler([1, 3, 0, 6], np.random.default_rng(0))
    draws = s.draw(200_000)
    freq = np.bincount(draws, minlength=4) / draws.size
    assert np.allclose(freq, [0.1, 0.3, 0.0, 0.6], atol=0.005)
    neg = s.sample(np.array([3, 1, 0]), 50)
    assert neg.shape == (3, 50)
    assert not np.any(neg == np.array([3, 1, 0])[:, None])
    smooth = NegativeSampler([1, 16], 0, power=0.5)
    assert smooth.cdf[0] == pytest.approx(0.2)


def test_negative_sampler_is_reproducible():
    a = NegativeSampler([1, 2, 3], 5).sample(np.array([0, 1]), 10)
    b = NegativeSampler([1, 2, 3], 5).sample(np.array([0, 1]), 10)
    assert np.array_equal(a, b)


def test_single_pattern_negatives_are_kept_and_counted():
    s = NegativeSampler([2], 0)
    assert np.array_equal(s.sample(np.array([0, 0]), 2), np.zeros((2, 2)))
    assert s.collisions_kept == 4


def test_toy_training_drives_positive_score_up():
    # one pair, one pattern: negatives would all equal the positive, so none are drawn
    t = table(dim=8, words=["dog", "animal", "is", "a"])
    store = TripleStore({("dog", "animal", ("is", "a")): 2})
    m = train(store, t, TrainingConfig(epochs=200, negatives=0, hidden=16))
    # every minibatch holds the same pair, so the objective is read in training mode
    m.set_training(True)
    sampler = NegativeSampler([1.0], 0)
    total = nlra_loss(m, [("dog", "animal", ("is", "a"))] * 2, sampler, [("is", "a")]).item()
    assert math.exp(total / 2) > 0.9
    assert m.meta["loss_history"][-1] < m.meta["loss_history"][0]


def test_training_is_bit_reproducible():
    cfg = TrainingConfig(epochs=3, hidden=5, negatives=3, batch_size=4, seed=11)
    a = train(toy_store(), table(), cfg)
    b = train(toy_store(), table(), cfg)
    assert a.meta["loss_history"] == b.meta["loss_history"]
    assert a.to_bytes() == b.to_bytes()
    c = train(toy_store(), table(), TrainingConfig(epochs=3, hidden=5, negatives=3, batch_size=4, seed=12))
    assert c.to_bytes() != a.to_bytes()


def test_training_loss_decreases_over_first_epochs():
    cfg = TrainingConfig(epochs=5, hidden=8, negatives=10, batch_size=16, seed=0)
    hist = train(toy_store(), table(), cfg).meta["loss_history"]
    assert all(a >= b for a, b in zip(hist, hist[1:])), hist


def test_training_updates_embeddings_unless_frozen():
    t = table()
    cfg = dict(epochs=1, hidden=4, negatives=2, batch_size=4)
    trained = train(toy_store(), t, TrainingConfig(**cfg))
    assert not np.array_equal(trained.table.row("dog"), t.row("dog"))
    assert np.array_equal(trained.table.row("pet"), trained.table.row("pet"))
    frozen = train(toy_store(), t, TrainingConfig(update_embeddings=False, **cfg))
    assert np.array_equal(frozen.table.row("dog"), t.row("dog"))
    # the caller's table is never modified
    assert np.array_equal(t.matrix, table().matrix)


def test_model_is_in_inference_mode_after_training():
    m = train(toy_store(), table(), TrainingConfig(epochs=1, hidden=4, negatives=1))
    assert not m.training
    assert np.all(np.isfinite(m.encode_pair("dog", "animal")))


def test_unobserved_pair_gets_finite_nonzero_vector():
    m = train(toy_store(), table(), TrainingConfig(epochs=2, hidden=4, negatives=2))
    v = m.pair_representation("cat", "wheel")
    assert np.all(np.isfinite(v)) and np.linalg.norm(v) > 0


def test_oov_triples_filtered_and_empty_data_rejected():
    store = TripleStore({("dog", "zebra", ("is", "a")): 3, ("dog", "animal", ("is", "a")): 2})
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        train(store, table(), TrainingConfig(epochs=1, hidden=3, negatives=0))
    with pytest.raises(TrainingDataError):
        train(TripleStore({("dog", "zebra", ("is",)): 3}), table(), TrainingConfig(epochs=1, hidden=3))
    with pytest.raises(TrainingDataError):
        train(TripleStore({("dog", "animal", ("is",)): 1}), table(), TrainingConfig(epochs=1, hidden=3))


def test_config_validation():
    with pytest.raises(ArgumentError):
        TrainingConfig(epochs=0)
    with pytest.raises(ArgumentError):
        TrainingConfig(lr=-1)
    with pytest.raises(ArgumentError):
        TrainingConfig(negatives=-1)
    assert TrainingConfig.from_dict(TrainingConfig(hidden=4).to_dict()) == TrainingConfig(hidden=4)


def test_save_load_round_trip(tmp_path):
    m = train(toy_store(), table(), TrainingConfig(epochs=2, hidden=4, negatives=2))
    m.meta["note"] = "x"
    m.save(tmp_path / "m.nlra")
    back = NlraModel.load(tmp_path / "m.nlra")
    assert back.config == m.config
    assert back.meta["note"] == "x" and back.meta["loss_history"] == m.meta["loss_history"]
    assert back.to_bytes() == m.to_bytes()
    assert np.array_equal(back.pair_representation("dog", "car"), m.pair_representation("dog", "car"))
