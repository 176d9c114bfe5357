"""Mel predictor: variants, shapes, losses, direct-coordinate inference."""

import numpy as np
import pytest

from melsynth.dsp import tanh_log_compress
from melsynth.model import (VARIANTS, Mel2Mel, Mel2MelConfig, mel2mel_loss)
from melsynth.nn import DTYPE


def tiny(variant="proposed", **kw):
    return Mel2MelConfig(variant=variant, n_instruments=4, embedding_dim=2,
                         width=16, lstm_hidden=8, n_mels=6, input_rows=12, **kw)


def make_batch(rng, rows=12, b=3, t=7):
    roll = rng.uniform(0, 1, (rows, b, t)).astype(DTYPE)
    ids = rng.integers(0, 4, b)
    return roll, ids


def test_unknown_variant_rejected():
    with pytest.raises(ValueError):
        Mel2MelConfig(variant="nope")


def test_used_rows_per_variant():
    assert tiny().used_rows == slice(0, 12)
    assert tiny("onset_only").used_rows == slice(0, 6)
    assert tiny("frame_only").used_rows == slice(6, 12)


@pytest.mark.parametrize("variant", VARIANTS)
def test_forward_shape_all_variants(variant):
    rng = np.random.default_rng(1)
    model = Mel2Mel(tiny(variant), seed=0)
    roll, ids = make_batch(rng)
    out = model.forward(roll, ids)
    assert out.data.shape == (6, 3, 7)
    assert np.isfinite(out.data).all()


def test_variant_structure():
    assert Mel2Mel(tiny("film1_only"), seed=0).film2 is None
    assert Mel2Mel(tiny("film2_only"), seed=0).film1 is None
    assert len(Mel2Mel(tiny("lstm2"), seed=0).lstms) == 2
    assert Mel2Mel(tiny("conv3"), seed=0).w_in.data.shape == (16, 12, 3)
    proposed = Mel2Mel(tiny(), seed=0)
    assert proposed.film1 is not None and proposed.film2 is not None
    assert proposed.w_in.data.shape == (16, 12)


def test_fwd_lstm_only_matches_width():
    model = Mel2Mel(tiny("fwd_lstm_only"), seed=0)
    # single unidirectional LSTM, widened to the biLSTM's total width
    assert len(model.lstms) == 1
    assert model.lstms[0].wx.data.shape == (4 * 16, 16)


def test_seed_determinism():
    a = Mel2Mel(tiny(), seed=3)
    b = Mel2Mel(tiny(), seed=3)
    c = Mel2Mel(tiny(), seed=4)
    for (_, pa), (_, pb) in zip(a.named_params(), b.named_params()):
        assert np.array_equal(pa.data, pb.data)
    assert any(not np.array_equal(pa.data, pc.data)
               for (_, pa), (_, pc) in zip(a.named_params(), c.named_params()))


def test_forward_at_matches_table_lookup():
    rng = np.random.default_rng(2)
    model = Mel2Mel(tiny(), seed=0)
    roll, ids = make_batch(rng)
    via_ids = model.forward(roll, ids).data
    z = model.embedding_vectors()[:, ids]
    via_coords = model.forward_at(roll, z)
    assert np.array_equal(via_ids, via_coords)


def test_embedding_vectors_is_copy():
    model = Mel2Mel(tiny(), seed=0)
    v = model.embedding_vectors()
    v[:] = 99.0
    assert not (model.embedding.data == 99.0).any()


def test_predict_mel_is_positive_linear_domain():
    rng = np.random.default_rng(0)
    model = Mel2Mel(tiny(), seed=0)
    roll, ids = make_batch(rng)
    mel = model.predict_mel(roll, ids)
    assert (mel >= 1e-5).all()


def test_loss_zero_on_exact_target():
    rng = np.random.default_rng(4)
    target = rng.uniform(0.01, 5.0, (6, 2, 5))
    from melsynth import autograd as ag
    pred = ag.parameter(tanh_log_compress(target))
    assert mel2mel_loss(pred, target, "tanhlog").item() == pytest.approx(0.0, abs=1e-14)
    assert mel2mel_loss(pred, target, "log").item() == pytest.approx(0.0, abs=1e-9)
    assert mel2mel_loss(pred, target, "abs").item() == pytest.approx(0.0, abs=1e-9)


def test_loss_kinds_differ_and_validate():
    rng = np.random.default_rng(5)
    target = rng.uniform(0.01, 5.0, (6, 2, 5))
    from melsynth import autograd as ag
    pred = ag.parameter(np.zeros((6, 2, 5)))
    values = {k: mel2mel_loss(pred, target, k).item()
              for k in ("tanhlog", "log", "abs")}
    assert len({round(v, 9) for v in values.values()}) == 3
    with pytest.raises(ValueError):
        mel2mel_loss(pred, target, "huber")


def test_losses_backprop_finite():
    rng = np.random.default_rng(6)
    model = Mel2Mel(tiny(), seed=0)
    roll, ids = make_batch(rng)
    target = rng.uniform(0.01, 5.0, (6, 3, 7))
    for kind in ("tanhlog", "log", "abs"):
        model.zero_grad()
        loss = mel2mel_loss(model.forward(roll, ids), target, kind)
        loss.backward()
        for _, p in model.named_params():
            assert p.grad is None or np.isfinite(p.grad).all()
