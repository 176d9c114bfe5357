"""Degradation curves, grid maps, and morph paths."""

import numpy as np
import pytest

from melsynth.evaluate import (aggregate_mean, degradation_curves,
                               embedding_grid, grid_bounds, grid_point_stats,
                               morph_path, nan_mean, octave_means, probe_roll,
                               rowwise_pearson, stage_audio)
from melsynth.model import Mel2Mel, Mel2MelConfig


@pytest.fixture(scope="module")
def small_model():
    return Mel2Mel(Mel2MelConfig(width=32, lstm_hidden=16, embedding_dim=2),
                   seed=4)


def test_rowwise_pearson_values():
    a = np.array([[1.0, 2.0, 3.0, 4.0], [1.0, 1.0, 1.0, 1.0]])
    b = np.array([[1.0, 2.0, 3.0, 5.0], [0.0, 1.0, 2.0, 3.0]])
    r = rowwise_pearson(a, b)
    assert r[0] == pytest.approx(6.5 / np.sqrt(5.0 * 8.75), abs=1e-12)
    assert np.isnan(r[1])                    # zero variance row
    assert rowwise_pearson(b, b) == pytest.approx([1.0, 1.0])


def test_nan_mean():
    v = np.array([[1.0, np.nan, 3.0], [np.nan, np.nan, np.nan]])
    out = nan_mean(v, axis=1)
    assert out[0] == pytest.approx(2.0)
    assert np.isnan(out[1])
    assert nan_mean(np.array([np.nan, 4.0])) == pytest.approx(4.0)


def test_octave_means_grouping():
    bins = np.arange(84, dtype=np.float64)
    out = octave_means(bins)
    assert out.shape == (7,)
    assert out[0] == pytest.approx(np.mean(np.arange(12)))
    assert out[6] == pytest.approx(np.mean(np.arange(72, 84)))


def test_probe_roll_shape():
    roll = probe_roll()
    assert roll.shape == (176, 188)
    assert roll[:88].max() > 0               # onset half is populated
    assert roll[88:].max() > 0               # frame half is populated


def test_degradation_without_models(tiny_corpus):
    stages = ("original", "mulaw_roundtrip")
    curves = degradation_curves(tiny_corpus, stages=stages)
    # validation split has 3 entries (one track, three instruments), so each
    # stage yields three instrument curves plus one aggregate
    assert len(curves) == 2 * (3 + 1)
    for c in curves:
        assert c.bins.shape == (84,)
        assert c.octaves.shape == (7,)
    orig = aggregate_mean(curves, "original")
    mulaw = aggregate_mean(curves, "mulaw_roundtrip")
    assert orig == pytest.approx(1.0, abs=1e-9)
    assert mulaw <= orig + 1e-9
    assert mulaw > 0.8                       # 256 levels barely dent the CQT
    with pytest.raises(ValueError, match="aggregate"):
        aggregate_mean(curves, "wavenet_predicted_mel")


def test_stage_audio_requires_checkpoints(tiny_corpus):
    with pytest.raises(ValueError, match="wavenet"):
        stage_audio("wavenet_ground_truth_mel", tiny_corpus, 0)
    with pytest.raises(ValueError, match="checkpoints"):
        stage_audio("wavenet_predicted_mel", tiny_corpus, 0)
    with pytest.raises(ValueError, match="stage"):
        stage_audio("cassette_tape", tiny_corpus, 0)


def test_grid_bounds_padding():
    emb = np.array([[0.0, 1.0], [2.0, 4.0]])
    lo, hi = grid_bounds(emb)
    assert lo == pytest.approx([-0.05, 1.9])
    assert hi == pytest.approx([1.05, 4.1])
    point = np.array([[3.0], [0.0]])
    lo, hi = grid_bounds(point)
    assert lo[0] < 3.0 < hi[0]
    assert lo[1] < 0.0 < hi[1]               # degenerate span still opens up


def test_embedding_grid_small(small_model):
    roll = probe_roll()[:, :40]
    grid = embedding_grid(small_model, resolution=6, roll=roll)
    assert grid.centroid.shape == (6, 6)
    assert grid.energy.shape == (6, 6)
    assert np.isfinite(grid.centroid).all()
    assert np.isfinite(grid.energy).all()
    assert np.all(np.diff(grid.x_coords) > 0)
    assert np.all(np.diff(grid.y_coords) > 0)
    assert grid.embeddings.shape == (2, 10)
    assert grid.pixels.shape == (10, 2)
    # pixels sit inside the padded bounding box
    assert (grid.pixels > -0.5).all() and (grid.pixels < 5.5).all()

    again = embedding_grid(small_model, resolution=6, roll=roll)
    assert np.array_equal(grid.centroid, again.centroid)
    assert np.array_equal(grid.energy, again.energy)


def test_grid_point_matches_grid_cell(small_model):
    roll = probe_roll()[:, :40]
    grid = embedding_grid(small_model, resolution=4, roll=roll)
    i, j = 2, 1
    c, e = grid_point_stats(small_model,
                            np.array([grid.x_coords[j], grid.y_coords[i]]),
                            roll=roll)
    assert c == pytest.approx(grid.centroid[i, j], rel=1e-4)
    assert e == pytest.approx(grid.energy[i, j], rel=1e-4, abs=1e-4)


def test_grid_requires_2d_embedding():
    model = Mel2Mel(Mel2MelConfig(width=32, lstm_hidden=16, embedding_dim=3),
                    seed=0)
    with pytest.raises(ValueError, match="2-D"):
        embedding_grid(model, resolution=4)


def test_morph_path_endpoints(small_model):
    roll = probe_roll()[:, :40]
    table = small_model.embedding_vectors()
    a, b = table[:, 0], table[:, 3]
    path = morph_path(small_model, a, b, steps=4, roll=roll)
    assert len(path) == 4
    for mel in path:
        assert mel.shape == (80, 40)
    direct_a = small_model.forward_at(roll[:, None, :].astype(np.float32),
                                      a.reshape(2, 1).astype(np.float32))[:, 0, :]
    assert np.array_equal(path[0], direct_a)
    with pytest.raises(ValueError, match="steps"):
        morph_path(small_model, a, b, steps=1)
