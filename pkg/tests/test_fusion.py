import io
import logging

import numpy as np
import pytest

from ratingnet.errors import SchemaError
from ratingnet.evaluation import rmse
from ratingnet.fusion import (IMAGE_DIM, TEXT_DIM, EmbeddingTable, fit_fused_mlp, fuse,
                              load_embeddings, write_embeddings)
from ratingnet.models import TrainConfig, fit_mlp
from ratingnet.models.mlp import init_params, loss_and_grads
from ratingnet.synth import generate_nonlinear


def _write(path, ids, image, text):
    with open(path, "w", newline="") as fh:
        write_embeddings(fh, ids, image, text)


def test_load_two_records(tmp_path, rng):
    image, text = rng.normal(size=(2, IMAGE_DIM)), rng.normal(size=(2, TEXT_DIM))
    p = tmp_path / "emb.csv"
    _write(p, ["bA", "bB"], image, text)
    t = load_embeddings(p)
    assert len(t) == 2 and t.width == 1256
    assert np.array_equal(t.image[t.ids["bB"]], image[1])
    assert np.array_equal(t.text[t.ids["bA"]], text[0])


def test_short_record_names_business(tmp_path):
    p = tmp_path / "emb.csv"
    p.write_text("business_id,image[1000],text[256]\n" + "bad," + ",".join(["0"] * 1255) + "\n")
    with pytest.raises(SchemaError, match="'bad'"):
        load_embeddings(p)


def test_declared_dimensions_checked(tmp_path):
    p = tmp_path / "emb.csv"
    _write(p, ["b"], np.zeros((1, 3)), np.zeros((1, 2)))
    with pytest.raises(SchemaError):
        load_embeddings(p)
    assert len(load_embeddings(p, image_dim=3, text_dim=2)) == 1


def test_empty_file(tmp_path):
    p = tmp_path / "emb.csv"
    p.write_text("")
    assert len(load_embeddings(p)) == 0


def test_duplicate_keeps_last(tmp_path, caplog):
    p = tmp_path / "emb.csv"
    _write(p, ["b", "b"], [[1.0], [2.0]], [[0.0], [0.0]])
    with caplog.at_level(logging.WARNING):
        t = load_embeddings(p, image_dim=1, text_dim=1)
    assert len(t) == 1 and t.image[0, 0] == 2.0
    assert "duplicate" in caplog.text


def _table(rng, names):
    return EmbeddingTable({n: i for i, n in enumerate(names)},
                          rng.normal(size=(len(names), IMAGE_DIM)), rng.normal(size=(len(names), TEXT_DIM)))


def test_fuse_segments_and_missing(rng):
    feats = generate_nonlinear(3, seed=0)
    table = _table(rng, ["b0", "b2"])
    fused = fuse(feats, table, ["b0", "b1", "b2"])
    assert fused.X.shape == (3, 1265)
    assert np.array_equal(fused.X[0, :1000], table.image[0])
    assert np.array_equal(fused.X[2, 1000:1256], table.text[1])
    assert np.array_equal(fused.X[:, 1256:], feats.X)
    assert not fused.X[1, :1256].any()
    assert fused.missing_embeddings == 1
    assert np.array_equal(fused.y, feats.y)


def test_fused_first_layer_size():
    data = generate_nonlinear(50, seed=1)
    empty = EmbeddingTable({}, np.zeros((0, IMAGE_DIM)), np.zeros((0, TEXT_DIM)))
    fused = fuse(data, empty, [f"b{i}" for i in range(50)])
    m = fit_fused_mlp(fused, TrainConfig(epochs=1))
    assert m.weights[0].shape == (1265, 200)
    assert m.biases[0].shape == (200,)
    assert m.widths == [1265, 200, 40, 8, 5]


def test_fused_gradient_check():
    rng = np.random.default_rng(3)
    weights, biases = init_params([1265, 200, 40, 8, 5], rng)
    X = rng.normal(size=(4, 1265))
    labels = np.array([4, 0, 1, 3])
    _, gW, gb = loss_and_grads(weights, biases, X, labels, 1e-4)
    # central differences on a random subset of coordinates in every layer
    h = 1e-6
    analytic, numeric = [], []
    for p, g in zip(weights + biases, gW + gb):
        for i in rng.choice(p.size, min(p.size, 60), replace=False):
            old = p.flat[i]
            p.flat[i] = old + h
            up = loss_and_grads(weights, biases, X, labels, 1e-4)[0]
            p.flat[i] = old - h
            down = loss_and_grads(weights, biases, X, labels, 1e-4)[0]
            p.flat[i] = old
            analytic.append(g.flat[i])
            numeric.append((up - down) / (2 * h))
    a, n = np.array(analytic), np.array(numeric)
    assert np.linalg.norm(a - n) / max(np.linalg.norm(a), np.linalg.norm(n)) < 1e-4


def test_zero_embedding_ablation():
    # full training protocol (validation early stopping), scored on held-out rows
    train = generate_nonlinear(3000, seed=10)
    val = generate_nonlinear(2000, seed=11)
    test = generate_nonlinear(2000, seed=12)
    cfg = TrainConfig(epochs=30, seed=0)
    empty = EmbeddingTable({}, np.zeros((0, IMAGE_DIM)), np.zeros((0, TEXT_DIM)))

    def fused(m):
        return fuse(m, empty, ["b"] * len(m))

    plain = fit_mlp(train.X, train.y, cfg, val.X, val.y)
    wide = fit_fused_mlp(fused(train), cfg, fused(val))
    a = rmse(plain.predict(test.X), test.y)
    b = rmse(wide.predict(fused(test).X), test.y)
    assert abs(a - b) < 0.02


def test_write_embeddings_header():
    buf = io.StringIO()
    write_embeddings(buf, ["x"], [[1.5, 2.0]], [[3.0]])
    assert buf.getvalue() == "business_id,image[2],text[1]\nx,1.5,2.0,3.0\n"
