# Copyright 2026 The growprune Authors
# SPDX-License-Identifier: Apache-2.0

import numpy as np
import pytest

import growprune as gp


def small_config(out, scheme):
    return {
        "seed": 3,
        "batch_size": 20,
        "model": {
            "num_continuous": 4,
            "num_categorical": 3,
            "embedding_dim": 2,
            "table_size": 25,
            "bottom_dims": [8, 2],
            "top_dims": [8, 1],
        },
        "optimizer": {"kind": "sgd", "learning_rate": 0.05},
        "data": {"train_samples": 1000, "test_samples": 200},
        "schedule": {"scheme": scheme, "beta": 0.5, "sparse_fraction": 0.4},
        "sparsity": {"score_window_batches": 5},
        "output_dir": str(out),
    }


def test_resolve_config_applies_overrides():
    c = gp.resolve_config({"preset": "alternate-20pct"}, ["schedule.beta=0.6"])
    assert c["schedule"]["scheme"] == "alternate"
    assert c["schedule"]["beta"] == 0.6
    assert "initcap-sweep" in gp.preset_names()


def test_bad_config_raises():
    with pytest.raises(gp.ConfigError):
        gp.resolve_config({"no_such_key": 1})


def test_run_compare_and_predict(tmp_path):
    base = gp.run(small_config(tmp_path / "base", "baseline"))[0]
    alt = gp.run(small_config(tmp_path / "alt", "alternate"))[0]
    summary = gp.load_summary(alt)
    assert summary["final_dense"]
    assert summary["events"]["prune"] == 2

    cmp = gp.compare(base, [alt])
    assert cmp["equal_flops"]
    assert len(cmp["rows"]) == 2

    ck = gp.inspect_checkpoint(tmp_path / "alt" / "final.ckpt")
    assert ck["dense"]

    rng = np.random.default_rng(0)
    cont = rng.random((5, 4), dtype=np.float32)
    cat = rng.integers(0, 25, size=(5, 3), dtype=np.uint32)
    p = gp.predict(tmp_path / "alt" / "final.ckpt", cont, cat)
    assert p.shape == (5,)
    assert np.all((p > 0) & (p < 1))
    with pytest.raises(gp.ShapeError):
        gp.predict(tmp_path / "alt" / "final.ckpt", cont[:, :3], cat)

    with pytest.raises(gp.DataError):
        gp.compare(base, [tmp_path / "missing"])


def test_helpers():
    assert gp.keep_count(0.5, 4) == 2
    assert gp.categorical_hash("a") == 0xAF63DC4C8601EC8C
    pct, sig = gp.relative_metric(0.7864, 0.7866)
    assert pct == pytest.approx(-0.0254, abs=1e-4)
    assert not sig
    assert gp.spearman([1, 2, 3], [2, 4, 9]) == pytest.approx(1.0)
