"""Smoke test for the tvgan Python extension.

Build and install first:  pip install maturin && maturin develop -m crates/python/Cargo.toml
"""

import math
import tempfile
from pathlib import Path

import numpy as np

import tvgan


def main():
    img = np.array([[0.0, 1.0], [0.0, 1.0]])
    assert tvgan.tv_value(img) == 2.0
    assert tvgan.tv_value(np.full((5, 7), 0.3)) == 0.0
    g = tvgan.tv_subgradient(img)
    assert g.shape == (2, 2) and g[0, 0] == -1.0

    half = [0.5] * 8
    assert abs(tvgan.d_loss(half, half) - 2 * math.log(2)) < 1e-12
    zeros = np.zeros((8, 1, 4, 4))
    assert tvgan.g_loss(half, zeros, 0.0)["g_total"] == tvgan.non_saturating_loss(half)

    z = tvgan.sample_latent(4, 100, 0)
    assert z.shape == (4, 100) and z.dtype == np.float32
    assert all(tvgan.denormalize(tvgan.normalize(v)) == v for v in range(256))

    rng = np.random.default_rng(0)
    a = tvgan.GaussianStats.from_features(rng.normal(size=(200, 3)))
    assert tvgan.frechet_distance(a, a) == 0.0
    b = tvgan.GaussianStats([1.0, 1.0], np.eye(2), 10)
    c = tvgan.GaussianStats([0.0, 0.0], np.eye(2), 10)
    assert abs(tvgan.frechet_distance(b, c) - 2.0) < 1e-12

    reals = tvgan.synth_palm_lines(64, size=32, class_seed=1)
    assert reals.shape == (64, 1, 32, 32)
    assert tvgan.fid(reals, reals) < 1e-8

    config = tvgan.TrainConfig(desk=True, epochs=1, synthetic_count=80, base_width=4, latent_dim=8)
    assert config.batch_size == 40
    try:
        tvgan.TrainConfig(bogus=1)
    except tvgan.TvganError:
        pass
    else:
        raise AssertionError("unknown key accepted")

    state, trace = tvgan.train(config)
    assert len(trace) == 2 and trace[0]["epoch"] == 1
    samples = state.sample(16, 0)
    assert samples.shape == (16, 1, 32, 32)
    assert float(np.abs(samples).max()) <= 1.0
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "state.tvgn"
        state.save(str(path))
        again = tvgan.Checkpoint.load(str(path))
        assert again.epoch == 1
        assert np.array_equal(again.sample(16, 0), samples)

    print("tvgan python smoke test: ok")


if __name__ == "__main__":
    main()
