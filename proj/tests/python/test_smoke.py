import math

import numpy as np
import pytest

import pheno


def test_warp_gaps():
    assert pheno.warp_times([0.0, 8.0, 9.0, 9.125]) == [0.0, 2.0, 3.0, 3.5]
    assert pheno.warp_times([0.0, 4.0], pheno.WarpParams(a=2, b=0.5)) == [0.0, 2.5]


def test_standardize():
    z, mean, std = pheno.standardize([1.0, 2.0, 3.0])
    assert mean == 2.0
    assert z[0] == pytest.approx(-math.sqrt(1.5))


def test_gp_matches_numpy():
    rng = np.random.default_rng(3)
    x = np.sort(rng.uniform(0, 5, 8))
    y = rng.normal(size=8)
    h = pheno.RqHyperparams(amplitude2=1.5, alpha=2.0, tau=0.7, noise2=0.05)
    model = pheno.gp_fit(x.tolist(), y.tolist(), h)
    xs = [0.3, 2.2, 7.0]
    means, variances = pheno.gp_predict(model, xs)

    k = np.array(pheno.kernel_matrix(x.tolist(), x.tolist(), h)) + 0.05 * np.eye(8)
    ks = np.array(pheno.kernel_matrix(x.tolist(), xs, h))
    np.testing.assert_allclose(means, ks.T @ np.linalg.solve(k, y), rtol=1e-9)
    np.testing.assert_allclose(variances, 1.5 - np.einsum("ij,ij->j", ks, np.linalg.solve(k, ks)), atol=1e-9)

    _, logdet = np.linalg.slogdet(k)
    lml = -0.5 * y @ np.linalg.solve(k, y) - 0.5 * logdet - 4 * math.log(2 * math.pi)
    assert pheno.log_marginal_likelihood(model, y.tolist()) == pytest.approx(lml, rel=1e-9)


def test_auc_example():
    assert pheno.auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75
    assert pheno.auc([1.0, 1.0, 1.0, 1.0], [0, 1, 0, 1]) == 0.5


def test_autoencoder_shapes():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(40, 40))
    cfg = pheno.TrainConfig()
    cfg.epochs = 3
    cfg.seed = 5
    model, l1, l2, ft = pheno.train_stacked(x, cfg, 10)
    assert model.input_dim == 40
    assert model.encode(x, 1).shape == (40, 10)
    assert model.encode(x, 2).shape == (40, 10)
    assert len(l1) == 4 and len(ft) == 4


def test_tsne_blobs():
    rng = np.random.default_rng(1)
    x = np.vstack([rng.normal(0, 1, (30, 5)), rng.normal(8, 1, (30, 5))])
    labels = [0] * 30 + [1] * 30
    p = pheno.TsneParams()
    p.perplexity = 10
    p.iterations = 300
    p.learning_rate = 10
    coords, kl = pheno.tsne(x, p)
    assert coords.shape == (60, 2)
    assert kl >= 0
    assert pheno.nearest_neighbor_accuracy(coords, labels) >= 0.95


def test_errors():
    with pytest.raises(ValueError):
        pheno.warp_times([0.0, 1.0], pheno.WarpParams(a=0.0))
    with pytest.raises(pheno.PhenoError):
        pheno.warp_times([0.0, 0.0, 1.0])
    with pytest.raises(ValueError):
        pheno.run_pipeline({"no_such_key": 1})


def test_pipeline_small(tmp_path):
    out = tmp_path / "run"
    pheno.run_pipeline({
        "synthetic": True, "output_dir": str(out), "synth_n_per_class": 20, "n_patches": 200,
        "ae_epochs": 5, "hidden_units": 20, "tsne_iterations": 200, "tsne_exaggeration_iterations": 50,
        "logistic_iterations": 200, "seed": 11,
    })
    metrics = dict(line.split(" = ") for line in (out / "metrics.txt").read_text().splitlines())
    assert {"auc_layer1", "auc_layer2", "tsne_kl", "n_train", "n_test"} <= metrics.keys()
    assert (out / "plots" / "signatures_layer1.svg").exists()
