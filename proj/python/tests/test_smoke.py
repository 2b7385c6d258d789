import math

import numpy as np
import pytest

import fedunlearn as fu


def test_param_counts():
    assert fu.Arch.paper_cnn().param_count() == 1_663_370
    assert fu.Arch.mlp(28, 28, 1, [64]).param_count() == 50_890
    arch = fu.Arch.parse("input:1x1x4,dense:10:none")
    assert fu.param_count(arch) == 50
    assert fu.Arch.parse(str(arch)) == arch


def test_uniform_forward_and_loss():
    arch = fu.Arch.mlp(2, 2, 1, [3])
    model = fu.Model.zeros(arch)
    x = np.random.default_rng(0).random((5, 2, 2, 1), dtype=np.float32)
    probs = fu.forward(model, x)
    assert probs.shape == (5, 10)
    np.testing.assert_allclose(probs, 0.1, rtol=1e-6)
    loss, grad = fu.loss_and_grad(arch, np.zeros(len(model)), x, np.arange(5, dtype=np.int32))
    assert loss == pytest.approx(math.log(10))
    assert grad.shape == (len(model),)


def test_gradient_matches_finite_differences():
    arch = fu.Arch.parse("input:4x4x1,conv:2:3x3:relu:same,pool:2,dense:3:none")
    rng = np.random.default_rng(1)
    w = rng.uniform(-0.5, 0.5, fu.param_count(arch))
    x = rng.random((4, 4, 4, 1), dtype=np.float32)
    y = np.array([0, 1, 2, 1], dtype=np.int32)
    _, grad = fu.loss_and_grad(arch, w, x, y)
    eps = 1e-5
    for i in range(0, len(w), 3):
        up, down = w.copy(), w.copy()
        up[i] += eps
        down[i] -= eps
        numeric = (fu.loss_and_grad(arch, up, x, y)[0] - fu.loss_and_grad(arch, down, x, y)[0]) / (2 * eps)
        assert numeric == pytest.approx(grad[i], rel=1e-4, abs=1e-8)


def test_clip_and_project():
    np.testing.assert_allclose(fu.clip_grad(np.array([3.0, 4.0]), 1.0), [0.6, 0.8])
    p = fu.project_l2(np.array([0.0, 3.0]), np.zeros(2), 1.0)
    np.testing.assert_allclose(p, [0.0, 1.0])


def test_fedavg_and_reference():
    arch = fu.Arch.parse("input:1x1x1,dense:1:none")
    a = fu.Model(arch, np.array([1.0, 3.0], dtype=np.float32))
    b = fu.Model(arch, np.array([3.0, 5.0], dtype=np.float32))
    np.testing.assert_allclose(fu.fedavg([a, b], [2, 1], "proportional").weights, [5 / 3, 11 / 3], rtol=1e-6)
    np.testing.assert_allclose(fu.fedavg([a, b], [2, 1]).weights, [2.0, 4.0])
    ref = fu.compute_reference(fu.fedavg([a, b], [1, 1]), b, 2)
    np.testing.assert_allclose(ref.weights, a.weights)
    assert fu.compute_delta(ref, 3, 7) > 0


def test_checkpoint_round_trip(tmp_path):
    model = fu.Model.init(fu.Arch.mlp(4, 4, 1, [8]), 3)
    model.save(tmp_path / "m.ckpt")
    assert fu.Model.load(tmp_path / "m.ckpt") == model
    (tmp_path / "bad.ckpt").write_bytes(b"garbage")
    with pytest.raises(fu.CheckpointError):
        fu.Model.load(tmp_path / "bad.ckpt")


def test_synthetic_data():
    x, y = fu.make_synthetic(100, 5)
    assert x.shape == (100, 8, 8, 1)
    assert sorted(set(y.tolist())) == list(range(10))


def test_run_experiment(tmp_path):
    config = """
data: {synthetic_train: 400, synthetic_test: 200}
model: {arch: "mlp:16"}
federation: {clients: 3, rounds: 2, batch_size: 32, learning_rate: 0.05}
unlearn: {batch_size: 64, epochs: 1}
posttrain: {rounds: 1, updates: 3, batch_size: 32}
"""
    result = fu.run_experiment(config, "compare", [], tmp_path)
    assert result["exit_code"] == 0
    assert set(result["accuracy"]) == {"FedAvg", "Retrain", "Reference", "UN-Local", "UN-Global"}
    assert result["unlearn"]["distance"] <= result["unlearn"]["delta"]
    assert (tmp_path / "metrics.csv").exists()
    phases = [m["phase"] for m in result["metrics"]]
    assert phases.count("train") == 2 and phases.count("posttrain") == 2 and phases.count("retrain") == 2


def test_config_errors():
    with pytest.raises(fu.ConfigError, match="unlearn.tau"):
        fu.run_experiment("unlearn: {tau: 1.5}", "train")
