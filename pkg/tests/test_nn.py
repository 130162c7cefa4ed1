import numpy as np
import pytest

from aoisim import nn
from aoisim.errors import InterfaceError


def _fixed_net(sizes, out_act="identity"):
    net = nn.Mlp(sizes, out_act=out_act, rng=np.random.default_rng(0))
    return net


def test_forward_hand_case_identity():
    net = _fixed_net([2, 1])
    net.set_parameters([np.array([[2.0], [-1.0]]), np.array([0.5])])
    out = net.forward(np.array([3.0, 4.0]))
    assert out[0, 0] == pytest.approx(2 * 3 - 4 + 0.5)


def test_forward_hand_case_relu_hidden():
    # hidden relu kills the negative pre-activation
    net = _fixed_net([1, 2, 1])
    net.set_parameters([
        np.array([[1.0, -1.0]]), np.array([0.0, 0.0]),
        np.array([[1.0], [1.0]]), np.array([0.0]),
    ])
    assert net.forward([2.0])[0, 0] == pytest.approx(2.0)   # relu(2)+relu(-2)
    assert net.forward([-3.0])[0, 0] == pytest.approx(3.0)  # relu(-3)+relu(3)


def test_forward_tanh_head():
    net = _fixed_net([1, 1], out_act="tanh")
    net.set_parameters([np.array([[1.0]]), np.array([0.0])])
    assert net.forward([0.5])[0, 0] == pytest.approx(np.tanh(0.5))


def test_backward_hand_case():
    # y = w*x, dL/dw with upstream 2 and x=3 is 6
    net = _fixed_net([1, 1])
    net.set_parameters([np.array([[1.5]]), np.array([0.0])])
    net.forward([3.0])
    grads, input_grad = net.backward([[2.0]])
    assert grads[0][0, 0] == pytest.approx(6.0)
    assert grads[1][0] == pytest.approx(2.0)
    assert input_grad[0, 0] == pytest.approx(2.0 * 1.5)


def _fd_check(net, x, rtol=1e-5):
    """Finite-difference check of d(sum of outputs)/d(params)."""
    out = net.forward(x)
    upstream = np.ones_like(out)
    grads, input_grad = net.backward(upstream)
    params = net.parameters()
    eps = 1e-6
    rng = np.random.default_rng(1)
    worst = 0.0
    for p, g in zip(params, grads):
        flat = p.reshape(-1)
        gflat = np.asarray(g).reshape(-1)
        idxs = rng.choice(flat.size, size=min(12, flat.size), replace=False)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + eps
            up = net.forward(x).sum()
            flat[i] = orig - eps
            dn = net.forward(x).sum()
            flat[i] = orig
            fd = (up - dn) / (2 * eps)
            denom = max(abs(fd), abs(gflat[i]), 1e-8)
            worst = max(worst, abs(fd - gflat[i]) / denom)
    # input gradient too
    xv = np.array(x, dtype=float)
    for i in range(xv.size):
        orig = xv[i]
        xv[i] = orig + eps
        up = net.forward(xv).sum()
        xv[i] = orig - eps
        dn = net.forward(xv).sum()
        xv[i] = orig
        fd = (up - dn) / (2 * eps)
        denom = max(abs(fd), abs(input_grad[0, i]), 1e-8)
        worst = max(worst, abs(fd - input_grad[0, i]) / denom)
    assert worst < 1e-4, worst


def test_gradient_check_small_tanh():
    net = nn.Mlp([5, 8, 3], out_act="tanh", rng=np.random.default_rng(3))
    x = np.random.default_rng(4).uniform(-1, 1, 5)
    _fd_check(net, x)


def test_gradient_check_critic_shape():
    net = nn.Mlp([31, 64, 32, 1], out_act="identity",
                 rng=np.random.default_rng(5))
    x = np.random.default_rng(6).uniform(-1, 1, 31)
    _fd_check(net, x)


def test_backward_before_forward_rejected():
    net = _fixed_net([2, 1])
    with pytest.raises(InterfaceError):
        net.backward([[1.0]])


def test_num_parameters():
    net = _fixed_net([4, 8, 2])
    assert net.num_parameters() == (4 * 8 + 8) + (8 * 2 + 2)
    assert sum(p.size for p in net.parameters()) == net.num_parameters()


def test_clone_is_independent():
    net = _fixed_net([2, 3, 1])
    cp = net.clone()
    cp.weights[0][0, 0] += 1.0
    assert net.weights[0][0, 0] != cp.weights[0][0, 0]


def test_set_parameters_shape_mismatch():
    net = _fixed_net([2, 1])
    with pytest.raises(InterfaceError):
        net.set_parameters([np.zeros((3, 1)), np.zeros(1)])


def test_adam_plain_is_sgd():
    opt = nn.Adam(lr=0.1, plain=True)
    p = [np.array([1.0])]
    opt.step(p, [np.array([1.0])])
    assert p[0][0] == pytest.approx(0.9)


def test_adam_first_step_magnitude():
    # bias correction makes the first step ~lr * sign(grad)
    opt = nn.Adam(lr=0.01)
    p = [np.array([0.0])]
    opt.step(p, [np.array([5.0])])
    assert p[0][0] == pytest.approx(-0.01, rel=1e-4)


def test_adam_state_roundtrip():
    opt = nn.Adam(lr=0.01)
    p = [np.array([1.0, -2.0])]
    for g in ([np.array([0.5, 0.1])], [np.array([-0.2, 0.3])]):
        opt.step(p, g)
    restored = nn.Adam.from_state_dict(opt.state_dict())
    p2 = [p[0].copy()]
    g = [np.array([0.7, -0.7])]
    opt.step([p[0]], g)
    restored.step(p2, g)
    assert np.array_equal(p[0], p2[0])


def test_checkpoint_roundtrip_bit_exact(tmp_path):
    net = nn.Mlp([7, 5, 2], out_act="tanh", rng=np.random.default_rng(8))
    path = tmp_path / "ckpt.json"
    nn.save_checkpoint(path, {"net": nn.net_to_dict(net)})
    loaded = nn.net_from_dict(nn.load_checkpoint(path)["net"])
    for a, b in zip(net.parameters(), loaded.parameters()):
        assert np.array_equal(a, b)  # bit-exact via repr round-trip
    x = np.random.default_rng(9).uniform(-1, 1, 7)
    assert np.array_equal(net.forward(x), loaded.forward(x))


def test_checkpoint_version_mismatch(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"version": 999, "payload": {}}')
    with pytest.raises(InterfaceError):
        nn.load_checkpoint(path)


def test_invalid_construction():
    with pytest.raises(InterfaceError):
        nn.Mlp([4])
    with pytest.raises(InterfaceError):
        nn.Mlp([4, 2], out_act="sigmoid")
    net = _fixed_net([4, 2])
    with pytest.raises(InterfaceError):
        net.forward(np.zeros(5))
