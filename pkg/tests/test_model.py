"""Network construction, forward/backward correctness, prediction, checkpoints.

The backward pass is validated against central finite differences of the
scalar joint loss; that oracle lives here (``fd_gradients``) and is reused
by the acceptance suite.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memebg.data import TaskSchema
from memebg.errors import FormatError, ShapeError
from memebg.loss import joint_loss, softmax_cross_entropy
from memebg.model import (
    ArchConfig,
    MTLNetwork,
    backward,
    forward,
    init_network,
    load_network,
    predict,
    save_network,
)
from memebg.numerics import Rng, gauss_sample

SMALL_ARCH = ArchConfig(
    input_dim=7,
    tasks=(
        TaskSchema("TE", ("A", "B")),
        TaskSchema("ICM", ("A", "B")),
        TaskSchema("EXP", ("0", "1", "2")),
    ),
    trunk_dims=(5,),
)


def random_batch(arch, rng, n=4):
    x = gauss_sample(rng, n, arch.input_dim)
    labels = {
        t.name: np.array([rng.below(len(t.classes)) for _ in range(n)])
        for t in arch.tasks
    }
    return x, labels


def joint_loss_value(net, x, labels):
    logits, _ = forward(net, x)
    return joint_loss(
        [softmax_cross_entropy(logits[t], labels[t], t) for t in logits]
    )


def analytic_gradients(net, x, labels):
    logits, cache = forward(net, x)
    dlogits = {
        t: softmax_cross_entropy(logits[t], labels[t], t).dlogits for t in logits
    }
    return backward(net, cache, dlogits)


def fd_gradients(net, x, labels, step=1e-5):
    """Central finite differences of the joint loss over every parameter."""
    grads = []
    for param in net.parameters():
        g = np.zeros_like(param)
        flat_p = param.reshape(-1)
        flat_g = g.reshape(-1)
        for i in range(flat_p.size):
            original = flat_p[i]
            flat_p[i] = original + step
            up = joint_loss_value(net, x, labels)
            flat_p[i] = original - step
            down = joint_loss_value(net, x, labels)
            flat_p[i] = original
            flat_g[i] = (up - down) / (2.0 * step)
        grads.append(g)
    return grads


def max_relative_error(analytic, numeric):
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-4)
        worst = max(worst, float((np.abs(a - n) / denom).max()))
    return worst


def flatten_gradients(grads, arch):
    arrays = []
    for gw, gb in grads.trunk:
        arrays.extend((gw, gb))
    for t in arch.tasks:
        gw, gb = grads.heads[t.name]
        arrays.extend((gw, gb))
    return arrays


# --- init -------------------------------------------------------------------


def test_init_shapes():
    arch = ArchConfig(input_dim=8, tasks=(TaskSchema("TE", ("A", "B")),), trunk_dims=(4,))
    net = init_network(arch, Rng(0))
    (w, b), = net.trunk
    assert w.shape == (8, 4) and b.shape == (1, 4)
    hw, hb = net.heads["TE"]
    assert hw.shape == (4, 2) and hb.shape == (1, 2)


def test_init_deterministic():
    a = init_network(SMALL_ARCH, Rng(5))
    b = init_network(SMALL_ARCH, Rng(5))
    for pa, pb in zip(a.parameters(), b.parameters()):
        np.testing.assert_array_equal(pa, pb)


def test_init_he_scaling():
    arch = ArchConfig(input_dim=256, tasks=(TaskSchema("TE", ("A", "B")),), trunk_dims=(256,))
    net = init_network(arch, Rng(77))
    observed = net.trunk[0][0].std()
    expected = np.sqrt(2.0 / 256)
    assert abs(observed - expected) < 0.1 * expected
    assert (net.trunk[0][1] == 0).all()


def test_arch_validation():
    with pytest.raises(ValueError):
        ArchConfig(input_dim=0, tasks=SMALL_ARCH.tasks)
    with pytest.raises(ValueError):
        ArchConfig(input_dim=4, tasks=())
    with pytest.raises(ValueError):
        ArchConfig(input_dim=4, tasks=SMALL_ARCH.tasks, trunk_dims=(0,))


# --- forward ----------------------------------------------------------------


def test_forward_zero_network_gives_zero_logits():
    net = init_network(SMALL_ARCH, Rng(1))
    for p in net.parameters():
        p[:] = 0.0
    logits, _ = forward(net, gauss_sample(Rng(2), 3, 7))
    for v in logits.values():
        assert (v == 0).all()


def test_forward_hand_computed_chain():
    arch = ArchConfig(input_dim=2, tasks=(TaskSchema("TE", ("A", "B")),), trunk_dims=(2,))
    net = init_network(arch, Rng(0))
    net.trunk[0][0][:] = np.array([[1.0, 0.0], [0.0, 1.0]])
    net.trunk[0][1][:] = np.array([[0.5, -1.0]])
    net.heads["TE"][0][:] = np.array([[1.0, -1.0], [2.0, 0.0]])
    net.heads["TE"][1][:] = np.array([[0.25, 0.0]])
    # x = [1, -2]: z = [1.5, -3] -> relu [1.5, 0]
    # logits = [1.5*1 + 0*2 + 0.25, 1.5*(-1) + 0*0 + 0] = [1.75, -1.5]
    logits, cache = forward(net, np.array([[1.0, -2.0]]))
    np.testing.assert_allclose(logits["TE"], [[1.75, -1.5]], atol=0)
    np.testing.assert_array_equal(cache.activations[0], [[1.5, 0.0]])


def test_forward_shapes_per_task():
    net = init_network(SMALL_ARCH, Rng(3))
    logits, _ = forward(net, gauss_sample(Rng(4), 6, 7))
    assert logits["TE"].shape == (6, 2)
    assert logits["ICM"].shape == (6, 2)
    assert logits["EXP"].shape == (6, 3)


def test_forward_rejects_wrong_width():
    net = init_network(SMALL_ARCH, Rng(3))
    with pytest.raises(ShapeError):
        forward(net, np.zeros((2, 6)))


# --- backward ---------------------------------------------------------------


def test_backward_zero_dlogits_zero_gradients():
    net = init_network(SMALL_ARCH, Rng(6))
    x = gauss_sample(Rng(7), 4, 7)
    logits, cache = forward(net, x)
    dlogits = {t: np.zeros_like(v) for t, v in logits.items()}
    grads = flatten_gradients(backward(net, cache, dlogits), SMALL_ARCH)
    for g in grads:
        assert (g == 0).all()


@pytest.mark.parametrize("seed", [0, 1])
def test_backward_matches_finite_differences(seed):
    rng = Rng(seed)
    net = init_network(SMALL_ARCH, rng)
    x, labels = random_batch(SMALL_ARCH, rng)
    analytic = flatten_gradients(analytic_gradients(net, x, labels), SMALL_ARCH)
    numeric = fd_gradients(net, x, labels)
    assert max_relative_error(analytic, numeric) < 1e-5


def test_backward_single_task_network_is_plain_backprop():
    arch = ArchConfig(input_dim=7, tasks=(TaskSchema("EXP", ("0", "1", "2")),), trunk_dims=(5,))
    rng = Rng(13)
    net = init_network(arch, rng)
    x, labels = random_batch(arch, rng)
    analytic = flatten_gradients(analytic_gradients(net, x, labels), arch)
    numeric = fd_gradients(net, x, labels)
    assert max_relative_error(analytic, numeric) < 1e-5


def test_backward_isolated_task_leaves_other_heads_untouched():
    net = init_network(SMALL_ARCH, Rng(21))
    x, labels = random_batch(SMALL_ARCH, Rng(22))
    logits, cache = forward(net, x)
    dlogits = {t: np.zeros_like(v) for t, v in logits.items()}
    dlogits["ICM"] = softmax_cross_entropy(logits["ICM"], labels["ICM"]).dlogits
    grads = backward(net, cache, dlogits)
    for t in ("TE", "EXP"):
        assert (grads.heads[t][0] == 0).all()
        assert (grads.heads[t][1] == 0).all()
    assert np.abs(grads.heads["ICM"][0]).max() > 0


def test_backward_trunk_gradient_is_sum_of_task_contributions():
    net = init_network(SMALL_ARCH, Rng(31))
    x, labels = random_batch(SMALL_ARCH, Rng(32))
    logits, cache = forward(net, x)
    full = {t: softmax_cross_entropy(logits[t], labels[t]).dlogits for t in logits}
    combined = backward(net, cache, full)
    summed = None
    for t in full:
        isolated = {u: np.zeros_like(v) for u, v in full.items()}
        isolated[t] = full[t]
        g = backward(net, cache, isolated)
        if summed is None:
            summed = g
        else:
            summed = type(g)(
                trunk=[
                    (sw + gw, sb + gb)
                    for (sw, sb), (gw, gb) in zip(summed.trunk, g.trunk)
                ],
                heads={
                    u: (summed.heads[u][0] + g.heads[u][0], summed.heads[u][1] + g.heads[u][1])
                    for u in full
                },
            )
    for (cw, cb), (sw, sb) in zip(combined.trunk, summed.trunk):
        np.testing.assert_allclose(cw, sw, atol=1e-12)
        np.testing.assert_allclose(cb, sb, atol=1e-12)


# --- predict ----------------------------------------------------------------


def one_head_net(logit_rows):
    """Linear net (no trunk) rigged to output fixed logits for x = onehot."""
    c = len(logit_rows[0])
    arch = ArchConfig(
        input_dim=len(logit_rows),
        tasks=(TaskSchema("T", tuple(str(i) for i in range(c))),),
        trunk_dims=(),
    )
    net = init_network(arch, Rng(0))
    net.heads["T"][0][:] = np.array(logit_rows, dtype=np.float64)
    net.heads["T"][1][:] = 0.0
    return net


def test_predict_argmax_and_tie_break():
    net = one_head_net([[2.0, -1.0], [0.5, 0.5]])
    out = predict(net, np.eye(2))
    np.testing.assert_array_equal(out["T"], [0, 0])


def test_predict_shift_invariance():
    net = init_network(SMALL_ARCH, Rng(41))
    x = gauss_sample(Rng(42), 5, 7)
    base = predict(net, x)
    logits, _ = forward(net, x)
    for t, v in logits.items():
        shifted = v + 123.456
        np.testing.assert_array_equal(base[t], np.argmax(shifted, axis=1))


@settings(max_examples=50, deadline=None)
@given(
    milli_logits=st.lists(st.integers(-50_000, 50_000), min_size=3, max_size=3),
    scale=st.floats(0.01, 10.0),
    shift=st.floats(-100, 100),
)
def test_predict_invariant_under_monotone_transform(milli_logits, scale, shift):
    # logits on a 1e-3 grid so the affine map cannot collapse distinct
    # values through float absorption and silently reshuffle ties
    row = np.array([milli_logits], dtype=np.float64) / 1000.0
    transformed = row * scale + shift  # strictly increasing affine map
    assert np.argmax(row, axis=1) == np.argmax(transformed, axis=1)


# --- checkpoints --------------------------------------------------------------


def test_checkpoint_round_trip_bit_identical(tmp_path):
    net = init_network(SMALL_ARCH, Rng(51))
    x = gauss_sample(Rng(52), 3, 7)
    before, _ = forward(net, x)
    path = tmp_path / "net.json"
    save_network(net, path)
    after, _ = forward(load_network(path), x)
    for t in before:
        np.testing.assert_array_equal(before[t], after[t])


def test_checkpoint_truncated_file_is_format_error(tmp_path):
    net = init_network(SMALL_ARCH, Rng(53))
    path = tmp_path / "net.json"
    save_network(net, path)
    data = path.read_text()
    path.write_text(data[: len(data) // 2])
    with pytest.raises(FormatError):
        load_network(path)


def test_checkpoint_dim_mismatch_is_format_error(tmp_path):
    import json

    net = init_network(SMALL_ARCH, Rng(54))
    path = tmp_path / "net.json"
    save_network(net, path)
    doc = json.loads(path.read_text())
    doc["arch"]["trunk_dims"] = [6]
    path.write_text(json.dumps(doc))
    with pytest.raises(FormatError):
        load_network(path)


def test_checkpoint_version_mismatch_is_format_error(tmp_path):
    import json

    net = init_network(SMALL_ARCH, Rng(55))
    path = tmp_path / "net.json"
    save_network(net, path)
    doc = json.loads(path.read_text())
    doc["format_version"] = 2
    path.write_text(json.dumps(doc))
    with pytest.raises(FormatError):
        load_network(path)
