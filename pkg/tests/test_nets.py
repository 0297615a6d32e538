import numpy as np
import pytest

from stad.core.exceptions import DataError, ShapeError, UnsupportedArchitectureError
from stad.nets import (
    build_decoder,
    build_from_architecture,
    build_teacher_patch_net,
    decode,
    densify,
    extract_dense,
    extract_dense_reference,
    forward_patch,
    layer_specs,
)


@pytest.mark.parametrize("p", [17, 33, 65])
def test_patch_input_produces_one_descriptor(p, rng):
    net = build_teacher_patch_net(p, 128, seed=1)
    out = net(rng.random((1, 3, p, p)).astype(np.float32))
    assert out.shape == (1, 128, 1, 1)
    assert forward_patch(net, rng.random((3, p, p))).shape == (128,)


def test_p65_trace_matches_printed_shapes():
    trace = build_teacher_patch_net(65, 128).trace_shapes(65)
    assert trace[:3] == [("conv1", 128, 61, 61), ("pool1", 128, 30, 30), ("conv2", 128, 26, 26)]
    assert trace[-1] == ("conv5", 128, 1, 1)


@pytest.mark.parametrize("p", [17, 33])
def test_trace_ends_in_a_single_descriptor(p):
    trace = build_teacher_patch_net(p, 64).trace_shapes(p)
    assert trace[-1][1:] == (64, 1, 1)


def test_channel_scale_changes_hidden_widths_only():
    specs = layer_specs(33, 16, channel_scale=0.25)
    widths = [s.out_channels for s in specs if s.kind.value == "conv"]
    assert widths == [32, 64, 64, 16]
    assert [s.kernel for s in specs] == [s.kernel for s in layer_specs(33)]


def test_unsupported_patch_size_is_rejected():
    with pytest.raises(UnsupportedArchitectureError):
        build_teacher_patch_net(31)


def test_same_seed_gives_same_weights():
    a = build_teacher_patch_net(17, 8, 0.125, seed=4)
    b = build_teacher_patch_net(17, 8, 0.125, seed=4)
    c = build_teacher_patch_net(17, 8, 0.125, seed=5)
    for (name, ta), (_, tb) in zip(a.params.items(), b.params.items()):
        np.testing.assert_array_equal(ta.data, tb.data)
    assert not np.array_equal(a.params["conv1.weight"].data, c.params["conv1.weight"].data)


def test_forward_batch_checks_patch_shape(small_net):
    net = small_net(17)
    with pytest.raises(ShapeError):
        net.forward_batch(np.zeros((2, 3, 16, 16), dtype=np.float32))


@pytest.mark.parametrize("p, height, width", [(17, 20, 23), (33, 34, 36)])
def test_dense_matches_sliding_window(p, height, width, small_net, rng):
    net = small_net(p, d=16, channel_scale=1 / 16, seed=2)
    image = rng.random((3, height, width)).astype(np.float32)
    dense = extract_dense(densify(net), image)
    reference = extract_dense_reference(net, image)
    assert dense.shape == (16, height, width)
    np.testing.assert_allclose(dense, reference, atol=1e-5, rtol=1e-5)


def test_p65_dense_matches_sliding_window(small_net, rng):
    net = small_net(65, d=16, seed=2)
    image = rng.random((3, 66, 67)).astype(np.float32)
    dense = extract_dense(densify(net), image)
    reference = extract_dense_reference(net, image, rows_per_batch=4)
    np.testing.assert_allclose(dense, reference, atol=1e-5, rtol=1e-5)


@pytest.mark.slow
@pytest.mark.parametrize("p", [17, 33, 65])
def test_dense_matches_sliding_window_on_96px_images(p, small_net, rng):
    net = small_net(p, d=128, channel_scale=1 / 16, seed=3)
    dnet = densify(net)
    for _ in range(3):
        image = rng.random((3, 96, 96)).astype(np.float32)
        np.testing.assert_allclose(extract_dense(dnet, image), extract_dense_reference(net, image), atol=1e-5, rtol=0)


def test_dense_net_shares_parameters(small_net, rng):
    net = small_net(17)
    dnet = densify(net)
    image = rng.random((3, 18, 18)).astype(np.float32)
    before = extract_dense(dnet, image)
    net.params["conv4.bias"].data = net.params["conv4.bias"].data + 1.0
    np.testing.assert_allclose(extract_dense(dnet, image), before + 1.0, atol=1e-5)


def test_dense_rejects_images_smaller_than_p(small_net):
    with pytest.raises(DataError):
        extract_dense(densify(small_net(33)), np.zeros((3, 20, 40), dtype=np.float32))


def test_rebuilt_architecture_reproduces_outputs(small_net, rng):
    net = small_net(33, seed=9)
    clone = build_from_architecture(net.architecture())
    clone.params.load_state_dict(net.params.state_dict())
    patches = rng.random((4, 3, 33, 33)).astype(np.float32)
    np.testing.assert_array_equal(net.forward_batch(patches).data, clone.forward_batch(patches).data)


def test_decoder_maps_descriptors_to_target_space(rng):
    dec = build_decoder(8, 12, seed=0)
    assert decode(dec, rng.normal(size=(5, 8))).shape == (5, 12)
    assert decode(dec, rng.normal(size=8)).shape == (12,)
    with pytest.raises(ShapeError):
        decode(dec, rng.normal(size=(5, 7)))
