import numpy as np
import pytest

from spectramatte.errors import SequenceIOError, StructuralError
from spectramatte.image import (
    FrameSequence,
    LinearImage,
    combine_channels,
    expand_pattern,
    format_transfer,
    inverse_tonemap,
    load_image,
    load_sequence,
    parse_transfer,
    read_sidecar,
    save_image,
    save_sequence,
    tonemap,
)


def test_image_shape_properties(rng):
    img = LinearImage(rng.random((12, 20, 3)).astype(np.float32))
    assert (img.width, img.height, img.channels) == (20, 12, 3)
    mono = LinearImage(rng.random((12, 20)).astype(np.float32))
    assert mono.channels == 1


def test_image_rejects_bad_shapes():
    with pytest.raises(StructuralError):
        LinearImage(np.zeros((4, 4, 2), np.float32))
    with pytest.raises(StructuralError):
        LinearImage(np.zeros(10, np.float32))


def test_images_are_read_only(rng):
    img = LinearImage(rng.random((4, 4)).astype(np.float32))
    with pytest.raises(ValueError):
        img.data[0, 0] = 5.0


def test_channel_roundtrip_exact(rng):
    img = LinearImage(rng.random((9, 7, 3)).astype(np.float32))
    back = combine_channels(img.channel(0), img.channel(1), img.channel(2))
    assert np.array_equal(back.data, img.data)


def test_tonemap_values():
    img = LinearImage(np.array([[1.0, 0.25, 0.0]], np.float32))
    out = tonemap(img, 2.2)
    assert out.data[0, 0] == pytest.approx(1.0)
    sq = tonemap(LinearImage(np.array([[0.25]], np.float32)), 2.0)
    assert sq.data[0, 0] == pytest.approx(0.5)


def test_tonemap_inverse_pair(rng):
    img = LinearImage(rng.random((8, 8, 3)).astype(np.float32))
    back = inverse_tonemap(tonemap(img, 2.2), 2.2)
    assert np.max(np.abs(back.data - img.data)) < 1e-6


def test_tonemap_monotone_unit_interval(rng):
    values = np.sort(rng.random(64).astype(np.float32))
    mapped = tonemap(LinearImage(values.reshape(8, 8)), 2.2).data.reshape(-1)
    remapped = tonemap(LinearImage(np.sort(values).reshape(8, 8)), 2.2).data.reshape(-1)
    assert np.all(np.diff(np.sort(mapped)) >= 0)
    assert mapped.min() >= 0.0 and mapped.max() <= 1.0
    assert np.array_equal(np.sort(mapped), remapped)


def test_tonemap_clamps_negatives():
    img = LinearImage(np.array([[-0.5]], np.float32))
    assert tonemap(img, 2.2).data[0, 0] == 0.0


def test_parse_transfer():
    assert parse_transfer("linear") == 1.0
    assert parse_transfer("gamma(2.2)") == pytest.approx(2.2)
    assert parse_transfer("gamma:2.2") == pytest.approx(2.2)
    assert format_transfer(1.0) == "linear"
    assert format_transfer(2.2) == "gamma(2.2)"
    with pytest.raises(StructuralError):
        parse_transfer("log")


def test_float_roundtrip_bit_identical(tmp_path, rng):
    seq = FrameSequence(
        [LinearImage(rng.random((10, 14, 3)).astype(np.float32)) for _ in range(3)],
        frame_rate=24.0, label="probe")
    pattern = str(tmp_path / "frame_%04d.pfm")
    save_sequence(seq, pattern)
    back = load_sequence(pattern)
    assert len(back) == 3
    assert back.label == "probe"
    for a, b in zip(seq.frames, back.frames):
        assert np.array_equal(a.data, b.data)


def test_png_gamma_store_code(tmp_path):
    # oracle: the stored 8-bit code for linear 0.5 at gamma 2.2
    expected = int(round(255 * 0.5 ** (1 / 2.2)))
    assert expected == 186
    img = LinearImage(np.full((4, 4, 3), 0.5, np.float32))
    path = str(tmp_path / "half.png")
    save_image(img, path, transfer="gamma(2.2)", bit_depth=8)
    import cv2

    stored = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    assert int(stored[0, 0, 0]) == expected


def test_png_negative_clamps_to_zero(tmp_path):
    img = LinearImage(np.full((4, 4), -0.25, np.float32))
    path = str(tmp_path / "neg.png")
    save_image(img, path, bit_depth=8)
    back = load_image(path)
    assert np.all(back.data == 0.0)


def test_sixteen_bit_full_scale_is_one(tmp_path):
    img = LinearImage(np.ones((4, 4), np.float32))
    path = str(tmp_path / "one.png")
    save_image(img, path, transfer="gamma(2.2)", bit_depth=16)
    back = load_image(path, transfer="gamma(2.2)")
    assert back.data[0, 0] == pytest.approx(1.0)


def test_png_sequence_linearizes(tmp_path, rng):
    frames = [LinearImage(rng.random((6, 6, 3)).astype(np.float32)) for _ in range(3)]
    pattern = str(tmp_path / "f_%03d.png")
    save_sequence(FrameSequence(frames, 24.0, "gamma-test"), pattern,
                  transfer="gamma(2.2)", bit_depth=16)
    back = load_sequence(pattern)
    assert len(back) == 3
    # 16-bit quantization through the gamma curve stays within half a step
    for a, b in zip(frames, back.frames):
        encoded = np.power(np.maximum(a.data, 0), 1 / 2.2)
        step = np.power(np.minimum(encoded + 0.5 / 65535, 1.0), 2.2) - a.data
        assert np.max(np.abs(b.data - a.data)) <= np.max(np.abs(step)) + 1e-6


def test_empty_pattern_errors(tmp_path):
    with pytest.raises(SequenceIOError):
        load_sequence(str(tmp_path / "missing_%04d.pfm"))


def test_mismatched_dimensions_error(tmp_path, rng):
    save_image(LinearImage(rng.random((6, 6, 3)).astype(np.float32)),
               str(tmp_path / "f_000.pfm"))
    save_image(LinearImage(rng.random((7, 6, 3)).astype(np.float32)),
               str(tmp_path / "f_001.pfm"))
    with pytest.raises(StructuralError):
        load_sequence(str(tmp_path / "f_%03d.pfm"))


def test_missing_frame_named_in_error(tmp_path, rng):
    pattern = str(tmp_path / "g_%03d.pfm")
    save_image(LinearImage(rng.random((4, 4)).astype(np.float32)), pattern % 0)
    (tmp_path / "g_001.pfm").write_bytes(b"not an image")
    with pytest.raises(SequenceIOError, match="frame 1"):
        load_sequence(pattern)


def test_expand_pattern_orders_by_index(tmp_path, rng):
    pattern = str(tmp_path / "s_%d.pfm")
    for i in (3, 0, 11):
        save_image(LinearImage(rng.random((4, 4)).astype(np.float32)), pattern % i)
    indices = [i for i, _ in expand_pattern(pattern)]
    assert indices == [0, 3, 11]


def test_sidecar_roundtrip(tmp_path, rng):
    seq = FrameSequence([LinearImage(rng.random((4, 4)).astype(np.float32))],
                        frame_rate=48.0, label="mux")
    pattern = str(tmp_path / "m_%04d.pfm")
    save_sequence(seq, pattern, extra_meta={"schedule.phase": "1"})
    meta = read_sidecar(pattern)
    assert meta["frame_rate"] == "48"
    assert meta["label"] == "mux"
    assert meta["schedule.phase"] == "1"
    back = load_sequence(pattern)
    assert back.frame_rate == 48.0


def test_sequence_rejects_bad_rate(rng):
    with pytest.raises(StructuralError):
        FrameSequence([LinearImage(rng.random((4, 4)).astype(np.float32))], frame_rate=0.0)
