import numpy as np
import pytest
from scipy import ndimage

from conftest import textured_array
from spectramatte import synth
from spectramatte.errors import CalibrationError, StructuralError
from spectramatte.flow import FlowField, estimate_flow
from spectramatte.image import FrameSequence, LinearImage, constant_image, luminance
from spectramatte.matting import GREEN, CleanPlate, solve_matte
from spectramatte.compositing import over_color_matte
from spectramatte.multiplex import (
    LightingSchedule,
    align_by_red,
    classic_tmm,
    demux,
    reconstruct_tmmgs,
    simulate_motion_blur,
    triangulation_color_matte,
    triangulation_matte,
)

MG = synth.MAGENTA_GREEN
GM = synth.GREEN_MAGENTA


def frame_of(value):
    return constant_image(4, 4, (value, value, value))


# -- schedules ----------------------------------------------------------------

def test_schedule_rate_must_divide():
    with pytest.raises(StructuralError):
        LightingSchedule(conditions=(MG, GM), flash_rate=50.0, camera_rate=24.0)


def test_schedule_shutter_must_fit_condition():
    # 72 Hz pattern rate = 144 condition changes/s against a 24 fps camera:
    # the shutter may open for at most 1/6 of a frame (60-degree shutter)
    LightingSchedule(conditions=(MG, GM), flash_rate=144.0, camera_rate=24.0,
                     shutter_fraction=1 / 6)
    with pytest.raises(StructuralError):
        LightingSchedule(conditions=(MG, GM), flash_rate=144.0, camera_rate=24.0,
                         shutter_fraction=0.2)


def test_schedule_condition_cycle():
    sched = LightingSchedule(conditions=(MG, GM), flash_rate=48.0, camera_rate=48.0,
                             phase=1)
    assert [sched.condition_for_frame(i) for i in range(4)] == [GM, MG, GM, MG]


# -- demux --------------------------------------------------------------------

def make_counting_sequence(n, rate=48.0):
    return FrameSequence([frame_of(i / 10) for i in range(n)], frame_rate=rate)


def test_demux_assignment_and_phase():
    seq = make_counting_sequence(6)
    sched = LightingSchedule(conditions=(MG, GM), flash_rate=48.0, camera_rate=48.0)
    streams = demux(seq, sched)
    assert [f.data[0, 0, 0] for f in streams[MG].frames] == pytest.approx([0.0, 0.2, 0.4])
    assert [f.data[0, 0, 0] for f in streams[GM].frames] == pytest.approx([0.1, 0.3, 0.5])
    swapped = demux(seq, LightingSchedule(conditions=(MG, GM), flash_rate=48.0,
                                          camera_rate=48.0, phase=1))
    assert [f.data[0, 0, 0] for f in swapped[GM].frames] == pytest.approx([0.0, 0.2, 0.4])


def test_demux_single_condition_is_identity():
    seq = make_counting_sequence(4)
    streams = demux(seq, LightingSchedule(conditions=(MG,), flash_rate=48.0,
                                          camera_rate=48.0))
    assert len(streams) == 1
    assert [f.data[0, 0, 0] for f in streams[MG].frames] == \
        [f.data[0, 0, 0] for f in seq.frames]


def test_demux_partitions_and_reassembles():
    seq = make_counting_sequence(9)
    sched = LightingSchedule(conditions=(MG, GM, "silhouette-white"), flash_rate=48.0,
                             camera_rate=48.0)
    streams = demux(seq, sched)
    total = sum(len(s) for s in streams.values())
    assert total == len(seq)
    tagged = []
    for stream in streams.values():
        tagged += [(stream.timestamps[i], stream.frames[i].data[0, 0, 0])
                   for i in range(len(stream))]
    tagged.sort()
    assert [value for _, value in tagged] == \
        pytest.approx([f.data[0, 0, 0] for f in seq.frames])


def test_demux_rate_mismatch():
    seq = make_counting_sequence(4, rate=24.0)
    sched = LightingSchedule(conditions=(MG, GM), flash_rate=48.0, camera_rate=48.0)
    with pytest.raises(StructuralError):
        demux(seq, sched)


# -- time-multiplexed reconstruction -------------------------------------------

def moving_disk_scene(velocity, frames=3):
    return synth.StageScene(
        width=128, height=96, frames=frames, camera_rate=24.0,
        layers=[synth.Sprite(kind="disk", reflectance=(0.7, 0.6, 0.5),
                             position=(40.0, 48.0), velocity=velocity,
                             radius=7.0, edge=2.0)],
        bounce_fraction=0.0)


def tm_capture(scene):
    sched = LightingSchedule(conditions=(MG, GM), flash_rate=48.0, camera_rate=48.0)
    seq = synth.render_multiplexed(scene, sched)
    streams = demux(seq, sched)
    plate = CleanPlate(background=synth.render_capture(scene, synth.CLEAN_PLATE, 0))
    return streams[MG], streams[GM], plate


def centroid(channel):
    total = channel.sum()
    yy, xx = np.mgrid[0:channel.shape[0], 0:channel.shape[1]]
    return np.array([(xx * channel).sum() / total, (yy * channel).sum() / total])


def channel_misalignment(elem):
    return float(np.linalg.norm(centroid(elem.rgb.data[:, :, 1])
                                - centroid(elem.rgb.data[:, :, 0])))


def test_tmmgs_static_matches_white_lit_truth():
    scene = moving_disk_scene((0.0, 0.0))
    mg, gm, plate = tm_capture(scene)
    truth_rgb, truth_alpha, _ = synth.render_truth(scene, 0)
    elem = reconstruct_tmmgs(mg.frames[0], gm.frames[0], plate, flow=None)
    assert np.max(np.abs(elem.rgb.data - truth_rgb.data)) < 1e-4
    assert np.max(np.abs(elem.alpha.data - truth_alpha.data)) < 1e-4


def test_tmmgs_misalignment_without_flow():
    scene = moving_disk_scene((4.0, 0.0))  # 2 px per 48 fps camera frame
    mg, gm, plate = tm_capture(scene)
    elem = reconstruct_tmmgs(mg.frames[0], gm.frames[0], plate, flow=None)
    # green comes from the interposed frame, half the mg-pair displacement away
    assert channel_misalignment(elem) == pytest.approx(2.0, abs=0.2)


def test_tmmgs_exact_flow_registers():
    scene = moving_disk_scene((4.0, 0.0))
    mg, gm, plate = tm_capture(scene)
    exact = FlowField(np.full((96, 128), 4.0, np.float32),
                      np.zeros((96, 128), np.float32))
    elem = reconstruct_tmmgs(mg.frames[0], gm.frames[0], plate, exact)
    assert channel_misalignment(elem) < 0.5


def test_tmmgs_estimated_flow_registers():
    scene = moving_disk_scene((4.0, 0.0))
    mg, gm, plate = tm_capture(scene)
    flow = estimate_flow(luminance(mg.frames[0]), luminance(mg.frames[1]))
    elem = reconstruct_tmmgs(mg.frames[0], gm.frames[0], plate, flow)
    assert channel_misalignment(elem) < 0.5


# -- classic time-multiplexed matting ------------------------------------------

def test_classic_static_composite_matches_truth():
    scene = moving_disk_scene((0.0, 0.0))
    lit = synth.render_capture(scene, synth.WHITE_LIT_BLACK, 0)
    silhouette = synth.render_capture(scene, synth.SILHOUETTE_WHITE, 0)
    truth_rgb, _, truth_matte = synth.render_truth(scene, 0)
    elem, matte = classic_tmm(lit, silhouette, (1.0, 1.0, 1.0))
    new_bg = constant_image(96, 128, (0.3, 0.5, 0.7))
    out = over_color_matte(elem.rgb, matte, new_bg)
    expected = over_color_matte(truth_rgb, truth_matte, new_bg)
    assert np.max(np.abs(out.data - expected.data)) < 1e-4


def test_classic_matte_endpoints():
    black = constant_image(8, 8, (0.0, 0.0, 0.0))
    lit = constant_image(8, 8, (0.4, 0.4, 0.4))
    _, opaque = classic_tmm(lit, black, (1.0, 1.0, 1.0))
    assert np.all(opaque.alpha_rgb.data == 1.0)
    level = constant_image(8, 8, (0.8, 0.9, 1.0))
    _, transparent = classic_tmm(lit, level, (0.8, 0.9, 1.0))
    assert np.max(np.abs(transparent.alpha_rgb.data)) < 1e-6


def test_classic_requires_positive_background():
    lit = constant_image(8, 8, (0.4, 0.4, 0.4))
    with pytest.raises(CalibrationError):
        classic_tmm(lit, lit, (1.0, 0.0, 1.0))


# -- triangulation matting ------------------------------------------------------

def test_triangulation_example():
    alpha = 0.5
    fg = np.array([0.4, 0.4, 0.4])
    b1 = np.array([0.0, 1.0, 0.0])
    b2 = np.array([0.0, 0.0, 1.0])
    c1 = alpha * fg + (1 - alpha) * b1
    c2 = alpha * fg + (1 - alpha) * b2
    assert np.allclose(c1, [0.2, 0.7, 0.2]) and np.allclose(c2, [0.2, 0.2, 0.7])
    matte, elem = triangulation_matte(
        constant_image(6, 6, c1), constant_image(6, 6, b1),
        constant_image(6, 6, c2), constant_image(6, 6, b2))
    assert np.max(np.abs(matte.alpha.data - alpha)) < 1e-6
    assert np.max(np.abs(elem.rgb.data - (alpha * fg).astype(np.float32))) < 1e-6


def test_triangulation_identical_backgrounds_flagged():
    bg = constant_image(6, 6, (0.2, 0.5, 0.2))
    frame = constant_image(6, 6, (0.3, 0.4, 0.3))
    matte, _ = triangulation_matte(frame, bg, frame, bg)
    assert matte.invalid is not None
    assert matte.invalid.all()


def test_triangulation_opaque_consistency():
    fg = constant_image(6, 6, (0.5, 0.3, 0.2))  # alpha=1: frames identical
    b1 = constant_image(6, 6, (0.0, 1.0, 0.0))
    b2 = constant_image(6, 6, (0.0, 0.0, 1.0))
    matte, _ = triangulation_matte(fg, b1, fg, b2)
    assert np.all(matte.alpha.data == 1.0)


def test_triangulation_random_exact(rng):
    h, w = 20, 28
    alpha = rng.uniform(0, 1, (h, w))
    fg = rng.uniform(0, 1, (h, w, 3))  # no channel constraint at all
    b1 = rng.uniform(0, 1, (h, w, 3))
    b2 = np.clip(b1 + rng.choice([-0.5, 0.5], (h, w, 3)), 0, 1.5)
    c1 = LinearImage(alpha[..., None] * fg + (1 - alpha[..., None]) * b1)
    c2 = LinearImage(alpha[..., None] * fg + (1 - alpha[..., None]) * b2)
    matte, elem = triangulation_matte(c1, LinearImage(b1), c2, LinearImage(b2))
    assert np.max(np.abs(matte.alpha.data - alpha)) < 1e-6
    assert np.max(np.abs(elem.rgb.data - alpha[..., None] * fg)) < 1e-6


def test_triangulation_agrees_with_single_background_solve(rng):
    h, w = 16, 16
    alpha = rng.uniform(0, 1, (h, w))
    fg = rng.uniform(0, 1, (h, w, 3))
    fg[:, :, 1] = 0.0  # green-free foreground
    b1 = np.broadcast_to([0.0, 1.0, 0.0], (h, w, 3)).copy()
    b2 = np.broadcast_to([0.4, 0.0, 0.8], (h, w, 3)).copy()
    c1 = LinearImage(alpha[..., None] * fg + (1 - alpha[..., None]) * b1)
    c2 = LinearImage(alpha[..., None] * fg + (1 - alpha[..., None]) * b2)
    tri_matte, _ = triangulation_matte(c1, LinearImage(b1), c2, LinearImage(b2))
    single_matte, _ = solve_matte(c1, CleanPlate(background=LinearImage(b1)), GREEN)
    assert np.max(np.abs(tri_matte.alpha.data - single_matte.alpha.data)) < 1e-6


def test_triangulation_color_matte_recovers_tinted_glass():
    opacity = (0.3, 0.9, 0.6)
    coverage = 0.8
    fg = np.array([0.2, 0.05, 0.05])
    alpha_c = coverage * np.array(opacity)
    b1 = np.array([0.6, 0.8, 0.2])
    b2 = np.array([0.1, 0.2, 0.9])
    c1 = alpha_c * fg + (1 - alpha_c) * b1
    c2 = alpha_c * fg + (1 - alpha_c) * b2
    cm, valid = triangulation_color_matte(
        constant_image(6, 6, c1), constant_image(6, 6, b1),
        constant_image(6, 6, c2), constant_image(6, 6, b2))
    assert valid.all()
    assert np.max(np.abs(cm.alpha_rgb.data - alpha_c.astype(np.float32))) < 1e-6


# -- red-channel alignment -------------------------------------------------------

def red_frame(pattern):
    data = np.zeros((*pattern.shape, 3), np.float32)
    data[:, :, 0] = pattern
    return LinearImage(data)


def test_align_by_red_identity():
    frame = red_frame(textured_array(64, 64))
    field = align_by_red(frame, frame)
    assert np.hypot(field.u, field.v).mean() < 1e-3


def test_align_by_red_shift():
    from conftest import shifted

    base = textured_array(96, 128, seed=9)
    f1 = red_frame(base)
    f2 = red_frame(shifted(base, 3, 0))
    field = align_by_red(f1, f2)
    m = 16
    assert abs(field.u[m:-m, m:-m].mean() - 3.0) < 0.5
    assert abs(field.v[m:-m, m:-m].mean()) < 0.5


def test_align_by_red_low_texture_flag():
    dark = red_frame(np.full((64, 64), 1e-4, np.float32))
    field = align_by_red(dark, dark)
    assert field.low_texture


# -- simulated motion blur -------------------------------------------------------

def test_blur_zero_flow_is_identity():
    img = LinearImage(textured_array(48, 48))
    field = FlowField.zero(48, 48)
    assert simulate_motion_blur(img, field, 0.5) is img


def test_blur_tiny_shutter_is_identity():
    img = LinearImage(textured_array(48, 48))
    field = FlowField(np.full((48, 48), 10.0, np.float32), np.zeros((48, 48), np.float32))
    out = simulate_motion_blur(img, field, 1e-8)
    assert np.max(np.abs(out.data - img.data)) < 1e-6


def test_blur_matches_box_filter_oracle():
    img = textured_array(64, 96, seed=21)
    field = FlowField(np.full((64, 96), 10.0, np.float32), np.zeros((64, 96), np.float32))
    out = simulate_motion_blur(LinearImage(img), field, 0.5)
    oracle = ndimage.uniform_filter1d(img, size=5, axis=1, mode="nearest")
    assert np.max(np.abs(out.data - oracle)) < 1.0 / 255.0


def test_blur_preserves_energy():
    img = np.zeros((64, 64), np.float32)
    img[20:44, 20:44] = textured_array(24, 24, seed=3)
    field = FlowField(np.full((64, 64), 6.0, np.float32),
                      np.full((64, 64), -4.0, np.float32))
    out = simulate_motion_blur(LinearImage(img), field, 0.5)
    assert abs(out.data.sum() - img.sum()) < 0.005 * img.sum()
