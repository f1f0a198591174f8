"""Command-line front end: one subcommand per pipeline stage.

Stages compose through the filesystem: sequences as %d-numbered image files
with plain-text sidecars, calibration and flow as their own sidecar formats.
Every run writes a manifest of inputs, parameters, and output hashes so
reruns are verifiable.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import synth
from .calibration import (
    CalibrationMatrix,
    ChartRegion,
    apply_calibration,
    build_calibration,
)
from .compositing import ColorMatte, over_color_matte, over_premultiplied
from .errors import ConfigError, PipelineError
from .flow import FlowConfig, FlowField, estimate_flow, load_flow, save_flow, warp
from .image import (
    FrameSequence,
    LinearImage,
    expand_pattern,
    load_image,
    load_sequence,
    luminance,
    read_sidecar,
    save_image,
    save_sequence,
    tonemap,
)
from .matting import (
    CleanPlate,
    ForegroundElement,
    MatteChannel,
    key_frame,
    naive_colorize,
)
from .multiplex import (
    LightingSchedule,
    align_by_red,
    classic_tmm,
    demux,
    reconstruct_tmmgs,
    simulate_motion_blur,
    triangulation_color_matte,
    triangulation_matte,
)

TONEMAP_EXPONENT = 2.2
AUG_LUMINANCE = (0.7, 1.3)
AUG_BALANCE = (0.9, 1.1)

_CONDITION_SHORTHAND = {short: label for label, short in synth.CONDITION_DIRS.items()}


# -- config files ------------------------------------------------------------

def parse_config(text: str) -> dict[str, str]:
    """key=value lines; '#' comments and blank lines ignored."""
    out: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"config line is not key=value: {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def serialize_config(config: dict[str, str]) -> str:
    return "\n".join(f"{key}={config[key]}" for key in sorted(config)) + "\n"


def _apply_config(args: argparse.Namespace, subparser: argparse.ArgumentParser,
                  argv: list[str]) -> None:
    """Fill args from --config for options not given on the command line."""
    if not getattr(args, "config", None):
        return
    if not os.path.exists(args.config):
        raise ConfigError(f"config file not found: {args.config}")
    with open(args.config, encoding="utf-8") as fh:
        config = parse_config(fh.read())
    explicit = {token.split("=", 1)[0] for token in argv if token.startswith("--")}
    for action in subparser._actions:
        if action.dest in ("help", "config") or action.dest not in config:
            continue
        if any(opt in explicit for opt in action.option_strings):
            continue
        raw = config[action.dest]
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            value = raw.lower() in ("1", "true", "yes", "on")
        elif action.type is not None:
            value = action.type(raw)
        else:
            value = raw
        setattr(args, action.dest, value)


# -- run manifests -----------------------------------------------------------

def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_run_manifest(command: str, args: argparse.Namespace,
                       inputs: list[str], outputs: list[str],
                       path: str | None = None) -> str | None:
    skip = {"config", "manifest", "func", "command"}
    params = {
        key: value for key, value in sorted(vars(args).items())
        if key not in skip and not callable(value)
    }
    if path is None:
        target = next((p for p in outputs if p), None)
        if target is None:
            return None
        path = os.path.join(os.path.dirname(target) or ".", "run_manifest.txt")
    lines = [f"command={command}"]
    lines += [f"param.{key}={value}" for key, value in params.items()]
    lines += [f"input.{i}={p}" for i, p in enumerate(inputs)]
    for i, p in enumerate(outputs):
        lines.append(f"output.{i}={p} sha256={_sha256(p)}")
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


# -- shared plumbing ---------------------------------------------------------

def _parallel_map(fn, items, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _matte_channel(name: str) -> MatteChannel:
    return MatteChannel(name.upper())


def _require(path: str, what: str) -> str:
    if not os.path.exists(path):
        raise ConfigError(f"{what} not found: {path}")
    return path


def _load_calibrated(pattern: str, cal: CalibrationMatrix | None) -> FrameSequence:
    seq = load_sequence(pattern)
    if cal is None:
        return seq
    frames = [apply_calibration(f, cal) for f in seq.frames]
    return FrameSequence(frames=frames, frame_rate=seq.frame_rate, label=seq.label,
                         timestamps=seq.timestamps)


def _load_calibration(args) -> CalibrationMatrix:
    _require(args.calibration, "calibration sidecar")
    return CalibrationMatrix.load(args.calibration)


def _plate_for(i: int, clean: FrameSequence, bounce: FrameSequence | None) -> CleanPlate:
    background = clean.frames[i if len(clean) > 1 else 0]
    bounce_frame = None
    if bounce is not None:
        bounce_frame = bounce.frames[i if len(bounce) > 1 else 0]
    return CleanPlate(background=background, bounce=bounce_frame)


def _expand_frames(seq: FrameSequence, n: int, what: str) -> None:
    if len(seq) not in (1, n):
        raise ConfigError(f"{what} has {len(seq)} frames; expected 1 or {n}")


def _save_element_sequence(elems: list[ForegroundElement], out_dir: str,
                           frame_rate: float, label: str) -> list[str]:
    rgb_pattern = os.path.join(out_dir, "rgb_%04d.pfm")
    alpha_pattern = os.path.join(out_dir, "alpha_%04d.pfm")
    save_sequence(FrameSequence([e.rgb for e in elems], frame_rate, label + "-rgb"),
                  rgb_pattern)
    save_sequence(FrameSequence([e.alpha for e in elems], frame_rate, label + "-alpha"),
                  alpha_pattern)
    return [rgb_pattern % i for i in range(len(elems))] + \
           [alpha_pattern % i for i in range(len(elems))]


def _parse_conditions(text: str) -> tuple[str, ...]:
    labels = []
    for token in text.split(","):
        token = token.strip().lower()
        labels.append(_CONDITION_SHORTHAND.get(token, token))
    return tuple(labels)


def _sequence_flows(seq: FrameSequence, cfg: FlowConfig) -> list[FlowField]:
    """Flow between consecutive same-condition frames; last frame reuses the
    previous pair's field (constant-velocity assumption)."""
    if len(seq) == 1:
        return [FlowField.zero(seq.frames[0].height, seq.frames[0].width)]
    flows = []
    for i in range(len(seq) - 1):
        field = estimate_flow(luminance(seq.frames[i]), luminance(seq.frames[i + 1]), cfg)
        field.source_index = i
        field.target_index = i + 1
        flows.append(field)
    flows.append(flows[-1])
    return flows


def _flow_config(args) -> FlowConfig:
    return FlowConfig(levels=args.flow_levels, iterations_per_level=args.flow_iterations,
                      smoothness=args.flow_smoothness)


def _add_flow_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--flow-levels", type=int, default=4)
    parser.add_argument("--flow-iterations", type=int, default=120)
    parser.add_argument("--flow-smoothness", type=float, default=0.08)


# -- subcommands -------------------------------------------------------------

def _cmd_synth(args) -> tuple[list[str], list[str]]:
    if args.scene:
        scene = synth.load_scene(_require(args.scene, "scene file"))
        inputs = [args.scene]
    elif args.random_seed is not None:
        scene = synth.random_scene(args.random_seed, width=args.width, height=args.height,
                                   frames=args.frames)
        inputs = []
    else:
        scene = synth.default_scene(width=args.width, height=args.height,
                                    frames=args.frames, bounce_fraction=args.bounce,
                                    crosstalk=not args.no_crosstalk)
        inputs = []
    if args.noise > 0:
        scene.noise_sigma = args.noise
        scene.noise_seed = args.seed
    written = synth.write_capture_set(scene, args.out, extended=args.extended)
    outputs = []
    for pattern in written.values():
        if "%" in os.path.basename(pattern):
            outputs += [p for _, p in expand_pattern(pattern)]
        else:
            outputs.append(pattern)
    if args.multiplex:
        schedule = LightingSchedule(
            conditions=_parse_conditions(args.multiplex),
            flash_rate=args.flash_rate, camera_rate=args.camera_rate,
            phase=args.phase, shutter_fraction=args.shutter)
        seq = synth.render_multiplexed(scene, schedule)
        pattern = os.path.join(args.out, "mux", "frame_%04d.pfm")
        save_sequence(seq, pattern, extra_meta={
            "schedule.conditions": ",".join(schedule.conditions),
            "schedule.flash_rate": f"{schedule.flash_rate:g}",
            "schedule.phase": str(schedule.phase),
            "schedule.shutter_fraction": f"{schedule.shutter_fraction:g}",
        })
        outputs += [pattern % i for i in range(len(seq))]
    return inputs, outputs


def _cmd_calibrate(args) -> tuple[list[str], list[str]]:
    if args.chart_dir:
        paths = {p: os.path.join(args.chart_dir, f"{p}.pfm") for p in ("red", "green", "blue")}
        meta_path = os.path.join(args.chart_dir, "chart_meta.txt")
        region_text = args.region
        if region_text is None and os.path.exists(meta_path):
            with open(meta_path, encoding="utf-8") as fh:
                meta = parse_config(fh.read())
            region_text = meta.get("region")
    else:
        paths = {"red": args.red, "green": args.green, "blue": args.blue}
        region_text = args.region
    for name, path in paths.items():
        if not path:
            raise ConfigError(f"missing --{name} chart capture")
        _require(path, f"{name} chart capture")
    if not region_text:
        raise ConfigError("chart region required (--region x,y,w,h)")
    x, y, w, h = (int(v) for v in region_text.replace(",", " ").split())
    region = ChartRegion(x=x, y=y, w=w, h=h)
    shots = {name: load_image(path) for name, path in paths.items()}
    cal = build_calibration(shots["red"], shots["green"], shots["blue"], region,
                            max_condition=args.max_condition)
    cal.save(args.out)
    print(f"calibration written: condition number {cal.condition_number:.3f}")
    return list(paths.values()), [args.out]


def _cmd_key(args) -> tuple[list[str], list[str]]:
    cal = _load_calibration(args)
    frames = _load_calibrated(args.frames, cal)
    clean = _load_calibrated(args.clean, cal)
    bounce = _load_calibrated(args.bounce, cal) if args.bounce else None
    _expand_frames(clean, len(frames), "clean plate")
    if bounce is not None:
        _expand_frames(bounce, len(frames), "bounce plate")
    mc = _matte_channel(args.matte_channel)

    def key_one(i: int) -> ForegroundElement:
        plate = _plate_for(i, clean, bounce)
        _, elem = key_frame(frames.frames[i], plate, mc, eps_alpha=args.eps_alpha,
                            bounce_order=args.bounce_order)
        return elem

    elems = _parallel_map(key_one, range(len(frames)), args.jobs)
    outputs = _save_element_sequence(elems, args.out_dir, frames.frame_rate, "element")
    inputs = [args.calibration, args.frames, args.clean] + ([args.bounce] if args.bounce else [])
    return inputs, outputs


def _cmd_composite(args) -> tuple[list[str], list[str]]:
    rgb = load_sequence(args.element_rgb)
    background = load_sequence(args.background)
    _expand_frames(background, len(rgb), "background")
    matte_seq = None
    alpha_seq = None
    if args.color_matte:
        matte_seq = load_sequence(args.color_matte)
        _expand_frames(matte_seq, len(rgb), "color matte")
    else:
        alpha_seq = load_sequence(args.element_alpha)
        if len(alpha_seq) != len(rgb):
            raise ConfigError("element rgb and alpha frame counts differ")

    def comp_one(i: int) -> LinearImage:
        bg = background.frames[i if len(background) > 1 else 0]
        if matte_seq is not None:
            matte = ColorMatte(matte_seq.frames[i if len(matte_seq) > 1 else 0])
            return over_color_matte(rgb.frames[i], matte, bg)
        return over_premultiplied(rgb.frames[i], alpha_seq.frames[i], bg)

    comped = _parallel_map(comp_one, range(len(rgb)), args.jobs)
    seq = FrameSequence(comped, rgb.frame_rate, "composite")
    save_sequence(seq, args.out, transfer=args.transfer, bit_depth=args.bit_depth)
    inputs = [args.element_rgb, args.element_alpha or "", args.background,
              args.color_matte or ""]
    outputs = [(args.out % i if "%" in os.path.basename(args.out) else args.out)
               for i in range(len(seq))]
    return [p for p in inputs if p], outputs


def _cmd_demux(args) -> tuple[list[str], list[str]]:
    seq = load_sequence(args.frames)
    meta = read_sidecar(args.frames)
    conditions = _parse_conditions(args.conditions or meta.get("schedule.conditions", ""))
    if not conditions or conditions == ("",):
        raise ConfigError("schedule conditions required (--conditions or sidecar)")
    schedule = LightingSchedule(
        conditions=conditions,
        flash_rate=args.flash_rate or float(meta.get("schedule.flash_rate", seq.frame_rate)),
        camera_rate=seq.frame_rate,
        phase=args.phase if args.phase is not None else int(meta.get("schedule.phase", 0)),
        shutter_fraction=args.shutter or float(meta.get("schedule.shutter_fraction", 0.5)),
    )
    streams = demux(seq, schedule)
    outputs = []
    for label, stream in streams.items():
        sub = synth.CONDITION_DIRS.get(label, label.replace("/", "_"))
        pattern = os.path.join(args.out_dir, sub, "frame_%04d.pfm")
        save_sequence(stream, pattern, extra_meta={
            "timestamps": ",".join(f"{t:g}" for t in (stream.timestamps or []))})
        outputs += [pattern % i for i in range(len(stream))]
    return [args.frames], outputs


def _cmd_tmmgs(args) -> tuple[list[str], list[str]]:
    cal = _load_calibration(args)
    mg = _load_calibrated(args.mg, cal)
    gm = _load_calibrated(args.gm, cal)
    clean = _load_calibrated(args.clean, cal)
    bounce = _load_calibrated(args.bounce, cal) if args.bounce else None
    if len(mg) != len(gm):
        raise ConfigError(f"mg has {len(mg)} frames but gm has {len(gm)}")
    _expand_frames(clean, len(mg), "clean plate")
    if bounce is not None:
        _expand_frames(bounce, len(mg), "bounce plate")
    mc = _matte_channel(args.matte_channel)
    flows: list[FlowField | None]
    if args.no_flow:
        flows = [None] * len(mg)
    else:
        flows = list(_sequence_flows(mg, _flow_config(args)))
    elems = []
    for i in range(len(mg)):
        plate = _plate_for(i, clean, bounce)
        elem = reconstruct_tmmgs(mg.frames[i], gm.frames[i], plate, flows[i], mc=mc)
        if bounce is not None:
            hold = (1.0 - elem.alpha.data)[..., None]
            bounce_frame = bounce.frames[i if len(bounce) > 1 else 0]
            elem = ForegroundElement(
                rgb=LinearImage(elem.rgb.data - hold * bounce_frame.data),
                alpha=elem.alpha, colorization_state=elem.colorization_state,
                matte_channel=elem.matte_channel)
        elems.append(elem)
    outputs = _save_element_sequence(elems, args.out_dir, mg.frame_rate, "tmmgs")
    inputs = [args.calibration, args.mg, args.gm, args.clean]
    return inputs + ([args.bounce] if args.bounce else []), outputs


def _cmd_tmm_classic(args) -> tuple[list[str], list[str]]:
    cal = _load_calibration(args) if args.calibration else None
    lit = _load_calibrated(args.lit, cal)
    silhouette = _load_calibrated(args.silhouette, cal)
    if len(lit) != len(silhouette):
        raise ConfigError("lit and silhouette frame counts differ")
    if args.background_plate:
        level = load_image(_require(args.background_plate, "background plate"))
        if cal is not None:
            level = apply_calibration(level, cal)
    else:
        level = tuple(float(v) for v in args.background_level.replace(",", " ").split())
    flows: list[FlowField | None]
    if args.no_flow:
        flows = [None] * len(lit)
    else:
        flows = list(_sequence_flows(lit, _flow_config(args)))
    elems = []
    mattes = []
    for i in range(len(lit)):
        elem, matte = classic_tmm(lit.frames[i], silhouette.frames[i], level, flows[i])
        elems.append(elem)
        mattes.append(matte)
    outputs = _save_element_sequence(elems, args.out_dir, lit.frame_rate, "tmm-classic")
    matte_pattern = os.path.join(args.out_dir, "matte_rgb_%04d.pfm")
    save_sequence(FrameSequence([m.alpha_rgb for m in mattes], lit.frame_rate,
                                "tmm-classic-matte"), matte_pattern)
    outputs += [matte_pattern % i for i in range(len(mattes))]
    return [args.lit, args.silhouette], outputs


def _cmd_triangulate(args) -> tuple[list[str], list[str]]:
    cal = _load_calibration(args) if args.calibration else None
    frames1 = _load_calibrated(args.frames1, cal)
    frames2 = _load_calibrated(args.frames2, cal)
    bg1 = _load_calibrated(args.bg1, cal)
    bg2 = _load_calibrated(args.bg2, cal)
    if len(frames1) != len(frames2):
        raise ConfigError("triangulation sequences must have equal frame counts")
    _expand_frames(bg1, len(frames1), "background 1")
    _expand_frames(bg2, len(frames1), "background 2")
    elems = []
    alphas = []
    matte_rgbs = []
    masks = []
    for i in range(len(frames1)):
        f1 = frames1.frames[i]
        f2 = frames2.frames[i]
        if args.align_red:
            field = align_by_red(f1, f2)
            f2 = warp(f2, field, 1.0)
        b1 = bg1.frames[i if len(bg1) > 1 else 0]
        b2 = bg2.frames[i if len(bg2) > 1 else 0]
        matte, elem = triangulation_matte(f1, b1, f2, b2)
        alphas.append(matte.alpha)
        elems.append(elem)
        masks.append(LinearImage(
            np.ones_like(matte.alpha.data) if matte.invalid is None
            else (~matte.invalid).astype(np.float32)))
        if args.color_matte:
            cm, _ = triangulation_color_matte(f1, b1, f2, b2)
            matte_rgbs.append(cm.alpha_rgb)
    outputs = _save_element_sequence(elems, args.out_dir, frames1.frame_rate, "triangulated")
    mask_pattern = os.path.join(args.out_dir, "valid_%04d.pfm")
    save_sequence(FrameSequence(masks, frames1.frame_rate, "triangulated-valid"), mask_pattern)
    outputs += [mask_pattern % i for i in range(len(masks))]
    if matte_rgbs:
        cm_pattern = os.path.join(args.out_dir, "matte_rgb_%04d.pfm")
        save_sequence(FrameSequence(matte_rgbs, frames1.frame_rate, "triangulated-matte"),
                      cm_pattern)
        outputs += [cm_pattern % i for i in range(len(matte_rgbs))]
    return [args.frames1, args.bg1, args.frames2, args.bg2], outputs


def _cmd_flow(args) -> tuple[list[str], list[str]]:
    a = load_image(_require(args.a, "frame a"))
    b = load_image(_require(args.b, "frame b"))
    pick = {"lum": luminance,
            "r": lambda img: img.channel(0),
            "g": lambda img: img.channel(1),
            "b": lambda img: img.channel(2)}[args.channel]
    field = estimate_flow(pick(a), pick(b), _flow_config(args))
    save_flow(field, args.out)
    if field.low_texture:
        print("warning: low-texture input; flow is low-confidence", file=sys.stderr)
    return [args.a, args.b], [args.out]


def _cmd_blur(args) -> tuple[list[str], list[str]]:
    seq = load_sequence(args.frames)
    if "%" in os.path.basename(args.flow):
        flow_paths = [p for _, p in expand_pattern(args.flow)]
        if len(flow_paths) not in (1, len(seq)):
            raise ConfigError(f"{len(flow_paths)} flow files for {len(seq)} frames")
    else:
        flow_paths = [_require(args.flow, "flow file")]
    fields = [load_flow(p) for p in flow_paths]

    def blur_one(i: int) -> LinearImage:
        field = fields[i if len(fields) > 1 else 0]
        return simulate_motion_blur(seq.frames[i], field, args.shutter)

    blurred = _parallel_map(blur_one, range(len(seq)), args.jobs)
    save_sequence(FrameSequence(blurred, seq.frame_rate, seq.label or "blurred"), args.out)
    outputs = [(args.out % i if "%" in os.path.basename(args.out) else args.out)
               for i in range(len(seq))]
    return [args.frames, args.flow], outputs


def _cmd_colorize_naive(args) -> tuple[list[str], list[str]]:
    rgb = load_sequence(args.element_rgb)
    alpha = load_sequence(args.element_alpha)
    if len(alpha) != len(rgb):
        raise ConfigError("element rgb and alpha frame counts differ")
    mc = _matte_channel(args.matte_channel)

    def colorize_one(i: int) -> LinearImage:
        frame = rgb.frames[i]
        if np.any(frame.data[:, :, mc.index] != 0):
            raise ConfigError(
                f"frame {i} already has {mc.channel}-channel data; not a keyed element")
        elem = ForegroundElement(rgb=frame, alpha=alpha.frames[i], matte_channel=mc)
        return naive_colorize(elem, args.rho).rgb

    colorized = _parallel_map(colorize_one, range(len(rgb)), args.jobs)
    save_sequence(FrameSequence(colorized, rgb.frame_rate, "naive-colorized"), args.out)
    outputs = [args.out % i for i in range(len(rgb))]
    return [args.element_rgb, args.element_alpha], outputs


def _cmd_export_training(args) -> tuple[list[str], list[str]]:
    seq = load_sequence(args.frames)
    if len(seq) == 0:
        raise ConfigError("empty training sequence")
    mc = _matte_channel(args.target_channel)
    os.makedirs(args.out_dir, exist_ok=True)
    entries = []
    outputs = []
    inputs = [args.frames]

    def crop(img: LinearImage) -> LinearImage:
        if args.crop <= 0:
            return img
        if args.crop > min(img.width, img.height):
            raise ConfigError(
                f"crop {args.crop} exceeds frame size {img.width}x{img.height}")
        y0 = (img.height - args.crop) // 2
        x0 = (img.width - args.crop) // 2
        return LinearImage(img.data[y0:y0 + args.crop, x0:x0 + args.crop])

    # pair lines hold paths relative to the manifest so the set can relocate
    if args.mode == "green":
        for i, frame in enumerate(seq.frames):
            mapped = tonemap(crop(frame), TONEMAP_EXPONENT)
            data = np.array(mapped.data, copy=True)
            target = data[:, :, mc.index].copy()
            data[:, :, mc.index] = 0.0
            in_path = os.path.join(args.out_dir, f"input_{i:04d}.pfm")
            target_path = os.path.join(args.out_dir, f"target_{i:04d}.pfm")
            save_image(LinearImage(data), in_path)
            save_image(LinearImage(target), target_path)
            entries.append(f"pair={os.path.basename(in_path)}\t-\t"
                           f"{os.path.basename(target_path)}")
            outputs += [in_path, target_path]
    else:  # matte mode: mono holdout + previous-frame RGB -> full-color holdout
        silhouette = seq
        rgb_seq = load_sequence(args.rgb)
        if len(rgb_seq) != len(silhouette):
            raise ConfigError("silhouette and rgb sequences must have equal frame counts")
        level = np.asarray(
            [float(v) for v in args.background_level.replace(",", " ").split()],
            dtype=np.float32)
        inputs.append(args.rgb)
        for i in range(1, len(silhouette)):
            holdout_rgb = np.clip(crop(silhouette.frames[i]).data / level, 0.0, 1.0)
            mono = holdout_rgb[:, :, mc.index]
            prev_rgb = tonemap(crop(rgb_seq.frames[i - 1]), TONEMAP_EXPONENT)
            mono_path = os.path.join(args.out_dir, f"matte_{i:04d}.pfm")
            prev_path = os.path.join(args.out_dir, f"prev_{i:04d}.pfm")
            target_path = os.path.join(args.out_dir, f"target_{i:04d}.pfm")
            save_image(LinearImage(mono), mono_path)
            save_image(prev_rgb, prev_path)
            save_image(LinearImage(holdout_rgb), target_path)
            entries.append(f"pair={os.path.basename(mono_path)}\t"
                           f"{os.path.basename(prev_path)}\t"
                           f"{os.path.basename(target_path)}")
            outputs += [mono_path, prev_path, target_path]

    manifest_path = os.path.join(args.out_dir, "training_manifest.txt")
    header = [
        "version=1",
        f"mode={args.mode}",
        f"target_channel={mc.channel}",
        f"tonemap={TONEMAP_EXPONENT}",
        f"seed={args.seed}",
        f"aug_luminance={AUG_LUMINANCE[0]},{AUG_LUMINANCE[1]}",
        f"aug_balance={AUG_BALANCE[0]},{AUG_BALANCE[1]}",
    ]
    with open(manifest_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(header + entries) + "\n")
    outputs.append(manifest_path)
    return inputs, outputs


# -- parser ------------------------------------------------------------------

def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="spectramatte",
        description="Spectrally multiplexed matting pipeline: calibrate, key, "
                    "composite, and verify against a synthetic stage.")
    sub = parser.add_subparsers(dest="command", metavar="command")
    subparsers: dict[str, argparse.ArgumentParser] = {}

    def add(name: str, func, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--config", help="key=value file supplying flag defaults")
        p.add_argument("--manifest", help="run manifest path (default: next to outputs)")
        p.add_argument("--jobs", type=int, default=1, help="parallel frame workers")
        p.add_argument("--seed", type=int, default=0, help="seed for randomized steps")
        subparsers[name] = p
        return p

    p = add("synth", _cmd_synth, "render a synthetic capture set with ground truth")
    p.add_argument("--out", required=True)
    p.add_argument("--scene", help="scene description file")
    p.add_argument("--random-seed", type=int, help="generate a randomized scene")
    p.add_argument("--width", type=int, default=160)
    p.add_argument("--height", type=int, default=120)
    p.add_argument("--frames", type=int, default=3)
    p.add_argument("--bounce", type=float, default=0.05)
    p.add_argument("--no-crosstalk", action="store_true")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--extended", action="store_true",
                   help="also render yellow-blue, silhouette, and triangulation conditions")
    p.add_argument("--multiplex", help="comma-separated conditions for an interleaved capture")
    p.add_argument("--flash-rate", type=float, default=48.0)
    p.add_argument("--camera-rate", type=float, default=48.0)
    p.add_argument("--phase", type=int, default=0)
    p.add_argument("--shutter", type=float, default=0.5)

    p = add("calibrate", _cmd_calibrate, "build the crosstalk-removal matrix from chart shots")
    p.add_argument("--chart-dir", help="directory holding red/green/blue.pfm and chart_meta.txt")
    p.add_argument("--red")
    p.add_argument("--green")
    p.add_argument("--blue")
    p.add_argument("--region", help="chart white-square rectangle: x,y,w,h")
    p.add_argument("--max-condition", type=float, default=50.0)
    p.add_argument("--out", required=True)

    p = add("key", _cmd_key, "solve matte and foreground from keyed frames")
    p.add_argument("--frames", required=True)
    p.add_argument("--clean", required=True, help="clean plate pattern")
    p.add_argument("--bounce", help="bounce plate pattern")
    p.add_argument("--calibration", required=True)
    p.add_argument("--matte-channel", default="G", choices=list("RGBrgb"))
    p.add_argument("--eps-alpha", type=float, default=1e-3)
    p.add_argument("--bounce-order", default="alpha-first",
                   choices=["alpha-first", "bounce-first"])
    p.add_argument("--out-dir", required=True)

    p = add("composite", _cmd_composite, "composite premultiplied elements over a background")
    p.add_argument("--element-rgb", required=True)
    p.add_argument("--element-alpha")
    p.add_argument("--color-matte", help="per-channel matte pattern (overrides --element-alpha)")
    p.add_argument("--background", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--transfer", default="linear")
    p.add_argument("--bit-depth", type=int, default=16)

    p = add("demux", _cmd_demux, "split an interleaved capture by lighting condition")
    p.add_argument("--frames", required=True)
    p.add_argument("--conditions", help="cycle labels, e.g. mg,gm (default: sidecar)")
    p.add_argument("--phase", type=int)
    p.add_argument("--flash-rate", type=float)
    p.add_argument("--shutter", type=float)
    p.add_argument("--out-dir", required=True)

    p = add("tmmgs", _cmd_tmmgs, "reconstruct full-color elements from alternating frames")
    p.add_argument("--mg", required=True, help="frames keyed against the matte field")
    p.add_argument("--gm", required=True, help="interposed inverse-lighting frames")
    p.add_argument("--clean", required=True)
    p.add_argument("--bounce")
    p.add_argument("--calibration", required=True)
    p.add_argument("--matte-channel", default="G", choices=list("RGBrgb"))
    p.add_argument("--no-flow", action="store_true")
    _add_flow_options(p)
    p.add_argument("--out-dir", required=True)

    p = add("tmm-classic", _cmd_tmm_classic, "lit/silhouette time-multiplexed matting")
    p.add_argument("--lit", required=True)
    p.add_argument("--silhouette", required=True)
    p.add_argument("--background-level", default="1,1,1")
    p.add_argument("--background-plate")
    p.add_argument("--calibration", help="crosstalk sidecar; omit for calibrated inputs")
    p.add_argument("--no-flow", action="store_true")
    _add_flow_options(p)
    p.add_argument("--out-dir", required=True)

    p = add("triangulate", _cmd_triangulate, "matte from two known backgrounds")
    p.add_argument("--frames1", required=True)
    p.add_argument("--bg1", required=True)
    p.add_argument("--frames2", required=True)
    p.add_argument("--bg2", required=True)
    p.add_argument("--calibration", help="crosstalk sidecar; omit for calibrated inputs")
    p.add_argument("--align-red", action="store_true",
                   help="align frame 2 to frame 1 by red-channel flow")
    p.add_argument("--color-matte", action="store_true",
                   help="also write the per-channel matte")
    p.add_argument("--out-dir", required=True)

    p = add("flow", _cmd_flow, "estimate dense optical flow between two frames")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--channel", default="lum", choices=["lum", "r", "g", "b"])
    _add_flow_options(p)
    p.add_argument("--out", required=True)

    p = add("blur", _cmd_blur, "synthesize box-shutter motion blur along a flow field")
    p.add_argument("--frames", required=True)
    p.add_argument("--flow", required=True, help="flow file or %%d pattern")
    p.add_argument("--shutter", type=float, default=0.5)
    p.add_argument("--out", required=True)

    p = add("colorize-naive", _cmd_colorize_naive,
            "fill the missing channel as a lit-channel linear combination")
    p.add_argument("--element-rgb", required=True)
    p.add_argument("--element-alpha", required=True)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--matte-channel", default="G", choices=list("RGBrgb"))
    p.add_argument("--out", required=True)

    p = add("export-training", _cmd_export_training,
            "write tonemapped training pairs and their manifest")
    p.add_argument("--frames", required=True, help="white-lit (or silhouette) sequence")
    p.add_argument("--mode", default="green", choices=["green", "matte"])
    p.add_argument("--rgb", help="matte mode: white-lit RGB sequence for prior frames")
    p.add_argument("--background-level", default="1,1,1")
    p.add_argument("--target-channel", default="G", choices=list("RGBrgb"))
    p.add_argument("--crop", type=int, default=0, help="center-crop size (0 = full frame)")
    p.add_argument("--out-dir", required=True)

    return parser, subparsers


def run_command(argv: list[str]) -> int:
    parser, subparsers = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help exits 0, bad usage exits 2
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        _apply_config(args, subparsers[args.command], argv)
        inputs, outputs = args.func(args)
        write_run_manifest(args.command, args, inputs, outputs, path=args.manifest)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv: list[str] | None = None) -> int:
    return run_command(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
