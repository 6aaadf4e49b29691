"""polarcli: scene IO, preprocessing and orchestration of the polarsynth modules.

Exit codes: 0 success, 2 missing/corrupt input, 3 precondition or shape
violation, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import io as pio
from .errors import FormatError, NumericalError, PreconditionError, ShapeError
from .metrics import evaluate
from .mosaic import MosaicPattern, SensorNoiseModel, apply_noise, demosaic, mosaic
from .pbrdf import Material, SceneLight, make_sphere, render_polar
from .stokes import LUMA_WEIGHTS, PolarStateMap, decompose_stack, malus_intensity, synthesize_stack

log = logging.getLogger("polarcli")

EXIT_INPUT = 2
EXIT_PRECONDITION = 3
EXIT_NUMERICAL = 4


def echo_config(args: argparse.Namespace) -> None:
    for key, value in sorted(vars(args).items()):
        if key == "func":
            continue
        print(f"config.{key}={value}")


def _default_out(scene: Path, suffix: str) -> Path:
    return scene.parent / f"{scene.name}_{suffix}"


def _load_any_state(scene) -> tuple[PolarStateMap, object]:
    """Property maps and a 4-angle stack from either scene layout."""
    layout = pio.detect_layout(scene)
    if layout == "maps":
        state = pio.load_state(scene)
        return state, synthesize_stack(state)
    if layout == "angles":
        stack = pio.load_stack(scene)
        return decompose_stack(stack), stack
    stack = demosaic(pio.load_mosaic(scene))
    return decompose_stack(stack), stack


def _summary(name: str, arr) -> str:
    return f"{name}: min={np.min(arr):.6f} max={np.max(arr):.6f}"


# --------------------------------------------------------------------- commands


def cmd_decompose(args) -> int:
    scene = Path(args.scene)
    if pio.detect_layout(scene) != "angles":
        raise FormatError(f"{scene}: decompose needs angle images {pio.ANGLE_FILES}")
    raw = pio.read_pfm(scene / pio.ANGLE_FILES[0])
    stack = pio.load_stack(scene, grayscale=not args.keep_color)
    state = decompose_stack(stack)
    meta = pio.read_meta(scene)
    if raw.ndim == 3 and not args.keep_color:
        meta.setdefault("gray_weights", ",".join(str(w) for w in LUMA_WEIGHTS))
    out = Path(args.out) if args.out else _default_out(scene, "maps")
    pio.save_state(out, state, meta)
    print(_summary("s0", state.s0))
    print(_summary("dolp", state.dolp))
    print(_summary("aolp", state.aolp))
    print(f"valid_fraction={state.valid.mean():.6f}")
    print(f"wrote {out}")
    return 0


def normalize_angle_deg(angle: float) -> float:
    norm = math.fmod(angle, 180.0)
    if norm < 0:
        norm += 180.0
    if norm != angle:
        log.warning("analyzer angle %g normalized to %g degrees", angle, norm)
    return norm


def cmd_synthesize(args) -> int:
    scene = Path(args.scene)
    if pio.detect_layout(scene) != "maps":
        raise FormatError(f"{scene}: synthesize needs property maps {pio.MAP_FILES}")
    state = pio.load_state(scene)
    out = Path(args.out) if args.out else _default_out(scene, "stack" if args.stack else "angle")
    meta = pio.read_meta(scene)
    if args.stack:
        pio.save_stack(out, synthesize_stack(state), meta)
    else:
        angle = normalize_angle_deg(args.angle)
        out.mkdir(parents=True, exist_ok=True)
        name = f"I{int(angle):03d}.pfm" if angle.is_integer() else f"I{angle:.2f}.pfm"
        pio.write_pfm(out / name, malus_intensity(state, math.radians(angle)))
    print(f"wrote {out}")
    return 0


def crop_origins(height: int, width: int, size: int, count: int, seed: int) -> list[tuple[int, int]]:
    """Distinct even-aligned crop origins, at most ``count`` of them."""
    if size % 2:
        raise PreconditionError("crop size must be even")
    if size > min(height, width):
        raise PreconditionError(f"crop size {size} exceeds image {width}x{height}")
    ny = (height - size) // 2 + 1
    nx = (width - size) // 2 + 1
    total = ny * nx
    rng = np.random.default_rng(seed)
    picks = rng.choice(total, size=min(count, total), replace=False)
    return [(int(2 * (k // nx)), int(2 * (k % nx))) for k in picks]


def cmd_crop(args) -> int:
    scene = Path(args.scene)
    pio.detect_layout(scene)
    files = sorted(scene.glob("*.pfm"))
    images = {f.name: pio.read_pfm(f) for f in files}
    shapes = {img.shape[:2] for img in images.values()}
    if len(shapes) != 1:
        raise ShapeError(f"{scene}: images differ in size {sorted(shapes)}")
    h, w = shapes.pop()
    origins = crop_origins(h, w, args.size, args.count, args.seed)
    meta = pio.read_meta(scene)
    meta["seed"] = str(args.seed)
    out = Path(args.out) if args.out else _default_out(scene, "crops")
    for i, (y, x) in enumerate(origins):
        d = out / f"crop_{i:04d}"
        d.mkdir(parents=True, exist_ok=True)
        for name, img in images.items():
            pio.write_pfm(d / name, img[y : y + args.size, x : x + args.size])
        pio.write_meta(d, meta)
        print(f"crop_{i:04d} y={y} x={x}")
    print(f"wrote {len(origins)} crops to {out}")
    return 0


def _parse_vec(text: str) -> tuple[float, float, float]:
    vals = [float(v) for v in text.split(",")]
    if len(vals) != 3:
        raise PreconditionError(f"expected x,y,z, got {text!r}")
    v = np.asarray(vals)
    n = np.linalg.norm(v)
    if n == 0:
        raise PreconditionError("light direction must be non-zero")
    return tuple(v / n)


def cmd_oracle(args) -> int:
    normals = make_sphere(args.resolution, args.radius)
    material = Material(args.eta, args.mode, args.albedo)
    light = SceneLight(_parse_vec(args.light), args.ambient)
    state = render_polar(normals, material, light)
    out = Path(args.out)
    pio.save_state(out, state, {"peak": "1.0", "seed": str(args.seed)})
    print(_summary("dolp", state.dolp))
    print(f"valid_fraction={state.valid.mean():.6f}")
    print(f"wrote {out}")
    return 0


def cmd_mosaic(args) -> int:
    scene = Path(args.scene)
    if pio.detect_layout(scene) != "angles":
        raise FormatError(f"{scene}: mosaic needs angle images")
    stack = pio.load_stack(scene)
    frame = mosaic(stack, MosaicPattern.from_string(args.pattern))
    model = SensorNoiseModel(args.read_sigma, args.shot_gain, args.bit_depth, args.seed)
    frame = apply_noise(frame, model)
    meta = pio.read_meta(scene)
    meta.update(seed=str(args.seed), bitdepth=str(args.bit_depth or "none"))
    out = Path(args.out) if args.out else _default_out(scene, "mosaic")
    pio.save_mosaic(out, frame, meta)
    print(f"wrote {out}")
    return 0


def cmd_demosaic(args) -> int:
    scene = Path(args.scene)
    if pio.detect_layout(scene) != "mosaic":
        raise FormatError(f"{scene}: demosaic needs {pio.MOSAIC_FILE}")
    stack = demosaic(pio.load_mosaic(scene))
    out = Path(args.out) if args.out else _default_out(scene, "stack")
    pio.save_stack(out, stack, pio.read_meta(scene))
    print(f"wrote {out}")
    return 0


def cmd_metrics(args) -> int:
    gt, gt_stack = _load_any_state(Path(args.gt))
    est, est_stack = _load_any_state(Path(args.est))
    if gt.shape != est.shape:
        raise ShapeError(f"ground truth {gt.shape} vs estimate {est.shape}")
    report = evaluate(gt, est, gt_stack, est_stack, peak=args.peak)
    print(report.to_text())
    if args.csv:
        path = Path(args.csv)
        new = not path.exists()
        with open(path, "a") as f:
            if new:
                f.write(report.csv_header() + "\n")
            f.write(report.csv_row() + "\n")
    return 0


def _training_config(args):
    from .diffusion import TrainingConfig

    return TrainingConfig(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        steps=args.steps,
        seed=args.seed,
        patch_size=args.patch_size,
        T=args.timesteps,
        beta_start=args.beta_start,
        beta_end=args.beta_end,
        widths=tuple(int(w) for w in args.widths.split(",")),
    )


def _scene_patches(root: Path, patch_size: int):
    from .diffusion import OraclePatches

    states = []
    for d in sorted(p for p in root.iterdir() if p.is_dir()):
        state, _ = _load_any_state(d)
        if state.shape != (patch_size, patch_size):
            raise ShapeError(f"{d}: expected {patch_size}x{patch_size} maps, got {state.shape}")
        states.append(state)
    if not states:
        raise FormatError(f"{root}: no scene directories found")
    return OraclePatches(
        s0=np.stack([s.s0 for s in states]),
        dolp=np.stack([s.dolp for s in states]),
        aolp=np.stack([s.aolp for s in states]),
        valid=np.stack([s.valid for s in states]),
        mask=np.stack([s.s0 > 0 for s in states]),
    )


def cmd_train(args) -> int:
    import torch

    from .diffusion import oracle_patches, save_checkpoint, train

    torch.set_num_threads(args.threads)
    config = _training_config(args)
    if args.data:
        data = _scene_patches(Path(args.data), config.patch_size)
    else:
        data = oracle_patches(args.n_patches, config.patch_size, seed=args.seed)
    result = train(data, config, args.representation)
    save_checkpoint(
        args.out, result.model, result.representation,
        {"T": config.T, "beta_start": config.beta_start, "beta_end": config.beta_end},
    )
    if args.loss_csv:
        with open(args.loss_csv, "w") as f:
            f.write("step,loss\n")
            for i, v in enumerate(result.losses):
                f.write(f"{i},{v:.8f}\n")
    head = np.mean(result.losses[: max(1, len(result.losses) // 10)])
    tail = np.mean(result.losses[-max(1, len(result.losses) // 10) :])
    print(f"initial_loss={head:.6f}")
    print(f"final_loss={tail:.6f}")
    print(f"wrote {args.out}")
    return 0


def cmd_sample(args) -> int:
    from .diffusion import condition_input, decode_representation, load_checkpoint, sample

    model, rep, schedule, _ = load_checkpoint(args.checkpoint)
    cond_state, _ = _load_any_state(Path(args.condition))
    s0 = cond_state.s0
    out = sample(model, condition_input(s0, rep, args.peak), schedule, seed=args.seed)
    state, stack = decode_representation(out, rep, s0, args.peak)
    dest = Path(args.out)
    pio.save_state(dest, state, {"seed": str(args.seed), "peak": str(args.peak)})
    print(f"valid_fraction={state.valid.mean():.6f}")
    print(f"wrote {dest}")
    return 0


def cmd_ablate(args) -> int:
    import torch

    from .diffusion import ablation_harness, oracle_patches

    torch.set_num_threads(args.threads)
    config = _training_config(args)
    patches = oracle_patches(args.n_train + args.n_test, config.patch_size, seed=args.seed)
    table = ablation_harness(patches, config, n_test=args.n_test)
    text = table.to_csv()
    Path(args.out).write_text(text)
    sys.stdout.write(text)
    return 0


def hsv_to_rgb(h, s, v) -> np.ndarray:
    """Vectorized HSV -> RGB with all components in [0, 1]."""
    h = np.asarray(h) * 6.0
    i = np.floor(h).astype(int) % 6
    f = h - np.floor(h)
    p = v * (1 - s)
    q = v * (1 - s * f)
    t = v * (1 - s * (1 - f))
    table = [(v, t, p), (q, v, p), (p, v, t), (p, q, v), (t, p, v), (v, p, q)]
    rgb = np.zeros(np.shape(h) + (3,))
    for k, (r, g, b) in enumerate(table):
        m = i == k
        rgb[m, 0] = np.broadcast_to(r, np.shape(h))[m]
        rgb[m, 1] = np.broadcast_to(g, np.shape(h))[m]
        rgb[m, 2] = np.broadcast_to(b, np.shape(h))[m]
    return rgb


def aolp_to_rgb(aolp, valid) -> np.ndarray:
    """Doubled-angle hue so that +90 and -90 degrees share a colour; gray where invalid."""
    hue = np.mod(2.0 * np.rad2deg(aolp), 360.0) / 360.0
    return hsv_to_rgb(hue, np.asarray(valid, dtype=np.float64), np.ones_like(hue))


def cmd_visualize(args) -> int:
    scene = Path(args.scene)
    if pio.detect_layout(scene) != "maps":
        raise FormatError(f"{scene}: visualize needs property maps")
    state = pio.load_state(scene)
    if len(state.shape) != 2:
        raise PreconditionError("visualize expects single-channel maps")
    out = Path(args.out) if args.out else _default_out(scene, "vis")
    out.mkdir(parents=True, exist_ok=True)
    pio.write_pnm(out / "aolp.ppm", pio.to_codes(aolp_to_rgb(state.aolp, state.valid)))
    pio.write_pnm(out / "dolp.pgm", pio.to_codes(state.dolp))
    print(f"wrote {out}")
    return 0


# --------------------------------------------------------------------- parser


def _add_training_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--steps", type=int, default=1200)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--patch-size", type=int, default=16)
    p.add_argument("--timesteps", type=int, default=200)
    p.add_argument("--beta-start", type=float, default=1e-4)
    p.add_argument("--beta-end", type=float, default=0.1)
    p.add_argument("--widths", default="16,32,32")
    p.add_argument("--threads", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polarcli", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="angle images -> s0/aolp/dolp maps")
    p.add_argument("scene")
    p.add_argument("--out")
    p.add_argument("--keep-color", action="store_true", help="decompose each channel instead of luma-reducing")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("synthesize", help="property maps -> analyzer image(s)")
    p.add_argument("scene")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--angle", type=float, help="analyzer angle in degrees")
    g.add_argument("--stack", action="store_true", help="write the 0/45/90/135 stack")
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("crop", help="random even-aligned square crops")
    p.add_argument("scene")
    p.add_argument("--size", type=int, default=512)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_crop)

    p = sub.add_parser("oracle", help="render analytic ground-truth maps")
    p.add_argument("--shape", choices=["sphere"], default="sphere")
    p.add_argument("--resolution", type=int, default=64)
    p.add_argument("--radius", type=float, default=0.9)
    p.add_argument("--eta", type=float, default=1.5)
    p.add_argument("--mode", choices=["diffuse", "specular"], default="diffuse")
    p.add_argument("--albedo", type=float, default=0.8)
    p.add_argument("--light", default="0,0,1")
    p.add_argument("--ambient", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("mosaic", help="angle images -> noisy sensor mosaic")
    p.add_argument("scene")
    p.add_argument("--pattern", default="90,45,135,0")
    p.add_argument("--read-sigma", type=float, default=0.0)
    p.add_argument("--shot-gain", type=float, default=0.0)
    p.add_argument("--bit-depth", type=int, choices=[8, 12, 16])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_mosaic)

    p = sub.add_parser("demosaic", help="sensor mosaic -> angle images")
    p.add_argument("scene")
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_demosaic)

    p = sub.add_parser("metrics", help="compare two scenes")
    p.add_argument("gt")
    p.add_argument("est")
    p.add_argument("--peak", type=float, default=1.0)
    p.add_argument("--csv")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("train", help="train a conditional diffusion model")
    p.add_argument("--representation", choices=["images", "raw", "encoded"], default="encoded")
    p.add_argument("--data", help="directory of patch scenes; oracle patches when omitted")
    p.add_argument("--n-patches", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--loss-csv")
    _add_training_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="generate polarization maps for a condition scene")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--condition", required=True)
    p.add_argument("--peak", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("ablate", help="representation ablation on oracle data")
    p.add_argument("--n-train", type=int, default=2000)
    p.add_argument("--n-test", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_training_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("visualize", help="AoLP hue / DoLP gray images")
    p.add_argument("scene")
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_visualize)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    echo_config(args)
    try:
        return args.func(args)
    except (FormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ShapeError, PreconditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
