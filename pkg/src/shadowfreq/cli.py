"""Command-line front end.

    shadowfreq <decompose|spectrum|chroma|mask|loss|eval|wadm-demo|synth> [flags]

Every command prints a short summary, or with ``--json`` a machine-readable
report on stdout. Floats in JSON are rounded to 9 significant digits so repeated
runs are byte-identical. Exit codes: 0 success, 2 I/O failure, 3 validation
failure, 4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .chromaticity import DegenerateInputError, illumination_compensate, shadowfree_chromaticity
from .imagecore import ColorSpace, Image, ImageIOError, load_image, save_image
from .losses import (loss_align, loss_brightness_ch, loss_frequency, loss_recon, overall_loss,
                     LossReport)
from .mask import SoftMask, adjust_region, compute_soft_mask, mask_from_binary, region_stats
from .metrics import evaluate_dataset, load_manifest
from .spectrum import dft2, log_magnitude
from .synthetic import write_corpus
from .wadm import (ConvKernel, ParameterError, conv2d, deformable_conv, init_wadm_params,
                   load_params, wadm_trace)
from .wavelet import crop_even, haar_dwt2

CONFIG_ENV = "SHADOWFREQ_CONFIG"
EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_INVARIANT = 0, 2, 3, 4
SPECTRUM_WARN_PIXELS = 128 * 128


class InvariantError(RuntimeError):
    """A self-check inside a command failed."""


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclasses.dataclass
class Config:
    lambda_brightness_ch: float = 1.1
    lambda_frequency: float = 0.3
    lambda_align: float = 0.01
    lambda_recon: float = 1.0
    lambda1: float = 0.5
    lambda2: float = 0.5
    c: float = 1.0
    alpha: float = 1.0
    rmse_space: str = "rgb"
    threshold: float = 30.0
    crop: bool = False
    ic_reference: str = "perceived"
    out: Optional[str] = None
    seed: int = 0

    def validate(self) -> "Config":
        for f in ("lambda_brightness_ch", "lambda_frequency", "lambda_align", "lambda_recon",
                  "lambda1", "lambda2", "c", "alpha"):
            v = getattr(self, f)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"config: {f} must be finite and >= 0, got {v}")
        if not 0 <= self.threshold <= 255:
            raise ValueError(f"config: threshold must lie in [0, 255], got {self.threshold}")
        if self.rmse_space not in ("rgb", "lab"):
            raise ValueError(f"config: rmse_space must be 'rgb' or 'lab', got {self.rmse_space!r}")
        if self.ic_reference not in ("perceived", "input"):
            raise ValueError(f"config: ic_reference must be 'perceived' or 'input'")
        return self

    def weights(self) -> dict:
        return {"brightness_ch": self.lambda_brightness_ch, "frequency": self.lambda_frequency,
                "align": self.lambda_align, "recon": self.lambda_recon}


def _read_toml(path: str) -> dict:
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ImageIOError(f"{path}: cannot read config ({exc.strerror or exc})") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ValueError(f"{path}: invalid config ({exc})") from exc


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> Config:
    """Defaults, then the config file (``path`` or ``$SHADOWFREQ_CONFIG``), then overrides."""
    values = {}
    path = path or os.environ.get(CONFIG_ENV)
    if path:
        raw = _read_toml(path)
        # allow one level of tables, e.g. [loss] / [metrics]
        for k, v in raw.items():
            if isinstance(v, dict):
                values.update(v)
            else:
                values[k] = v
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    fields = {f.name: f for f in dataclasses.fields(Config)}
    unknown = sorted(set(values) - set(fields))
    if unknown:
        raise ValueError(f"config: unknown key(s) {unknown}")
    kwargs = {}
    for k, v in values.items():
        typ = type(getattr(Config, k)) if getattr(Config, k) is not None else str
        try:
            kwargs[k] = bool(v) if typ is bool else typ(v)
        except (TypeError, ValueError) as exc:
            raise ValueError(f"config: bad value for {k}: {v!r}") from exc
    return Config(**kwargs).validate()


# ---------------------------------------------------------------------------
# Report helpers
# ---------------------------------------------------------------------------

def _clean(obj):
    """JSON-safe copy with floats at 9 significant digits and non-finite values as null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        x = float(f"{x:.9g}")
        return 0.0 if x == 0 else x
    return obj


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), indent=2, sort_keys=True)


def _emit(report: dict, args, summary: str, name: str = "report.json") -> None:
    text = dumps(report)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / name).write_text(text + "\n")
    if args.json:
        sys.stdout.write(text + "\n")
    else:
        sys.stdout.write(summary.rstrip() + "\n")


def _need_out(args) -> Path:
    if not args.out:
        raise ValueError("this command writes images; pass --out <dir>")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _unit(x: np.ndarray) -> np.ndarray:
    """Affine map to [0, 1]; a constant array maps to zeros."""
    lo, hi = float(x.min()), float(x.max())
    return (x - lo) / (hi - lo) if hi > lo else np.zeros_like(x)


def _save_gray(arr: np.ndarray, path: Path) -> None:
    a = arr if arr.ndim == 3 else arr[:, :, None]
    save_image(Image(np.clip(a, 0.0, 1.0), ColorSpace.SRGB), path)


def _even(img: Image, crop: bool, what: str = "image") -> tuple[Image, Optional[dict]]:
    h, w = img.height, img.width
    if h % 2 == 0 and w % 2 == 0:
        return img, None
    if not crop:
        raise ValueError(f"{what} is {h}x{w}: height and width must both be even "
                         f"(use --crop to drop the trailing row/column)")
    data = crop_even(img.data)
    return Image(data, img.colorspace), {"from": [h, w], "to": list(data.shape[:2])}


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_decompose(args, cfg: Config) -> int:
    img, crop = _even(load_image(args.input), cfg.crop)
    out = _need_out(args)
    sb = haar_dwt2(img.data)
    energies = {}
    for name, band in zip("AHVD", sb):
        _save_gray(_unit(band), out / f"{name}.png")
        energies[name] = float(np.sum(band ** 2))
    total = float(np.sum(img.data ** 2))
    report = {"input": str(args.input), "input_shape": list(img.shape),
              "subband_shape": list(sb.shape), "energy": energies, "input_energy": total,
              "crop": crop}
    if abs(sum(energies.values()) - total) > 1e-9 * max(total, 1.0):
        raise InvariantError("subband energies do not add up to the input energy")
    lines = [f"{k}: energy {v:.6g}" for k, v in energies.items()]
    _emit(report, args, f"subbands {sb.shape[0]}x{sb.shape[1]} written to {out}\n" + "\n".join(lines),
          "decompose.json")
    return EXIT_OK


def cmd_spectrum(args, cfg: Config) -> int:
    img = load_image(args.input)
    out = _need_out(args)
    warnings = []
    if img.height * img.width > SPECTRUM_WARN_PIXELS:
        msg = (f"{img.height}x{img.width} exceeds 128x128 per channel; "
               "non-power-of-two sizes are slow")
        _warn(msg)
        warnings.append(msg)
    chans = {}
    for c in range(img.channels):
        spec = dft2(img.channel(c))
        lm = log_magnitude(np.fft.fftshift(spec))
        _save_gray(_unit(lm), out / f"spectrum_{c}.png")
        chans[str(c)] = {"dc": float(spec[0, 0].real), "energy": float(np.sum(np.abs(spec) ** 2))}
    report = {"input": str(args.input), "shape": list(img.shape), "channels": chans,
              "warnings": warnings}
    _emit(report, args, f"{img.channels} spectra written to {out}", "spectrum.json")
    return EXIT_OK


def _optional_mask(path: Optional[str], shape) -> Optional[SoftMask]:
    if not path:
        return None
    m = load_image(path).data.mean(axis=2)
    if m.shape != shape:
        raise ValueError(f"{path}: mask size {m.shape} does not match image {shape}")
    return mask_from_binary(m > 0.5)


def cmd_chroma(args, cfg: Config) -> int:
    img = load_image(args.input)
    if img.channels != 3:
        raise ValueError("chroma needs a 3-channel colour image")
    mask = _optional_mask(args.mask, (img.height, img.width))
    try:
        em = shadowfree_chromaticity(img)
        phy = shadowfree_chromaticity(img, normalize_brightness=False)
    except DegenerateInputError as exc:
        raise DegenerateInputError(f"{exc}; the invariant direction cannot be estimated") from exc
    ic = illumination_compensate(em, img, mask, reference=cfg.ic_reference)
    if args.out:
        out = _need_out(args)
        save_image(em.image, out / "sigma_em.png")
        save_image(ic.image, out / "sigma_ic.png")
        save_image(phy.image, out / "sigma_phy.png")
    report = {"input": str(args.input), "theta_star_degrees": em.theta_star_degrees,
              "theta_plane_degrees": em.theta_plane_degrees,
              "entropy_curve": em.entropy_curve, "excluded_pixels": em.excluded_pixels,
              "ic": {"reference": cfg.ic_reference, "gain": ic.gain, "bias": ic.bias,
                     "region": "mask" if mask is not None else "brightest_half"},
              "baseline": {"theta_star_degrees": phy.theta_star_degrees,
                           "theta_plane_degrees": phy.theta_plane_degrees,
                           "entropy_curve": phy.entropy_curve}}
    _emit(report, args, f"theta* = {em.theta_star_degrees:.0f} deg "
                        f"(baseline {phy.theta_star_degrees:.0f} deg), "
                        f"{em.excluded_pixels} pixels excluded", "chroma.json")
    return EXIT_OK


def cmd_mask(args, cfg: Config) -> int:
    shadow, free = load_image(args.shadow), load_image(args.free)
    sm = compute_soft_mask(shadow, free)
    stats = region_stats(shadow, sm)
    if args.out:
        out = _need_out(args)
        _save_gray((sm.m1 + 1.0) / 2.0, out / "mask.png")
    report = {"shadow": str(args.shadow), "free": str(args.free),
              "threshold_value": sm.threshold_value,
              "m1_min": float(sm.m1.min()), "m1_max": float(sm.m1.max()),
              "region_stats": stats.as_dict()}
    _emit(report, args, f"soft mask: {stats.count_masked} masked / "
                        f"{stats.count_unmasked} unmasked pixels", "mask.json")
    return EXIT_OK


def pair_losses(shadow: Image, free: Image, cfg: Config,
                true_mask: Optional[SoftMask] = None) -> dict:
    """All loss reports for one (shadow, shadow-free) pair plus the weighted total.

    The shadow image plays the generated side and the shadow-free image the real
    side; the brightness-chromaticity guidance map comes from the shadow image.
    A component that cannot be computed is left out and flagged.
    """
    if shadow.shape != free.shape:
        raise ValueError(f"pair shapes differ: {shadow.shape} vs {free.shape}")
    shadow, _ = _even(shadow, cfg.crop, "shadow image")
    free, _ = _even(free, cfg.crop, "shadow-free image")
    reports: dict[str, LossReport] = {}
    warnings = []
    reports["frequency"] = loss_frequency(shadow, free, cfg.lambda1, cfg.lambda2, cfg.c, cfg.alpha)

    soft = compute_soft_mask(shadow, free)
    try:
        guide = illumination_compensate(shadowfree_chromaticity(shadow), shadow, soft,
                                        reference=cfg.ic_reference)
        reports["brightness_ch"] = loss_brightness_ch(free, guide)
    except (DegenerateInputError, ValueError) as exc:
        warnings.append(f"brightness_ch skipped: {exc}")

    ref_stats = region_stats(free, soft)
    if ref_stats.masked_empty:
        # nothing is shadowed, so there is nothing to align
        reports["align"] = LossReport("align", 0.0, {}, {"channels": shadow.channels},
                                      flags=["empty_masked_region"])
    else:
        _, adj = adjust_region(shadow, soft, ref_stats)
        reports["align"] = loss_align(adj, ref_stats)

    truth = true_mask if true_mask is not None else soft
    reports["recon"] = loss_recon(soft, truth, free)
    total = overall_loss(reports, cfg.weights())
    return {"losses": {k: r.to_dict() for k, r in reports.items()},
            "overall": total.to_dict(), "warnings": warnings}


def _pairs_from(args):
    """(name, shadow path, free path, mask path) tuples from the positional arguments."""
    if args.free is not None:
        return [(Path(args.shadow).name, args.shadow, args.free, args.mask)]
    man = load_manifest(args.shadow)
    root = Path(man.root)
    return [(e.name, root / e.shadow, root / e.free, (root / e.mask) if e.mask else None)
            for e in sorted(man.entries, key=lambda e: e.name)]


def cmd_loss(args, cfg: Config) -> int:
    pairs = _pairs_from(args)
    per_pair, errors = [], []
    for name, sp, fp, mp in pairs:
        try:
            shadow, free = load_image(sp), load_image(fp)
            true_mask = _optional_mask(str(mp) if mp else None, (shadow.height, shadow.width))
            per_pair.append({"name": name, **pair_losses(shadow, free, cfg, true_mask)})
        except (OSError, ValueError) as exc:
            if len(pairs) == 1:
                raise
            errors.append({"name": name, "error": str(exc)})
    if not per_pair:
        raise ImageIOError("no pair could be evaluated")
    agg = {}
    keys = ["overall"] + sorted({k for p in per_pair for k in p["losses"]})
    for k in keys:
        vals = [p["overall"]["value"] if k == "overall" else p["losses"][k]["value"]
                for p in per_pair if k == "overall" or k in p["losses"]]
        agg[k] = {"mean": float(np.mean(vals)), "std": float(np.std(vals)), "count": len(vals)}
    report = {"pairs": per_pair, "aggregate": agg, "errors": errors,
              "config": {k: v for k, v in dataclasses.asdict(cfg).items() if k != "out"}}
    for p in per_pair:
        for w in p["warnings"]:
            _warn(f"{p['name']}: {w}")
    lines = [f"{k}: mean {v['mean']:.6g} (n={v['count']})" for k, v in agg.items()]
    _emit(report, args, "\n".join(lines), "loss.json")
    return EXIT_OK


def cmd_eval(args, cfg: Config) -> int:
    man = load_manifest(args.manifest)
    res = evaluate_dataset(man, masks=args.masks, threshold=cfg.threshold,
                           rmse_space=cfg.rmse_space)
    for e in res["errors"]:
        _warn(f"{e['name']}: {e['error']}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            keys = ["name", "mask_source", "psnr_s", "psnr_ns", "psnr_all",
                    "rmse_s", "rmse_ns", "rmse_all", "ssim_all"]
            wr = csv.writer(fh)
            wr.writerow(keys)
            for r in _clean(res["per_image"]):
                wr.writerow(["" if r[k] is None else r[k] for k in keys])
    agg = res["aggregate"]

    def fmt(v):
        return "n/a" if v is None else f"{v:.4g}"

    summary = (f"{agg['count']} evaluated, {agg['failed']} failed\n"
               f"PSNR S/NS/All: {fmt(agg['psnr_s'])} / {fmt(agg['psnr_ns'])} / {fmt(agg['psnr_all'])}\n"
               f"RMSE S/NS/All: {fmt(agg['rmse_s'])} / {fmt(agg['rmse_ns'])} / {fmt(agg['rmse_all'])}\n"
               f"SSIM: {fmt(agg['ssim_all'])}")
    _emit(res, args, summary, "eval.json")
    if agg["count"] == 0:
        return EXIT_IO
    return EXIT_OK


def cmd_wadm(args, cfg: Config) -> int:
    seed = cfg.seed if args.seed is None else args.seed
    if args.input:
        img, _ = _even(load_image(args.input), cfg.crop)
        x = np.moveaxis(img.data, 2, 0)[None]
        source = str(args.input)
    else:
        rng = np.random.default_rng(seed)
        x = rng.random((1, args.channels, args.size, args.size))
        source = f"synthetic(seed={seed})"
    if args.params:
        params = load_params(args.params)
    else:
        params = init_wadm_params(x.shape[1], args.c_out, seed=seed)
    tr = wadm_trace(x, params)
    b, c, h, w = x.shape
    expected = [b, params.c_out, h // 2, w // 2]
    y = tr["output"]
    shape_ok = list(y.shape) == expected
    finite = bool(np.all(np.isfinite(y)))
    contraction = bool(np.all(np.abs(tr["gated"]) <= np.abs(tr["wavelet"])))
    # zero-offset deformable convolution must reduce to plain convolution
    zero = np.zeros_like(tr["offsets"])
    k: ConvKernel = params.deform
    zdiff = float(np.max(np.abs(deformable_conv(tr["pooled"], zero, k) - conv2d(tr["pooled"], k))))
    report = {"source": source, "seed": seed, "input_shape": list(x.shape),
              "output_shape": list(y.shape), "expected_shape": expected,
              "checks": {"shape": shape_ok, "finite": finite, "gating_contraction": contraction,
                         "zero_offset_max_abs_diff": zdiff, "zero_offset": zdiff <= 1e-12},
              "output_stats": {"mean": float(y.mean()), "std": float(y.std()),
                               "min": float(y.min()), "max": float(y.max())}}
    ok = shape_ok and finite and contraction and zdiff <= 1e-12
    _emit(report, args, f"WADM {tuple(x.shape[1:])} -> {tuple(y.shape[1:])}; "
                        f"checks {'passed' if ok else 'FAILED'}", "wadm.json")
    if not ok:
        raise InvariantError("WADM self-check failed")
    return EXIT_OK


def cmd_synth(args, cfg: Config) -> int:
    seed = cfg.seed if args.seed is None else args.seed
    names = write_corpus(args.root, n_pairs=args.pairs, size=args.size, seed=seed)
    report = {"root": str(args.root), "pairs": names, "size": args.size, "seed": seed}
    _emit(report, args, f"{len(names)} synthetic pairs written to {args.root}", "synth.json")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"TOML config file (default: ${CONFIG_ENV})")
    common.add_argument("--out", help="output directory for images and the JSON report")
    common.add_argument("--json", action="store_true", help="print the JSON report on stdout")
    common.add_argument("--crop", action="store_true", default=None,
                        help="crop odd-sized images to even dimensions")

    p = argparse.ArgumentParser(prog="shadowfreq", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("decompose", parents=[common], help="Haar subbands as PNGs")
    s.add_argument("input")
    s.set_defaults(func=cmd_decompose)

    s = sub.add_parser("spectrum", parents=[common], help="log-magnitude spectra as PNGs")
    s.add_argument("input")
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("chroma", parents=[common], help="shadow-free chromaticity maps")
    s.add_argument("input")
    s.add_argument("--mask", help="binary shadow mask marking the shadow region")
    s.add_argument("--ic-reference", choices=("perceived", "input"), default=None)
    s.set_defaults(func=cmd_chroma)

    s = sub.add_parser("mask", parents=[common], help="soft shadow mask of a pair")
    s.add_argument("shadow")
    s.add_argument("free")
    s.set_defaults(func=cmd_mask)

    s = sub.add_parser("loss", parents=[common],
                       help="loss report for a pair, or for every pair of a dataset")
    s.add_argument("shadow", help="shadow image, or a dataset directory / manifest")
    s.add_argument("free", nargs="?", help="shadow-free image (omit for a dataset)")
    s.add_argument("--mask", help="ground-truth binary mask for the pair")
    for name in ("lambda-brightness-ch", "lambda-frequency", "lambda-align", "lambda-recon",
                 "lambda1", "lambda2", "c", "alpha"):
        s.add_argument(f"--{name}", type=float, default=None)
    s.add_argument("--ic-reference", choices=("perceived", "input"), default=None)
    s.set_defaults(func=cmd_loss)

    s = sub.add_parser("eval", parents=[common], help="region metrics over a dataset")
    s.add_argument("manifest", help="dataset directory or JSON manifest")
    s.add_argument("--masks", choices=("auto", "provided", "threshold"), default="auto")
    s.add_argument("--threshold", type=float, default=None)
    s.add_argument("--rmse-space", choices=("rgb", "lab"), default=None)
    s.add_argument("--csv", help="also write the per-image table as CSV")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("wadm-demo", parents=[common], help="WADM forward pass and self-checks")
    s.add_argument("input", nargs="?", help="image to feed (omit with --synthetic)")
    s.add_argument("--synthetic", action="store_true", help="use a seeded random input")
    s.add_argument("--params", help="JSON parameter file")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--c-out", type=int, default=8)
    s.add_argument("--channels", type=int, default=3)
    s.add_argument("--size", type=int, default=64)
    s.set_defaults(func=cmd_wadm)

    s = sub.add_parser("synth", parents=[common], help="write a seeded synthetic dataset")
    s.add_argument("root")
    s.add_argument("--pairs", type=int, default=3)
    s.add_argument("--size", type=int, default=64)
    s.add_argument("--seed", type=int, default=None)
    s.set_defaults(func=cmd_synth)
    return p


_OVERRIDES = ("lambda_brightness_ch", "lambda_frequency", "lambda_align", "lambda_recon",
              "lambda1", "lambda2", "c", "alpha", "threshold", "rmse_space", "crop",
              "ic_reference", "out")


def _warn(msg: str) -> None:
    sys.stderr.write(f"shadowfreq: warning: {msg}\n")


def _fail(exc: Exception) -> None:
    sys.stderr.write(f"shadowfreq: error: {exc}\n")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "wadm-demo" and not args.input and not args.synthetic:
        parser.error("wadm-demo needs an input image or --synthetic")
    try:
        cfg = load_config(args.config, {k: getattr(args, k, None) for k in _OVERRIDES})
        if cfg.out and not args.out:
            args.out = cfg.out
        return args.func(args, cfg)
    except (ValueError, ParameterError) as exc:
        _fail(exc)
        return EXIT_INVALID
    except InvariantError as exc:
        _fail(exc)
        return EXIT_INVARIANT
    except OSError as exc:
        _fail(exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
