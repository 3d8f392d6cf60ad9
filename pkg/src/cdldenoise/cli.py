"""Command-line entry point: train / noise / denoise / eval / synth / report.

Option precedence is flags > config file (--config, key=value lines) >
built-in defaults.  Every run prints its fully resolved configuration to
stderr; machine-readable results go to stdout as key=value lines.  Exit
status: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import figures
from .denoise import DenoiseConfig, denoise_basic, denoise_group, error_map
from .dictlearn import TrainConfig, load_dictionaries, save_dictionaries, train
from .exceptions import CdlError, EmptyCorpus
from .imagio import (
    GrayImage,
    NoiseSpec,
    RgbImage,
    add_gaussian_noise,
    decode_any,
    encode_image,
    encode_raw,
    rgb_to_intensity,
)
from .metrics import psnr, rmse
from .patches import build_training_set
from .synth import synth_pair


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: A003 - argparse hook
        raise _UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class _Opt:
    name: str
    parse: Callable[[str], Any] = str
    default: Any = None
    required: bool = False
    flag: bool = False
    repeat: bool = False
    help: str = ""


_SUBCOMMANDS: dict[str, list[_Opt]] = {
    "train": [
        _Opt("target-dir", required=True, help="directory of target-modality images"),
        _Opt("guide-dir", required=True, help="directory of guidance images"),
        _Opt("side", int, 8, help="patch side length"),
        _Opt("atoms", int, 1024, help="atoms per dictionary"),
        _Opt("lambda", float, 0.05, help="l1 code penalty"),
        _Opt("samples", int, 50000, help="training patch pairs to sample"),
        _Opt("inner-sweeps", int, 20, help="code/atom alternations per stage"),
        _Opt("outer-rounds", int, 5, help="common/unique alternations"),
        _Opt("seed", int, 0, help="sampling and init seed"),
        _Opt("out", required=True, help="output dictionary file (.cdl)"),
    ],
    "noise": [
        _Opt("input", required=True, help="clean input image (PGM/PPM)"),
        _Opt("sigma", float, required=True, help="noise std in 8-bit units"),
        _Opt("seed", int, 0, help="noise seed"),
        _Opt("out", required=True, help="clamped 8-bit PGM output"),
        _Opt("raw-out", help="optional unclamped CDR1 float raster"),
    ],
    "denoise": [
        _Opt("input", required=True, help="noisy image (PGM or CDR1)"),
        _Opt("guide", required=True, help="clean guidance image (PGM/PPM)"),
        _Opt("dict", required=True, help="dictionary file (.cdl)"),
        _Opt("sigma", float, required=True, help="noise std in 8-bit units"),
        _Opt("c", float, 1.15, help="residual budget gain"),
        _Opt("smax", int, 16, help="support cap per patch"),
        _Opt("mu", float, 0.0, help="noisy-input blend weight"),
        _Opt("stride", int, 1, help="patch extraction stride"),
        _Opt("group", flag=True, help="use cluster-shared supports"),
        _Opt("clusters", int, help="cluster count (default: patches/16)"),
        _Opt("cluster-sample", int, 2000, help="subset size for the linkage"),
        _Opt("seed", int, 0, help="clustering subsample seed"),
        _Opt("threads", int, 1, help="worker thread cap"),
        _Opt("out", required=True, help="denoised 8-bit PGM output"),
        _Opt("errmap-ref", help="ground truth for the error map"),
        _Opt("errmap-out", help="rescaled error map PGM output"),
    ],
    "eval": [
        _Opt("ref", required=True, help="reference image"),
        _Opt("test", required=True, help="image under test"),
        _Opt("clamp", flag=True, help="clamp both images to [0,1] first"),
    ],
    "synth": [
        _Opt("width", int, required=True),
        _Opt("height", int, required=True),
        _Opt("seed", int, 0),
        _Opt("out-target", required=True, help="target-modality PGM output"),
        _Opt("out-guide", required=True, help="guidance-modality PGM output"),
        _Opt("unique-amplitude", float, 0.04, help="modality-specific texture amplitude"),
    ],
    "report": [
        _Opt("dict", help="dictionary file to render as an atom mosaic"),
        _Opt("ref", help="reference image for metric/error figures"),
        _Opt("test", repeat=True, help="image under test (repeatable)"),
        _Opt("out-dir", required=True, help="directory for figures and CSV"),
        _Opt("clamp", flag=True, help="clamp images to [0,1] before metrics"),
        _Opt("max-atoms", int, 256, help="atoms shown per mosaic panel"),
    ],
}


def _build_parser() -> _Parser:
    parser = _Parser(prog="cdldenoise", description=__doc__)
    subs = parser.add_subparsers(dest="subcommand")
    for name, opts in _SUBCOMMANDS.items():
        sub = subs.add_parser(
            name, argument_default=argparse.SUPPRESS, help=f"{name} workflow"
        )
        sub.add_argument("--config", help="key=value config file")
        for opt in opts:
            flag = f"--{opt.name}"
            if opt.flag:
                sub.add_argument(flag, action="store_true", help=opt.help)
            elif opt.repeat:
                sub.add_argument(flag, action="append", help=opt.help)
            else:
                sub.add_argument(flag, type=opt.parse, help=opt.help)
    return parser


def _load_config_file(path: str, opts: list[_Opt]) -> dict[str, Any]:
    table = {opt.name: opt for opt in opts}
    values: dict[str, Any] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or key not in table:
                raise _UsageError(f"{path}:{lineno}: unknown config entry {line!r}")
            opt = table[key]
            try:
                if opt.flag:
                    values[key] = _parse_bool(value.strip())
                elif opt.repeat:
                    values[key] = [v.strip() for v in value.split(",") if v.strip()]
                else:
                    values[key] = opt.parse(value.strip())
            except ValueError as exc:
                raise _UsageError(f"{path}:{lineno}: {exc}") from None
    return values


def _resolve(name: str, namespace: argparse.Namespace) -> dict[str, Any]:
    opts = _SUBCOMMANDS[name]
    explicit = {
        key.replace("_", "-"): value for key, value in vars(namespace).items()
    }
    resolved: dict[str, Any] = {}
    for opt in opts:
        resolved[opt.name] = False if opt.flag else opt.default
    if "config" in explicit:
        resolved.update(_load_config_file(explicit.pop("config"), opts))
    explicit.pop("subcommand", None)
    resolved.update(explicit)
    missing = [
        f"--{opt.name}"
        for opt in opts
        if opt.required and resolved.get(opt.name) is None
    ]
    if missing:
        raise _UsageError(
            f"cdldenoise {name}: missing required option(s): {', '.join(missing)}\n"
            f"usage: cdldenoise {name} ..."
        )
    return resolved


def _print_config(name: str, resolved: dict[str, Any]) -> None:
    print(f"config subcommand={name}", file=sys.stderr)
    for key in sorted(resolved):
        print(f"config {key}={resolved[key]}", file=sys.stderr)


def _read_gray(path: str) -> GrayImage:
    with open(path, "rb") as fh:
        img = decode_any(fh.read())
    if isinstance(img, RgbImage):
        return rgb_to_intensity(img)
    return img


def _write_bytes(path: str, blob: bytes) -> None:
    with open(path, "wb") as fh:
        fh.write(blob)


def _clamped(img: GrayImage) -> GrayImage:
    return GrayImage(np.clip(img.pixels, 0.0, 1.0))


def _cmd_train(o: dict[str, Any]) -> int:
    target_dir, guide_dir = Path(o["target-dir"]), Path(o["guide-dir"])
    names = sorted(
        p.name
        for p in target_dir.iterdir()
        if p.suffix in (".pgm", ".ppm") and (guide_dir / p.name).is_file()
    )
    if not names:
        raise EmptyCorpus(f"no paired images between {target_dir} and {guide_dir}")
    targets = [_read_gray(str(target_dir / name)) for name in names]
    guides = [_read_gray(str(guide_dir / name)) for name in names]
    print(f"pairing {len(names)} image pairs: {', '.join(names)}", file=sys.stderr)
    ts = build_training_set(
        targets, guides, side=o["side"], count=o["samples"], seed=o["seed"]
    )
    cfg = TrainConfig(
        lambd=o["lambda"],
        atoms=o["atoms"],
        inner_sweeps=o["inner-sweeps"],
        outer_rounds=o["outer-rounds"],
        seed=o["seed"],
    )
    ds = train(ts, cfg)
    save_dictionaries(ds, o["out"])
    print(f"dict={o['out']}")
    return 0


def _cmd_noise(o: dict[str, Any]) -> int:
    clean = _read_gray(o["input"])
    noisy = add_gaussian_noise(clean, NoiseSpec(sigma=o["sigma"], seed=o["seed"]))
    _write_bytes(o["out"], encode_image(noisy))
    if o.get("raw-out"):
        _write_bytes(o["raw-out"], encode_raw(noisy))
    return 0


def _cmd_denoise(o: dict[str, Any]) -> int:
    if bool(o.get("errmap-ref")) != bool(o.get("errmap-out")):
        raise _UsageError(
            "cdldenoise denoise: --errmap-ref and --errmap-out must be given together"
        )
    noisy = _read_gray(o["input"])
    guide = _read_gray(o["guide"])
    ds = load_dictionaries(o["dict"])
    cfg = DenoiseConfig(
        sigma=o["sigma"],
        gain=o["c"],
        max_support=o["smax"],
        blend=o["mu"],
        stride=o["stride"],
        group=o["group"],
        clusters=o.get("clusters"),
        sample_cap=o["cluster-sample"],
        seed=o["seed"],
        threads=o["threads"],
    )
    runner = denoise_group if cfg.group else denoise_basic
    denoised = runner(noisy, guide, ds, cfg)
    _write_bytes(o["out"], encode_image(denoised))
    if o.get("errmap-ref"):
        ref = _read_gray(o["errmap-ref"])
        _write_bytes(o["errmap-out"], encode_image(error_map(ref, denoised)))
    print(f"out={o['out']}")
    return 0


def _cmd_eval(o: dict[str, Any]) -> int:
    ref = _read_gray(o["ref"])
    test = _read_gray(o["test"])
    if o["clamp"]:
        ref, test = _clamped(ref), _clamped(test)
    print(f"rmse={rmse(ref, test):.6f}")
    print(f"psnr={psnr(ref, test):.6f}")
    return 0


def _cmd_synth(o: dict[str, Any]) -> int:
    target, guide = synth_pair(
        o["width"], o["height"], seed=o["seed"], unique_amplitude=o["unique-amplitude"]
    )
    _write_bytes(o["out-target"], encode_image(target))
    _write_bytes(o["out-guide"], encode_image(guide))
    return 0


def _cmd_report(o: dict[str, Any]) -> int:
    if not o.get("dict") and not o.get("ref"):
        raise _UsageError(
            "cdldenoise report: give --dict and/or --ref with --test images"
        )
    if bool(o.get("ref")) != bool(o.get("test")):
        raise _UsageError("cdldenoise report: --ref and --test must be given together")
    out_dir = Path(o["out-dir"])
    out_dir.mkdir(parents=True, exist_ok=True)

    if o.get("dict"):
        ds = load_dictionaries(o["dict"])
        mosaic_path = out_dir / "dictionary_atoms.png"
        figures.save_dictionary_mosaic(ds, mosaic_path, max_atoms=o["max-atoms"])
        print(f"figure={mosaic_path}")

    if o.get("ref"):
        ref = _read_gray(o["ref"])
        if o["clamp"]:
            ref = _clamped(ref)
        rows = []
        for test_path in o["test"]:
            test = _read_gray(test_path)
            if o["clamp"]:
                test = _clamped(test)
            name = Path(test_path).stem
            rows.append((name, rmse(ref, test), psnr(ref, test)))
            heat_path = out_dir / f"error_{name}.png"
            figures.save_error_heatmap(ref, test, heat_path)
            print(f"figure={heat_path}")
        csv_path = out_dir / "metrics.csv"
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["name", "rmse", "psnr"])
            for name, err, quality in rows:
                writer.writerow([name, f"{err:.6f}", f"{quality:.6f}"])
        print(f"table={csv_path}")
        chart_path = out_dir / "metrics.png"
        figures.save_metric_chart(
            [r[0] for r in rows], [r[1] for r in rows], [r[2] for r in rows], chart_path
        )
        print(f"figure={chart_path}")
        for name, err, quality in rows:
            print(f"rmse_{name}={err:.6f}")
            print(f"psnr_{name}={quality:.6f}")
        if len(rows) > 1:
            print(f"rmse_mean={np.mean([r[1] for r in rows]):.6f}")
            print(f"psnr_mean={np.mean([r[2] for r in rows]):.6f}")
    return 0


_HANDLERS = {
    "train": _cmd_train,
    "noise": _cmd_noise,
    "denoise": _cmd_denoise,
    "eval": _cmd_eval,
    "synth": _cmd_synth,
    "report": _cmd_report,
}


def run(argv: list[str]) -> int:
    """Dispatch one CLI invocation; returns the process exit status."""
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(name)s: %(message)s"
    )
    parser = _build_parser()
    try:
        namespace = parser.parse_args(argv)
        if getattr(namespace, "subcommand", None) is None:
            raise _UsageError(parser.format_usage())
        name = namespace.subcommand
        resolved = _resolve(name, namespace)
        _print_config(name, resolved)
        return _HANDLERS[name](resolved)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help lands here
        return int(exc.code or 0)
    except (CdlError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
