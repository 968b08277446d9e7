"""Command-line front end.

Every subcommand writes a run manifest next to its outputs: a JSON
snapshot of the fully resolved configuration, the SHA-256 digest of each
input file, and the tool version. Manifests carry no timestamps and all
randomness flows through explicit seeds, so two runs with equal
manifests produce byte-identical outputs. ``replay`` re-executes a
recorded manifest after checking that the inputs still hash the same.

Exit codes: 0 success, 2 bad configuration or arguments, 3 missing or
malformed data, 4 numerical failure. Diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .channel_select import DEFAULT_BINS, dcr_select, entropy_scores, ncr_select, std_scores
from .errors import (
    ConfigError,
    DegenerateStatistic,
    EigensegError,
    FormatError,
    InvalidValue,
    IoError,
    NumericalError,
    SpecError,
)
from .evaluate import FilterCriteria, align_resolution, filter_dataset, instance_miou, variance_ratio_mr
from .pipeline import (
    DEFAULT_KEEP_N,
    FgBgConfig,
    InstanceConfig,
    KmeansParams,
    ThresholdRule,
    fgbg_segment,
    instance_segment,
)
from .similarity import MetricKind
from .spectral import Normalization
from .synth import demo_scene, generate, scene_from_dict
from .tensor_io import LabelMask, load_mask, load_tensor, save_mask, save_tensor

_TOOL = "eigenseg"
_MANIFEST_SUFFIX = ".manifest.json"


# ---------------------------------------------------------------------------
# manifest plumbing


def _sha256(path: Path) -> str:
    try:
        return hashlib.sha256(path.read_bytes()).hexdigest()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


def _manifest(command: str, config: dict, inputs: dict[str, Path]) -> dict:
    return {
        "command": command,
        "config": config,
        "inputs": {
            name: {"path": str(path), "sha256": _sha256(path)}
            for name, path in inputs.items()
        },
        "tool": _TOOL,
        "version": __version__,
    }


def _write_json(payload: dict, path: Path) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _sidecar(out: Path) -> Path:
    """Manifest path for a single-file output: report.json -> report.manifest.json."""
    return out.parent / (out.stem + _MANIFEST_SUFFIX)


# ---------------------------------------------------------------------------
# argument helpers


def _parse_channel_count(text: str, channels: int) -> int:
    """Resolve a channel-count argument against the tensor's C.

    Accepts a plain integer, ``C`` (all channels) or ``C/<int>`` (an
    integer fraction, floored, never below 1).
    """
    s = str(text).strip()
    if s == "C":
        count = channels
    elif s.startswith("C/"):
        try:
            divisor = int(s[2:])
        except ValueError:
            raise ConfigError(f"bad channel fraction {text!r}; use C/<int>") from None
        if divisor < 1:
            raise ConfigError(f"channel fraction divisor must be >= 1, got {divisor}")
        count = max(1, channels // divisor)
    else:
        try:
            count = int(s)
        except ValueError:
            raise ConfigError(
                f"expected an integer, 'C', or 'C/<int>', got {text!r}"
            ) from None
    if count < 1:
        raise ConfigError(f"channel count must be >= 1, got {count}")
    return count


def _check_stems(paths: list[Path]) -> None:
    stems = [p.stem for p in paths]
    if len(set(stems)) != len(stems):
        raise ConfigError("input file stems must be unique; outputs would collide")


def _run_all(fn, items: list, jobs: int) -> None:
    if jobs < 1:
        raise ConfigError(f"--jobs must be >= 1, got {jobs}")
    if jobs == 1 or len(items) <= 1:
        for item in items:
            fn(item)
        return
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(fn, item) for item in items]
        for fut in futures:
            fut.result()


def _ensure_dir(path: Path) -> None:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# subcommands


def _cmd_fgbg(args) -> int:
    out = Path(args.out)
    _ensure_dir(out)
    paths = [Path(p) for p in args.features]
    _check_stems(paths)
    metric = MetricKind.parse(args.metric)
    norm = Normalization.parse(args.normalization)
    rule = ThresholdRule.parse(args.threshold)
    post = args.post_process == "true"

    def run(path: Path) -> None:
        fm = load_tensor(path)
        keep_m = _parse_channel_count(args.M, fm.channels)
        cfg = FgBgConfig(
            keep_m=keep_m,
            bins=args.bins,
            metric=metric,
            normalization=norm,
            post_process=post,
            threshold_rule=rule,
        )
        mask, _ = fgbg_segment(fm, cfg)
        save_mask(mask, out / f"{path.stem}.mask.npy")
        save_mask(mask, out / f"{path.stem}.mask.pgm")
        config = {
            "keep_m": keep_m,
            "bins": args.bins,
            "metric": metric.value,
            "normalization": norm.value,
            "post_process": post,
            "threshold": rule.value,
        }
        manifest = _manifest("fgbg", config, {"features": path})
        _write_json(manifest, out / (path.stem + _MANIFEST_SUFFIX))

    _run_all(run, paths, args.jobs)
    return 0


def _cmd_instance(args) -> int:
    if len(args.features) != len(args.fg_mask):
        raise ConfigError(
            f"got {len(args.features)} feature files but {len(args.fg_mask)} "
            "foreground masks; they must pair up"
        )
    out = Path(args.out)
    _ensure_dir(out)
    paths = [Path(p) for p in args.features]
    _check_stems(paths)
    masks = [Path(p) for p in args.fg_mask]
    metric = MetricKind.parse(args.metric)
    norm = Normalization.parse(args.normalization)

    def run(pair: tuple[Path, Path]) -> None:
        feat_path, mask_path = pair
        fm = load_tensor(feat_path)
        fg = load_mask(mask_path)
        keep_m = _parse_channel_count(args.M, fm.channels)
        if args.N is None:
            keep_n = min(DEFAULT_KEEP_N, keep_m)
        else:
            keep_n = _parse_channel_count(args.N, fm.channels)
        cfg = InstanceConfig(
            k=args.k,
            keep_m=keep_m,
            keep_n=keep_n,
            bins=args.bins,
            metric=metric,
            normalization=norm,
            eig_count=args.eig_count,
            kmeans=KmeansParams(
                restarts=args.restarts,
                max_iter=args.max_iter,
                tol=args.tol,
                seed=args.seed,
            ),
        )
        labels = instance_segment(fm, fg, cfg)
        save_mask(labels, out / f"{feat_path.stem}.instances.npy")
        save_mask(labels, out / f"{feat_path.stem}.instances.pgm")
        config = {
            "k": args.k,
            "keep_m": keep_m,
            "keep_n": keep_n,
            "bins": args.bins,
            "metric": metric.value,
            "normalization": norm.value,
            "eig_count": args.eig_count,
            "seed": args.seed,
            "restarts": args.restarts,
            "max_iter": args.max_iter,
            "tol": args.tol,
        }
        manifest = _manifest(
            "instance", config, {"features": feat_path, "fg_mask": mask_path}
        )
        _write_json(manifest, out / (feat_path.stem + _MANIFEST_SUFFIX))

    _run_all(run, list(zip(paths, masks)), args.jobs)
    return 0


def _cmd_eval(args) -> int:
    pred = load_mask(Path(args.pred))
    gt = load_mask(Path(args.gt))
    pred = align_resolution(pred, gt)
    if args.task == "fgbg":
        pred = LabelMask((pred.labels > 0).astype(np.int64))
        gt = LabelMask((gt.labels > 0).astype(np.int64))
    report = instance_miou(pred, gt)
    out = Path(args.out)
    _ensure_dir(out.parent)
    _write_json(report.to_json_dict(), out)
    manifest = _manifest(
        "eval", {"task": args.task}, {"pred": Path(args.pred), "gt": Path(args.gt)}
    )
    _write_json(manifest, _sidecar(out))
    print(f"f_score {report.f_score!r} miou {report.mean_iou!r}")
    return 0


def _cmd_channel_stats(args) -> int:
    fm = load_tensor(Path(args.features))
    by_entropy = entropy_scores(fm, args.bins)
    by_std = std_scores(fm)
    out = Path(args.out)
    _ensure_dir(out.parent)
    lines = ["channel,entropy,std"]
    for e, s in zip(by_entropy, by_std):
        lines.append(f"{e.channel_index},{e.score!r},{s.score!r}")
    out.write_text("\n".join(lines) + "\n")
    manifest = _manifest(
        "channel-stats", {"bins": args.bins}, {"features": Path(args.features)}
    )
    _write_json(manifest, _sidecar(out))
    return 0


def _cmd_metric_bench(args) -> int:
    tokens = [tok.strip() for tok in args.metrics.split(",") if tok.strip()]
    if not tokens:
        raise ConfigError("--metrics must name at least one metric")
    kinds = [MetricKind.parse(tok) for tok in tokens]
    fm = load_tensor(Path(args.features))
    gt = load_mask(Path(args.gt))
    keep_m = _parse_channel_count(args.M, fm.channels)
    if args.N is None:
        keep_n = min(DEFAULT_KEEP_N, keep_m)
    else:
        keep_n = _parse_channel_count(args.N, fm.channels)
    if keep_n > keep_m:
        raise ConfigError(f"keep_n ({keep_n}) must not exceed keep_m ({keep_m})")
    # Benchmark on the same reduced channels the segmentation stages see.
    reduced, _ = ncr_select(fm, keep_m, args.bins)
    reduced, _ = dcr_select(reduced, keep_n)
    lines = ["metric,mr"]
    for kind in kinds:
        mr = variance_ratio_mr(
            reduced, gt, kind, samples_per_instance=args.samples, seed=args.seed
        )
        lines.append(f"{kind.value},{mr!r}")
    out = Path(args.out)
    _ensure_dir(out.parent)
    out.write_text("\n".join(lines) + "\n")
    config = {
        "metrics": [k.value for k in kinds],
        "samples": args.samples,
        "seed": args.seed,
        "keep_m": keep_m,
        "keep_n": keep_n,
        "bins": args.bins,
    }
    manifest = _manifest(
        "metric-bench", config, {"features": Path(args.features), "gt": Path(args.gt)}
    )
    _write_json(manifest, _sidecar(out))
    return 0


def _spec_int(body: dict, key: str, default: int) -> int:
    value = body.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise SpecError(f"demo key {key!r} must be an integer, got {value!r}")
    return value


def _resolve_scene_dict(d: dict, seed_override: int | None) -> dict:
    """Normalize the scene spec so the manifest records every resolved knob."""
    if "demo" in d:
        body = d["demo"]
        if not isinstance(body, dict):
            raise SpecError("'demo' must be a JSON object")
        unknown = set(body) - {"seed", "height", "width", "channels", "noisy"}
        if unknown:
            raise SpecError(f"unknown demo keys: {sorted(unknown)}")
        noisy = body.get("noisy", False)
        if not isinstance(noisy, bool):
            raise SpecError(f"demo key 'noisy' must be a boolean, got {noisy!r}")
        demo = {
            "seed": _spec_int(body, "seed", 0),
            "height": _spec_int(body, "height", 48),
            "width": _spec_int(body, "width", 48),
            "channels": _spec_int(body, "channels", 384),
            "noisy": noisy,
        }
        if seed_override is not None:
            demo["seed"] = seed_override
        return {"demo": demo}
    scene = dict(d)
    if seed_override is not None:
        scene["seed"] = seed_override
    return scene


def _synth_run(scene: dict, spec_path: Path, out: Path) -> int:
    if "demo" in scene:
        p = scene["demo"]
        fm, gt_instances, gt_fg = demo_scene(
            p["seed"], p["height"], p["width"], p["channels"], p["noisy"]
        )
    else:
        fm, gt_instances, gt_fg = generate(scene_from_dict(scene))
    _ensure_dir(out)
    save_tensor(fm, out / "features.npy")
    save_mask(gt_instances, out / "gt_instances.npy")
    save_mask(gt_fg, out / "gt_fg.npy")
    manifest = _manifest("synth", {"scene": scene}, {"spec": spec_path})
    _write_json(manifest, out / "manifest.json")
    return 0


def _cmd_synth(args) -> int:
    spec_path = Path(args.spec)
    try:
        raw = spec_path.read_text()
    except OSError as exc:
        raise IoError(f"cannot read {spec_path}: {exc}") from exc
    try:
        d = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{spec_path} is not valid JSON: {exc}") from exc
    if not isinstance(d, dict):
        raise SpecError("scene spec must be a JSON object")
    scene = _resolve_scene_dict(d, args.seed)
    return _synth_run(scene, spec_path, Path(args.out))


def _cmd_synth_replay(args) -> int:
    return _synth_run(args.scene, Path(args.spec), Path(args.out))


def _cmd_filter(args) -> int:
    gt = load_mask(Path(args.gt))
    criteria = FilterCriteria(
        min_object_frac=args.min_frac, min_size_ratio=args.min_ratio
    )
    keep = filter_dataset(gt, criteria, mbor=args.mbor)
    print("keep" if keep else "reject")
    if args.out is not None:
        out = Path(args.out)
        _ensure_dir(out.parent)
        _write_json({"keep": keep}, out)
        config = {
            "min_object_frac": args.min_frac,
            "min_size_ratio": args.min_ratio,
            "max_mbor": criteria.max_mbor,
            "mbor": args.mbor,
        }
        manifest = _manifest("filter", config, {"gt": Path(args.gt)})
        _write_json(manifest, _sidecar(out))
    return 0


def _replay_namespace(
    command: str, config: dict, inputs: dict, out: Path, base: str
) -> argparse.Namespace:
    if command == "fgbg":
        return argparse.Namespace(
            func=_cmd_fgbg,
            features=[inputs["features"]["path"]],
            M=str(config["keep_m"]),
            bins=config["bins"],
            metric=config["metric"],
            normalization=config["normalization"],
            post_process="true" if config["post_process"] else "false",
            threshold=config["threshold"],
            out=str(out),
            jobs=1,
        )
    if command == "instance":
        return argparse.Namespace(
            func=_cmd_instance,
            features=[inputs["features"]["path"]],
            fg_mask=[inputs["fg_mask"]["path"]],
            M=str(config["keep_m"]),
            N=str(config["keep_n"]),
            k=config["k"],
            bins=config["bins"],
            metric=config["metric"],
            normalization=config["normalization"],
            eig_count=config["eig_count"],
            seed=config["seed"],
            restarts=config["restarts"],
            max_iter=config["max_iter"],
            tol=config["tol"],
            out=str(out),
            jobs=1,
        )
    if command == "eval":
        return argparse.Namespace(
            func=_cmd_eval,
            pred=inputs["pred"]["path"],
            gt=inputs["gt"]["path"],
            task=config["task"],
            out=str(out / f"{base or 'report'}.json"),
        )
    if command == "channel-stats":
        return argparse.Namespace(
            func=_cmd_channel_stats,
            features=inputs["features"]["path"],
            bins=config["bins"],
            out=str(out / f"{base or 'stats'}.csv"),
        )
    if command == "metric-bench":
        return argparse.Namespace(
            func=_cmd_metric_bench,
            features=inputs["features"]["path"],
            gt=inputs["gt"]["path"],
            metrics=",".join(config["metrics"]),
            samples=config["samples"],
            seed=config["seed"],
            M=str(config["keep_m"]),
            N=str(config["keep_n"]),
            bins=config["bins"],
            out=str(out / f"{base or 'bench'}.csv"),
        )
    if command == "synth":
        return argparse.Namespace(
            func=_cmd_synth_replay,
            scene=config["scene"],
            spec=inputs["spec"]["path"],
            out=str(out),
        )
    if command == "filter":
        return argparse.Namespace(
            func=_cmd_filter,
            gt=inputs["gt"]["path"],
            min_frac=config["min_object_frac"],
            min_ratio=config["min_size_ratio"],
            mbor=config["mbor"],
            out=str(out / f"{base or 'filter'}.json"),
        )
    raise FormatError(f"manifest records unknown command {command!r}")


def _cmd_replay(args) -> int:
    man_path = Path(args.manifest)
    try:
        man = json.loads(man_path.read_text())
    except OSError as exc:
        raise IoError(f"cannot read {man_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{man_path} is not valid JSON: {exc}") from exc
    if not isinstance(man, dict):
        raise FormatError(f"{man_path} is not a run manifest")
    try:
        command = man["command"]
        config = man["config"]
        inputs = man["inputs"]
        tool = man["tool"]
    except KeyError as exc:
        raise FormatError(f"{man_path} is not a run manifest: missing {exc}") from None
    if tool != _TOOL:
        raise FormatError(f"manifest was written by {tool!r}, not {_TOOL!r}")
    for name in sorted(inputs):
        rec = inputs[name]
        path = Path(rec["path"])
        if _sha256(path) != rec["sha256"]:
            raise InvalidValue(
                f"input {name!r} ({path}) changed since the manifest was written"
            )
    try:
        ns = _replay_namespace(command, config, inputs, Path(args.out), _replay_base(man_path))
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{man_path} is not a run manifest: {exc}") from None
    return ns.func(ns)


def _replay_base(man_path: Path) -> str:
    name = man_path.name
    if name.endswith(_MANIFEST_SUFFIX):
        return name[: -len(_MANIFEST_SUFFIX)]
    return ""


# ---------------------------------------------------------------------------
# parser


def _add_channel_args(p: argparse.ArgumentParser, with_n: bool) -> None:
    p.add_argument(
        "--M",
        default="C/3",
        metavar="COUNT",
        help="channels kept by the entropy stage: int, 'C', or 'C/<int>' (default C/3)",
    )
    if with_n:
        p.add_argument(
            "--N",
            default=None,
            metavar="COUNT",
            help="channels kept by the deviation stage (default min(60, M))",
        )
    p.add_argument("--bins", type=int, default=DEFAULT_BINS, help="histogram bins for channel entropy")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=_TOOL,
        description="Unsupervised spectral segmentation of patch-feature tensors.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    metrics = [k.value for k in MetricKind]
    norms = [n.value for n in Normalization]

    p = sub.add_parser("fgbg", help="split feature maps into foreground and background")
    p.add_argument("--features", nargs="+", required=True, metavar="NPY")
    _add_channel_args(p, with_n=False)
    p.add_argument("--metric", default=MetricKind.DOT.value, choices=metrics)
    p.add_argument("--normalization", default=Normalization.SYMMETRIC_NORMALIZED.value, choices=norms)
    p.add_argument("--post-process", default="true", choices=["true", "false"])
    p.add_argument(
        "--threshold",
        default=ThresholdRule.ZERO.value,
        choices=[t.value for t in ThresholdRule],
        help="Fiedler-vector split point",
    )
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers across input files")
    p.set_defaults(func=_cmd_fgbg)

    p = sub.add_parser("instance", help="cluster foreground pixels into instances")
    p.add_argument("--features", nargs="+", required=True, metavar="NPY")
    p.add_argument("--fg-mask", nargs="+", required=True, metavar="NPY")
    p.add_argument("--k", type=int, required=True, help="number of instances")
    _add_channel_args(p, with_n=True)
    p.add_argument("--metric", default=MetricKind.BOC.value, choices=metrics)
    p.add_argument("--normalization", default=Normalization.SYMMETRIC_NORMALIZED.value, choices=norms)
    p.add_argument("--eig-count", type=int, default=4, help="eigenvectors fed to k-means")
    p.add_argument("--seed", type=int, default=0, help="k-means seed")
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--max-iter", type=int, default=300)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers across input files")
    p.set_defaults(func=_cmd_instance)

    p = sub.add_parser("eval", help="score a prediction against ground truth")
    p.add_argument("--pred", required=True, metavar="NPY")
    p.add_argument("--gt", required=True, metavar="NPY")
    p.add_argument("--task", required=True, choices=["fgbg", "instance"])
    p.add_argument("--out", required=True, metavar="JSON")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("channel-stats", help="per-channel entropy and deviation table")
    p.add_argument("--features", required=True, metavar="NPY")
    p.add_argument("--bins", type=int, default=DEFAULT_BINS)
    p.add_argument("--out", required=True, metavar="CSV")
    p.set_defaults(func=_cmd_channel_stats)

    p = sub.add_parser(
        "metric-bench",
        help="variance-ratio comparison of similarity metrics on reduced channels",
    )
    p.add_argument("--features", required=True, metavar="NPY")
    p.add_argument("--gt", required=True, metavar="NPY")
    p.add_argument("--metrics", default=",".join(metrics), metavar="LIST", help="comma-separated metric names")
    p.add_argument("--samples", type=int, default=10, help="pixels sampled per instance")
    p.add_argument("--seed", type=int, default=0)
    _add_channel_args(p, with_n=True)
    p.add_argument("--out", required=True, metavar="CSV")
    p.set_defaults(func=_cmd_metric_bench)

    p = sub.add_parser("synth", help="generate a synthetic scene from a JSON spec")
    p.add_argument("--spec", required=True, metavar="JSON")
    p.add_argument("--seed", type=int, default=None, help="override the spec's seed")
    p.add_argument("--out", required=True, metavar="DIR")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("filter", help="keep-or-reject rule for evaluation scenes")
    p.add_argument("--gt", required=True, metavar="NPY")
    p.add_argument("--min-frac", type=float, default=0.07, help="smallest object as a fraction of the image")
    p.add_argument("--min-ratio", type=float, default=0.3, help="smallest/largest object size ratio")
    p.add_argument("--mbor", type=float, default=None, help="boundary overlap ratio, if known")
    p.add_argument("--out", default=None, metavar="JSON")
    p.set_defaults(func=_cmd_filter)

    p = sub.add_parser("replay", help="re-execute a recorded run manifest")
    p.add_argument("manifest", metavar="MANIFEST")
    p.add_argument("--out", required=True, metavar="DIR")
    p.set_defaults(func=_cmd_replay)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"{_TOOL}: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, DegenerateStatistic) as exc:
        print(f"{_TOOL}: {exc}", file=sys.stderr)
        return 4
    except EigensegError as exc:
        print(f"{_TOOL}: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"{_TOOL}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
