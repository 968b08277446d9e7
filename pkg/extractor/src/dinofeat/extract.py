"""Image-to-tensor export pipeline.

Each input image becomes one ``.npy`` file: C-order float32, shape
(H/16, W/16, 384), one 384-dim feature vector per 16x16 patch. That is
the plain NPY v1.0 layout the downstream segmentation tools read
natively (they widen to float64 on load). A ``manifest.json`` next to
the tensors records the model hash, the layer choice, and a SHA-256
digest of every output, so a consumer can pin exactly which network
produced its features.
"""

from __future__ import annotations

import hashlib
import json
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError

from . import __version__
from .errors import ConfigError, InputError, WeightsError
from .vit import PATCH, VisionTransformer, load_pretrained

_TOOL = "dinofeat"

MODEL_ID = "dino_vits16"
LAYERS = ("keys", "tokens")
DEFAULT_SIZE = 480

WEIGHTS_URL = (
    "https://dl.fbaipublicfiles.com/dino/dino_deitsmall16_pretrain/"
    "dino_deitsmall16_pretrain.pth"
)
DEFAULT_WEIGHTS = Path("~/.cache/dinofeat/dino_deitsmall16_pretrain.pth").expanduser()

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")

# Standard ImageNet channel statistics, matching the normalization the
# pretrained backbone was trained with.
_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)

Notify = Callable[[str], None]


@dataclass(frozen=True)
class ExtractorConfig:
    """Resolved extraction parameters.

    ``size`` is the target for the image's shorter side; both sides are
    then snapped to the nearest multiple of the 16-pixel patch size.
    ``weights`` of None means the default cache path. ``random_init``
    swaps the checkpoint for a seeded untrained network, which keeps the
    pipeline fully runnable (and deterministic) where the pretrained
    file is unavailable.
    """

    model: str = MODEL_ID
    layer: str = "keys"
    size: int = DEFAULT_SIZE
    device: str = "cpu"
    weights: Path | None = None
    random_init: bool = False
    seed: int = 0

    def validate(self) -> None:
        if self.model != MODEL_ID:
            raise ConfigError(f"unknown model '{self.model}'; only '{MODEL_ID}' is built in")
        if self.layer not in LAYERS:
            raise ConfigError(f"layer must be one of {LAYERS}, got '{self.layer}'")
        if self.size < PATCH:
            raise ConfigError(f"size must be at least {PATCH}, got {self.size}")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")

    def weights_path(self) -> Path:
        return DEFAULT_WEIGHTS if self.weights is None else self.weights


def plan_resize(height: int, width: int, size: int) -> tuple[int, int, bool]:
    """Target (H, W) for an input image, plus whether snapping changed it.

    The shorter side is scaled to ``size`` preserving aspect ratio, then
    each side is rounded to the nearest multiple of the patch size (at
    least one patch). The flag is True when that rounding moved the
    scaled dimensions, i.e. when the caller should mention the
    adjustment.
    """
    if size < PATCH:
        raise ConfigError(f"size must be at least {PATCH}, got {size}")
    if height < 1 or width < 1:
        raise InputError(f"degenerate image dimensions {height}x{width}")
    scale = size / min(height, width)
    scaled = (round(height * scale), round(width * scale))
    snapped = tuple(max(PATCH, PATCH * round(side / PATCH)) for side in scaled)
    return snapped[0], snapped[1], snapped != scaled


def preprocess(image: Image.Image, size: int) -> tuple[torch.Tensor, bool]:
    """PIL image -> normalized (1, 3, H, W) float32 batch.

    Returns the batch and whether the grid snapping changed the scaled
    dimensions (see :func:`plan_resize`).
    """
    rgb = image.convert("RGB")
    height, width, adjusted = plan_resize(rgb.height, rgb.width, size)
    resized = rgb.resize((width, height), Image.Resampling.BICUBIC)
    arr = np.asarray(resized, dtype=np.float32) / 255.0
    arr = (arr - _MEAN) / _STD
    batch = torch.from_numpy(arr).permute(2, 0, 1).unsqueeze(0)
    return batch, adjusted


def build_model(cfg: ExtractorConfig) -> tuple[VisionTransformer, str]:
    """Construct the backbone in eval mode; returns (model, provenance).

    Provenance is ``file:<path>`` for a loaded checkpoint or
    ``random-init(seed=N)`` for the seeded fallback. A missing
    checkpoint is an error that spells out how to fetch it.
    """
    cfg.validate()
    if cfg.random_init:
        torch.manual_seed(cfg.seed)
        model = VisionTransformer()
        provenance = f"random-init(seed={cfg.seed})"
    else:
        path = cfg.weights_path()
        if not path.is_file():
            raise WeightsError(
                f"pretrained weights not found at '{path}'; download them with:\n"
                f"  curl -L --create-dirs -o '{path}' {WEIGHTS_URL}\n"
                f"or pass --allow-random-init to run a seeded untrained network"
            )
        model = VisionTransformer()
        load_pretrained(model, path)
        provenance = f"file:{path}"
    model.eval()
    try:
        model.to(cfg.device)
    except (RuntimeError, ValueError) as exc:
        raise ConfigError(f"cannot use device '{cfg.device}': {exc}") from exc
    return model, provenance


def model_hash(model: VisionTransformer) -> str:
    """SHA-256 over every parameter's name, shape, and raw bytes."""
    digest = hashlib.sha256()
    for name, tensor in model.state_dict().items():
        digest.update(name.encode())
        digest.update(str(tuple(tensor.shape)).encode())
        digest.update(tensor.detach().cpu().numpy().tobytes())
    return digest.hexdigest()


def list_images(path: Path) -> list[Path]:
    """Image files to process: the file itself, or a directory's images sorted by name."""
    if path.is_dir():
        found = sorted(
            entry
            for entry in path.iterdir()
            if entry.is_file() and entry.suffix.lower() in IMAGE_SUFFIXES
        )
        if not found:
            kinds = "/".join(suffix.lstrip(".") for suffix in IMAGE_SUFFIXES)
            raise InputError(f"no images ({kinds}) in directory '{path}'")
        return found
    if path.is_file():
        return [path]
    raise InputError(f"input '{path}' does not exist")


def _check_stems(images: list[Path]) -> None:
    seen: dict[str, Path] = {}
    for image in images:
        if image.stem in seen:
            raise InputError(
                f"'{seen[image.stem].name}' and '{image.name}' would both "
                f"write '{image.stem}.npy'"
            )
        seen[image.stem] = image


def extract(
    input_path: Path,
    out_dir: Path,
    cfg: ExtractorConfig,
    notify: Notify | None = None,
) -> dict:
    """Run the backbone over every input image and write one NPY each.

    Output files mirror the input names (``frame3.png`` ->
    ``frame3.npy``). Returns the manifest dict, which is also written to
    ``out_dir/manifest.json``.
    """
    images = list_images(Path(input_path))
    _check_stems(images)
    model, provenance = build_model(cfg)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    with torch.inference_mode():
        for image_path in images:
            try:
                with Image.open(image_path) as image:
                    batch, adjusted = preprocess(image, cfg.size)
            except UnidentifiedImageError as exc:
                raise InputError(f"cannot decode image '{image_path}': {exc}") from exc
            if adjusted and notify is not None:
                _, _, height, width = batch.shape
                notify(
                    f"note: {image_path.name}: resized to {height}x{width} "
                    f"(nearest multiple of {PATCH})"
                )
            feats = model.features(batch.to(cfg.device), cfg.layer)
            tensor = np.ascontiguousarray(feats[0].cpu().numpy(), dtype=np.float32)
            out_path = out_dir / f"{image_path.stem}.npy"
            np.save(out_path, tensor)
            entries.append(
                {
                    "input": str(image_path),
                    "output": out_path.name,
                    "shape": list(tensor.shape),
                    "sha256": hashlib.sha256(out_path.read_bytes()).hexdigest(),
                }
            )
    manifest = {
        "tool": _TOOL,
        "version": __version__,
        "model": cfg.model,
        "model_hash": model_hash(model),
        "weights": provenance,
        "layer": cfg.layer,
        "size": cfg.size,
        "device": cfg.device,
        "images": entries,
    }
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest
