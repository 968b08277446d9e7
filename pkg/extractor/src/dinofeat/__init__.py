"""Patch-feature export for spectral segmentation pipelines.

Runs a ViT-S/16 backbone over images and writes one NPY tensor per
input: C-order float32, shape (H/16, W/16, 384), one feature vector per
16x16 patch. The default feature source is the key projections of the
final attention block; the final patch tokens are available via the
``tokens`` layer choice. Every run records a manifest with the model
hash and layer choice.
"""

__version__ = "0.1.0"

from .errors import ConfigError, DinofeatError, InputError, WeightsError
from .extract import (
    DEFAULT_SIZE,
    DEFAULT_WEIGHTS,
    LAYERS,
    MODEL_ID,
    WEIGHTS_URL,
    ExtractorConfig,
    build_model,
    extract,
    list_images,
    model_hash,
    plan_resize,
    preprocess,
)
from .vit import DEPTH, EMBED_DIM, HEADS, PATCH, VisionTransformer, load_pretrained

__all__ = [
    "ConfigError",
    "DEFAULT_SIZE",
    "DEFAULT_WEIGHTS",
    "DEPTH",
    "DinofeatError",
    "EMBED_DIM",
    "ExtractorConfig",
    "HEADS",
    "InputError",
    "LAYERS",
    "MODEL_ID",
    "PATCH",
    "VisionTransformer",
    "WEIGHTS_URL",
    "WeightsError",
    "__version__",
    "build_model",
    "extract",
    "list_images",
    "load_pretrained",
    "model_hash",
    "plan_resize",
    "preprocess",
]
