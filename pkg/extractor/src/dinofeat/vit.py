"""Minimal ViT-S/16 backbone with a tap on the final attention block.

Only the pieces needed for feature export exist: patch embedding,
learned position embeddings (bicubically resampled for non-square or
non-224 inputs), twelve pre-norm transformer blocks, and the closing
LayerNorm. There is no classification head and no training path.

Parameter names follow the layout used by the public self-supervised
ViT-S/16 checkpoints (``cls_token``, ``pos_embed``,
``patch_embed.proj.*``, ``blocks.N.{norm1,attn.qkv,attn.proj,norm2,
mlp.fc1,mlp.fc2}.*``, ``norm.*``), so such a checkpoint file loads
directly via :func:`load_pretrained`.
"""

from __future__ import annotations

import math
from pathlib import Path

import torch
from torch import nn

from .errors import WeightsError

PATCH = 16
EMBED_DIM = 384
DEPTH = 12
HEADS = 6
MLP_RATIO = 4

# Position-embedding grid the pretrained checkpoints were trained with
# (224x224 input, 14x14 patches).
_PRETRAIN_GRID = 14

# Wrapper keys under which full training checkpoints nest the backbone
# weights; plain backbone files are flat and skip this unwrapping.
_NESTING_KEYS = ("state_dict", "model", "teacher")
_PREFIXES = ("module.", "backbone.")


class Attention(nn.Module):
    """Multi-head self-attention with an accessor for the key vectors."""

    def __init__(self, dim: int = EMBED_DIM, heads: int = HEADS) -> None:
        super().__init__()
        self.num_heads = heads
        self.scale = (dim // heads) ** -0.5
        self.qkv = nn.Linear(dim, dim * 3)
        self.proj = nn.Linear(dim, dim)

    def _split(self, x: torch.Tensor) -> torch.Tensor:
        b, n, c = x.shape
        qkv = self.qkv(x).reshape(b, n, 3, self.num_heads, c // self.num_heads)
        return qkv.permute(2, 0, 3, 1, 4)  # (q|k|v, b, head, token, head_dim)

    def keys(self, x: torch.Tensor) -> torch.Tensor:
        """Per-token key vectors with the heads concatenated back to (b, n, dim)."""
        k = self._split(x)[1]
        b, heads, n, head_dim = k.shape
        return k.transpose(1, 2).reshape(b, n, heads * head_dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, n, c = x.shape
        q, k, v = self._split(x)
        attn = (q @ k.transpose(-2, -1)) * self.scale
        attn = attn.softmax(dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(b, n, c)
        return self.proj(out)


class Mlp(nn.Module):
    def __init__(self, dim: int = EMBED_DIM, ratio: int = MLP_RATIO) -> None:
        super().__init__()
        self.fc1 = nn.Linear(dim, dim * ratio)
        self.act = nn.GELU()
        self.fc2 = nn.Linear(dim * ratio, dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc2(self.act(self.fc1(x)))


class Block(nn.Module):
    """Pre-norm transformer block: x + attn(norm1 x), then x + mlp(norm2 x)."""

    def __init__(self, dim: int = EMBED_DIM, heads: int = HEADS) -> None:
        super().__init__()
        self.norm1 = nn.LayerNorm(dim, eps=1e-6)
        self.attn = Attention(dim, heads)
        self.norm2 = nn.LayerNorm(dim, eps=1e-6)
        self.mlp = Mlp(dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.norm1(x))
        return x + self.mlp(self.norm2(x))


class PatchEmbed(nn.Module):
    """Non-overlapping 16x16 patches projected to the embedding width."""

    def __init__(self, dim: int = EMBED_DIM, patch: int = PATCH) -> None:
        super().__init__()
        self.proj = nn.Conv2d(3, dim, kernel_size=patch, stride=patch)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.proj(x).flatten(2).transpose(1, 2)  # (b, gh*gw, dim) row-major


class VisionTransformer(nn.Module):
    """ViT-S/16: 12 pre-norm blocks, 6 heads, 384-dim embeddings."""

    def __init__(self) -> None:
        super().__init__()
        self.patch_embed = PatchEmbed()
        self.cls_token = nn.Parameter(torch.zeros(1, 1, EMBED_DIM))
        self.pos_embed = nn.Parameter(torch.zeros(1, 1 + _PRETRAIN_GRID**2, EMBED_DIM))
        self.blocks = nn.ModuleList(Block() for _ in range(DEPTH))
        self.norm = nn.LayerNorm(EMBED_DIM, eps=1e-6)
        nn.init.normal_(self.cls_token, std=0.02)
        nn.init.normal_(self.pos_embed, std=0.02)

    def _pos_for(self, grid_h: int, grid_w: int) -> torch.Tensor:
        """Position embeddings resampled to an arbitrary patch grid."""
        patch_pos = self.pos_embed[:, 1:]
        side = math.isqrt(patch_pos.shape[1])
        if (grid_h, grid_w) == (side, side):
            return self.pos_embed
        grid = patch_pos.reshape(1, side, side, EMBED_DIM).permute(0, 3, 1, 2)
        grid = nn.functional.interpolate(
            grid, size=(grid_h, grid_w), mode="bicubic", align_corners=False
        )
        grid = grid.permute(0, 2, 3, 1).reshape(1, grid_h * grid_w, EMBED_DIM)
        return torch.cat([self.pos_embed[:, :1], grid], dim=1)

    def features(self, pixels: torch.Tensor, layer: str) -> torch.Tensor:
        """Patch features for a batch of images.

        ``pixels`` is (b, 3, H, W) with H and W multiples of the patch
        size. ``layer`` selects the feature source in the final block:
        ``"keys"`` taps the key projections of its attention (computed
        on the norm1 output, exactly what the attention itself sees),
        ``"tokens"`` takes the block output after the closing norm. The
        class token is dropped either way. Returns (b, H/16, W/16, 384).
        """
        b, _, height, width = pixels.shape
        grid_h, grid_w = height // PATCH, width // PATCH
        x = self.patch_embed(pixels)
        x = torch.cat([self.cls_token.expand(b, -1, -1), x], dim=1)
        x = x + self._pos_for(grid_h, grid_w)
        for block in self.blocks[:-1]:
            x = block(x)
        last = self.blocks[-1]
        if layer == "keys":
            out = last.attn.keys(last.norm1(x))
        else:
            out = self.norm(last(x))
        return out[:, 1:].reshape(b, grid_h, grid_w, out.shape[-1])


def load_pretrained(model: VisionTransformer, path: Path) -> None:
    """Fill ``model`` from a checkpoint file, unwrapping common nestings."""
    try:
        state = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:  # unpicklable / truncated / not a checkpoint
        raise WeightsError(f"cannot read checkpoint '{path}': {exc}") from exc
    for key in _NESTING_KEYS:
        if isinstance(state, dict) and isinstance(state.get(key), dict):
            state = state[key]
    if not isinstance(state, dict):
        raise WeightsError(f"checkpoint '{path}' does not contain a parameter dict")
    cleaned = {}
    for name, value in state.items():
        for prefix in _PREFIXES:
            if name.startswith(prefix):
                name = name[len(prefix) :]
        cleaned[name] = value
    wanted = model.state_dict()
    missing = sorted(set(wanted) - set(cleaned))
    if missing:
        raise WeightsError(
            f"checkpoint '{path}' lacks {len(missing)} required entries "
            f"(first: {missing[0]}); expected a ViT-S/16 backbone"
        )
    try:
        model.load_state_dict({k: cleaned[k] for k in wanted})
    except RuntimeError as exc:
        raise WeightsError(f"checkpoint '{path}' does not fit ViT-S/16: {exc}") from exc
