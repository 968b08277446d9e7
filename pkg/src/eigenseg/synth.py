"""Deterministic synthetic scenes for tests and benchmarks.

A scene plants non-overlapping shapes on a background, each carrying a
constant per-region feature signature. Signal channels get the
signature times a per-pixel gain, plus small Gaussian jitter; the
trailing noise channels get high-entropy uniform noise. Everything is
drawn from the documented 64-bit LCG, so a seed pins the tensors bit
for bit.

Draw order (one stream per scene): per-pixel gains (row-major, skipped
when gain_jitter is 0), then jitter normals (row-major pixels, signal
channels ascending), then noise uniforms (row-major pixels, noise
channels ascending).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SpecError
from .rng import Lcg64
from .tensor_io import FeatureMap, LabelMask

JITTER_FRACTION = 0.05  # additive Gaussian sigma, relative to signature scale


@dataclass(frozen=True)
class InstanceSpec:
    """A planted shape plus its length-C feature signature.

    `shape` is "rectangle" (position = top-left, size = (h, w)) or
    "disk" (position = center, size = radius; a pixel belongs to the
    disk when its center lies within radius + 1/2 of the disk center).
    """

    shape: str
    position: tuple[int, int]
    size: tuple[int, int] | int
    signature: np.ndarray

    def __post_init__(self):
        if self.shape not in ("rectangle", "disk"):
            raise SpecError(f"shape must be rectangle or disk, got {self.shape!r}")
        sig = np.ascontiguousarray(self.signature, dtype=np.float64)
        if sig.ndim != 1:
            raise SpecError("signature must be a 1-D vector")
        object.__setattr__(self, "signature", sig)


@dataclass(frozen=True)
class NoiseSpec:
    count: int
    amplitude: float

    def __post_init__(self):
        if self.count < 0:
            raise SpecError(f"noise channel count must be >= 0, got {self.count}")
        if self.amplitude < 0:
            raise SpecError(f"noise amplitude must be >= 0, got {self.amplitude}")


@dataclass(frozen=True)
class SceneSpec:
    """Full description of one synthetic scene.

    Noise channels are the trailing `noise.count` channel indices; all
    signatures must be zero there. `gain_jitter` g scales each pixel's
    signature by a uniform draw from [1-g, 1+g].
    """

    height: int
    width: int
    channels: int
    instances: tuple[InstanceSpec, ...]
    noise: NoiseSpec
    seed: int
    background_signature: np.ndarray | None = None
    gain_jitter: float = 0.0

    def __post_init__(self):
        if self.height < 1 or self.width < 1 or self.channels < 1:
            raise SpecError("scene dimensions must be >= 1")
        if self.noise.count > self.channels:
            raise SpecError("more noise channels than channels")
        if not 0.0 <= self.gain_jitter < 1.0:
            raise SpecError(f"gain_jitter must be in [0, 1), got {self.gain_jitter}")
        if self.background_signature is not None:
            bg = np.ascontiguousarray(self.background_signature, dtype=np.float64)
            if bg.shape != (self.channels,):
                raise SpecError("background signature length must equal channels")
            object.__setattr__(self, "background_signature", bg)

    @property
    def signal_channels(self) -> int:
        return self.channels - self.noise.count


def _paint(spec: SceneSpec) -> np.ndarray:
    labels = np.zeros((spec.height, spec.width), dtype=np.int64)
    for idx, inst in enumerate(spec.instances, start=1):
        region = np.zeros_like(labels, dtype=bool)
        if inst.shape == "rectangle":
            top, left = inst.position
            h, w = inst.size  # type: ignore[misc]
            if h < 1 or w < 1 or top < 0 or left < 0 or top + h > spec.height or left + w > spec.width:
                raise SpecError(f"instance {idx} rectangle out of bounds")
            region[top : top + h, left : left + w] = True
        else:
            ch, cw = inst.position
            r = int(inst.size)  # type: ignore[arg-type]
            if r < 1:
                raise SpecError(f"instance {idx} disk radius must be >= 1")
            hh, ww = np.ogrid[: spec.height, : spec.width]
            # Include pixels within r + 1/2 of the center, in integer
            # arithmetic: d^2 <= r^2 + r  <=>  d <= sqrt((r + 1/2)^2 - 1/4).
            region = (hh - ch) ** 2 + (ww - cw) ** 2 <= r * (r + 1)
            if ch - r < 0 or ch + r >= spec.height or cw - r < 0 or cw + r >= spec.width:
                raise SpecError(f"instance {idx} disk out of bounds")
        if (labels[region] != 0).any():
            raise SpecError(f"instance {idx} overlaps an earlier instance")
        labels[region] = idx
    return labels


def _validate_signatures(spec: SceneSpec) -> None:
    sigs = [inst.signature for inst in spec.instances]
    for i, sig in enumerate(sigs, start=1):
        if sig.shape != (spec.channels,):
            raise SpecError(f"instance {i} signature length must equal channels")
    for i in range(len(sigs)):
        for j in range(i + 1, len(sigs)):
            if np.array_equal(sigs[i], sigs[j]):
                raise SpecError(f"instances {i + 1} and {j + 1} share a signature")
    if spec.noise.count:
        tail = slice(spec.signal_channels, None)
        for i, sig in enumerate(sigs, start=1):
            if np.any(sig[tail] != 0):
                raise SpecError(f"instance {i} signature is nonzero on a noise channel")
        if spec.background_signature is not None and np.any(spec.background_signature[tail] != 0):
            raise SpecError("background signature is nonzero on a noise channel")


def generate(spec: SceneSpec) -> tuple[FeatureMap, LabelMask, LabelMask]:
    """Render (features, instance mask, foreground mask) for a scene."""
    _validate_signatures(spec)
    labels = _paint(spec)
    h, w, c = spec.height, spec.width, spec.channels
    n_pixels = h * w
    n_signal = spec.signal_channels

    sig_table = np.zeros((len(spec.instances) + 1, c), dtype=np.float64)
    if spec.background_signature is not None:
        sig_table[0] = spec.background_signature
    for idx, inst in enumerate(spec.instances, start=1):
        sig_table[idx] = inst.signature
    scale_table = np.abs(sig_table).max(axis=1)

    flat_labels = labels.ravel()
    base = sig_table[flat_labels]  # (n_pixels, C)
    sigma = JITTER_FRACTION * scale_table[flat_labels]  # (n_pixels,)

    rng = Lcg64(spec.seed)
    if spec.gain_jitter > 0.0:
        gains = 1.0 + spec.gain_jitter * (2.0 * rng.uniforms(n_pixels) - 1.0)
    else:
        gains = np.ones(n_pixels)

    features = np.zeros((n_pixels, c), dtype=np.float64)
    if n_signal:
        jitter = rng.normals(n_pixels * n_signal).reshape(n_pixels, n_signal)
        features[:, :n_signal] = (
            gains[:, None] * base[:, :n_signal] + sigma[:, None] * jitter
        )
    if spec.noise.count:
        noise = rng.uniforms(n_pixels * spec.noise.count).reshape(n_pixels, spec.noise.count)
        features[:, n_signal:] = spec.noise.amplitude * (2.0 * noise - 1.0)

    fm = FeatureMap(features.reshape(h, w, c))
    gt_instances = LabelMask(labels)
    gt_fg = LabelMask((labels > 0).astype(np.int64))
    return fm, gt_instances, gt_fg


def inject_spikes(
    fm: FeatureMap,
    region: LabelMask,
    label: int,
    channels: list[int],
    amplitude: float,
    seed: int,
    fraction: float = 1.0,
) -> FeatureMap:
    """Corrupt one instance: turn `fraction` of its pixels (chosen by
    the seeded PRNG, all when 1.0) into outliers by adding +amplitude or
    -amplitude on the given channels. The sign is drawn once per pixel,
    so a corrupted pixel is uniformly very high or very low."""
    if not 0.0 < fraction <= 1.0:
        raise SpecError(f"fraction must be in (0, 1], got {fraction}")
    members = np.flatnonzero(region.labels.ravel() == label)
    if members.size == 0:
        raise SpecError(f"label {label} has no pixels")
    rng = Lcg64(seed)
    if fraction < 1.0:
        count = max(1, int(round(fraction * members.size)))
        picked = sorted(rng.sample_indices(members.size, count))
        members = members[picked]
    data = fm.data.reshape(-1, fm.channels).copy()
    for p in members:
        sign = 1.0 if rng.random() < 0.5 else -1.0
        for ch in channels:
            data[p, ch] += sign * amplitude
    return FeatureMap(data.reshape(fm.height, fm.width, fm.channels))


# --- Canonical demo scenes -------------------------------------------------
#
# Shared by the test-suite fixtures and the CLI's demo mode. Geometry:
# each instance is a disk in its own quadrant of the frame, so
# placements never collide, with at least two background pixels between
# a disk and its quadrant edge. The radii are restricted to values whose
# rasterized disks are fixed points of the 5x5 majority filter, so the
# planted masks survive post-processing pixel for pixel. Channel budget
# (C = 384 defaults): 34 foreground-marker channels shared by every
# instance, 34 background-marker channels, 60 discriminative channels
# split evenly between instances, 256 trailing noise channels.

DEMO_FG_MARKERS = 34
DEMO_BG_MARKERS = 34
DEMO_DISCRIMINATIVE = 60
DEMO_MARKER_AMPLITUDE = 0.10
DEMO_DISCRIMINATIVE_AMPLITUDE = 0.25
DEMO_NOISE_AMPLITUDE = 0.20
DEMO_GAIN_JITTER = 0.10
DEMO_DISK_RADII = (7, 9)  # majority-filter fixed points that fit a quadrant
DEMO_SPIKE_CHANNELS = 5
DEMO_SPIKE_FACTOR = 10.0  # times the largest clean signature value
DEMO_SPIKE_FRACTION = 0.2


def demo_scene(
    seed: int,
    height: int = 48,
    width: int = 48,
    channels: int = 384,
    noisy: bool = False,
) -> tuple[FeatureMap, LabelMask, LabelMask]:
    """A ready-made 2-4 instance scene; `noisy` corrupts instance 1 with
    large random-sign spikes in a few of its discriminative channels."""
    spec = demo_spec(seed, height, width, channels)
    fm, gt_instances, gt_fg = generate(spec)
    if noisy:
        first = spec.instances[0].signature
        spiked = [int(c) for c in np.flatnonzero(first)[-DEMO_SPIKE_CHANNELS:]]
        amplitude = DEMO_SPIKE_FACTOR * float(np.abs(first).max())
        fm = inject_spikes(
            fm,
            gt_instances,
            label=1,
            channels=spiked,
            amplitude=amplitude,
            seed=spec.seed + 1,
            fraction=DEMO_SPIKE_FRACTION,
        )
    return fm, gt_instances, gt_fg


def demo_spec(seed: int, height: int = 48, width: int = 48, channels: int = 384) -> SceneSpec:
    """The SceneSpec behind demo_scene (exposed for inspection)."""
    n_signal = DEMO_FG_MARKERS + DEMO_BG_MARKERS + DEMO_DISCRIMINATIVE
    if channels < n_signal + 1:
        raise SpecError(f"demo scene needs >= {n_signal + 1} channels, got {channels}")
    layout = Lcg64(seed)
    n_instances = 2 + layout.randint(3)  # 2..4

    fg_lo = 0
    bg_lo = DEMO_FG_MARKERS
    disc_lo = DEMO_FG_MARKERS + DEMO_BG_MARKERS

    def band_values(count: int, amplitude: float) -> np.ndarray:
        return amplitude * (0.8 + 0.4 * layout.uniforms(count))

    fg_markers = band_values(DEMO_FG_MARKERS, DEMO_MARKER_AMPLITUDE)
    bg_markers = band_values(DEMO_BG_MARKERS, DEMO_MARKER_AMPLITUDE)

    background = np.zeros(channels)
    background[bg_lo:disc_lo] = bg_markers

    per_instance = DEMO_DISCRIMINATIVE // n_instances
    signatures = []
    for i in range(n_instances):
        sig = np.zeros(channels)
        sig[fg_lo:bg_lo] = fg_markers
        lo = disc_lo + i * per_instance
        sig[lo : lo + per_instance] = band_values(per_instance, DEMO_DISCRIMINATIVE_AMPLITUDE)
        signatures.append(sig)

    quadrants = [0, 1, 2, 3]
    layout.shuffle(quadrants)
    qh, qw = height // 2, width // 2
    if qh < 2 * max(DEMO_DISK_RADII) + 5 or qw < 2 * max(DEMO_DISK_RADII) + 5:
        raise SpecError(f"demo layout needs at least a {2 * (2 * max(DEMO_DISK_RADII) + 5)}px frame")
    instances = []
    for i in range(n_instances):
        q = quadrants[i]
        top0, left0 = (q // 2) * qh, (q % 2) * qw
        r = DEMO_DISK_RADII[layout.randint(len(DEMO_DISK_RADII))]
        ch = top0 + r + 2 + layout.randint(qh - 2 * r - 4)
        cw = left0 + r + 2 + layout.randint(qw - 2 * r - 4)
        instances.append(InstanceSpec("disk", (ch, cw), r, signatures[i]))

    return SceneSpec(
        height=height,
        width=width,
        channels=channels,
        instances=tuple(instances),
        noise=NoiseSpec(count=channels - n_signal, amplitude=DEMO_NOISE_AMPLITUDE),
        seed=seed + 1000,
        background_signature=background,
        gain_jitter=DEMO_GAIN_JITTER,
    )


def scene_from_dict(d: dict) -> SceneSpec:
    """Parse the JSON scene description used by the synth subcommand.

    Signatures are sparse {channel: value} maps. A {"demo": {...}} form
    is handled by the CLI before reaching here.
    """
    try:
        height = int(d["height"])
        width = int(d["width"])
        channels = int(d["channels"])
        seed = int(d["seed"])
        noise = d.get("noise", {"count": 0, "amplitude": 0.0})
        noise_spec = NoiseSpec(int(noise["count"]), float(noise["amplitude"]))
        instances = []
        for inst in d["instances"]:
            sig = np.zeros(channels)
            for ch, val in inst["signature"].items():
                sig[int(ch)] = float(val)
            size = inst["size"]
            size_val = (int(size[0]), int(size[1])) if isinstance(size, list) else int(size)
            instances.append(
                InstanceSpec(
                    str(inst["shape"]),
                    (int(inst["position"][0]), int(inst["position"][1])),
                    size_val,
                    sig,
                )
            )
        background = None
        if "background" in d:
            background = np.zeros(channels)
            for ch, val in d["background"].items():
                background[int(ch)] = float(val)
        return SceneSpec(
            height=height,
            width=width,
            channels=channels,
            instances=tuple(instances),
            noise=noise_spec,
            seed=seed,
            background_signature=background,
            gain_jitter=float(d.get("gain_jitter", 0.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecError(f"bad scene description: {exc}") from exc
