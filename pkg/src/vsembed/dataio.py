"""File formats: binary tensor container, dataset manifests, heatmap export,
and the synthetic dataset generator.

Tensor container layout (little-endian throughout):
    bytes 0-3   magic "MHT1"
    byte  4     dtype code (0 = 32-bit float)
    byte  5     rank
    then        rank x uint32 dims
    then        product(dims) x 4 payload bytes, row-major

Manifest: one line per item, tab-separated:
    item_id <TAB> feature_path <TAB> caption,tokens ... <TAB> split [<TAB> WxH]
with at least one caption column (comma-separated token indices), a split
tag in {train, val, test}, and optionally the source image dims, which are
validated against the stride-32 relation w = W/32, h = H/32.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractError, FormatError, NumericError

MAGIC = b"MHT1"
DTYPE_FLOAT32 = 0
_HEADER = struct.Struct("<4sBB")
_SPLITS = ("train", "val", "test")
_MAX_ELEMENTS = 1 << 31  # dims whose product exceeds this are rejected as overflow


def write_tensor(path, array):
    """Serialize one float32 tensor; lossless round trip at stored precision."""
    data = np.asarray(array.data if hasattr(array, "data") and not isinstance(array, np.ndarray)
                      else array)
    if not np.all(np.isfinite(data)):
        raise NumericError(f"refusing to write non-finite values to {path}")
    if data.ndim > 255:
        raise FormatError(f"rank {data.ndim} exceeds the 255 limit")
    for dim in data.shape:
        if not 0 < dim < (1 << 32):
            raise FormatError(f"dimension {dim} not representable as uint32")
    payload = np.ascontiguousarray(data, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, DTYPE_FLOAT32, data.ndim))
        for dim in data.shape:
            fh.write(struct.pack("<I", dim))
        fh.write(payload.tobytes())


def read_tensor(path):
    """Parse and validate a tensor file; any corruption is rejected outright
    (never a partial load) with the failing byte offset."""
    with open(path, "rb") as fh:
        blob = fh.read()

    if len(blob) < _HEADER.size:
        raise FormatError(f"{path}: truncated header at byte {len(blob)}")
    magic, dtype_code, rank = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r} at byte 0")
    if dtype_code != DTYPE_FLOAT32:
        raise FormatError(f"{path}: unknown dtype code {dtype_code} at byte 4")

    dims_end = _HEADER.size + 4 * rank
    if len(blob) < dims_end:
        raise FormatError(f"{path}: truncated dims at byte {len(blob)}")
    dims = struct.unpack_from(f"<{rank}I", blob, _HEADER.size) if rank else ()

    count = 1
    for dim in dims:
        if dim == 0:
            raise FormatError(f"{path}: zero dimension in header at byte {_HEADER.size}")
        count *= dim
    if count > _MAX_ELEMENTS:
        raise FormatError(f"{path}: dim overflow, {count} elements declared at byte {_HEADER.size}")

    expected = count * 4
    actual = len(blob) - dims_end
    if actual != expected:
        raise FormatError(
            f"{path}: payload of {actual} bytes at byte {dims_end}, header declares {expected}")
    flat = np.frombuffer(blob, dtype="<f4", offset=dims_end)
    return flat.reshape(dims).astype(np.float32, copy=True)


@dataclass
class DatasetItem:
    item_id: str
    features: np.ndarray       # (h, w, c) float32
    captions: list             # lists of token indices
    split: str
    image_dims: tuple | None = None  # declared source (W, H), if any


@dataclass
class ManifestEntry:
    item_id: str
    feature_path: str
    captions: list
    split: str
    image_dims: tuple | None = None


def write_manifest(path, entries):
    lines = []
    for e in entries:
        cells = [e.item_id, e.feature_path]
        cells += [",".join(str(t) for t in caption) for caption in e.captions]
        cells.append(e.split)
        if e.image_dims is not None:
            cells.append(f"{e.image_dims[0]}x{e.image_dims[1]}")
        lines.append("\t".join(cells))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_manifest_line(line, lineno):
    cells = line.rstrip("\n").split("\t")
    if len(cells) < 4:
        raise FormatError(f"manifest line {lineno}: expected at least 4 fields, got {len(cells)}")
    dims = None
    tail = cells[-1]
    if "x" in tail and tail.replace("x", "").isdigit():
        w_str, _, h_str = tail.partition("x")
        dims = (int(w_str), int(h_str))
        cells = cells[:-1]
    split = cells[-1]
    if split not in _SPLITS:
        raise FormatError(f"manifest line {lineno}: unknown split tag {split!r}")
    captions = []
    for cell in cells[2:-1]:
        try:
            captions.append([int(tok) for tok in cell.split(",")])
        except ValueError as exc:
            raise FormatError(f"manifest line {lineno}: bad caption field {cell!r}") from exc
    if not captions:
        raise FormatError(f"manifest line {lineno}: item has no captions")
    return ManifestEntry(cells[0], cells[1], captions, split, dims)


def load_dataset(manifest_path, split=None):
    """Items from a manifest, optionally filtered by split tag.

    Feature paths resolve relative to the manifest's directory. Iteration
    order is the manifest's line order (stable across loads).
    """
    base = os.path.dirname(os.path.abspath(manifest_path))
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise FormatError(f"cannot read manifest {manifest_path}: {exc}") from exc

    items = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        entry = _parse_manifest_line(line, lineno)
        if split is not None and entry.split != split:
            continue
        feature_path = os.path.join(base, entry.feature_path)
        try:
            features = read_tensor(feature_path)
        except OSError as exc:
            raise FormatError(
                f"manifest line {lineno}: missing feature file {feature_path}") from exc
        if features.ndim != 3:
            raise FormatError(
                f"manifest line {lineno}: feature file {feature_path} has rank {features.ndim}, expected 3")
        if entry.image_dims is not None:
            h, w, _ = features.shape
            W, H = entry.image_dims
            if (W, H) != (w * 32, h * 32):
                raise FormatError(
                    f"manifest line {lineno}: declared image {W}x{H} inconsistent with "
                    f"{w}x{h} feature grid under stride 32")
        items.append(DatasetItem(entry.item_id, features, entry.captions, entry.split,
                                 entry.image_dims))
    return items


def write_heatmap(raster, path):
    """8-bit grayscale binary PGM with per-map min-max normalization.

    The byte range spans the full 0..255 after normalization; a constant
    raster maps to all zeros.
    """
    values = np.asarray(raster, dtype=np.float64)
    if values.size == 0:
        raise ContractError("cannot export an empty heatmap")
    lo, hi = float(values.min()), float(values.max())
    if hi > lo:
        scaled = np.rint((values - lo) / (hi - lo) * 255.0).astype(np.uint8)
    else:
        scaled = np.zeros(values.shape, dtype=np.uint8)
    h, w = scaled.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(scaled.tobytes())


@dataclass
class SynthSpec:
    """Knobs of the synthetic paired dataset.

    Each item draws a latent class; its feature map is background noise with
    the class's template vector planted at a few random cells plus an
    item-specific signature vector at two further cells, so items stay
    distinguishable within a class. Captions always contain the class token
    and an item-specific token, with the remaining slots drawn from a small
    per-item filler pool: same-class captions of different items then share
    only the class token, which keeps hard negatives separable from the
    start while the class structure still transfers to held-out items.
    """

    classes: int = 10
    items: int = 200
    grid_w: int = 4
    grid_h: int = 4
    channels: int = 8
    vocab: int = 256
    captions_per_item: int = 5
    noise: float = 0.1
    planted_fraction: float = 0.5  # share of grid cells carrying the class template
    caption_min_len: int = 4
    caption_max_len: int = 8
    split_fractions: tuple = (0.7, 0.15, 0.15)

    def __post_init__(self):
        if min(self.classes, self.items, self.grid_w, self.grid_h, self.channels,
               self.vocab, self.captions_per_item) < 1:
            raise ConfigError("all synthetic dataset parameters must be positive")
        if self.vocab < self.classes + self.items + 2:
            raise ConfigError(
                f"vocab of {self.vocab} too small: need 1 reserved + {self.classes} class "
                f"+ {self.items} item tokens plus filler")

    def class_token(self, klass):
        return 1 + klass  # 0 is the reserved unknown token

    def item_token(self, index):
        return 1 + self.classes + index

    @property
    def filler_range(self):
        return (1 + self.classes + self.items, self.vocab)


def synth_dataset(out_dir, seed, spec=None, **overrides):
    """Generate feature tensors + manifest under out_dir; returns manifest path.

    Deterministic per seed: the same seed writes byte-identical files. The
    split assignment is by item order using the configured fractions.
    """
    spec = spec or SynthSpec(**overrides)
    rng = np.random.default_rng(seed)
    os.makedirs(out_dir, exist_ok=True)
    features_dir = os.path.join(out_dir, "features")
    os.makedirs(features_dir, exist_ok=True)

    templates = rng.normal(loc=0.0, scale=2.0, size=(spec.classes, spec.channels))
    n_train = int(spec.items * spec.split_fractions[0])
    n_val = int(spec.items * spec.split_fractions[1])

    entries = []
    cells = spec.grid_w * spec.grid_h
    planted = max(1, int(cells * spec.planted_fraction))
    filler_lo, filler_hi = spec.filler_range
    signature_cells = min(2, max(1, cells - planted))
    for index in range(spec.items):
        klass = index % spec.classes
        grid = rng.normal(scale=spec.noise, size=(spec.grid_h, spec.grid_w, spec.channels))
        spots = rng.choice(cells, size=planted + signature_cells, replace=False)
        signature = rng.normal(loc=0.0, scale=2.0, size=spec.channels)
        # template cells carry a trace of the signature so any attended
        # planted cell exposes both the class and the item identity
        for cell in spots[:planted]:
            grid[cell // spec.grid_w, cell % spec.grid_w] += templates[klass] + 0.5 * signature
        for cell in spots[planted:]:
            grid[cell // spec.grid_w, cell % spec.grid_w] += signature

        item_id = f"item{index:05d}"
        feature_name = os.path.join("features", f"{item_id}.mht")
        write_tensor(os.path.join(out_dir, feature_name), grid.astype(np.float32))

        filler_pool = rng.integers(filler_lo, filler_hi, size=4)
        captions = []
        for _ in range(spec.captions_per_item):
            length = int(rng.integers(spec.caption_min_len, spec.caption_max_len + 1))
            tokens = [int(filler_pool[t]) for t in rng.integers(0, len(filler_pool), size=length)]
            slots = rng.choice(length, size=min(2, length), replace=False)
            tokens[slots[0]] = spec.class_token(klass)
            if len(slots) > 1:
                tokens[slots[1]] = spec.item_token(index)
            captions.append(tokens)

        split = "train" if index < n_train else ("val" if index < n_train + n_val else "test")
        entries.append(ManifestEntry(item_id, feature_name, captions, split,
                                     image_dims=(spec.grid_w * 32, spec.grid_h * 32)))

    manifest_path = os.path.join(out_dir, "manifest.tsv")
    write_manifest(manifest_path, entries)
    return manifest_path
