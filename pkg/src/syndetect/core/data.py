"""Dataset access.

Directory layout (one subdirectory per split, comma-separated index file):

    <root>/<dataset>/<split>/index.csv      # lines of "relative/path.png,label"
    <root>/<dataset>/<split>/images/*.png

Only ``train`` and ``test`` exist on disk. The ``validation`` split is carved
out of ``train`` by a seeded partition (10% of train, disjoint from the
remaining train samples).

Real MNIST/GTSRB/CIFAR-10 are not fetchable in this environment, so desk-scale
stand-ins can be materialized procedurally into the same layout via
:func:`materialize`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np
import torch
from PIL import Image, ImageDraw, ImageFilter, ImageFont

from .errors import ConfigurationError, DataError
from .seeding import Seed, as_seed, make_rng, spawn

DATASET_NAMES = ("digits", "traffic_signs", "natural_images")
SPLITS = ("train", "validation", "test")

VALIDATION_FRACTION = 0.10


@dataclass(frozen=True)
class DatasetInfo:
    num_classes: int
    channels: int
    image_size: int
    train_size: int  # canonical full-scale sizes
    test_size: int


DATASETS = {
    "digits": DatasetInfo(num_classes=10, channels=1, image_size=28, train_size=50000, test_size=10000),
    "traffic_signs": DatasetInfo(num_classes=43, channels=3, image_size=32, train_size=35288, test_size=12630),
    "natural_images": DatasetInfo(num_classes=10, channels=3, image_size=32, train_size=50000, test_size=10000),
}


@dataclass(frozen=True)
class DatasetHandle:
    name: str
    split: str
    root: Path

    def __post_init__(self) -> None:
        if self.name not in DATASET_NAMES:
            raise ConfigurationError(f"unknown dataset {self.name!r}; expected one of {DATASET_NAMES}")
        if self.split not in SPLITS:
            raise ConfigurationError(f"unknown split {self.split!r}; expected one of {SPLITS}")
        object.__setattr__(self, "root", Path(self.root))

    @property
    def info(self) -> DatasetInfo:
        return DATASETS[self.name]

    @property
    def split_dir(self) -> Path:
        # validation is virtual: it lives inside the train directory
        physical = "train" if self.split == "validation" else self.split
        return self.root / self.name / physical


def _read_index(split_dir: Path) -> list[tuple[str, int]]:
    index = split_dir / "index.csv"
    if not split_dir.is_dir():
        raise DataError(f"dataset directory not found: {split_dir}")
    if not index.is_file():
        raise DataError(f"index file not found: {index}")
    rows: list[tuple[str, int]] = []
    with open(index, newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            rows.append((row[0], int(row[1])))
    if not rows:
        raise DataError(f"index file is empty: {index}")
    return rows


def _partition_train(rows: list[tuple[str, int]], split: str, seed: Seed) -> list[tuple[str, int]]:
    """Seeded train/validation carve-out; the two parts never overlap."""
    rng = make_rng(seed, "validation-split")
    order = rng.permutation(len(rows))
    n_val = max(1, int(round(VALIDATION_FRACTION * len(rows))))
    chosen = order[:n_val] if split == "validation" else order[n_val:]
    return [rows[i] for i in sorted(chosen)]


def index_rows(handle: DatasetHandle, seed: "Seed | int" = 0) -> list[tuple[str, int]]:
    rows = _read_index(handle.split_dir)
    if handle.split in ("train", "validation"):
        rows = _partition_train(rows, handle.split, as_seed(seed))
    return rows


def _load_image(path: Path, info: DatasetInfo) -> np.ndarray:
    with Image.open(path) as img:
        img = img.convert("L" if info.channels == 1 else "RGB")
        arr = np.asarray(img, dtype=np.float32) / 255.0
    if info.channels == 1:
        arr = arr[None]
    else:
        arr = arr.transpose(2, 0, 1)
    return arr


def load_dataset(
    handle: DatasetHandle,
    batch_size: int = 128,
    seed: "Seed | int" = 0,
    shuffle: bool = False,
) -> Iterator[tuple[torch.Tensor, torch.Tensor]]:
    """Stream (ImageBatch, LabelBatch) pairs in a seed-deterministic order."""
    seed = as_seed(seed)
    info = handle.info
    rows = index_rows(handle, seed)
    order = np.arange(len(rows))
    if shuffle:
        order = make_rng(seed, f"shuffle:{handle.name}:{handle.split}").permutation(len(rows))
    for start in range(0, len(rows), batch_size):
        idx = order[start : start + batch_size]
        images = np.stack([_load_image(handle.split_dir / rows[i][0], info) for i in idx])
        labels = np.array([rows[i][1] for i in idx], dtype=np.int64)
        if labels.min() < 0 or labels.max() >= info.num_classes:
            raise DataError(f"label outside [0, {info.num_classes}) in {handle.split_dir}")
        yield torch.from_numpy(images), torch.from_numpy(labels)


def load_split_arrays(handle: DatasetHandle, seed: "Seed | int" = 0, limit: int | None = None) -> tuple[torch.Tensor, torch.Tensor]:
    """Load an entire split into memory (desk-scale convenience)."""
    xs, ys = [], []
    total = 0
    for xb, yb in load_dataset(handle, batch_size=512, seed=seed):
        xs.append(xb)
        ys.append(yb)
        total += len(yb)
        if limit is not None and total >= limit:
            break
    x = torch.cat(xs)[:limit]
    y = torch.cat(ys)[:limit]
    return x, y


def split_size(handle: DatasetHandle, seed: "Seed | int" = 0) -> int:
    return len(index_rows(handle, seed))


# ---------------------------------------------------------------------------
# Procedural desk-scale stand-ins
# ---------------------------------------------------------------------------

_FONT_DIR = Path("/usr/share/fonts/truetype/dejavu")
_FONT_FILES = (
    "DejaVuSans.ttf",
    "DejaVuSans-Bold.ttf",
    "DejaVuSerif.ttf",
    "DejaVuSerif-Bold.ttf",
    "DejaVuSansMono.ttf",
    "DejaVuSansMono-Bold.ttf",
)

# Foreground contrast of the rendered digits. 0.25 places the epsilon=8/255
# white-box regime at the reference operating point (near-total fooling of the
# undefended classifier) while the task stays >=99%-learnable.
DIGITS_CONTRAST = 0.25


def _available_fonts() -> list[str]:
    fonts = [str(_FONT_DIR / f) for f in _FONT_FILES if (_FONT_DIR / f).exists()]
    if not fonts:
        raise DataError(f"no usable fonts under {_FONT_DIR}")
    return fonts


def _render_digit(digit: int, rng: np.random.Generator, contrast: float) -> np.ndarray:
    fonts = _available_fonts()
    size = int(rng.integers(17, 25))
    font = ImageFont.truetype(fonts[int(rng.integers(len(fonts)))], size)
    img = Image.new("L", (56, 56), 0)
    ImageDraw.Draw(img).text((28, 28), str(digit), fill=255, font=font, anchor="mm")
    img = img.rotate(float(rng.uniform(-14, 14)), resample=Image.BILINEAR, center=(28, 28))
    dx, dy = int(rng.integers(-3, 4)), int(rng.integers(-3, 4))
    img = img.crop((14 + dx, 14 + dy, 42 + dx, 42 + dy))
    if rng.random() < 0.5:
        img = img.filter(ImageFilter.GaussianBlur(float(rng.uniform(0.3, 0.9))))
    x = np.asarray(img, dtype=np.float32) / 255.0
    x = x * float(rng.uniform(0.55, 1.0)) * contrast
    x = x + rng.normal(0.0, 0.02, x.shape).astype(np.float32)
    return np.clip(x, 0.0, 1.0)


def _render_texture(label: int, rng: np.random.Generator, num_classes: int) -> np.ndarray:
    """32x32 RGB composite whose palette and stripe geometry encode the class."""
    h = w = 32
    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    angle = 2 * np.pi * label / num_classes + rng.normal(0, 0.15)
    freq = 0.2 + 0.05 * (label % 5) + rng.normal(0, 0.01)
    phase = rng.uniform(0, 2 * np.pi)
    wave = 0.5 + 0.5 * np.sin(freq * (np.cos(angle) * xx + np.sin(angle) * yy) + phase)
    hue = (label / num_classes + rng.normal(0, 0.02)) % 1.0
    base = np.array([abs(hue * 6 % 2 - 1), abs((hue * 6 + 2) % 2 - 1), abs((hue * 6 + 4) % 2 - 1)])
    base = 1.0 - 0.8 * base
    img = wave[None] * base[:, None, None]
    cx, cy = rng.uniform(8, 24, 2)
    r = rng.uniform(4, 9)
    blob = ((xx - cx) ** 2 + (yy - cy) ** 2 < r**2).astype(np.float32)
    img = img * (1 - 0.5 * blob[None]) + 0.5 * blob[None] * base[::-1][:, None, None]
    img = img + rng.normal(0, 0.03, img.shape)
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def _render_sign(label: int, rng: np.random.Generator) -> np.ndarray:
    """32x32 RGB toy traffic sign: class-colored polygon plus the class number."""
    fonts = _available_fonts()
    img = Image.new("RGB", (32, 32), tuple(int(v) for v in rng.integers(60, 140, 3)))
    draw = ImageDraw.Draw(img)
    shape = label % 4
    colors = [(200, 30, 30), (30, 60, 200), (220, 200, 40), (240, 240, 240)]
    color = colors[label % len(colors)]
    box = (4 + int(rng.integers(-2, 3)), 4 + int(rng.integers(-2, 3)), 27, 27)
    if shape == 0:
        draw.ellipse(box, fill=color)
    elif shape == 1:
        draw.rectangle(box, fill=color)
    elif shape == 2:
        draw.polygon([(16, box[1]), (box[0], box[3]), (box[2], box[3])], fill=color)
    else:
        draw.polygon([(16, box[1]), (box[2], 16), (16, box[3]), (box[0], 16)], fill=color)
    font = ImageFont.truetype(fonts[int(rng.integers(len(fonts)))], 12)
    draw.text((16, 16), f"{label % 43}", fill=(0, 0, 0), font=font, anchor="mm")
    arr = np.asarray(img, dtype=np.float32) / 255.0
    arr = arr + rng.normal(0, 0.02, arr.shape)
    return np.clip(arr, 0.0, 1.0).astype(np.float32).transpose(2, 0, 1)


def _render_sample(name: str, label: int, rng: np.random.Generator, contrast: float) -> np.ndarray:
    if name == "digits":
        return _render_digit(label, rng, contrast)[None]
    if name == "natural_images":
        return _render_texture(label, rng, DATASETS[name].num_classes)
    return _render_sign(label, rng)


def materialize(
    root: "Path | str",
    name: str,
    n_train: int | None = None,
    n_test: int | None = None,
    seed: "Seed | int" = 0,
    contrast: float = DIGITS_CONTRAST,
    overwrite: bool = False,
) -> Path:
    """Render a procedural stand-in dataset into the index-file layout.

    Defaults to the canonical full-scale split sizes; pass ``n_train``/``n_test``
    for smaller desk runs. Returns the dataset directory. Existing complete
    splits are left untouched unless ``overwrite`` is set.
    """
    info = DATASETS[name]
    root = Path(root)
    sizes = {"train": n_train or info.train_size, "test": n_test or info.test_size}
    for split, n in sizes.items():
        split_dir = root / name / split
        if (split_dir / "index.csv").exists() and not overwrite:
            continue
        img_dir = split_dir / "images"
        img_dir.mkdir(parents=True, exist_ok=True)
        rng = make_rng(spawn(seed, f"materialize:{name}:{split}"))
        rows = []
        for i in range(n):
            label = i % info.num_classes
            arr = _render_sample(name, label, rng, contrast)
            rel = f"images/{i:06d}.png"
            if info.channels == 1:
                pil = Image.fromarray((arr[0] * 255).round().astype(np.uint8), mode="L")
            else:
                pil = Image.fromarray((arr.transpose(1, 2, 0) * 255).round().astype(np.uint8), mode="RGB")
            pil.save(split_dir / rel)
            rows.append((rel, label))
        with open(split_dir / "index.csv", "w", newline="") as fh:
            csv.writer(fh).writerows(rows)
    return root / name
