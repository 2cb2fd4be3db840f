"""The 8x8 handwritten digits corpus: loading, scaling, augmentation, splits.

The corpus is the 1797-image distribution of the UCI optical digits set
(64 pixels per image, raw values 0..16, labels 0..9).  A copy is bundled
with the package; ``load_optdigits`` reads the same CSV format from any
path.  Pixels are used scaled to [-1, 1] everywhere downstream.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass

import numpy as np

from .features import GRID, N_PIXELS, Inversion, Shift

RAW_MAX = 16
N_CLASSES = 10

# order matters: original, right, left, down, up
AUGMENT_SHIFTS = [Shift(0, 0), Shift(1, 0), Shift(-1, 0), Shift(0, 1), Shift(0, -1)]


@dataclass(frozen=True)
class GrayImage:
    """One 8x8 image: 64 scaled pixels in [-1, 1], a digit label, and the
    index of the source image it was derived from (augmented copies share
    their origin_id)."""

    pixels: np.ndarray
    label: int
    origin_id: int

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.float64)
        if pixels.shape != (N_PIXELS,):
            raise ValueError(f"expected {N_PIXELS} pixels, got shape {pixels.shape}")
        if np.abs(pixels).max(initial=0.0) > 1.0:
            raise ValueError("pixels must lie in [-1, 1]")
        if not 0 <= self.label < N_CLASSES:
            raise ValueError(f"label must be in 0..9, got {self.label}")
        object.__setattr__(self, "pixels", pixels)

    def grid(self) -> np.ndarray:
        return self.pixels.reshape(GRID, GRID)


class Dataset:
    """An ordered collection of GrayImages, stored as arrays.

    ``lineage`` records the derivations applied (for manifests/reports).
    """

    def __init__(self, pixels, labels, origin_ids, name="dataset", lineage=()):
        self.pixels = np.asarray(pixels, dtype=np.float64).reshape(-1, N_PIXELS)
        self.labels = np.asarray(labels, dtype=np.int64).reshape(-1)
        self.origin_ids = np.asarray(origin_ids, dtype=np.int64).reshape(-1)
        if not (len(self.pixels) == len(self.labels) == len(self.origin_ids)):
            raise ValueError("pixels, labels and origin_ids must have equal length")
        if np.abs(self.pixels).max(initial=0.0) > 1.0:
            raise ValueError("pixels must lie in [-1, 1]")
        if self.labels.min(initial=0) < 0 or self.labels.max(initial=0) >= N_CLASSES:
            raise ValueError("labels must be in 0..9")
        self.name = name
        self.lineage = list(lineage)

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, i: int) -> GrayImage:
        return GrayImage(self.pixels[i].copy(), int(self.labels[i]), int(self.origin_ids[i]))

    def derive(self, pixels, labels, origin_ids, name, step) -> "Dataset":
        return Dataset(pixels, labels, origin_ids, name=name, lineage=self.lineage + [step])

    def manifest(self) -> dict:
        return {
            "name": self.name,
            "size": len(self),
            "n_origins": int(len(np.unique(self.origin_ids))),
            "lineage": list(self.lineage),
        }


def scale_to_unit(raw):
    """Map raw pixel values 0..16 linearly to [-1, 1]: x = raw/8 - 1."""
    arr = np.asarray(raw)
    if np.any(arr < 0) or np.any(arr > RAW_MAX):
        raise ValueError(f"raw pixel values must be in 0..{RAW_MAX}")
    scaled = arr / 8.0 - 1.0
    return float(scaled) if np.isscalar(raw) else scaled


def unscale(x):
    """Inverse of scale_to_unit; exact on the 17-level grid."""
    return np.rint((np.asarray(x) + 1.0) * 8.0).astype(np.int64)


def load_optdigits(path) -> tuple[np.ndarray, np.ndarray]:
    """Read an optdigits CSV: 65 comma-separated integers per line
    (64 raw pixels in 0..16, then the label).  Returns (raw, labels)."""
    raw_rows, labels = [], []
    with open(path, "r", encoding="ascii") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != N_PIXELS + 1:
                raise ValueError(f"{path}: line {lineno}: expected 65 fields, got {len(parts)}")
            try:
                values = [int(p) for p in parts]
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: non-integer field") from None
            row, label = values[:N_PIXELS], values[N_PIXELS]
            if min(row) < 0 or max(row) > RAW_MAX:
                raise ValueError(f"{path}: line {lineno}: pixel value outside 0..{RAW_MAX}")
            if not 0 <= label < N_CLASSES:
                raise ValueError(f"{path}: line {lineno}: label {label} outside 0..9")
            raw_rows.append(row)
            labels.append(label)
    if not raw_rows:
        raise ValueError(f"{path}: empty dataset file")
    return np.array(raw_rows, dtype=np.int64), np.array(labels, dtype=np.int64)


def dataset_from_raw(raw, labels, name="optdigits") -> Dataset:
    """Scale raw pixels and assign origin_ids by file order."""
    raw = np.asarray(raw, dtype=np.int64)
    return Dataset(scale_to_unit(raw), labels, np.arange(len(raw)), name=name,
                   lineage=[f"loaded {len(raw)} images, scaled to [-1,1]"])


def load_dataset(path, name="optdigits") -> Dataset:
    raw, labels = load_optdigits(path)
    return dataset_from_raw(raw, labels, name=name)


def bundled_data_path():
    """Path of the CSV copy shipped inside the package."""
    return importlib.resources.files("symdigits").joinpath("assets/optdigits.csv")


def load_bundled_dataset() -> Dataset:
    return load_dataset(str(bundled_data_path()), name="optdigits")


def augment_shifts(ds: Dataset) -> Dataset:
    """Enlarge by a factor of 5: each image plus its four 1-pixel shifts
    (right, left, down, up), background filled with -1.  Copies keep the
    origin_id of their source image."""
    n = len(ds)
    shifted = np.stack([s.apply(ds.pixels) for s in AUGMENT_SHIFTS], axis=1)  # (n, 5, 64)
    pixels = shifted.reshape(5 * n, N_PIXELS)
    labels = np.repeat(ds.labels, 5)
    origins = np.repeat(ds.origin_ids, 5)
    return ds.derive(pixels, labels, origins, name=ds.name + "+shifts",
                     step="augmented x5 with 1-pixel shifts (fill -1)")


def symmetrize(ds: Dataset) -> Dataset:
    """Append the grayscale-inverted copy of every image (same labels)."""
    inv = Inversion().apply(ds.pixels)
    pixels = np.concatenate([ds.pixels, inv])
    labels = np.concatenate([ds.labels, ds.labels])
    origins = np.concatenate([ds.origin_ids, ds.origin_ids])
    return ds.derive(pixels, labels, origins, name="+-" + ds.name,
                     step="symmetrized: appended inverted copy")


def invert_dataset(ds: Dataset) -> Dataset:
    """The inverted copy -X of a dataset (labels unchanged)."""
    return ds.derive(Inversion().apply(ds.pixels), ds.labels, ds.origin_ids,
                     name="-" + ds.name, step="inverted every image")


def split(ds: Dataset, test_fraction: float = 0.25, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Deterministic train/test split on origin_id groups.

    All augmented copies of one source image land on the same side, so
    shifted copies never leak across the split.  The test side receives
    floor(test_fraction * n_origins) origin groups.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    origins = np.unique(ds.origin_ids)
    n_test = int(np.floor(test_fraction * len(origins)))
    if n_test == 0 or n_test == len(origins):
        raise ValueError("split would leave one side empty")
    perm = np.random.default_rng(seed).permutation(origins)
    test_origins = np.sort(perm[:n_test])
    is_test = np.isin(ds.origin_ids, test_origins)
    step = f"split by origin groups, test_fraction={test_fraction}, seed={seed}"
    train = ds.derive(ds.pixels[~is_test], ds.labels[~is_test], ds.origin_ids[~is_test],
                      name=ds.name + ".train", step=step + " (train side)")
    test = ds.derive(ds.pixels[is_test], ds.labels[is_test], ds.origin_ids[is_test],
                     name=ds.name + ".test", step=step + " (test side)")
    return train, test


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------


def pixels_to_gray_levels(pixels) -> np.ndarray:
    """Quantize [-1, 1] to 0..255: v = rint(255 * (x + 1) / 2).

    For every representable value except exactly 0.0 this commutes with
    inversion: v(-x) == 255 - v(x).  An exactly-zero pixel sits on the
    127.5 midpoint, which no integer scale can split symmetrically.
    """
    x = np.asarray(pixels, dtype=np.float64)
    if np.abs(x).max(initial=0.0) > 1.0:
        raise ValueError("pixels must lie in [-1, 1]")
    return np.clip(np.rint(255.0 * (x + 1.0) / 2.0), 0, 255).astype(np.int64)


def render_image(image, path) -> None:
    """Write an 8x8 plain-text PGM (P2), [-1, 1] mapped linearly to 0..255."""
    pixels = getattr(image, "pixels", image)
    levels = pixels_to_gray_levels(pixels).reshape(GRID, GRID)
    lines = ["P2", f"{GRID} {GRID}", "255"]
    lines += [" ".join(str(v) for v in row) for row in levels.tolist()]
    with open(path, "w", encoding="ascii") as f:
        f.write("\n".join(lines) + "\n")


def read_pgm(path) -> np.ndarray:
    """Read back a plain P2 PGM written by render_image (for tests/tools)."""
    with open(path, "r", encoding="ascii") as f:
        tokens = f.read().split()
    if tokens[0] != "P2":
        raise ValueError(f"{path}: not a plain PGM (P2) file")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    values = np.array([int(t) for t in tokens[4:]], dtype=np.int64)
    if len(values) != w * h:
        raise ValueError(f"{path}: expected {w * h} samples, got {len(values)}")
    if values.min(initial=0) < 0 or values.max(initial=0) > maxval:
        raise ValueError(f"{path}: sample outside 0..{maxval}")
    return values.reshape(h, w)


def class_counts(ds: Dataset) -> np.ndarray:
    return np.bincount(ds.labels, minlength=N_CLASSES)


def dataset_stats(ds: Dataset) -> dict:
    """Class counts and a histogram of the (unscaled) pixel levels."""
    raw = unscale(ds.pixels)
    hist = np.bincount(raw.reshape(-1), minlength=RAW_MAX + 1)
    return {
        "name": ds.name,
        "size": len(ds),
        "class_counts": class_counts(ds).tolist(),
        "pixel_histogram": hist.tolist(),
        "lineage": list(ds.lineage),
    }
