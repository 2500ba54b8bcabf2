"""Dataset manifests, PGM image I/O and a seeded synthetic traverse generator.

A manifest is a CSV file with header ``path,label,traverse``; paths are
relative to the manifest's directory. Reference manifests must cover labels
``0..R-1`` and every traverse must contain every label.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .signal import as_image, to_grayscale

log = logging.getLogger(__name__)

MANIFEST_COLUMNS = ("path", "label", "traverse")
_PNM_SUFFIXES = {".pgm", ".ppm", ".pnm"}


def _pnm_tokens(buf: bytes, count: int):
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(buf) and buf[pos:pos + 1].isspace():
            pos += 1
        if buf[pos:pos + 1] == b"#":
            while pos < len(buf) and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos:pos + 1].isspace() and buf[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise DataError("truncated PNM header")
        tokens.append(buf[start:pos])
    return tokens, pos + 1  # single whitespace byte ends the header


def read_pnm(path) -> np.ndarray:
    """Read an 8/16-bit binary PGM (P5) or PPM (P6) as a grayscale ``uint8`` image."""
    buf = Path(path).read_bytes()
    magic = buf[:2]
    if magic not in (b"P5", b"P6"):
        raise DataError(f"{path}: not a binary PGM/PPM file (magic {magic!r})")
    (w, h, maxval), offset = _pnm_tokens(buf[2:], 3)
    w, h, maxval = int(w), int(h), int(maxval)
    if not 0 < maxval < 65536:
        raise DataError(f"{path}: invalid maxval {maxval}")
    channels = 3 if magic == b"P6" else 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    n = w * h * channels
    data = np.frombuffer(buf, dtype=dtype, count=n, offset=2 + offset) if len(buf) >= 2 + offset + n * dtype.itemsize else None
    if data is None:
        raise DataError(f"{path}: pixel data truncated")
    img = data.reshape(h, w, channels).astype(np.float64)
    if maxval != 255:
        img = np.floor(img * 255.0 / maxval + 0.5)
    return to_grayscale(img) if channels == 3 else as_image(img[..., 0])


def write_pgm(path, img: np.ndarray) -> None:
    img = as_image(img)
    h, w = img.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + img.tobytes())


def load_image(path) -> np.ndarray:
    """Load any image as 8-bit grayscale; PGM/PPM natively, other formats through Pillow."""
    path = Path(path)
    if path.suffix.lower() in _PNM_SUFFIXES:
        return read_pnm(path)
    from PIL import Image

    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"))
    return to_grayscale(arr)


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    label: int
    traverse: str


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]
    role: str = "reference"
    images: list[np.ndarray] = field(default_factory=list, repr=False)

    @property
    def labels(self) -> np.ndarray:
        return np.array([e.label for e in self.entries], dtype=np.int64)

    @property
    def traverses(self) -> list[str]:
        seen: dict[str, None] = {}
        for e in self.entries:
            seen.setdefault(e.traverse)
        return list(seen)

    @property
    def n_labels(self) -> int:
        return int(self.labels.max()) + 1 if self.entries else 0

    def __len__(self) -> int:
        return len(self.entries)


def validate_manifest(manifest: DatasetManifest) -> None:
    """Check label contiguity (reference role) and per-traverse completeness."""
    if not manifest.entries:
        raise DataError("manifest has no entries")
    labels = sorted({e.label for e in manifest.entries})
    if labels[0] < 0:
        raise DataError(f"negative label {labels[0]}")
    if manifest.role == "reference":
        if labels[0] != 0:
            raise DataError(f"label gap at 0: labels must start at 0")
        for expected, got in zip(range(len(labels)), labels):
            if expected != got:
                raise DataError(f"label gap at {expected}")
    by_traverse: dict[str, set[int]] = {}
    for e in manifest.entries:
        by_traverse.setdefault(e.traverse, set()).add(e.label)
    all_labels = set(labels)
    for trav, present in by_traverse.items():
        missing = sorted(all_labels - present)
        if missing:
            pairs = ", ".join(f"({trav!r}, {l})" for l in missing)
            raise DataError(f"traverse {trav!r} is missing labels: {pairs}")


def read_manifest(path, role: str = "reference") -> DatasetManifest:
    """Parse a manifest CSV without loading images."""
    path = Path(path)
    base = path.parent
    entries = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(c.strip() for c in reader.fieldnames) != MANIFEST_COLUMNS:
            raise DataError(f"{path}: header must be {','.join(MANIFEST_COLUMNS)}, got {reader.fieldnames}")
        for lineno, row in enumerate(reader, start=2):
            try:
                label = int(row["label"])
            except (TypeError, ValueError):
                raise DataError(f"{path}:{lineno}: label {row['label']!r} is not an integer") from None
            if not row["path"]:
                raise DataError(f"{path}:{lineno}: empty path")
            entries.append(ManifestEntry(base / row["path"], label, row["traverse"]))
    return DatasetManifest(entries, role)


def load_manifest(path, role: str = "reference", load_images: bool = True) -> DatasetManifest:
    """Read, validate and (optionally) load the images of a manifest."""
    manifest = read_manifest(path, role)
    validate_manifest(manifest)
    if load_images:
        manifest.images = [load_image(e.path) for e in manifest.entries]
    return manifest


def merge_manifests(manifests: list[DatasetManifest], role: str = "reference") -> DatasetManifest:
    entries = [e for m in manifests for e in m.entries]
    images = [im for m in manifests for im in m.images]
    merged = DatasetManifest(entries, role, images)
    validate_manifest(merged)
    return merged


def write_manifest(path, entries: list[ManifestEntry]) -> None:
    path = Path(path)
    base = path.parent.resolve()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_COLUMNS)
        for e in entries:
            p = Path(e.path)
            rel = p.resolve().relative_to(base) if p.is_absolute() else p
            w.writerow([rel.as_posix(), e.label, e.traverse])


# ----------------------------------------------------------------------------
# synthetic traverses


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the synthetic benchmark.

    ``traverses`` counts the reference traverses; one query traverse is
    always generated on top of them.
    """

    R: int = 20
    traverses: int = 2
    noise_sigma: float = 10.0
    brightness_jitter: float = 30.0
    max_shift: int = 0
    blur_radius: int = 2
    seed: int = 0
    width: int = 56
    height: int = 56

    def __post_init__(self):
        if self.R < 1:
            raise DataError(f"R must be >= 1, got {self.R}")
        if self.traverses < 1:
            raise DataError(f"traverses must be >= 1, got {self.traverses}")
        for name in ("noise_sigma", "brightness_jitter", "max_shift", "blur_radius"):
            if getattr(self, name) < 0:
                raise DataError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.width < 1 or self.height < 1:
            raise DataError("image size must be positive")

    @classmethod
    def from_json(cls, path) -> "SynthSpec":
        return cls(**json.loads(Path(path).read_text()))


_TWO_PI = 6.283185307179586


def _box_blur(img: np.ndarray, radius: int) -> np.ndarray:
    # periodic box filter in integer arithmetic, rounded half-up
    if radius == 0:
        return img.copy()
    k = 2 * radius + 1
    acc = np.zeros_like(img, dtype=np.int64)
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            acc += np.roll(img, (dy, dx), axis=(0, 1))
    n = k * k
    return (2 * acc + n) // (2 * n)


def _stretch(img: np.ndarray) -> np.ndarray:
    lo, hi = int(img.min()), int(img.max())
    if hi == lo:
        return np.zeros_like(img)
    return ((img - lo) * 510 + (hi - lo)) // (2 * (hi - lo))


def _gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    u1 = rng.random(shape)
    u2 = rng.random(shape)
    return np.sqrt(-2.0 * np.log(1.0 - u1)) * np.cos(_TWO_PI * u2)


@dataclass
class SyntheticDataset:
    spec: SynthSpec
    bases: list[np.ndarray]
    images: dict[str, list[np.ndarray]]  # traverse id -> image per label

    @property
    def reference_ids(self) -> list[str]:
        return [f"ref{t}" for t in range(self.spec.traverses)]

    def manifest(self, traverse_ids: list[str], role: str) -> DatasetManifest:
        entries, images = [], []
        for t in traverse_ids:
            for label, img in enumerate(self.images[t]):
                entries.append(ManifestEntry(Path("images") / t / f"{label:04d}.pgm", label, t))
                images.append(img)
        return DatasetManifest(entries, role, images)

    def reference(self) -> DatasetManifest:
        return self.manifest(self.reference_ids, "reference")

    def query(self) -> DatasetManifest:
        return self.manifest(["query"], "query")

    def write(self, out_dir) -> dict[str, Path]:
        """Write PGM images, one manifest per traverse and a ``spec.json`` echo."""
        out = Path(out_dir)
        written = {}
        for t, imgs in self.images.items():
            (out / "images" / t).mkdir(parents=True, exist_ok=True)
            for label, img in enumerate(imgs):
                write_pgm(out / "images" / t / f"{label:04d}.pgm", img)
            name = "query.csv" if t == "query" else f"{t}.csv"
            entries = [ManifestEntry(Path("images") / t / f"{l:04d}.pgm", l, t) for l in range(len(imgs))]
            write_manifest(out / name, entries)
            written[t] = out / name
        (out / "spec.json").write_text(json.dumps(asdict(self.spec), indent=2, sort_keys=True) + "\n")
        return written


def generate_synthetic(spec: SynthSpec) -> SyntheticDataset:
    """Seeded places and traverses.

    Each place is uniform noise, box-blurred and contrast-stretched. Each
    traverse views it with a periodic integer shift, a global brightness
    offset and additive Gaussian noise, clamped to [0, 255].
    """
    rng = np.random.default_rng(spec.seed)
    shape = (spec.height, spec.width)
    bases = []
    for _ in range(spec.R):
        noise = rng.integers(0, 256, size=shape, dtype=np.int64)
        bases.append(_stretch(_box_blur(noise, spec.blur_radius)))

    images: dict[str, list[np.ndarray]] = {}
    jitter = int(round(spec.brightness_jitter))
    for t in [f"ref{i}" for i in range(spec.traverses)] + ["query"]:
        views = []
        for base in bases:
            dy, dx = rng.integers(-spec.max_shift, spec.max_shift + 1, size=2)
            offset = int(rng.integers(-jitter, jitter + 1))
            noise = np.floor(spec.noise_sigma * _gaussian(rng, shape) + 0.5).astype(np.int64)
            img = np.roll(base, (int(dy), int(dx)), axis=(0, 1)) + offset + noise
            views.append(np.clip(img, 0, 255).astype(np.uint8))
        images[t] = views
    return SyntheticDataset(spec, [b.astype(np.uint8) for b in bases], images)
