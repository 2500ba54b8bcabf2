import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from snnvpr.config import RunConfig
from snnvpr.data import (
    DatasetManifest,
    ManifestEntry,
    SynthSpec,
    generate_synthetic,
    load_image,
    load_manifest,
    merge_manifests,
    read_pnm,
    validate_manifest,
    write_manifest,
    write_pgm,
)
from snnvpr.errors import DataError
from snnvpr.evaluation import sad_distance
from snnvpr.pipeline import prepare_images

# Mean between/within-place SAD ratio on the default spec, seeds 0..4,
# measured at 5.31 (lowest seed 4.99) and pinned.
SAD_RATIO_FLOOR = 5.0
# Pixel sum of every image in SynthSpec(R=2, seed=0).
PINNED_SUM = 2045756


def write_set(root: Path, traverses, labels):
    entries = []
    for t in traverses:
        for l in labels:
            p = root / t / f"{l}.pgm"
            p.parent.mkdir(parents=True, exist_ok=True)
            write_pgm(p, np.full((4, 4), 10 * l, np.uint8))
            entries.append(ManifestEntry(p.relative_to(root), l, t))
    write_manifest(root / "m.csv", entries)
    return root / "m.csv"


class TestPNM:
    def test_round_trip(self, tmp_path):
        img = np.random.default_rng(0).integers(0, 256, (5, 7)).astype(np.uint8)
        write_pgm(tmp_path / "a.pgm", img)
        np.testing.assert_array_equal(read_pnm(tmp_path / "a.pgm"), img)

    def test_comments_and_16bit(self, tmp_path):
        px = np.array([[0, 65535], [32768, 257]], dtype=">u2")
        (tmp_path / "b.pgm").write_bytes(b"P5\n# made by hand\n2 2\n65535\n" + px.tobytes())
        np.testing.assert_array_equal(read_pnm(tmp_path / "b.pgm"), [[0, 255], [128, 1]])

    def test_ppm_to_gray(self, tmp_path):
        rgb = np.array([[[255, 0, 0], [0, 0, 255]]], np.uint8)
        (tmp_path / "c.ppm").write_bytes(b"P6 2 1 255\n" + rgb.tobytes())
        np.testing.assert_array_equal(read_pnm(tmp_path / "c.ppm"), [[76, 29]])

    def test_bad_magic(self, tmp_path):
        (tmp_path / "d.pgm").write_bytes(b"P2\n1 1\n255\n0\n")
        with pytest.raises(DataError, match="magic"):
            read_pnm(tmp_path / "d.pgm")

    def test_truncated(self, tmp_path):
        (tmp_path / "e.pgm").write_bytes(b"P5\n4 4\n255\n" + bytes(3))
        with pytest.raises(DataError, match="truncated"):
            read_pnm(tmp_path / "e.pgm")

    def test_png_through_pillow(self, tmp_path):
        arr = np.array([[[10, 20, 30], [200, 100, 50]]], np.uint8)
        Image.fromarray(arr).save(tmp_path / "f.png")
        np.testing.assert_array_equal(load_image(tmp_path / "f.png"), [[18, 124]])


class TestManifest:
    def test_complete(self, tmp_path):
        m = load_manifest(write_set(tmp_path, ["spring", "fall"], [0, 1, 2]))
        assert len(m) == 6 and len(m.images) == 6
        assert m.traverses == ["spring", "fall"]
        assert m.n_labels == 3
        np.testing.assert_array_equal(m.images[4], 10)

    def test_label_gap(self, tmp_path):
        with pytest.raises(DataError, match="label gap at 1"):
            load_manifest(write_set(tmp_path, ["a"], [0, 2]))

    def test_query_role_allows_gaps(self, tmp_path):
        m = load_manifest(write_set(tmp_path, ["a"], [0, 2]), role="query")
        np.testing.assert_array_equal(m.labels, [0, 2])

    def test_missing_pair_named(self, tmp_path):
        m = DatasetManifest([ManifestEntry(Path("x"), 0, "spring"), ManifestEntry(Path("y"), 1, "spring"),
                             ManifestEntry(Path("z"), 0, "fall")])
        with pytest.raises(DataError, match=r"\('fall', 1\)"):
            validate_manifest(m)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_manifest(tmp_path / "nope.csv")

    def test_unreadable_image(self, tmp_path):
        path = write_set(tmp_path, ["a"], [0])
        (tmp_path / "a" / "0.pgm").write_bytes(b"junk")
        with pytest.raises(DataError):
            load_manifest(path)

    def test_bad_header(self, tmp_path):
        (tmp_path / "m.csv").write_text("file,label\nx,0\n")
        with pytest.raises(DataError, match="header"):
            load_manifest(tmp_path / "m.csv")

    def test_bad_label(self, tmp_path):
        (tmp_path / "m.csv").write_text("path,label,traverse\nx.pgm,one,a\n")
        with pytest.raises(DataError, match=":2:"):
            load_manifest(tmp_path / "m.csv")

    def test_merge(self, tmp_path):
        a = load_manifest(write_set(tmp_path / "a", ["spring"], [0, 1]))
        b = load_manifest(write_set(tmp_path / "b", ["fall"], [0, 1]))
        m = merge_manifests([a, b])
        assert m.traverses == ["spring", "fall"] and len(m.images) == 4


class TestSynthetic:
    def test_clean_traverses_equal_bases(self):
        ds = generate_synthetic(SynthSpec(R=4, noise_sigma=0, brightness_jitter=0, max_shift=0, seed=3))
        for t in ds.images:
            for img, base in zip(ds.images[t], ds.bases):
                np.testing.assert_array_equal(img, base)

    def test_seeded(self):
        a = generate_synthetic(SynthSpec(R=3, seed=8, max_shift=2))
        b = generate_synthetic(SynthSpec(R=3, seed=8, max_shift=2))
        for t in a.images:
            for x, y in zip(a.images[t], b.images[t]):
                np.testing.assert_array_equal(x, y)

    def test_pinned_checksum(self):
        # guards cross-platform determinism of the integer noise pipeline
        ds = generate_synthetic(SynthSpec(R=2, seed=0))
        total = sum(int(img.astype(np.int64).sum()) for imgs in ds.images.values() for img in imgs)
        assert total == PINNED_SUM

    def test_manifests(self):
        ds = generate_synthetic(SynthSpec(R=5, traverses=3))
        ref = ds.reference()
        assert len(ref) == 15 and ref.traverses == ["ref0", "ref1", "ref2"]
        validate_manifest(ref)
        np.testing.assert_array_equal(ds.query().labels, np.arange(5))

    def test_write_and_reload(self, tmp_path):
        ds = generate_synthetic(SynthSpec(R=3, seed=1))
        written = ds.write(tmp_path)
        assert set(written) == {"ref0", "ref1", "query"}
        ref = load_manifest(written["ref0"])
        for a, b in zip(ref.images, ds.images["ref0"]):
            np.testing.assert_array_equal(a, b)
        q = load_manifest(tmp_path / "query.csv", role="query")
        np.testing.assert_array_equal(q.images[2], ds.images["query"][2])
        echo = json.loads((tmp_path / "spec.json").read_text())
        assert SynthSpec(**echo) == ds.spec
        assert SynthSpec.from_json(tmp_path / "spec.json") == ds.spec

    @pytest.mark.parametrize("kw", [{"R": 0}, {"traverses": 0}, {"noise_sigma": -1}, {"max_shift": -2}])
    def test_invalid_spec(self, kw):
        with pytest.raises(DataError):
            SynthSpec(**kw)

    def test_places_separable_by_sad(self):
        cfg = RunConfig()
        ratios = []
        for seed in range(5):
            ds = generate_synthetic(SynthSpec(seed=seed))
            refs = [prepare_images(ds.images[t], cfg) for t in ds.reference_ids]
            within = np.mean([sad_distance(a, b) for a, b in zip(*refs)])
            R = ds.spec.R
            between = np.mean([sad_distance(refs[0][i], refs[0][j])
                               for i in range(R) for j in range(R) if i != j])
            ratios.append(between / within)
        assert np.mean(ratios) >= SAD_RATIO_FLOOR
        assert min(ratios) >= 0.9 * SAD_RATIO_FLOOR

