"""Data layer tests: manifests, catalogs, resizing, phantom generation."""

import hashlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synthlab.data import (
    DatasetManifest,
    ImageRecord,
    OrganTemplate,
    PhantomSpec,
    abdomen_like_spec,
    annotate_by_intensity,
    generate_phantoms,
    generate_record,
    load_builtin_catalog,
    load_manifest,
    minmax_normalize,
    phantom_catalog,
    polyp_like_spec,
    resize_manifest,
    save_manifest,
    spine_like_spec,
)
from synthlab.errors import CatalogError, ManifestError, PhantomError


def make_record(i, size=8, with_mask=True, class_id=0, group=None):
    rng = np.random.default_rng(i)
    return ImageRecord(
        id=f"rec{i:03d}",
        class_id=class_id,
        group_id=group or f"g{i:03d}",
        pixels=rng.random((size, size)).astype(np.float32),
        mask=rng.integers(0, 3, size=(size, size)).astype(np.int32) if with_mask else None,
    )


# ---------------------------------------------------------------------------
# manifests
# ---------------------------------------------------------------------------
class TestManifest:
    def test_thirty_groups_load(self, tmp_path):
        records = [make_record(i, group=f"scan{i // 3:02d}") for i in range(90)]
        manifest = DatasetManifest(records=records)
        save_manifest(manifest, tmp_path)
        loaded = load_manifest(tmp_path / "manifest.csv")
        assert len(loaded.group_ids) == 30
        assert all(r.split is None for r in loaded)

    def test_empty_manifest_rejected(self):
        with pytest.raises(ManifestError, match="empty manifest"):
            DatasetManifest(records=[])

    def test_mask_shape_mismatch(self):
        rec = make_record(0)
        rec.mask = np.zeros((7, 8), dtype=np.int32)
        with pytest.raises(ManifestError, match="mask shape"):
            DatasetManifest(records=[rec])

    def test_duplicate_ids_rejected(self):
        a, b = make_record(1), make_record(1)
        b.pixels = b.pixels.copy()
        with pytest.raises(ManifestError, match="duplicate"):
            DatasetManifest(records=[a, b])

    def test_class_id_outside_catalog(self):
        rec = make_record(0, class_id=9)
        with pytest.raises(ManifestError, match="not in catalog"):
            DatasetManifest(records=[rec], catalog=phantom_catalog(2))

    def test_missing_pixel_file(self, tmp_path):
        save_manifest(DatasetManifest(records=[make_record(0)]), tmp_path)
        (tmp_path / "pixels" / "rec000.png").unlink()
        with pytest.raises(ManifestError, match="pixel file not found"):
            load_manifest(tmp_path / "manifest.csv")

    def test_record_order_sorted_by_id(self):
        records = [make_record(i) for i in (3, 1, 2)]
        manifest = DatasetManifest(records=records)
        assert manifest.ids == sorted(manifest.ids)

    def test_roundtrip_byte_identical(self, tmp_path):
        manifest = generate_phantoms(abdomen_like_spec(16, n_images=5, seed=2))
        dir_a, dir_b = tmp_path / "a", tmp_path / "b"
        save_manifest(manifest, dir_a)
        save_manifest(load_manifest(dir_a / "manifest.csv"), dir_b)
        digest = lambda root: {
            p.relative_to(root): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()
        }
        assert digest(dir_a) == digest(dir_b)

    def test_extras_survive_roundtrip(self, tmp_path):
        rec = make_record(0)
        rec.extras = {"latent_seed": "77", "gen_fingerprint": "abc"}
        save_manifest(DatasetManifest(records=[rec]), tmp_path)
        loaded = load_manifest(tmp_path / "manifest.csv")
        assert loaded.records[0].extras["latent_seed"] == "77"

    def test_minmax_normalize(self):
        arr = np.array([[2.0, 4.0], [6.0, 2.0]])
        out = minmax_normalize(arr)
        assert out.min() == 0.0 and out.max() == 1.0
        assert np.all(minmax_normalize(np.full((3, 3), 5.0)) == 0.0)


# ---------------------------------------------------------------------------
# resizing
# ---------------------------------------------------------------------------
class TestResize:
    def test_all_resized_to_target(self):
        manifest = generate_phantoms(polyp_like_spec(32, n_images=4, seed=1))
        out = resize_manifest(manifest, 16)
        assert all(r.spatial_shape == (16, 16) for r in out)
        assert all(r.mask.shape == (16, 16) for r in out)

    def test_identity_is_bit_exact(self):
        manifest = generate_phantoms(abdomen_like_spec(32, n_images=3, seed=5))
        same = resize_manifest(manifest, 32)
        for a, b in zip(manifest, same):
            assert np.array_equal(a.pixels, b.pixels)
            assert np.array_equal(a.mask, b.mask)

    def test_idempotent(self):
        manifest = generate_phantoms(abdomen_like_spec(64, n_images=3, seed=6))
        once = resize_manifest(manifest, 32)
        twice = resize_manifest(once, 32)
        for a, b in zip(once, twice):
            assert np.array_equal(a.pixels, b.pixels)

    def test_nearest_neighbor_cannot_invent_labels(self):
        manifest = generate_phantoms(abdomen_like_spec(64, n_images=6, seed=7))
        small = resize_manifest(manifest, 32)
        for big, little in zip(manifest, small):
            assert set(np.unique(little.mask)) <= set(np.unique(big.mask))

    def test_bad_target(self):
        manifest = generate_phantoms(abdomen_like_spec(16, n_images=2, seed=0))
        with pytest.raises(ManifestError):
            resize_manifest(manifest, 4)


# ---------------------------------------------------------------------------
# catalogs
# ---------------------------------------------------------------------------
class TestCatalog:
    def test_builtin_ct_mr(self):
        cat = load_builtin_catalog("ct_mr")
        assert len(cat) == 124
        assert cat.label(0) == "abd_normal"
        assert cat.label(119) == "spine_canal stenosis"
        assert cat.class_id_of("mriabd-normal") == 107

    def test_builtin_gastro(self):
        cat = load_builtin_catalog("gastro")
        assert len(cat) == 6
        assert cat.class_id_of("polyps") == 2

    def test_phantom_catalog_bounds(self):
        assert len(phantom_catalog(3)) == 3
        with pytest.raises(CatalogError):
            phantom_catalog(1)

    def test_modality_filter(self):
        cat = load_builtin_catalog("ct_mr")
        remaining = cat.without_modalities(["CT"])
        assert all(e.modality != "CT" for e in remaining)
        assert len(remaining) < len(cat)


# ---------------------------------------------------------------------------
# phantoms
# ---------------------------------------------------------------------------
class TestPhantoms:
    def test_seeded_determinism(self):
        spec = abdomen_like_spec(32, n_images=10, seed=7)
        a, b = generate_phantoms(spec), generate_phantoms(spec)
        for ra, rb in zip(a, b):
            assert np.array_equal(ra.pixels, rb.pixels)
            assert np.array_equal(ra.mask, rb.mask)

    def test_organ_brighter_than_background_noise_free(self):
        spec = abdomen_like_spec(32, n_images=8, seed=3, noise_level=0.0)
        for rec in generate_phantoms(spec):
            assert rec.pixels[rec.mask > 0].mean() > rec.pixels[rec.mask == 0].mean()

    def test_two_class_populations(self):
        manifest = generate_phantoms(abdomen_like_spec(16, n_images=12, seed=1))
        counts = np.bincount([r.class_id for r in manifest])
        assert list(counts) == [6, 6]

    def test_oracle_mask_exactness(self):
        spec = spine_like_spec(32, n_images=1, seed=9, noise_level=0.0)
        yy, xx = np.meshgrid(np.arange(32), np.arange(32), indexing="ij")
        for idx in range(6):
            rec, shapes = generate_record(spec, idx)
            for shape in shapes:
                if shape.label == 0:
                    continue
                inside = shape.contains(yy, xx)
                assert np.all(inside[rec.mask == shape.label])

    def test_invalid_specs(self):
        with pytest.raises(PhantomError):
            PhantomSpec(image_size=20, n_classes=2,
                        organs_per_class=(OrganTemplate("blob", (0.5, 0.6), (0.1, 0.2)),))
        with pytest.raises(PhantomError):
            abdomen_like_spec(32, n_classes=1)
        with pytest.raises(PhantomError):
            OrganTemplate("triangle", (0.5, 0.6), (0.1, 0.2))

    def test_distractors_are_background(self):
        spec = PhantomSpec(
            image_size=32, n_classes=2,
            organs_per_class=(OrganTemplate("blob", (0.5, 0.68), (0.12, 0.2)),),
            distractors=(OrganTemplate("blob", (0.5, 0.68), (0.03, 0.05)),),
            n_images=4, seed=3,
        )
        for idx in range(4):
            rec, shapes = generate_record(spec, idx)
            assert any(s.label == 0 for s in shapes)
            assert set(np.unique(rec.mask)) <= {0, 1}

    def test_annotator_matches_analytic_masks(self):
        spec = abdomen_like_spec(32, n_images=12, seed=4, noise_level=0.03)
        agreement = [
            (annotate_by_intensity(r.pixels, spec) == r.mask).mean()
            for r in generate_phantoms(spec)
        ]
        assert np.mean(agreement) > 0.95

    def test_group_assignment(self):
        spec = abdomen_like_spec(16, n_images=12, seed=2, group_size=3)
        manifest = generate_phantoms(spec)
        groups = {}
        for rec in manifest:
            groups.setdefault(rec.group_id, set()).add(rec.class_id)
        assert len(groups) == 4
        assert all(len(cs) == 1 for cs in groups.values())

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=20, deadline=None)
    def test_pixels_always_in_unit_interval(self, seed):
        rec, _ = generate_record(polyp_like_spec(16, n_images=1, seed=seed), 0)
        assert rec.pixels.min() >= 0.0 and rec.pixels.max() <= 1.0
