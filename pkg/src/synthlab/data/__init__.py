"""Dataset manifests, class catalogs, resizing, and phantom generation."""

from .catalog import (
    CatalogEntry,
    ClassCatalog,
    load_builtin_catalog,
    load_catalog,
    phantom_catalog,
    save_catalog,
)
from .manifest import (
    DatasetManifest,
    ImageRecord,
    load_manifest,
    minmax_normalize,
    resize_manifest,
    save_manifest,
)
from .phantoms import (
    OrganTemplate,
    PhantomSpec,
    PlacedShape,
    abdomen_like_spec,
    annotate_by_intensity,
    generate_phantoms,
    generate_record,
    intensity_thresholds,
    polyp_like_spec,
    sample_scene,
    spine_like_spec,
)

__all__ = [
    "CatalogEntry",
    "ClassCatalog",
    "load_builtin_catalog",
    "load_catalog",
    "phantom_catalog",
    "save_catalog",
    "DatasetManifest",
    "ImageRecord",
    "load_manifest",
    "minmax_normalize",
    "resize_manifest",
    "save_manifest",
    "OrganTemplate",
    "PhantomSpec",
    "PlacedShape",
    "abdomen_like_spec",
    "annotate_by_intensity",
    "generate_phantoms",
    "generate_record",
    "intensity_thresholds",
    "polyp_like_spec",
    "sample_scene",
    "spine_like_spec",
]
