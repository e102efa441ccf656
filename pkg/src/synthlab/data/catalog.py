"""Class catalogs: the index space that conditions generation.

Two production catalogs ship with the package (the 124-class CT/MR index and
the 6-class gastro index); phantom catalogs of any size >= 2 can be built for
desk-scale experiments.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable

from ..errors import CatalogError


@dataclass(frozen=True)
class CatalogEntry:
    class_id: int
    label: str
    modality: str
    anatomy: str


@dataclass(frozen=True)
class ClassCatalog:
    """Dense class-id -> (label, modality, anatomy) index."""

    entries: tuple[CatalogEntry, ...]
    generator_domain: str = "phantom"

    def __post_init__(self):
        ids = [e.class_id for e in self.entries]
        if ids != list(range(len(ids))):
            raise CatalogError("class ids must be dense from 0 in catalog order")
        if len(ids) == 0:
            raise CatalogError("empty catalog")

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, class_id: int) -> bool:
        return 0 <= class_id < len(self.entries)

    def label(self, class_id: int) -> str:
        if class_id not in self:
            raise CatalogError(f"class id {class_id} not in catalog")
        return self.entries[class_id].label

    def class_id_of(self, label: str) -> int:
        for e in self.entries:
            if e.label == label:
                return e.class_id
        raise CatalogError(f"label {label!r} not in catalog")

    def without_modalities(self, modalities: Iterable[str]) -> list[CatalogEntry]:
        """Entries excluding the given modalities (ids keep their values).

        Modality exclusion (e.g. dropping ultrasound-like classes) is a
        configuration concern; this helper only filters the view.
        """
        excluded = {m.lower() for m in modalities}
        return [e for e in self.entries if e.modality.lower() not in excluded]


def _parse_catalog_rows(rows: Iterable[dict], domain: str) -> ClassCatalog:
    picked = [r for r in rows if r["domain"] == domain]
    if not picked:
        raise CatalogError(f"unknown catalog domain {domain!r}")
    picked.sort(key=lambda r: int(r["class_id"]))
    entries = tuple(
        CatalogEntry(int(r["class_id"]), r["label"], r["modality"], r["anatomy"])
        for r in picked
    )
    return ClassCatalog(entries=entries, generator_domain=domain)


def load_builtin_catalog(domain: str) -> ClassCatalog:
    """Load the packaged production catalog ("ct_mr" or "gastro")."""
    text = resources.files("synthlab.data").joinpath("class_catalog.csv").read_text()
    cat = _parse_catalog_rows(list(csv.DictReader(io.StringIO(text))), domain)
    expected = {"ct_mr": 124, "gastro": 6}[domain]
    if len(cat) != expected:
        raise CatalogError(f"{domain} catalog has {len(cat)} entries, expected {expected}")
    return cat


def load_catalog(path: str | Path, domain: str | None = None) -> ClassCatalog:
    """Load a catalog CSV with columns domain,class_id,label,modality,anatomy."""
    path = Path(path)
    if not path.exists():
        raise CatalogError(f"catalog file not found: {path}")
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    if domain is None:
        domains = {r["domain"] for r in rows}
        if len(domains) != 1:
            raise CatalogError(f"catalog mixes domains {sorted(domains)}; pass domain=")
        domain = domains.pop()
    return _parse_catalog_rows(rows, domain)


def save_catalog(catalog: ClassCatalog, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["domain", "class_id", "label", "modality", "anatomy"])
        for e in catalog.entries:
            w.writerow([catalog.generator_domain, e.class_id, e.label, e.modality, e.anatomy])


def phantom_catalog(n_classes: int) -> ClassCatalog:
    """Toy catalog for procedurally generated phantom datasets."""
    if n_classes < 2:
        raise CatalogError(f"phantom catalogs need at least 2 classes, got {n_classes}")
    entries = tuple(
        CatalogEntry(i, f"phantom_class_{i}", "Phantom", "Synthetic")
        for i in range(n_classes)
    )
    return ClassCatalog(entries=entries, generator_domain="phantom")
