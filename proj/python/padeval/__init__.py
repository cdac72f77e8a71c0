"""Presentation attack detection evaluation: metrics, DET curves, probe heads, protocols and fusion."""

import json
import os

from ._padeval import *  # noqa: F401,F403
from ._padeval import (
    DatasetManifest,
    EmbeddingTable,
    ManifestEntry,
    generate_json,
    write_embeddings,
    write_manifest,
)

__version__ = "0.1.0"


def generate(spec):
    """Synthetic dataset from a spec dict (dim, bona_fide, species, seed)."""
    return generate_json(json.dumps(spec))


def manifest_for(table, source=""):
    """Manifest whose ids are the table's row indices."""
    entries = [
        ManifestEntry(str(i), "attack" if label else "bona_fide", species, split)
        for i, (label, species, split) in enumerate(zip(table.labels, table.species, table.splits))
    ]
    return DatasetManifest(entries, source)


def export_embeddings(out_dir, values, labels, species, splits, name="embeddings"):
    """Write <name>.pade, its label sidecar and manifest.csv; returns the paths."""
    table = EmbeddingTable(values, labels, species, splits)
    os.makedirs(out_dir, exist_ok=True)
    pade = os.path.join(out_dir, name + ".pade")
    manifest = os.path.join(out_dir, "manifest.csv")
    write_embeddings(table, pade)
    write_manifest(manifest_for(table, name), manifest)
    return pade, manifest
