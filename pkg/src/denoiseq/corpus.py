"""The bundled clean-image corpus backing the desk-scale benchmark.

32 images at 128x128: classic test photographs (public-domain sample
data) plus procedural textures, gratings, and cartoon scenes; 4 are RGB.
They ship as PNG files inside the package (tools/make_corpus.py
regenerates them) so benchmark builds need no downloads.
"""

from __future__ import annotations

from pathlib import Path

from .image import load_image

CORPUS_DIR = Path(__file__).parent / "data" / "corpus"


def corpus_paths():
    """Sorted paths of the bundled clean images."""
    paths = sorted(CORPUS_DIR.glob("*.png"))
    if not paths:
        raise RuntimeError(f"bundled corpus missing at {CORPUS_DIR}")
    return paths


def load_corpus(limit=None):
    """Load the corpus as (id, image) pairs, id = file stem."""
    paths = corpus_paths()
    if limit is not None:
        paths = paths[:limit]
    return [(p.stem, load_image(p)) for p in paths]
