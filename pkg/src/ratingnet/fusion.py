"""Joining precomputed business embeddings onto graph-feature rows.

Embedding file layout (CSV)::

    business_id,image[1000],text[256]
    <business_id>,<1000 image values>,<256 text values>
    ...
"""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass

import numpy as np

from .errors import SchemaError
from .features import FeatureMatrix
from .models.mlp import TrainConfig, fit_mlp

log = logging.getLogger(__name__)

IMAGE_DIM = 1000
TEXT_DIM = 256
_HEADER = re.compile(r"^image\[(\d+)\]$"), re.compile(r"^text\[(\d+)\]$")


@dataclass
class EmbeddingTable:
    ids: dict          # business string id -> row
    image: np.ndarray  # (n, image_dim)
    text: np.ndarray   # (n, text_dim)

    def __len__(self):
        return len(self.ids)

    @property
    def width(self):
        return self.image.shape[1] + self.text.shape[1]


def write_embeddings(fh, ids, image, text) -> None:
    image = np.asarray(image, dtype=np.float64)
    text = np.asarray(text, dtype=np.float64)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["business_id", f"image[{image.shape[1]}]", f"text[{text.shape[1]}]"])
    for bid, a, b in zip(ids, image.tolist(), text.tolist()):
        w.writerow([bid, *map(repr, a), *map(repr, b)])


def load_embeddings(path, image_dim: int = IMAGE_DIM, text_dim: int = TEXT_DIM) -> EmbeddingTable:
    """Read an embedding file; a repeated business id keeps its last record."""
    ids: dict = {}
    rows: list = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return EmbeddingTable({}, np.zeros((0, image_dim)), np.zeros((0, text_dim)))
        if len(header) != 3 or header[0] != "business_id":
            raise SchemaError("embedding header must be business_id,image[N],text[M]", 1)
        mi, mt = _HEADER[0].match(header[1]), _HEADER[1].match(header[2])
        if not (mi and mt):
            raise SchemaError(f"unreadable dimension header {header[1:]!r}", 1)
        if (int(mi.group(1)), int(mt.group(1))) != (image_dim, text_dim):
            raise SchemaError(
                f"declared dimensions ({mi.group(1)}, {mt.group(1)}) != ({image_dim}, {text_dim})", 1)
        width = image_dim + text_dim
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            bid = row[0]
            if len(row) - 1 != width:
                raise SchemaError(
                    f"record {bid!r} has {len(row) - 1} values, expected {width} "
                    f"({image_dim} image + {text_dim} text)", line_no)
            vec = np.array(row[1:], dtype=np.float64)
            if not np.isfinite(vec).all():
                raise SchemaError(f"record {bid!r} has non-finite values", line_no)
            if bid in ids:
                log.warning("duplicate embedding for business %r; keeping the last record", bid)
                rows[ids[bid]] = vec
            else:
                ids[bid] = len(rows)
                rows.append(vec)
    mat = np.vstack(rows) if rows else np.zeros((0, width))
    return EmbeddingTable(ids, mat[:, :image_dim], mat[:, image_dim:])


def fuse(features: FeatureMatrix, embeddings: EmbeddingTable, business_names) -> FeatureMatrix:
    """Rows of ``[image | text | graph features]`` in the input row order.

    Businesses without an embedding get zero image/text segments.
    """
    n = len(features)
    d_img, d_txt = embeddings.image.shape[1], embeddings.text.shape[1]
    out = np.zeros((n, d_img + d_txt + features.width))
    rows = np.array([embeddings.ids.get(name, -1) for name in business_names], dtype=np.int64)
    have = rows >= 0
    out[have, :d_img] = embeddings.image[rows[have]]
    out[have, d_img:d_img + d_txt] = embeddings.text[rows[have]]
    out[:, d_img + d_txt:] = features.X
    missing = int(n - have.sum())
    if missing:
        log.warning("fuse: %d of %d rows have no business embedding (zero-filled)", missing, n)
    names = tuple(f"img{i}" for i in range(d_img)) + tuple(f"txt{i}" for i in range(d_txt)) + tuple(features.names)
    fused = FeatureMatrix(features.user, features.business, out, features.y, names)
    fused.missing_embeddings = missing
    return fused


def fit_fused_mlp(fused: FeatureMatrix, cfg: TrainConfig | None = None, val: FeatureMatrix | None = None):
    """Same stack as the graph-only network with a wider input layer."""
    if val is None:
        return fit_mlp(fused.X, fused.y, cfg)
    return fit_mlp(fused.X, fused.y, cfg, val.X, val.y)
