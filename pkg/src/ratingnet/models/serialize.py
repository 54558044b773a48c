"""Versioned model files: a zip holding ``meta.json`` plus one ``.npy`` per array.

Entries carry a fixed timestamp so saving the same model twice gives
byte-identical files.
"""

from __future__ import annotations

import io
import json
import zipfile

import numpy as np

from ..errors import SchemaError
from ..features import Standardizer
from .base import ConstantModel
from .forest import ForestModel
from .linear import LinearModel
from .mlp import MlpModel

FORMAT = "ratingnet-model"
VERSION = 1
_EPOCH = (1980, 1, 1, 0, 0, 0)

_KINDS = {
    "baseline": ConstantModel,
    "linear": LinearModel,
    "ridge": LinearModel,
    "bayesian": LinearModel,
    "mlp": MlpModel,
    "forest": ForestModel,
}


def _entry(zf, name, data: bytes):
    info = zipfile.ZipInfo(name, date_time=_EPOCH)
    info.compress_type = zipfile.ZIP_DEFLATED
    info.external_attr = 0o644 << 16
    zf.writestr(info, data)


def dump_model(model, fh, name=None, hyper=None, standardizer: Standardizer | None = None):
    meta, arrays = model.get_state()
    header = {
        "format": FORMAT,
        "version": VERSION,
        "kind": model.kind,
        "name": name or model.kind,
        "hyper": hyper or {},
        "state": meta,
        "arrays": sorted(arrays),
        "standardizer": None if standardizer is None else {
            "mean": standardizer.mean.tolist(), "scale": standardizer.scale.tolist()},
    }
    with zipfile.ZipFile(fh, "w") as zf:
        _entry(zf, "meta.json", json.dumps(header, indent=1, sort_keys=True).encode())
        for key in sorted(arrays):
            buf = io.BytesIO()
            np.save(buf, np.ascontiguousarray(arrays[key]), allow_pickle=False)
            _entry(zf, f"{key}.npy", buf.getvalue())


def save_model(model, path, **kw):
    with open(path, "wb") as fh:
        dump_model(model, fh, **kw)


def load_model(path_or_fh):
    """Return ``(model, header)``; ``header['standardizer']`` is rebuilt as a Standardizer."""
    with zipfile.ZipFile(path_or_fh) as zf:
        try:
            header = json.loads(zf.read("meta.json"))
        except KeyError:
            raise SchemaError("model file has no meta.json") from None
        if header.get("format") != FORMAT:
            raise SchemaError("not a ratingnet model file")
        if header.get("version") != VERSION:
            raise SchemaError(f"unsupported model version {header.get('version')}")
        arrays = {k: np.load(io.BytesIO(zf.read(f"{k}.npy")), allow_pickle=False)
                  for k in header["arrays"]}
    cls = _KINDS.get(header["kind"])
    if cls is None:
        raise SchemaError(f"unknown model kind {header['kind']!r}")
    model = cls.from_state(header["state"], arrays)
    st = header.get("standardizer")
    header["standardizer"] = None if st is None else Standardizer(
        np.asarray(st["mean"]), np.asarray(st["scale"]))
    return model, header
