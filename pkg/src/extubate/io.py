"""Binary containers, checkpoints, hashing and run manifests.

Container layout: 8-byte magic, little-endian uint32 header length, UTF-8
JSON header, then every array as contiguous little-endian float64 in header
order. Boolean arrays (masks) round-trip through 0.0/1.0.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bundle import SUBSETS, SubsetTensor, SubsetTensorBundle, TabularData
from .exceptions import HashMismatchError, MissingArtifactError, SchemaError

MAGIC = b"EXTUBv1\x00"
FORMAT_VERSION = 1


def canonical_json(obj) -> str:
    """Sorted-key JSON; floats use the shortest repr that round-trips exactly."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"missing artifact: {path}")
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path) -> str:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"missing artifact: {path}")
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def config_hash(config) -> str:
    return sha256_bytes(canonical_json(config).encode("utf-8"))


# ---------------------------------------------------------------- container

def write_container(path, kind: str, header: dict, arrays: dict[str, np.ndarray]) -> None:
    meta = []
    payload = []
    offset = 0
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        meta.append({"name": name, "shape": list(arr.shape), "bool": arr.dtype == bool,
                     "offset": offset, "nbytes": len(data)})
        payload.append(data)
        offset += len(data)
    head = dict(header, kind=kind, format_version=FORMAT_VERSION, arrays=meta)
    raw = canonical_json(head).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(raw)))
        fh.write(raw)
        for data in payload:
            fh.write(data)


def read_container(path, kind: str | None = None):
    """Return ``(header, arrays)``; raises SchemaError on a foreign or mismatched file."""
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"missing artifact: {path}")
    blob = path.read_bytes()
    if blob[:len(MAGIC)] != MAGIC:
        raise SchemaError(f"{path}: not a container file")
    (n,) = struct.unpack("<I", blob[len(MAGIC):len(MAGIC) + 4])
    start = len(MAGIC) + 4
    header = json.loads(blob[start:start + n].decode("utf-8"))
    if header.get("format_version") != FORMAT_VERSION:
        raise SchemaError(f"{path}: format version {header.get('format_version')} "
                          f"is not {FORMAT_VERSION}")
    if kind is not None and header.get("kind") != kind:
        raise SchemaError(f"{path}: expected a {kind!r} container, found {header.get('kind')!r}")
    body = start + n
    arrays = {}
    for m in header["arrays"]:
        lo = body + m["offset"]
        arr = np.frombuffer(blob[lo:lo + m["nbytes"]], dtype="<f8").reshape(m["shape"]).copy()
        arrays[m["name"]] = arr.astype(bool) if m["bool"] else arr
    return header, arrays


# ------------------------------------------------------------------ bundles

def save_bundle(path, bundle: SubsetTensorBundle) -> None:
    arrays = {}
    subsets = {}
    for name in SUBSETS:
        sub = bundle.subsets[name]
        arrays[f"{name}.values"] = sub.values
        arrays[f"{name}.mask"] = sub.mask
        subsets[name] = {"features": list(sub.features), "interval": int(sub.interval)}
    if bundle.static is not None:
        arrays["static"] = bundle.static
    header = {"patient_ids": [str(p) for p in bundle.patient_ids], "subsets": subsets,
              "static_features": list(bundle.static_features), "provenance": bundle.provenance,
              "has_static": bundle.static is not None}
    write_container(path, "bundle", header, arrays)


def load_bundle(path) -> SubsetTensorBundle:
    header, arrays = read_container(path, "bundle")
    subsets = {name: SubsetTensor(arrays[f"{name}.values"], arrays[f"{name}.mask"],
                                  meta["features"], meta["interval"])
               for name, meta in header["subsets"].items()}
    bundle = SubsetTensorBundle(np.asarray(header["patient_ids"]), subsets,
                                arrays.get("static") if header["has_static"] else None,
                                header["static_features"], header["provenance"])
    bundle.validate(strict_nan=False)
    return bundle


def save_tabular(path, data: TabularData) -> None:
    header = {"feature_names": data.feature_names, "provenance": data.provenance,
              "patient_ids": None if data.patient_ids is None
              else [str(p) for p in data.patient_ids]}
    write_container(path, "tabular", header, {"X": data.X})


def load_tabular(path) -> TabularData:
    header, arrays = read_container(path, "tabular")
    pids = header["patient_ids"]
    return TabularData(arrays["X"], header["feature_names"],
                       None if pids is None else np.asarray(pids), header["provenance"])


# -------------------------------------------------------------- checkpoints

FAMILIES = {"fused-lstm": "FusedLSTMClassifier", "fused-tcn": "FusedTCNClassifier",
            "gbdt": "GBDTClassifier"}


def _jsonable(params: dict) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in params.items()}


def save_checkpoint(path, model, family: str, seed=None, scaler_hash: str = "",
                    extra: dict | None = None) -> None:
    """Persist a fitted estimator with its configuration and feature order."""
    from .models import GBDTClassifier

    header = {"family": family, "params": _jsonable(model.get_params()), "seed": seed,
              "scaler_hash": scaler_hash, "tool_version": __version__, "extra": extra or {}}
    arrays = {}
    if isinstance(model, GBDTClassifier):
        header["model"] = model.to_dict()
        header["feature_order"] = {"tabular": model.feature_names_}
    else:
        header["spec"] = model.spec_.to_dict()
        header["feature_order"] = model.feature_order_
        header["history"] = model.history_
        for k in sorted(model.network_.params):
            arrays[f"param:{k}"] = model.network_.params[k]
        for k in sorted(model.network_.buffers):
            arrays[f"buffer:{k}"] = model.network_.buffers[k]
    write_container(path, "checkpoint", header, arrays)


def load_checkpoint(path):
    """Rebuild the fitted estimator; returns ``(model, header)``."""
    from . import models

    header, arrays = read_container(path, "checkpoint")
    family = header["family"]
    if family not in FAMILIES:
        raise SchemaError(f"unknown model family {family!r} in {path}")
    cls = getattr(models, FAMILIES[family])
    if family == "gbdt":
        return cls.from_dict(header["model"]), header
    model = cls(**header["params"])
    spec = models.FusedSpec.from_dict(header["spec"])
    params = {k[len("param:"):]: v for k, v in arrays.items() if k.startswith("param:")}
    buffers = {k[len("buffer:"):]: v for k, v in arrays.items() if k.startswith("buffer:")}
    model.spec_ = spec
    model.network_ = models.FusedNetwork(spec, params=params, buffers=buffers)
    model.feature_order_ = header["feature_order"]
    model.history_ = header["history"]
    model.classes_ = np.array([0, 1])
    return model, header


# ----------------------------------------------------------------- manifest

@dataclass
class RunManifest:
    """Provenance of one command: config hash, seed and hashed inputs/outputs.

    Paths are stored relative to the manifest's directory so that two runs in
    different roots compare equal. Timestamps are recorded only when
    ``SOURCE_DATE_EPOCH`` is set, keeping manifests byte-reproducible.
    """

    command: str
    config_hash: str
    seed: int | None
    config: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    tool_version: str = __version__
    timestamps: dict | None = None

    def add_input(self, base, path) -> None:
        self.inputs[os.path.relpath(path, base)] = sha256_file(path)

    def add_output(self, base, path) -> None:
        self.outputs[os.path.relpath(path, base)] = sha256_file(path)

    def write(self, out_dir) -> Path:
        epoch = os.environ.get("SOURCE_DATE_EPOCH")
        if epoch is not None:
            self.timestamps = {"source_date_epoch": int(epoch)}
        path = Path(out_dir) / "manifest.json"
        write_json(path, asdict(self))
        return path

    @classmethod
    def read(cls, path) -> "RunManifest":
        return cls(**read_json(path))


def verify_artifacts(stage_dir, names) -> dict[str, str]:
    """Check files of an earlier stage against its manifest; returns their hashes."""
    stage_dir = Path(stage_dir)
    manifest = RunManifest.read(stage_dir / "manifest.json")
    out = {}
    for name in names:
        if name not in manifest.outputs:
            raise MissingArtifactError(f"{name} is not recorded in {stage_dir / 'manifest.json'}")
        actual = sha256_file(stage_dir / name)
        if actual != manifest.outputs[name]:
            raise HashMismatchError(f"{stage_dir / name}: hash {actual[:12]} does not match "
                                    f"manifest {manifest.outputs[name][:12]}")
        out[name] = actual
    return out
