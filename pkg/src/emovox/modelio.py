"""Binary container format shared by model files and the feature cache.

Layout (all integers little-endian):

    magic   4 bytes  b"EMVX"
    version u32      format revision (currently 1)
    kind    u32 len + utf-8 bytes      ("ubm", "tv", "xvector", "svm", "feature")
    meta    u32 len + utf-8 JSON object (strings / numbers / bools / lists)
    count   u32      number of array sections
    per section:
        name  u32 len + utf-8 bytes
        ndim  u32
        shape u64 * ndim
        data  float64 little-endian, C order

Every array round-trips bit-exactly.  Writes go to a temp file in the target
directory followed by os.replace, so readers never observe partial files.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile

import numpy as np

from .errors import ModelFormatError
from .embeddings import GmmUbm, TotalVariabilityModel, XVectorWeights
from .svm import BinarySvm, MulticlassSvm, Standardizer

MAGIC = b"EMVX"
FORMAT_VERSION = 1

_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return _U32.pack(len(raw)) + raw


def _pack_array(arr: np.ndarray) -> bytes:
    a = np.ascontiguousarray(arr, dtype="<f8")
    head = _U32.pack(a.ndim) + b"".join(_U64.pack(d) for d in a.shape)
    return head + a.tobytes()


class _Reader:
    def __init__(self, blob: bytes, path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise ModelFormatError(f"{self.path}: truncated container")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def u64(self) -> int:
        return _U64.unpack(self.take(8))[0]

    def string(self) -> str:
        return self.take(self.u32()).decode("utf-8")

    def array(self) -> np.ndarray:
        ndim = self.u32()
        if ndim > 8:
            raise ModelFormatError(f"{self.path}: implausible array rank {ndim}")
        shape = tuple(self.u64() for _ in range(ndim))
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        data = self.take(count * 8)
        arr = np.frombuffer(data, dtype="<f8").reshape(shape).astype(np.float64)
        return arr


def write_container(path, kind: str, arrays: dict, meta: dict | None = None) -> None:
    """Serialize named float64 arrays plus JSON metadata, atomically."""
    parts = [MAGIC, _U32.pack(FORMAT_VERSION), _pack_str(kind),
             _pack_str(json.dumps(meta or {}, sort_keys=True)),
             _U32.pack(len(arrays))]
    for name, arr in arrays.items():
        parts.append(_pack_str(name))
        parts.append(_pack_array(np.asarray(arr)))
    blob = b"".join(parts)
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".emvx-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_container(path, expected_kind: str | None = None):
    """Return (kind, arrays dict, meta dict); validates magic/version/kind."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise ModelFormatError(f"{path}: {exc}")
    r = _Reader(blob, path)
    if r.take(4) != MAGIC:
        raise ModelFormatError(f"{path}: not an EMVX container")
    version = r.u32()
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"{path}: unsupported format version {version}")
    kind = r.string()
    if expected_kind is not None and kind != expected_kind:
        raise ModelFormatError(
            f"{path}: expected a {expected_kind!r} file, found {kind!r}")
    try:
        meta = json.loads(r.string())
    except ValueError as exc:
        raise ModelFormatError(f"{path}: bad metadata block ({exc})")
    arrays = {}
    for _ in range(r.u32()):
        name = r.string()
        arrays[name] = r.array()
    if r.pos != len(blob):
        raise ModelFormatError(f"{path}: trailing bytes after last section")
    return kind, arrays, meta


# ---------------------------------------------------------------------------
# model-specific wrappers
# ---------------------------------------------------------------------------


def save_ubm(path, ubm: GmmUbm) -> None:
    write_container(path, "ubm", {
        "weights": ubm.weights,
        "means": ubm.means,
        "variances": ubm.variances,
        "log_likelihoods": np.asarray(ubm.log_likelihoods, dtype=np.float64),
    })


def load_ubm(path) -> GmmUbm:
    _, arrays, _ = read_container(path, "ubm")
    try:
        return GmmUbm(arrays["weights"], arrays["means"], arrays["variances"],
                      tuple(arrays.get("log_likelihoods", np.zeros(0)).tolist()))
    except KeyError as exc:
        raise ModelFormatError(f"{path}: missing section {exc}")
    except ValueError as exc:
        raise ModelFormatError(f"{path}: {exc}")


def save_tv(path, tv: TotalVariabilityModel) -> None:
    write_container(path, "tv", {
        "t_matrix": tv.t_matrix,
        "objectives": np.asarray(tv.objectives, dtype=np.float64),
        "ubm.weights": tv.ubm.weights,
        "ubm.means": tv.ubm.means,
        "ubm.variances": tv.ubm.variances,
    }, meta={"rank": tv.rank})


def load_tv(path) -> TotalVariabilityModel:
    _, arrays, meta = read_container(path, "tv")
    try:
        ubm = GmmUbm(arrays["ubm.weights"], arrays["ubm.means"],
                     arrays["ubm.variances"])
        return TotalVariabilityModel(
            arrays["t_matrix"], ubm, int(meta["rank"]),
            tuple(arrays.get("objectives", np.zeros(0)).tolist()))
    except KeyError as exc:
        raise ModelFormatError(f"{path}: missing section {exc}")
    except ValueError as exc:
        raise ModelFormatError(f"{path}: {exc}")


def save_xvector(path, weights: XVectorWeights) -> None:
    arrays = {}
    for name, (w, b) in weights.layers.items():
        arrays[name + ".w"] = w
        arrays[name + ".b"] = b
    write_container(path, "xvector", arrays)


def load_xvector(path) -> XVectorWeights:
    _, arrays, _ = read_container(path, "xvector")
    layers = {}
    for key, arr in arrays.items():
        if key.endswith(".w"):
            name = key[:-2]
            if name + ".b" not in arrays:
                raise ModelFormatError(f"{path}: layer {name!r} missing bias")
            layers[name] = (arr, arrays[name + ".b"])
    try:
        return XVectorWeights(layers)
    except (ValueError, ModelFormatError) as exc:
        raise ModelFormatError(f"{path}: {exc}")


def save_svm(path, model: MulticlassSvm, scheme: str = "",
             feature_dim: int | None = None) -> None:
    machine_meta = []
    arrays = {
        "standardizer.mean": model.standardizer.mean,
        "standardizer.std": model.standardizer.std,
    }
    for i, ((a, b), svm) in enumerate(sorted(model.machines.items())):
        machine_meta.append({"a": a, "b": b, "bias": svm.bias,
                             "converged": bool(svm.converged)})
        arrays[f"machine{i}.support_vectors"] = svm.support_vectors
        arrays[f"machine{i}.dual_coef"] = svm.dual_coef
        if svm.alphas is not None:
            arrays[f"machine{i}.alphas"] = svm.alphas
    meta = {
        "classes": list(model.classes),
        "c": model.c,
        "gamma": model.gamma,
        "scheme": scheme,
        "feature_dim": feature_dim if feature_dim is not None
        else int(model.standardizer.mean.size),
        "machines": machine_meta,
    }
    write_container(path, "svm", arrays, meta)


def load_svm(path):
    """Return (MulticlassSvm, meta dict with scheme / feature_dim)."""
    _, arrays, meta = read_container(path, "svm")
    try:
        standardizer = Standardizer(arrays["standardizer.mean"],
                                    arrays["standardizer.std"])
        machines = {}
        for i, m in enumerate(meta["machines"]):
            alphas = arrays.get(f"machine{i}.alphas")
            machines[(str(m["a"]), str(m["b"]))] = BinarySvm(
                arrays[f"machine{i}.support_vectors"],
                arrays[f"machine{i}.dual_coef"],
                float(m["bias"]), float(meta["c"]), float(meta["gamma"]),
                converged=bool(m["converged"]), alphas=alphas)
        model = MulticlassSvm(
            tuple(str(c) for c in meta["classes"]), machines, standardizer,
            float(meta["c"]), float(meta["gamma"]))
    except KeyError as exc:
        raise ModelFormatError(f"{path}: missing section {exc}")
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: {exc}")
    return model, meta
