# src/engine/model_io.py
"""
Forest model file:

  b"RFMLP\\n"
  uint32 little-endian header length
  UTF-8 JSON header (sorted keys, no whitespace)
  every array of the manifest as little-endian float64, in manifest order

Byte-stable: the same ForestModel always serializes to the same bytes.
"""
from __future__ import annotations

import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, List, Tuple

import numpy as np

from .data import Standardizer
from .errors import ModelIOError, ModelVersionError
from .forest import FeatureSubset, ForestModel, WhiteningTransform, generate_subsets
from .mlp import MlpModel

logger = logging.getLogger("rfmlp")

MAGIC = b"RFMLP\n"
FORMAT_VERSION = "rfmlp-forest/1"
_LEN = struct.Struct("<I")


_HEADER_KEYS = (
    "arrays",
    "class_count",
    "eigenvalue_floor",
    "feature_names",
    "hidden_size",
    "label_names",
    "n_features",
    "whitened",
)


def _expected_shapes(n: int, c: int, h: int, whitened: bool) -> List[Tuple[str, Tuple[int, ...]]]:
    """Array manifest a forest with these dimensions writes, in file order."""
    out: List[Tuple[str, Tuple[int, ...]]] = [
        ("standardizer.means", (n,)),
        ("standardizer.stddevs", (n,)),
        ("priors.equiprobable", (n,)),
    ]
    if whitened:
        out += [
            ("priors.weighted", (n,)),
            ("whitening.means", (n,)),
            ("whitening.eigenvectors", (n, n)),
            ("whitening.eigenvalues", (n,)),
        ]
    for j in range(n):
        out += [
            (f"member.{j}.w1", (n - 1, h)),
            (f"member.{j}.b1", (h,)),
            (f"member.{j}.w2", (h, c)),
            (f"member.{j}.b2", (c,)),
        ]
    return out


def _check_header(header: Dict[str, Any]) -> List[Tuple[str, Tuple[int, ...]]]:
    """Validates a version-checked header and returns its array manifest."""
    missing = [k for k in _HEADER_KEYS if k not in header]
    if missing:
        raise ModelIOError(f"model header lacks {missing}")
    try:
        n, c, h = int(header["n_features"]), int(header["class_count"]), int(header["hidden_size"])
        manifest = [(str(e["name"]), tuple(int(s) for s in e["shape"])) for e in header["arrays"]]
    except (KeyError, TypeError, ValueError) as e:
        raise ModelIOError(f"malformed model header: {e!r}") from e
    if n < 2 or c < 2 or h < 1:
        raise ModelIOError(f"model header has n_features={n}, class_count={c}, hidden_size={h}")
    if not isinstance(header["whitened"], bool):
        raise ModelIOError("model header field 'whitened' must be true or false")
    if header["whitened"] and not isinstance(header["eigenvalue_floor"], (int, float)):
        raise ModelIOError("whitened model header needs a numeric eigenvalue_floor")
    for key, size in (("feature_names", n), ("label_names", c)):
        names = header[key]
        if not isinstance(names, list) or len(names) not in (0, size):
            raise ModelIOError(f"model header {key} must list {size} names")

    expected = _expected_shapes(n, c, h, header["whitened"])
    if manifest != expected:
        got = {name: shape for name, shape in manifest}
        bad = [name for name, shape in expected if got.get(name) != shape]
        extra = sorted(set(got) - {name for name, _ in expected})
        raise ModelIOError(
            f"model arrays do not match n_features={n}, class_count={c}, hidden_size={h}: "
            f"missing or misshaped {bad[:4]}, unexpected {extra[:4]}"
        )
    return manifest


def _arrays(f: ForestModel) -> List[Tuple[str, np.ndarray]]:
    out: List[Tuple[str, np.ndarray]] = [
        ("standardizer.means", f.standardizer.means),
        ("standardizer.stddevs", f.standardizer.stddevs),
        ("priors.equiprobable", f.priors_equiprobable),
    ]
    if f.priors_weighted is not None:
        out.append(("priors.weighted", f.priors_weighted))
    if f.whitening is not None:
        out += [
            ("whitening.means", f.whitening.means),
            ("whitening.eigenvectors", f.whitening.eigenvectors),
            ("whitening.eigenvalues", f.whitening.eigenvalues),
        ]
    for j, m in enumerate(f.members):
        out += [
            (f"member.{j}.w1", m.w1),
            (f"member.{j}.b1", m.b1),
            (f"member.{j}.w2", m.w2),
            (f"member.{j}.b2", m.b2),
        ]
    return out


def dumps_forest(f: ForestModel) -> bytes:
    arrays = _arrays(f)
    header = {
        "version": FORMAT_VERSION,
        "n_features": f.n_features,
        "class_count": f.class_count,
        "hidden_size": f.hidden_size,
        "whitened": f.whitened,
        "eigenvalue_floor": f.whitening.eigenvalue_floor if f.whitening is not None else None,
        "feature_names": list(f.feature_names),
        "label_names": list(f.label_names),
        "arrays": [{"name": name, "shape": list(a.shape)} for name, a in arrays],
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in arrays)
    return MAGIC + _LEN.pack(len(head)) + head + body


def loads_forest(blob: bytes) -> ForestModel:
    if not blob.startswith(MAGIC):
        raise ModelIOError("not a forest model file (bad magic)")
    offset = len(MAGIC)
    try:
        (head_len,) = _LEN.unpack_from(blob, offset)
        offset += _LEN.size
        header = json.loads(blob[offset:offset + head_len].decode("utf-8"))
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ModelIOError(f"corrupt model header: {e}") from e
    offset += head_len

    if not isinstance(header, dict):
        raise ModelIOError("model header is not a JSON object")
    version = header.get("version")
    if version != FORMAT_VERSION:
        raise ModelVersionError(f"model file version {version!r}, this build reads {FORMAT_VERSION!r}")
    manifest = _check_header(header)

    arrays: Dict[str, np.ndarray] = {}
    for name, shape in manifest:
        count = int(np.prod(shape)) if shape else 1
        end = offset + 8 * count
        if end > len(blob):
            raise ModelIOError(f"model file truncated inside {name!r}")
        arrays[name] = np.frombuffer(blob[offset:end], dtype="<f8").astype(np.float64).reshape(shape)
        offset = end
    if offset != len(blob):
        raise ModelIOError(f"{len(blob) - offset} trailing bytes after the last array")

    n = int(header["n_features"])
    whitening = None
    if header["whitened"]:
        whitening = WhiteningTransform(
            means=arrays["whitening.means"],
            eigenvectors=arrays["whitening.eigenvectors"],
            eigenvalues=arrays["whitening.eigenvalues"],
            eigenvalue_floor=float(header["eigenvalue_floor"]),
        )
    members = tuple(
        MlpModel(
            w1=arrays[f"member.{j}.w1"],
            b1=arrays[f"member.{j}.b1"],
            w2=arrays[f"member.{j}.w2"],
            b2=arrays[f"member.{j}.b2"],
        )
        for j in range(n)
    )
    subsets: Tuple[FeatureSubset, ...] = tuple(generate_subsets(n))
    return ForestModel(
        members=members,
        subsets=subsets,
        standardizer=Standardizer(
            means=arrays["standardizer.means"],
            stddevs=arrays["standardizer.stddevs"],
        ),
        whitening=whitening,
        priors_equiprobable=arrays["priors.equiprobable"],
        priors_weighted=arrays.get("priors.weighted"),
        class_count=int(header["class_count"]),
        feature_names=tuple(header["feature_names"]),
        label_names=tuple(header["label_names"]),
    )


def save_forest(f: ForestModel, path: str | Path) -> Path:
    p = Path(path)
    try:
        p.write_bytes(dumps_forest(f))
    except OSError as e:
        raise ModelIOError(f"cannot write model file {p}: {e.strerror or e}") from e
    logger.info("wrote model %s", p)
    return p


def load_forest(path: str | Path) -> ForestModel:
    p = Path(path)
    try:
        blob = p.read_bytes()
    except OSError as e:
        raise ModelIOError(f"cannot read model file {p}: {e.strerror or e}") from e
    return loads_forest(blob)
