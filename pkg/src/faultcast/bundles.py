"""Versioned gzip-JSON bundles for models and fitted preprocessors.

A bundle is a single self-describing file: format version, kind tag,
config echo, creation metadata, then the payload.  Round-trip fidelity is
the contract; loading a newer format version fails loudly.
"""

from __future__ import annotations

import gzip
import json

from . import __version__
from .errors import BundleError
from .learners import (DecisionTreeClassifier, GradientBoostedClassifier,
                       LogisticRegression, RandomForestClassifier)

FORMAT_VERSION = 1

CLASSIFIER_KINDS = {
    "tree": DecisionTreeClassifier,
    "gbt": GradientBoostedClassifier,
    "forest": RandomForestClassifier,
    "logistic": LogisticRegression,
}
_KIND_OF_CLASS = {cls: kind for kind, cls in CLASSIFIER_KINDS.items()}


def serialize_classifier(model) -> dict:
    kind = _KIND_OF_CLASS.get(type(model))
    if kind is None:
        raise BundleError(f"cannot serialize model type {type(model).__name__}")
    return {"kind": kind, "state": model.to_dict()}


def deserialize_classifier(d: dict):
    try:
        cls = CLASSIFIER_KINDS[d["kind"]]
    except KeyError:
        raise BundleError(f"unknown classifier kind {d.get('kind')!r}") from None
    return cls.from_dict(d["state"])


def write_bundle(path, kind: str, payload: dict) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "created_by": f"faultcast {__version__}",
        "payload": payload,
    }
    with gzip.open(path, "wt", encoding="utf-8") as fh:
        json.dump(doc, fh)


def read_bundle_any(path) -> tuple[str, dict]:
    try:
        with gzip.open(path, "rt", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, EOFError, json.JSONDecodeError, gzip.BadGzipFile) as exc:
        raise BundleError(f"cannot read bundle {path}: {exc}") from exc
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise BundleError(f"{path}: bundle format version {version} not "
                          f"supported (this build reads version {FORMAT_VERSION})")
    return doc.get("kind"), doc["payload"]


def read_bundle(path, expected_kind: str) -> dict:
    kind, payload = read_bundle_any(path)
    if kind != expected_kind:
        raise BundleError(f"{path}: bundle kind {kind!r}, "
                          f"expected {expected_kind!r}")
    return payload
