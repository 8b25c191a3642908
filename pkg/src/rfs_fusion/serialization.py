"""JSON encoding of multi-object densities.

Document layout (all numbers are JSON floats, written with full precision
so that a round trip is exact)::

    {"kind": "lmb" | "mb",
     "components": [{"key": <key>, "r": float, "density": <gm>}, ...]}

    {"kind": "glmb" | "gmb",
     "space": [<key>, ...],
     "hypotheses": [{"set": [<key>, ...], "tag": <tag>, "log_weight": float}, ...],
     "densities": [{"tag": <tag>, "members": [{"key": <key>, "density": <gm>}, ...]}, ...]}

    <gm> = {"weights": [...], "means": [[...], ...], "covs": [[[...]]]}

Keys and tags are arbitrary nests of ints, floats, strings and tuples;
tuples are written as JSON lists and read back as tuples.  Labels are
written as ``{"label": [birth_time, index]}``.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .gaussian import GaussianMixture
from .labeled_rfs import GlmbDensity, GmbDensity, Label, LmbDensity, MbDensity

SCHEMA_VERSION = 1


class SchemaError(ValueError):
    """The document does not follow the density schema."""


def _enc_key(k):
    if isinstance(k, Label):
        return {"label": [int(k.birth_time), int(k.index)]}
    if isinstance(k, tuple):
        return [_enc_key(x) for x in k]
    if isinstance(k, (np.integer,)):
        return int(k)
    if isinstance(k, (int, float, str)) or k is None:
        return k
    raise SchemaError(f"cannot encode key of type {type(k).__name__}")


def _dec_key(v):
    if isinstance(v, dict):
        if set(v) != {"label"}:
            raise SchemaError(f"unknown key object {v!r}")
        return Label(int(v["label"][0]), int(v["label"][1]))
    if isinstance(v, list):
        return tuple(_dec_key(x) for x in v)
    return v


def _enc_gm(gm: GaussianMixture) -> dict:
    return {"weights": gm.weights.tolist(), "means": gm.means.tolist(), "covs": gm.covs.tolist()}


def _dec_gm(v) -> GaussianMixture:
    try:
        return GaussianMixture(np.array(v["weights"], dtype=float), np.array(v["means"], dtype=float), np.array(v["covs"], dtype=float))
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed Gaussian mixture: {exc}") from exc


def to_dict(d) -> dict:
    if isinstance(d, (LmbDensity, MbDensity)):
        kind = "lmb" if isinstance(d, LmbDensity) else "mb"
        return {
            "schema": SCHEMA_VERSION,
            "kind": kind,
            "components": [{"key": _enc_key(k), "r": r, "density": _enc_gm(p)} for k, (r, p) in d.items()],
        }
    if isinstance(d, (GlmbDensity, GmbDensity)):
        kind = "glmb" if isinstance(d, GlmbDensity) else "gmb"
        return {
            "schema": SCHEMA_VERSION,
            "kind": kind,
            "space": [_enc_key(k) for k in d.space],
            "hypotheses": [
                {"set": [_enc_key(e) for e in s], "tag": _enc_key(t), "log_weight": float(lw)}
                for s, t, lw in zip(d.sets, d.keys, d.log_weights)
            ],
            "densities": [
                {"tag": _enc_key(t), "members": [{"key": _enc_key(e), "density": _enc_gm(p)} for e, p in dens.items()]}
                for t, dens in d.densities.items()
            ],
        }
    raise SchemaError(f"cannot serialise {type(d).__name__}")


def from_dict(doc: dict):
    if not isinstance(doc, dict) or "kind" not in doc:
        raise SchemaError("document has no 'kind' field")
    kind = doc["kind"]
    try:
        if kind in ("lmb", "mb"):
            comps = {_dec_key(c["key"]): (float(c["r"]), _dec_gm(c["density"])) for c in doc["components"]}
            return LmbDensity(comps) if kind == "lmb" else MbDensity(comps)
        if kind in ("glmb", "gmb"):
            space = [_dec_key(k) for k in doc["space"]]
            dens = {
                _dec_key(e["tag"]): {_dec_key(m["key"]): _dec_gm(m["density"]) for m in e["members"]}
                for e in doc["densities"]
            }
            hyps = [([_dec_key(x) for x in h["set"]], _dec_key(h["tag"]), float(h["log_weight"])) for h in doc["hypotheses"]]
            cls = GlmbDensity if kind == "glmb" else GmbDensity
            out = cls(space, hyps, dens)
            # keep stored log weights bit-exact (construction renormalises them)
            out.log_weights = np.array([h[2] for h in hyps if h[2] != -np.inf])
            return out
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed {kind} document: {exc}") from exc
    raise SchemaError(f"unknown density kind {kind!r}")


def dumps(d) -> str:
    return json.dumps(to_dict(d))


def loads(text: str):
    return from_dict(json.loads(text))


def save(d, path) -> None:
    Path(path).write_text(dumps(d))


def load(path):
    return loads(Path(path).read_text())
