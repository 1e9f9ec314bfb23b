"""JSON persistence for fitted mixture models.

The on-disk format is versioned, human-inspectable JSON. Floats are
written in Python's shortest round-trip representation, so loading a
saved model reproduces every numeric field bit-exactly. Files are written
to a temporary sibling and atomically renamed, so a failed save never
leaves a partial model behind.

A saved model may carry an optional ``preprocess`` block (standardization
and/or PCA learned at fit time) that prediction re-applies to raw inputs.
"""

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .exceptions import DataError
from .kde import WeightedKde1D
from .mixture import Component, FitReport, MixtureModel

FORMAT_VERSION = 1


def _floats(array):
    return [float(v) for v in np.asarray(array, dtype=float).ravel()]


def model_to_dict(model, preprocess=None):
    payload = {
        "format_version": FORMAT_VERSION,
        "m": model.m,
        "r": model.r,
        "lambda": [c.lam for c in model.components],
        "components": [
            {
                "mean": _floats(c.mean),
                "a": _floats(c.a),
                "a_inv": _floats(c.a_inv),
                "kdes": [
                    {
                        "points": _floats(k.points),
                        "weights": _floats(k.weights),
                        "bandwidth": k.bandwidth,
                    }
                    for k in c.kdes
                ],
            }
            for c in model.components
        ],
    }
    if model.fit_report is not None:
        payload["fit_report"] = {
            "outer_iters": model.fit_report.outer_iters,
            "converged": model.fit_report.converged,
            "loglik_trace": _floats(model.fit_report.loglik_trace),
            "lambda_trace": _floats(model.fit_report.lambda_trace),
            "warnings": list(model.fit_report.warnings),
        }
    if preprocess:
        payload["preprocess"] = preprocess
    return payload


def model_from_dict(payload):
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported model format version {version!r}")
    m, r = payload["m"], payload["r"]
    components = []
    for lam, block in zip(payload["lambda"], payload["components"]):
        kdes = tuple(
            WeightedKde1D(
                np.asarray(k["points"]),
                np.asarray(k["weights"]),
                k["bandwidth"],
            )
            for k in block["kdes"]
        )
        components.append(
            Component(
                lam=lam,
                mean=np.asarray(block["mean"]),
                a=np.asarray(block["a"]).reshape(r, r),
                a_inv=np.asarray(block["a_inv"]).reshape(r, r),
                kdes=kdes,
            )
        )
    report = None
    if "fit_report" in payload:
        block = payload["fit_report"]
        report = FitReport(
            outer_iters=block["outer_iters"],
            loglik_trace=np.asarray(block["loglik_trace"]),
            lambda_trace=np.asarray(block["lambda_trace"]).reshape(
                block["outer_iters"], m
            ),
            converged=block["converged"],
            warnings=tuple(block["warnings"]),
        )
    return MixtureModel(m=m, r=r, components=tuple(components), fit_report=report)


def save_model(model, path, preprocess=None):
    """Serialize a model to JSON, atomically."""
    path = Path(path)
    payload = model_to_dict(model, preprocess)
    fd, tmp_name = tempfile.mkstemp(
        prefix=path.name + ".", suffix=".tmp", dir=path.parent or "."
    )
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            json.dump(payload, handle, indent=1)
            handle.write("\n")
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def load_model(path):
    """Load a model saved by :func:`save_model`.

    Returns ``(model, preprocess)`` where ``preprocess`` is the optional
    stored preprocessing block (or None).
    """
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as handle:
            payload = json.load(handle)
    except OSError as exc:
        raise DataError(f"cannot read model file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"model file {path} is not valid JSON: {exc}") from exc
    return model_from_dict(payload), payload.get("preprocess")
