"""Model documents (JSON) and duration files (CSV)."""

from __future__ import annotations

import csv
import json
import math

import numpy as np

from .model import CoxianError, CoxianParams, Generator, build_generator, params_from_generator


class MalformedFileError(CoxianError):
    pass


def model_document(p: CoxianParams, metadata: dict | None = None) -> dict:
    """``{"lambda": [...], "mu": [...]}``; floats keep their shortest
    round-trip form so a document parses back to the identical model."""
    doc = {"lambda": [float(v) for v in p.lam], "mu": [float(v) for v in p.mu]}
    if metadata:
        doc["metadata"] = metadata
    return doc


def generator_from_document(doc) -> Generator:
    """Generator described by a model document.

    Either rates (``lambda`` and ``mu``) or the generator itself (``diag``
    and ``superdiag``) may be given; the latter keeps the diagonal exactly
    as written.
    """
    if not isinstance(doc, dict):
        raise MalformedFileError("model document must be a JSON object")
    try:
        if "diag" in doc:
            return Generator(_floats(doc["diag"], "diag"), _floats(doc.get("superdiag", []), "superdiag"))
        return build_generator(CoxianParams(_floats(doc.get("lambda", []), "lambda"), _floats(doc["mu"], "mu")))
    except KeyError as exc:
        raise MalformedFileError(f"model document is missing {exc.args[0]!r}") from None


def params_from_document(doc) -> CoxianParams:
    return params_from_generator(generator_from_document(doc))


def _floats(values, name) -> np.ndarray:
    if not isinstance(values, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in values
    ):
        raise MalformedFileError(f"{name!r} must be an array of numbers")
    return np.array(values, dtype=float)


def read_model(path) -> Generator:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedFileError(f"{path}: invalid JSON ({exc})") from None
    return generator_from_document(doc)


def write_model(path, p: CoxianParams, metadata: dict | None = None):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_document(p, metadata), fh, indent=2)
        fh.write("\n")


def read_durations(path) -> np.ndarray:
    """One duration per line (first column if there are several).

    A non-numeric first line is taken as a header.  Blank lines are skipped.
    """
    values = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not row[0].strip():
                continue
            try:
                values.append(float(row[0]))
            except ValueError:
                if lineno == 1:
                    continue
                raise MalformedFileError(f"{path}:{lineno}: not a number: {row[0]!r}") from None
    if not values:
        raise MalformedFileError(f"{path}: no durations")
    return np.array(values)


def write_durations(path, values):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for v in values:
            fh.write(repr(float(v)))
            fh.write("\n")


def sig4(x) -> str:
    """Four significant digits, as in printed tables."""
    if x is None:
        return "-"
    x = float(x)
    if not math.isfinite(x):
        return str(x)
    return f"{x:.4g}"


def format_table(header, rows) -> str:
    cells = [list(map(str, header))] + [[c if isinstance(c, str) else sig4(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def format_csv(header, rows) -> str:
    out = [",".join(header)]
    for r in rows:
        out.append(",".join(c if isinstance(c, str) else repr(float(c)) for c in r))
    return "\n".join(out)
