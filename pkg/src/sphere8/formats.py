"""Correspondence files, sweep CSVs and JSON reports."""
import csv
import io
import json
import math

import numpy as np

from .errors import DomainError, SizeError
from .geometry import CorrespondenceSet, ImageSize, bearing_to_pixel, pixel_to_bearing

SCHEMA_VERSION = 1
BEARING_COLUMNS = ("x1", "y1", "z1", "x2", "y2", "z2")
PIXEL_COLUMNS = ("u1", "v1", "u2", "v2")
SWEEP_COLUMNS = ("axis_value", "method", "q25_rot", "q50_rot", "q75_rot",
                 "q25_tran", "q50_tran", "q75_tran", "mean_time_ms")
MIN_ROWS = 8


class ParseError(DomainError):
    pass


def _read_table(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = tuple(c.strip() for c in rows[0])
    body = rows[1:]
    try:
        data = np.array([[float(c) for c in r] for r in body], dtype=float).reshape(len(body), len(header))
    except ValueError as exc:
        raise ParseError(f"{path}: non-numeric or ragged row ({exc})") from None
    if not np.all(np.isfinite(data)):
        raise ParseError(f"{path}: non-finite value")
    return header, data


def detect_format(header):
    if header == BEARING_COLUMNS:
        return "bearing"
    if header == PIXEL_COLUMNS:
        return "pixel"
    raise ParseError(f"unrecognised header {','.join(header)}; expected "
                     f"{','.join(BEARING_COLUMNS)} or {','.join(PIXEL_COLUMNS)}")


def read_correspondences(path, fmt="auto", width=None, height=None):
    """Load a correspondence file. Returns ``(CorrespondenceSet, max_correction)``.

    Bearing rows are re-unitised; ``max_correction`` is the largest
    ``| ||q|| - 1 |`` seen (0 for pixel files). Pixel files need ``width``
    and ``height``.
    """
    header, data = _read_table(path)
    kind = detect_format(header)
    if fmt != "auto" and fmt != kind:
        raise ParseError(f"{path}: header says {kind} but --format {fmt} was given")
    if len(data) < MIN_ROWS:
        raise SizeError(f"{path}: at least {MIN_ROWS} correspondence rows are required, got {len(data)}")
    if kind == "pixel":
        if width is None or height is None:
            raise ParseError("pixel correspondences need --width and --height")
        size = ImageSize(width, height)
        q1 = pixel_to_bearing(data[:, 0:2], size)
        q2 = pixel_to_bearing(data[:, 2:4], size)
        return CorrespondenceSet(q1, q2), 0.0
    q1, q2 = data[:, 0:3], data[:, 3:6]
    n1 = np.linalg.norm(q1, axis=1)
    n2 = np.linalg.norm(q2, axis=1)
    if np.any(n1 == 0) or np.any(n2 == 0):
        raise ParseError(f"{path}: zero-length bearing vector")
    correction = float(max(np.max(np.abs(n1 - 1.0)), np.max(np.abs(n2 - 1.0))))
    return CorrespondenceSet(q1 / n1[:, None], q2 / n2[:, None]), correction


def write_bearings(path, corrs):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BEARING_COLUMNS)
        for a, b in zip(corrs.q1, corrs.q2):
            w.writerow([repr(float(x)) for x in (*a, *b)])


def write_pixels(path, corrs, size):
    p1 = bearing_to_pixel(corrs.q1, size)
    p2 = bearing_to_pixel(corrs.q2, size)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PIXEL_COLUMNS)
        for a, b in zip(p1, p2):
            w.writerow([repr(float(x)) for x in (*a, *b)])


def format_axis_value(axis, value):
    if axis == "kappa":
        return f"{value:.5e}"
    if axis == "n_points":
        return str(int(value))
    return repr(float(value))


def sweep_csv(report, include_time=False):
    """CSV text for a SweepReport. ``mean_time_ms`` stays empty unless ``include_time``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for i, value in enumerate(report.values):
        for label in report.methods:
            c = report.cells[(i, label)]
            stats = [c.q25_rot, c.q50_rot, c.q75_rot, c.q25_tran, c.q50_tran, c.q75_tran]
            row = [format_axis_value(report.axis, value), label] + [repr(float(x)) for x in stats]
            row.append(repr(c.mean_time * 1e3) if include_time else "")
            w.writerow(row)
    return buf.getvalue()


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def report_json(command, seed, results):
    """JSON text of a report. Non-finite numbers become null."""
    doc = {"schema_version": SCHEMA_VERSION, "command": command, "seed": seed, "results": results}
    return json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n"


def strip_timing(doc):
    """Copy of a parsed report without wall-clock fields, for reproducibility checks."""
    if isinstance(doc, dict):
        return {k: strip_timing(v) for k, v in doc.items() if "time" not in k}
    if isinstance(doc, list):
        return [strip_timing(v) for v in doc]
    return doc
