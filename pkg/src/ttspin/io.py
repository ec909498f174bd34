"""Text file formats: trajectory / logo / contour CSV and fixed-precision JSON."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, List, Sequence, Union

import numpy as np

from .logo_spin import ContourFrame
from .physics import LogoTrack, Trajectory

TRAJECTORY_HEADER = ["t", "x", "y", "z"]
LOGO_HEADER = ["t", "visible", "lx", "ly", "lz"]


class InputFormatError(ValueError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.line = line


def fmt(x: float) -> str:
    """9 significant digits, locale independent."""
    return format(float(x), ".9g")


def _round_floats(obj):
    if isinstance(obj, float):
        return float(fmt(obj)) if math.isfinite(obj) else None
    if isinstance(obj, (np.floating,)):
        return _round_floats(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _round_floats(obj.tolist())
    if isinstance(obj, dict):
        return {str(k): _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_round_floats(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps_json(obj))


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def write_trajectory_csv(path, traj: Trajectory) -> None:
    write_rows(path, TRAJECTORY_HEADER, (map(float, (t, *p)) for t, p in zip(traj.t, traj.positions)))


def write_logo_csv(path, track: LogoTrack) -> None:
    rows = []
    for t, d, v in zip(track.t, track.directions, track.visible):
        rows.append([fmt(t), "1" if v else "0", *(fmt(x) for x in (d if v else np.zeros(3)))])
    write_rows(path, LOGO_HEADER, rows)


def write_contour_csv(path, frames: Sequence[ContourFrame]) -> None:
    """``t,radius_px,u1,v1,u2,v2,...``; rows carry as many pixel pairs as the frame has."""
    k = max((len(f.pixels) for f in frames), default=0)
    header = ["t", "radius_px"] + [f"{a}{i}" for i in range(1, k + 1) for a in ("u", "v")]
    rows = ([fmt(f.t), fmt(f.radius_px), *(fmt(x) for x in np.asarray(f.pixels).reshape(-1))] for f in frames)
    write_rows(path, header, rows)


def _read_rows(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputFormatError(path, 1, "empty file")
    return [c.strip() for c in rows[0]], rows[1:]


def _floats(path, line: int, cells: Sequence[str]) -> List[float]:
    try:
        vals = [float(c) for c in cells]
    except ValueError:
        raise InputFormatError(path, line, "non-numeric value") from None
    if not all(math.isfinite(v) for v in vals):
        raise InputFormatError(path, line, "non-finite value")
    return vals


def _check_increasing(path, times: List[float]) -> None:
    for i in range(1, len(times)):
        if times[i] <= times[i - 1]:
            raise InputFormatError(path, i + 2, "timestamps must be strictly increasing")


def read_trajectory_csv(path) -> Trajectory:
    header, rows = _read_rows(path)
    if header != TRAJECTORY_HEADER:
        raise InputFormatError(path, 1, f"expected header {','.join(TRAJECTORY_HEADER)}")
    data = []
    for i, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != 4:
            raise InputFormatError(path, i, f"expected 4 columns, got {len(row)}")
        data.append(_floats(path, i, row))
    if len(data) < 2:
        raise InputFormatError(path, len(rows) + 1, "need at least 2 observations")
    arr = np.array(data)
    _check_increasing(path, arr[:, 0].tolist())
    return Trajectory(arr[:, 0], arr[:, 1:])


def read_logo_csv(path) -> LogoTrack:
    header, rows = _read_rows(path)
    if header != LOGO_HEADER:
        raise InputFormatError(path, 1, f"expected header {','.join(LOGO_HEADER)}")
    t, dirs, vis = [], [], []
    for i, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != 5:
            raise InputFormatError(path, i, f"expected 5 columns, got {len(row)}")
        vals = _floats(path, i, row)
        if vals[1] not in (0.0, 1.0):
            raise InputFormatError(path, i, "visible must be 0 or 1")
        d = np.array(vals[2:])
        if vals[1] == 1.0:
            n = np.linalg.norm(d)
            if abs(n - 1.0) > 1e-6:
                raise InputFormatError(path, i, "logo direction is not a unit vector")
            d = d / n
        t.append(vals[0])
        dirs.append(d)
        vis.append(vals[1] == 1.0)
    _check_increasing(path, t)
    return LogoTrack(np.array(t), np.array(dirs).reshape(-1, 3), np.array(vis, dtype=bool))


def read_contour_csv(path) -> List[ContourFrame]:
    header, rows = _read_rows(path)
    if header[:2] != ["t", "radius_px"]:
        raise InputFormatError(path, 1, "expected header starting with t,radius_px")
    frames = []
    for i, row in enumerate(rows, start=2):
        cells = [c for c in row if c.strip() != ""]
        if not cells:
            continue
        if len(cells) < 2 or len(cells) % 2:
            raise InputFormatError(path, i, "expected t, radius_px and u,v pairs")
        vals = _floats(path, i, cells)
        if vals[1] <= 0:
            raise InputFormatError(path, i, "radius_px must be positive")
        frames.append(ContourFrame(vals[0], np.array(vals[2:]).reshape(-1, 2), vals[1]))
    _check_increasing(path, [f.t for f in frames])
    return frames


def read_logo_input(path) -> Union[LogoTrack, List[ContourFrame]]:
    """Logo CSV or contour CSV, chosen by header."""
    header, _ = _read_rows(path)
    if header == LOGO_HEADER:
        return read_logo_csv(path)
    if header[:2] == ["t", "radius_px"]:
        return read_contour_csv(path)
    raise InputFormatError(path, 1, "unrecognised header; expected logo or contour CSV")
