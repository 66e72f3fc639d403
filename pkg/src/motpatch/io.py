"""File formats: MOT-style CSV records, binary PPM patches, loss traces.

The CSV layout is `frame,id,x,y,w,h,conf,class,visibility` with floats
rendered at six decimals; trailing fields may be omitted on input and default
to -1. Patches are stored as P6 PPM with maxval 255, so a save/load round
trip quantises pixel values to 1/255 steps and is lossless afterwards.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .geometry import BBox

_FLOAT_FMT = "%.6f"


@dataclass(frozen=True)
class MotRecord:
    frame: int
    track_id: int
    x: float
    y: float
    w: float
    h: float
    conf: float = -1.0
    cls: int = -1
    vis: float = -1.0

    def __post_init__(self):
        if self.frame < 1:
            raise ValueError(f"frame must be >= 1, got {self.frame}")
        if self.w < 0 or self.h < 0:
            raise ValueError(f"record has negative size w={self.w} h={self.h}")

    @property
    def bbox(self) -> BBox:
        return BBox(self.x, self.y, self.w, self.h)

    @classmethod
    def from_box(cls, frame: int, track_id: int, box: BBox, conf: float = -1.0,
                 cls_id: int = -1, vis: float = -1.0) -> "MotRecord":
        return cls(frame, track_id, box.x, box.y, box.w, box.h, conf, cls_id, vis)


def format_mot(records: Iterable[MotRecord]) -> str:
    lines = []
    for r in records:
        lines.append(
            ",".join(
                [
                    str(r.frame),
                    str(r.track_id),
                    _FLOAT_FMT % r.x,
                    _FLOAT_FMT % r.y,
                    _FLOAT_FMT % r.w,
                    _FLOAT_FMT % r.h,
                    _FLOAT_FMT % r.conf,
                    str(r.cls),
                    _FLOAT_FMT % r.vis,
                ]
            )
        )
    return "\n".join(lines) + ("\n" if lines else "")


def parse_mot(text: str) -> list[MotRecord]:
    records = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) < 6 or len(parts) > 9:
            raise ValueError(f"line {lineno}: expected 6-9 comma-separated fields, got {len(parts)}")
        try:
            frame = int(parts[0])
            track_id = int(parts[1])
            x, y, w, h = (float(p) for p in parts[2:6])
            conf = float(parts[6]) if len(parts) > 6 else -1.0
            cls_id = int(float(parts[7])) if len(parts) > 7 else -1
            vis = float(parts[8]) if len(parts) > 8 else -1.0
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        records.append(MotRecord(frame, track_id, x, y, w, h, conf, cls_id, vis))
    return records


def save_mot(path: str | Path, records: Iterable[MotRecord]) -> None:
    Path(path).write_text(format_mot(records))


def load_mot(path: str | Path) -> list[MotRecord]:
    return parse_mot(Path(path).read_text())


# ---------------------------------------------------------------------------
# patches: binary P6 PPM, maxval 255


def save_patch(path: str | Path, patch: np.ndarray) -> None:
    arr = np.asarray(patch, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"patch must be HxWx3, got shape {arr.shape}")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("patch values must lie in [0, 1]")
    h, w = arr.shape[:2]
    data = np.rint(arr * 255.0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def load_patch(path: str | Path) -> np.ndarray:
    blob = Path(path).read_bytes()
    m = re.match(rb"P6\s+(\d+)\s+(\d+)\s+(\d+)\s", blob)
    if not m:
        raise ValueError(f"{path}: not a binary P6 PPM")
    w, h, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise ValueError(f"{path}: expected maxval 255, got {maxval}")
    raster = blob[m.end():]
    expected = w * h * 3
    if len(raster) != expected:
        raise ValueError(f"{path}: expected {expected} raster bytes, got {len(raster)}")
    data = np.frombuffer(raster, dtype=np.uint8).reshape(h, w, 3)
    return data.astype(float) / 255.0


# ---------------------------------------------------------------------------
# optimisation loss traces

LOSS_TRACE_HEADER = "iteration,loss_bbr,loss_tv,loss_ap,loss_total"


def format_loss_trace(rows: Sequence[tuple[int, float, float, float, float]]) -> str:
    lines = [LOSS_TRACE_HEADER]
    for it, bbr, tv, ap, total in rows:
        lines.append("%d,%.10g,%.10g,%.10g,%.10g" % (it, bbr, tv, ap, total))
    return "\n".join(lines) + "\n"


def save_loss_trace(path: str | Path, rows) -> None:
    Path(path).write_text(format_loss_trace(rows))


def load_loss_trace(path: str | Path) -> list[tuple[int, float, float, float, float]]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != LOSS_TRACE_HEADER:
        raise ValueError(f"{path}: missing loss trace header")
    out = []
    for line in lines[1:]:
        it, bbr, tv, ap, total = line.split(",")
        out.append((int(it), float(bbr), float(tv), float(ap), float(total)))
    return out
