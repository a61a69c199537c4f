"""Run-directory output: CSV tables, JSON manifests and a small log-log SVG plot."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

from .grid import format_float


def _cell(v) -> str:
    if isinstance(v, bool) or v is None:
        return str(v).lower() if isinstance(v, bool) else ""
    if isinstance(v, (int,)) and not isinstance(v, bool):
        return str(v)
    if isinstance(v, float) or hasattr(v, "__float__") and not isinstance(v, str):
        return format_float(float(v))
    return str(v)


def table_csv(header, rows) -> str:
    """RFC-4180 CSV with 17 significant digits for floats."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_table(path: str | Path, header, rows) -> None:
    Path(path).write_text(table_csv(header, rows), newline="")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def write_manifest(path: str | Path, payload: dict) -> None:
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True)
    Path(path).write_text(text + "\n")


def loglog_svg(xs, ys, slope: float | None = None, title: str = "", xlabel: str = "lambda",
               ylabel: str = "error", width: int = 480, height: int = 360) -> str:
    """Static SVG: log-log scatter with decade ticks and an optional fitted line."""
    pts = [(float(x), float(y)) for x, y in zip(xs, ys) if x > 0 and y > 0]
    left, right, top, bottom = 70, 20, 40, 50
    pw, ph = width - left - right, height - top - bottom
    lx = [math.log10(x) for x, _ in pts] or [0.0, 1.0]
    ly = [math.log10(y) for _, y in pts] or [0.0, 1.0]
    x0, x1 = math.floor(min(lx) * 4) / 4, math.ceil(max(lx) * 4) / 4
    y0, y1 = math.floor(min(ly)), math.ceil(max(ly))
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1

    def px(v):
        return left + (v - x0) / (x1 - x0) * pw

    def py(v):
        return top + (y1 - v) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for d in range(int(y0), int(y1) + 1):
        y = py(d)
        out.append(f'<line x1="{left - 5}" y1="{y:.2f}" x2="{left}" y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{y + 4:.2f}" text-anchor="end">1e{d}</text>')
    for x, _ in pts:
        xv = px(math.log10(x))
        out.append(f'<line x1="{xv:.2f}" y1="{top + ph}" x2="{xv:.2f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{xv:.2f}" y="{top + ph + 18}" text-anchor="middle">{x:g}</text>')
    if slope is not None and math.isfinite(slope) and len(pts) >= 2:
        mx, my = sum(lx) / len(lx), sum(ly) / len(ly)
        a, b = min(lx), max(lx)
        out.append(f'<line x1="{px(a):.2f}" y1="{py(my + slope * (a - mx)):.2f}" x2="{px(b):.2f}" '
                   f'y2="{py(my + slope * (b - mx)):.2f}" stroke="steelblue" stroke-dasharray="6,4"/>')
    for u, v in zip(lx, ly):
        out.append(f'<circle cx="{px(u):.2f}" cy="{py(v):.2f}" r="4" fill="firebrick"/>')
    label = title if slope is None else f"{title} (fitted slope {slope:.3f})"
    out.append(f'<text x="{width / 2}" y="22" text-anchor="middle">{_escape(label)}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{height - 10}" text-anchor="middle">{_escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{top + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2})">{_escape(ylabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
