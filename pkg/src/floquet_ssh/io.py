"""File output: canonical JSON, trajectory exports and SVG heatmaps.

Everything written here is a pure function of its inputs so that repeated
exports are byte-identical.
"""

import csv
import io
import json

import numpy as np

from .dynamics import Trajectory

__all__ = [
    "dumps",
    "write_json",
    "write_text",
    "diverging_color",
    "heatmap_svg",
    "csv_wide",
    "csv_long",
    "EXPORT_KINDS",
]

EXPORT_KINDS = ("heatmap_svg", "csv_wide", "csv_long")

# fixed diverging map: m = -1 blue, 0 white, +1 red
_ANCHORS = np.array([[33, 102, 172], [247, 247, 247], [178, 24, 43]], dtype=float)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return None if np.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def dumps(obj) -> str:
    """Canonical JSON (sorted keys, two-space indent, trailing newline)."""
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def write_text(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def write_json(path, obj):
    write_text(path, dumps(obj))


def diverging_color(m) -> str:
    """Hex colour of a magnetisation value in ``[-1, 1]``."""
    x = float(np.clip(m, -1.0, 1.0))
    if x < 0:
        c = _ANCHORS[1] + (_ANCHORS[0] - _ANCHORS[1]) * (-x)
    else:
        c = _ANCHORS[1] + (_ANCHORS[2] - _ANCHORS[1]) * x
    r, g, b = (int(round(v)) for v in c)
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap_svg(traj: Trajectory, title="", cell_w=2, cell_h=14) -> str:
    """Site (rows, site 1 on top) versus tau (columns) raster of ``m_j``."""
    n_t, L = traj.magnetizations.shape
    margin_l, margin_t = 48, 24
    width = margin_l + n_t * cell_w + 10
    height = margin_t + L * cell_h + 30
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" shape-rendering="crispEdges">',
        f'<text x="{margin_l}" y="16" font-family="sans-serif" font-size="12">{_escape(title)}</text>',
    ]
    for j in range(L):
        y = margin_t + j * cell_h
        out.append(f'<text x="{margin_l - 6}" y="{y + cell_h - 3}" font-family="sans-serif" '
                   f'font-size="10" text-anchor="end">{j + 1}</text>')
        for k in range(n_t):
            col = diverging_color(traj.magnetizations[k, j])
            out.append(f'<rect x="{margin_l + k * cell_w}" y="{y}" width="{cell_w}" '
                       f'height="{cell_h}" fill="{col}"/>')
    yb = margin_t + L * cell_h + 14
    out.append(f'<text x="{margin_l}" y="{yb}" font-family="sans-serif" font-size="10">'
               f'tau = {traj.times[0]:.3g}</text>')
    out.append(f'<text x="{margin_l + n_t * cell_w}" y="{yb}" font-family="sans-serif" '
               f'font-size="10" text-anchor="end">tau = {traj.times[-1]:.3g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(s):
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def csv_wide(traj: Trajectory) -> str:
    return traj.to_csv()


def csv_long(traj: Trajectory) -> str:
    """One row per ``(tau, site)``: columns ``tau, site, m``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tau", "site", "m"])
    for t, row in zip(traj.times, traj.magnetizations):
        for j, m in enumerate(row, start=1):
            w.writerow([repr(float(t)), j, repr(float(m))])
    return buf.getvalue()
