"""Deterministic CSV / SVG / JSON artifact writers for the CLI.

Floats are printed with 17 significant digits so identical runs produce
byte-identical files.  SVG output is hand-assembled (no plotting library):
the spectral curve is traced by marching squares on the sign grid of psi1,
with the spectral parameter on the horizontal axis.
"""

from __future__ import annotations

import json
import os

import numpy as np

CSV_COLUMNS = "param,omega1,omega2,psi1,psi2,rho"


def fmt(value) -> str:
    return "%.17g" % float(value)


def write_path_csv(path, samples) -> None:
    lines = [CSV_COLUMNS]
    for k in range(len(samples.ts)):
        lines.append(",".join(fmt(v) for v in (
            samples.ts[k], samples.omega1[k], samples.omega2[k],
            samples.psi1[k], samples.psi2[k], samples.rho[k],
        )))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_rows_csv(path, header, rows) -> None:
    lines = [header]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_grid_csv(path, lam_axis, x_axis, values) -> None:
    """Long-format grid dump: one (lambda, x, value) row per node."""
    lines = ["lambda,x,rho"]
    for li, lam in enumerate(lam_axis):
        for xi, x in enumerate(x_axis):
            lines.append(f"{fmt(lam)},{fmt(x)},{fmt(values[li, xi])}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_summary_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# SVG
# ---------------------------------------------------------------------------

_W, _H = 720, 480
_ML, _MR, _MT, _MB = 70, 20, 20, 50  # margins


def _x_px(lam, lam_lo, lam_hi):
    return _ML + (lam - lam_lo) / (lam_hi - lam_lo) * (_W - _ML - _MR)


def _y_px(x):
    # x in [0,1], origin at the bottom
    return _H - _MB - x * (_H - _MT - _MB)


def marching_squares(lam_axis, x_axis, values):
    """Zero-level segments of a scalar grid (values indexed [lam, x]).

    Returns a list of ((lam0, x0), (lam1, x1)) segments from linear
    interpolation on each grid cell edge.
    """
    segs = []
    L, S = values.shape

    def interp(p, q, vp, vq):
        t = vp / (vp - vq)
        return (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))

    for i in range(L - 1):
        for j in range(S - 1):
            corners = [
                ((lam_axis[i], x_axis[j]), values[i, j]),
                ((lam_axis[i + 1], x_axis[j]), values[i + 1, j]),
                ((lam_axis[i + 1], x_axis[j + 1]), values[i + 1, j + 1]),
                ((lam_axis[i], x_axis[j + 1]), values[i, j + 1]),
            ]
            pts = []
            for k in range(4):
                (p, vp) = corners[k]
                (q, vq) = corners[(k + 1) % 4]
                if vp == 0.0 and vq == 0.0:
                    continue
                if (vp < 0) != (vq < 0) or vp == 0.0:
                    if vp == 0.0:
                        pts.append(p)
                    else:
                        pts.append(interp(p, q, vp, vq))
            if len(pts) >= 2:
                segs.append((pts[0], pts[1]))
            if len(pts) == 4:
                segs.append((pts[2], pts[3]))
    return segs


def _svg_header(title):
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f"<title>{title}</title>",
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
    ]


def _svg_axes(lam_lo, lam_hi):
    x0, x1 = _x_px(lam_lo, lam_lo, lam_hi), _x_px(lam_hi, lam_lo, lam_hi)
    y0, y1 = _y_px(0.0), _y_px(1.0)
    parts = [
        f'<rect x="{x0:.2f}" y="{y1:.2f}" width="{x1 - x0:.2f}" '
        f'height="{y0 - y1:.2f}" fill="none" stroke="black"/>',
        f'<text x="{(x0 + x1) / 2:.2f}" y="{_H - 12}" text-anchor="middle" '
        f'font-size="14">lambda</text>',
        f'<text x="18" y="{(y0 + y1) / 2:.2f}" text-anchor="middle" '
        f'font-size="14" transform="rotate(-90 18 {(y0 + y1) / 2:.2f})">x</text>',
    ]
    for lam in (lam_lo, lam_hi):
        px = _x_px(lam, lam_lo, lam_hi)
        parts.append(
            f'<text x="{px:.2f}" y="{y0 + 18:.2f}" text-anchor="middle" '
            f'font-size="12">{lam:g}</text>'
        )
    for xv in (0.0, 1.0):
        parts.append(
            f'<text x="{x0 - 8:.2f}" y="{_y_px(xv) + 4:.2f}" text-anchor="end" '
            f'font-size="12">{xv:g}</text>'
        )
    return parts


def write_box_svg(path, lam_axis, x_axis, psi1_grid, crossings=(), eigenvalues=(),
                  title="spectral curve") -> None:
    lam_lo, lam_hi = float(lam_axis[0]), float(lam_axis[-1])
    parts = _svg_header(title)
    parts += _svg_axes(lam_lo, lam_hi)
    for (a, b) in marching_squares(lam_axis, x_axis, psi1_grid):
        parts.append(
            f'<line x1="{_x_px(a[0], lam_lo, lam_hi):.2f}" y1="{_y_px(a[1]):.2f}" '
            f'x2="{_x_px(b[0], lam_lo, lam_hi):.2f}" y2="{_y_px(b[1]):.2f}" '
            f'stroke="#1050c0" stroke-width="1.2"/>'
        )
    for x in crossings:
        parts.append(
            f'<circle cx="{_x_px(lam_lo, lam_lo, lam_hi):.2f}" '
            f'cy="{_y_px(x):.2f}" r="4" fill="#d02020"/>'
        )
    for lam in eigenvalues:
        parts.append(
            f'<circle cx="{_x_px(lam, lam_lo, lam_hi):.2f}" '
            f'cy="{_y_px(1.0):.2f}" r="4" fill="#108030"/>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


def write_heatmap_svg(path, lam_axis, x_axis, values, loss_points=(),
                      title="rho over the box", max_cells=200) -> None:
    """Down-sampled log10 heat map of rho with loss points marked."""
    L, S = values.shape
    li = np.unique(np.linspace(0, L - 1, min(L, max_cells)).astype(int))
    xi = np.unique(np.linspace(0, S - 1, min(S, max_cells)).astype(int))
    sub = values[np.ix_(li, xi)]
    logv = np.log10(np.maximum(sub, 1e-300))
    lo, hi = float(np.min(logv)), float(np.max(logv))
    span = hi - lo if hi > lo else 1.0
    lam_lo, lam_hi = float(lam_axis[0]), float(lam_axis[-1])
    parts = _svg_header(title)
    for a in range(len(li)):
        for b in range(len(xi)):
            t = (logv[a, b] - lo) / span
            # dark = small rho
            shade = int(30 + 225 * t)
            lam0 = lam_axis[li[a]]
            lam1 = lam_axis[li[a + 1]] if a + 1 < len(li) else lam_hi
            x0 = x_axis[xi[b]]
            x1 = x_axis[xi[b + 1]] if b + 1 < len(xi) else x_axis[-1]
            px = _x_px(lam0, lam_lo, lam_hi)
            pw = max(_x_px(lam1, lam_lo, lam_hi) - px, 0.5)
            py = _y_px(x1)
            ph = max(_y_px(x0) - py, 0.5)
            parts.append(
                f'<rect x="{px:.2f}" y="{py:.2f}" width="{pw:.2f}" '
                f'height="{ph:.2f}" fill="rgb({shade},{shade},255)"/>'
            )
    parts += _svg_axes(lam_lo, lam_hi)
    for p in loss_points:
        parts.append(
            f'<circle cx="{_x_px(p.lambda_star, lam_lo, lam_hi):.2f}" '
            f'cy="{_y_px(p.x_star):.2f}" r="5" fill="none" stroke="#d02020" '
            f'stroke-width="2"/>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


def ensure_outdir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return path
