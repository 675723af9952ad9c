"""On-disk formats: QF2/QM2 binary fields, CSV tables, PGM heatmaps,
minimal SVG line plots, and key = value config files.

All writers are deterministic: identical inputs produce identical bytes.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .analysis import Peak, FringeMetrics, ScreenHistogram
from .errors import FormatError
from .qsolve import ComplexField2D, Grid

QF2_MAGIC = b"QF2\x00"
QM2_MAGIC = b"QM2\x00"
_HEADER = struct.Struct("<4sIIdd")  # magic, n_x, n_y, domain length, time

SVG_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd")


def _fmt(v) -> str:
    """Shortest round-trip decimal for floats; plain str otherwise."""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


# ---------------------------------------------------------------- QF2 / QM2


def write_qf2(path, field: ComplexField2D, time: float = 0.0) -> None:
    """Complex field: header then row-major interleaved (re, im) float64."""
    payload = np.ascontiguousarray(field.values, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(QF2_MAGIC, field.grid.n_x, field.grid.n_y, field.grid.length, time))
        fh.write(payload.tobytes())


def read_qf2(path) -> tuple[ComplexField2D, float]:
    n_x, n_y, length, time, body = _read_body(path, QF2_MAGIC, 16)
    values = np.frombuffer(body, dtype="<c16").reshape(n_x, n_y)
    return ComplexField2D(Grid(n_x, n_y, length), values.astype(complex)), time


def write_qm2(path, modulus: np.ndarray, length: float, time: float) -> None:
    """Modulus frame: same header as QF2 with a single float64 per point."""
    modulus = np.ascontiguousarray(modulus, dtype="<f8")
    n_x, n_y = modulus.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(QM2_MAGIC, n_x, n_y, length, time))
        fh.write(modulus.tobytes())


def read_qm2(path) -> tuple[np.ndarray, float, float]:
    """Returns (modulus array, domain length, time)."""
    n_x, n_y, length, time, body = _read_body(path, QM2_MAGIC, 8)
    return np.frombuffer(body, dtype="<f8").reshape(n_x, n_y).copy(), length, time


def _read_body(path, magic: bytes, itemsize: int):
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    got_magic, n_x, n_y, length, time = _HEADER.unpack_from(raw)
    if got_magic != magic:
        raise FormatError(f"{path}: bad magic {got_magic!r}, expected {magic!r}")
    body = raw[_HEADER.size :]
    expected = n_x * n_y * itemsize
    if len(body) != expected:
        raise FormatError(
            f"{path}: payload is {len(body)} bytes but header {n_x}x{n_y} requires {expected}"
        )
    return n_x, n_y, length, time, body


def sniff_field_file(path) -> str:
    """Return 'qf2' or 'qm2' from the file's magic."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == QF2_MAGIC:
        return "qf2"
    if magic == QM2_MAGIC:
        return "qm2"
    raise FormatError(f"{path}: not a QF2/QM2 file")


# ----------------------------------------------------------------------- CSV


def _comment_lines(comments: dict | None) -> list[str]:
    if not comments:
        return []
    return [f"# {key} = {_fmt(value)}" for key, value in comments.items()]


def write_profile_csv(path, y, probability, comments: dict | None = None) -> None:
    lines = _comment_lines(comments)
    lines.append("y,probability")
    for yi, pi in zip(np.asarray(y, float), np.asarray(probability, float)):
        lines.append(f"{_fmt(yi)},{_fmt(pi)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _data_lines(path) -> list[tuple[int, str]]:
    """(1-based line number, stripped text) for non-comment, non-blank lines."""
    out = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        text = line.strip()
        if text and not text.startswith("#"):
            out.append((lineno, text))
    return out


def read_profile_csv(path) -> tuple[np.ndarray, np.ndarray]:
    rows = _data_lines(path)
    if not rows or rows[0][1] != "y,probability":
        where = rows[0][0] if rows else 1
        raise FormatError(f"{path}: line {where}: expected header 'y,probability'")
    ys, ps = [], []
    for lineno, text in rows[1:]:
        parts = text.split(",")
        try:
            if len(parts) != 2:
                raise ValueError
            y, p = float(parts[0]), float(parts[1])
        except ValueError:
            raise FormatError(f"{path}: line {lineno}: expected 'y,probability' numbers, got {text!r}") from None
        ys.append(y)
        ps.append(p)
    return np.array(ys), np.array(ps)


def write_histogram_csv(path, hist: ScreenHistogram, comments: dict | None = None) -> None:
    lines = _comment_lines(comments)
    lines.append("bin_left,bin_right,count")
    for left, right, count in zip(hist.bin_edges[:-1], hist.bin_edges[1:], hist.counts):
        lines.append(f"{_fmt(left)},{_fmt(right)},{int(count)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_histogram_csv(path) -> ScreenHistogram:
    rows = _data_lines(path)
    if not rows or rows[0][1] != "bin_left,bin_right,count":
        where = rows[0][0] if rows else 1
        raise FormatError(f"{path}: line {where}: expected header 'bin_left,bin_right,count'")
    lefts, rights, counts = [], [], []
    for lineno, text in rows[1:]:
        parts = text.split(",")
        if len(parts) != 3:
            raise FormatError(f"{path}: line {lineno}: expected three columns, got {text!r}")
        try:
            lefts.append(float(parts[0]))
            rights.append(float(parts[1]))
            counts.append(int(parts[2]))
        except ValueError:
            raise FormatError(f"{path}: line {lineno}: malformed histogram row {text!r}") from None
    if not lefts:
        return ScreenHistogram(np.empty(0), np.empty(0, dtype=np.int64))
    for i in range(1, len(lefts)):
        if lefts[i] != rights[i - 1]:
            raise FormatError(f"{path}: line {rows[i + 1][0]}: bins are not contiguous")
    edges = np.array(lefts + [rights[-1]])
    return ScreenHistogram(edges, np.array(counts, dtype=np.int64))


def write_arrivals_csv(path, result, comments: dict | None = None) -> None:
    """Per-trial event and arrival table for either run mode."""
    no_interference = hasattr(result, "first_slit")
    lines = _comment_lines(comments)
    header = "trial,W_L,W_R,F_L,F_C,F_R,Y_C,arrival"
    if no_interference:
        header += ",first_slit"
        arrivals = result.detections
        merge_y = result.nominal_merge_positions
    else:
        arrivals = result.arrivals
        merge_y = result.merge_positions
    lines.append(header)
    for i, e in enumerate(result.events):
        row = (
            f"{i},{e.left_weight},{e.right_weight},{e.left_force},{e.center_force},"
            f"{e.right_force},{_fmt(merge_y[i])},{_fmt(arrivals[i])}"
        )
        if no_interference:
            row += f",{result.first_slit[i]}"
        lines.append(row)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_points_csv(path) -> np.ndarray:
    rows = _data_lines(path)
    if not rows or rows[0][1] != "x,y":
        where = rows[0][0] if rows else 1
        raise FormatError(f"{path}: line {where}: expected header 'x,y'")
    pts = []
    for lineno, text in rows[1:]:
        parts = text.split(",")
        try:
            x, y = (float(parts[0]), float(parts[1])) if len(parts) == 2 else (_ for _ in ()).throw(ValueError)
        except ValueError:
            raise FormatError(f"{path}: line {lineno}: expected 'x,y' numbers, got {text!r}") from None
        pts.append((x, y))
    return np.array(pts, dtype=float).reshape(-1, 2)


def write_centrality_csv(path, points, values, argmax, comments: dict | None = None) -> None:
    lines = _comment_lines(comments)
    lines.append("node,x,y,closeness,is_max")
    argmax = set(argmax)
    for i, ((x, y), c) in enumerate(zip(points, values)):
        lines.append(f"{i},{_fmt(x)},{_fmt(y)},{_fmt(c)},{1 if i in argmax else 0}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_peaks_csv(path, peaks: list[Peak], comments: dict | None = None) -> None:
    lines = _comment_lines(comments)
    lines.append("peak_center,height")
    for p in peaks:
        lines.append(f"{_fmt(p.center)},{_fmt(p.height)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def fringe_summary_line(metrics: FringeMetrics | None) -> str:
    """`peaks=<n> spacing=<mean> cv=<cv> fringed=<bool>` with nan for undefined."""
    if metrics is None:
        return "peaks=0 spacing=nan cv=nan fringed=false"
    spacing = "nan" if metrics.mean_spacing is None else f"{metrics.mean_spacing:.6g}"
    cv = "nan" if metrics.spacing_cv is None else f"{metrics.spacing_cv:.6g}"
    return (
        f"peaks={metrics.n_peaks} spacing={spacing} cv={cv} "
        f"fringed={'true' if metrics.fringed else 'false'}"
    )


def write_fringe_report(path, peaks: list[Peak], metrics: FringeMetrics | None,
                        comments: dict | None = None) -> str:
    """Plain-text fringe report; returns the summary line."""
    lines = _comment_lines(comments)
    lines.append("fringe report")
    for p in peaks:
        lines.append(
            f"peak center={_fmt(p.center)} height={_fmt(p.height)} "
            f"valleys=({_fmt(p.left_valley)}, {_fmt(p.right_valley)})"
        )
    if metrics is not None:
        lines.append(f"visibility={metrics.visibility:.6g}")
    summary = fringe_summary_line(metrics)
    lines.append(summary)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return summary


# ----------------------------------------------------------------- PGM / SVG


def write_pgm(path, values: np.ndarray, vmax: float | None = None) -> None:
    """Binary P5 grayscale; x runs left-right, y bottom-up, scaled to vmax."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise FormatError("PGM writer expects a 2D array")
    if vmax is None:
        vmax = float(values.max()) if values.size else 0.0
    if vmax <= 0:
        vmax = 1.0
    scaled = np.clip(values / vmax, 0.0, 1.0)
    raster = np.round(255.0 * scaled.T[::-1, :]).astype(np.uint8)
    n_y, n_x = raster.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{n_x} {n_y}\n255\n".encode("ascii"))
        fh.write(raster.tobytes())


def histogram_step_points(hist: ScreenHistogram) -> tuple[np.ndarray, np.ndarray]:
    """Staircase outline of a histogram for line plotting."""
    if hist.n_bins == 0:
        return np.empty(0), np.empty(0)
    xs = np.repeat(hist.bin_edges, 2)[1:-1]
    ys = np.repeat(np.asarray(hist.counts, dtype=float), 2)
    return xs, ys


def svg_line_plot(path, series: list[tuple[str, np.ndarray, np.ndarray]],
                  title: str = "", width: int = 900, height: int = 420) -> None:
    """Self-contained SVG with one polyline per (label, x, y) series."""
    margin = 50.0
    xs = np.concatenate([np.asarray(s[1], float) for s in series if len(s[1])]) if series else np.empty(0)
    ys = np.concatenate([np.asarray(s[2], float) for s in series if len(s[2])]) if series else np.empty(0)
    if xs.size == 0:
        x_lo, x_hi, y_lo, y_hi = 0.0, 1.0, 0.0, 1.0
    else:
        x_lo, x_hi = float(xs.min()), float(xs.max())
        y_lo, y_hi = float(min(ys.min(), 0.0)), float(ys.max())
        if x_hi == x_lo:
            x_hi = x_lo + 1.0
        if y_hi == y_lo:
            y_hi = y_lo + 1.0
    sx = (width - 2 * margin) / (x_hi - x_lo)
    sy = (height - 2 * margin) / (y_hi - y_lo)

    def px(x):
        return margin + (x - x_lo) * sx

    def py(y):
        return height - margin - (y - y_lo) * sy

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin:.2f}" y1="{height - margin:.2f}" x2="{width - margin:.2f}" '
        f'y2="{height - margin:.2f}" stroke="black"/>',
        f'<line x1="{margin:.2f}" y1="{margin:.2f}" x2="{margin:.2f}" '
        f'y2="{height - margin:.2f}" stroke="black"/>',
        f'<text x="{margin:.2f}" y="{height - margin + 18:.2f}" font-size="11">{_fmt(x_lo)}</text>',
        f'<text x="{width - margin:.2f}" y="{height - margin + 18:.2f}" font-size="11" '
        f'text-anchor="end">{_fmt(x_hi)}</text>',
        f'<text x="{margin - 6:.2f}" y="{margin:.2f}" font-size="11" text-anchor="end">{_fmt(y_hi)}</text>',
        f'<text x="{margin - 6:.2f}" y="{height - margin:.2f}" font-size="11" '
        f'text-anchor="end">{_fmt(y_lo)}</text>',
    ]
    if title:
        parts.append(f'<text x="{width / 2:.2f}" y="24" font-size="14" text-anchor="middle">{title}</text>')
    for idx, (label, x, y) in enumerate(series):
        color = SVG_PALETTE[idx % len(SVG_PALETTE)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(np.asarray(x, float), np.asarray(y, float)))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        parts.append(
            f'<text x="{width - margin:.2f}" y="{margin + 16 * idx:.2f}" font-size="12" '
            f'text-anchor="end" fill="{color}">{label}</text>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")


# -------------------------------------------------------------- config files


def format_config_text(config: dict) -> str:
    return "\n".join(f"{key} = {_fmt(value)}" for key, value in config.items()) + "\n"


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse `key = value` lines; '#' starts a comment, blanks are skipped."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise FormatError(f"{source}: line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if not key:
            raise FormatError(f"{source}: line {lineno}: empty key")
        out[key] = value.strip()
    return out


def read_config_file(path) -> dict[str, str]:
    return parse_config_text(Path(path).read_text(encoding="utf-8"), source=str(path))
