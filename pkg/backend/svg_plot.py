"""
Emisor SVG mínimo para las curvas de los barridos (cota y gaps frente a N).

La salida es determinista: mismas series producen exactamente los mismos bytes.
"""
import math
from xml.sax.saxutils import escape

from pydantic import BaseModel, Field

# Paleta fija (orden de las series)
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"]

MARGIN_LEFT = 70
MARGIN_RIGHT = 170
MARGIN_TOP = 40
MARGIN_BOTTOM = 50


class Series(BaseModel):
    label: str
    points: list[tuple[float, float]]
    dashed: bool = False


class SvgPlot(BaseModel):
    title: str
    x_label: str
    y_label: str
    series: list[Series] = Field(default_factory=list)
    log_x: bool = True
    log_y: bool = False
    width: int = 720
    height: int = 440


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def _transform(value: float, log_scale: bool) -> float | None:
    if log_scale:
        return math.log10(value) if value > 0 else None
    return value


def _ticks(low: float, high: float, log_scale: bool) -> list[float]:
    """Marcas en coordenadas transformadas."""
    if log_scale:
        first, last = math.floor(low), math.ceil(high)
        return [float(e) for e in range(first, last + 1) if low - 1e-9 <= e <= high + 1e-9]
    return [low + (high - low) * i / 4 for i in range(5)]


def _tick_label(value: float, log_scale: bool) -> str:
    return f"1e{int(value)}" if log_scale else f"{value:.3g}"


def render(plot: SvgPlot) -> str:
    """Documento SVG independiente con una polilínea por serie."""
    transformed = []
    for series in plot.series:
        points = []
        for x, y in series.points:
            tx, ty = _transform(x, plot.log_x), _transform(y, plot.log_y)
            if tx is not None and ty is not None and math.isfinite(tx) and math.isfinite(ty):
                points.append((tx, ty))
        transformed.append(points)

    all_points = [point for points in transformed for point in points] or [(0.0, 0.0), (1.0, 1.0)]
    x_low, x_high = min(p[0] for p in all_points), max(p[0] for p in all_points)
    y_low, y_high = min(p[1] for p in all_points), max(p[1] for p in all_points)
    if x_high == x_low:
        x_low, x_high = x_low - 0.5, x_high + 0.5
    if y_high == y_low:
        y_low, y_high = y_low - 0.5, y_high + 0.5

    plot_w = plot.width - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = plot.height - MARGIN_TOP - MARGIN_BOTTOM

    def sx(value: float) -> float:
        return MARGIN_LEFT + (value - x_low) / (x_high - x_low) * plot_w

    def sy(value: float) -> float:
        return MARGIN_TOP + plot_h - (value - y_low) / (y_high - y_low) * plot_h

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{plot.width}" height="{plot.height}" '
        f'viewBox="0 0 {plot.width} {plot.height}">',
        f'<rect x="0" y="0" width="{plot.width}" height="{plot.height}" fill="white"/>',
        f'<text x="{plot.width / 2:.2f}" y="22" text-anchor="middle" font-size="15">{escape(plot.title)}</text>',
        f'<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" '
        'fill="none" stroke="black"/>',
    ]

    for tick in _ticks(x_low, x_high, plot.log_x):
        x = sx(tick)
        lines.append(
            f'<line x1="{_fmt(x)}" y1="{MARGIN_TOP + plot_h}" x2="{_fmt(x)}" y2="{MARGIN_TOP + plot_h + 5}" stroke="black"/>'
        )
        lines.append(
            f'<text x="{_fmt(x)}" y="{MARGIN_TOP + plot_h + 18}" text-anchor="middle" font-size="11">'
            f"{_tick_label(tick, plot.log_x)}</text>"
        )
    for tick in _ticks(y_low, y_high, plot.log_y):
        y = sy(tick)
        lines.append(f'<line x1="{MARGIN_LEFT - 5}" y1="{_fmt(y)}" x2="{MARGIN_LEFT}" y2="{_fmt(y)}" stroke="black"/>')
        lines.append(
            f'<text x="{MARGIN_LEFT - 8}" y="{_fmt(y + 4)}" text-anchor="end" font-size="11">'
            f"{_tick_label(tick, plot.log_y)}</text>"
        )

    lines.append(
        f'<text x="{MARGIN_LEFT + plot_w / 2:.2f}" y="{plot.height - 10}" text-anchor="middle" '
        f'font-size="12">{escape(plot.x_label)}</text>'
    )
    lines.append(
        f'<text x="16" y="{MARGIN_TOP + plot_h / 2:.2f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {MARGIN_TOP + plot_h / 2:.2f})">{escape(plot.y_label)}</text>'
    )

    for index, (series, points) in enumerate(zip(plot.series, transformed)):
        color = PALETTE[index % len(PALETTE)]
        dash = ' stroke-dasharray="6 4"' if series.dashed else ""
        if points:
            coords = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in points)
            lines.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"{dash}/>')
        legend_y = MARGIN_TOP + 14 + 18 * index
        legend_x = MARGIN_LEFT + plot_w + 12
        lines.append(
            f'<line x1="{legend_x}" y1="{legend_y - 4}" x2="{legend_x + 20}" y2="{legend_y - 4}" '
            f'stroke="{color}" stroke-width="2"{dash}/>'
        )
        lines.append(f'<text x="{legend_x + 26}" y="{legend_y}" font-size="11">{escape(series.label)}</text>')

    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def sweep_plot(rows: list, family: str) -> SvgPlot:
    """Una curva de cota por valor de p y, si existen, las curvas de gaps."""
    plot = SvgPlot(
        title=f"Cota de generalización ({family})",
        x_label="N (muestras)",
        y_label="exceso",
        log_x=True,
        log_y=True,
    )
    for p in sorted({row.p for row in rows}):
        cells = [row for row in rows if row.p == p]
        plot.series.append(Series(label=f"cota p={p}", points=[(row.N, row.total_excess) for row in cells]))

    # Los gaps no dependen de p: una fila por N basta
    by_n = {}
    for row in rows:
        by_n.setdefault(row.N, row)
    cells = [by_n[n] for n in sorted(by_n)]
    random_gaps = [(row.N, row.max_gap_random) for row in cells if row.max_gap_random is not None]
    trained_gaps = [(row.N, row.max_gap_trained) for row in cells if row.max_gap_trained is not None]
    if random_gaps:
        plot.series.append(Series(label="gap pesos aleatorios", points=random_gaps, dashed=True))
    if trained_gaps:
        plot.series.append(Series(label="gap pesos optimizados", points=trained_gaps, dashed=True))
    return plot
