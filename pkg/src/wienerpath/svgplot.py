"""Minimal SVG line/errorbar plots so figures need no extra dependency."""

import math

WIDTH, HEIGHT = 640, 420
MARGIN = {"left": 70, "right": 20, "top": 30, "bottom": 50}
COLORS = ["#1f6fb2", "#c44e52", "#2a9d5c", "#8172b3"]


def _ticks(lo, hi, count=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(count, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min(s * mag for s in (1, 2, 5, 10) if s * mag >= raw)
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-12 * step:
        out.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return out


def _log_ticks(lo, hi):
    lo_e = math.floor(math.log10(lo))
    hi_e = math.ceil(math.log10(hi))
    return [10.0 ** e for e in range(lo_e, hi_e + 1)
            if lo <= 10.0 ** e <= hi * (1 + 1e-12)]


class SvgFigure:
    """One axes box; add series of (x, y, yerr) then render to a string."""

    def __init__(self, title="", xlabel="", ylabel="", logx=False):
        self.title = title
        self.xlabel = xlabel
        self.ylabel = ylabel
        self.logx = logx
        self.series = []

    def add_series(self, x, y, yerr=None, label=""):
        x = [float(v) for v in x]
        y = [float(v) for v in y]
        if self.logx and any(v <= 0 for v in x):
            raise ValueError("log-x plot needs positive x values")
        e = [float(v) for v in yerr] if yerr is not None else [0.0] * len(x)
        if not (len(x) == len(y) == len(e)):
            raise ValueError("series lengths differ")
        self.series.append((x, y, e, label))

    def _x_transform(self, v):
        return math.log10(v) if self.logx else v

    def render(self):
        if not self.series:
            raise ValueError("nothing to plot")
        xs = [self._x_transform(v) for s in self.series for v in s[0]]
        ys = [v + sign * e for s in self.series
              for v, e in zip(s[1], s[2]) for sign in (-1, 1)]
        x_lo, x_hi = min(xs), max(xs)
        y_lo, y_hi = min(ys), max(ys)
        if x_hi == x_lo:
            x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
        pad = 0.05 * (y_hi - y_lo) or 0.5
        y_lo, y_hi = y_lo - pad, y_hi + pad

        box_w = WIDTH - MARGIN["left"] - MARGIN["right"]
        box_h = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

        def px(v):
            return MARGIN["left"] + box_w * (self._x_transform(v) - x_lo) / (x_hi - x_lo)

        def py(v):
            return MARGIN["top"] + box_h * (y_hi - v) / (y_hi - y_lo)

        parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
                 f'height="{HEIGHT}" font-family="sans-serif" font-size="12">',
                 f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{box_w}" '
                 f'height="{box_h}" fill="white" stroke="#444"/>']
        if self.title:
            parts.append(f'<text x="{WIDTH / 2}" y="18" text-anchor="middle" '
                         f'font-size="14">{self.title}</text>')

        if self.logx:
            tick_vals = _log_ticks(10 ** x_lo, 10 ** x_hi) or [10 ** x_lo]
        else:
            tick_vals = _ticks(x_lo, x_hi)
        for tv in tick_vals:
            x = px(tv)
            y0 = MARGIN["top"] + box_h
            parts.append(f'<line x1="{x:.1f}" y1="{y0}" x2="{x:.1f}" '
                         f'y2="{y0 + 5}" stroke="#444"/>')
            parts.append(f'<text x="{x:.1f}" y="{y0 + 18}" '
                         f'text-anchor="middle">{tv:g}</text>')
        for tv in _ticks(y_lo, y_hi):
            y = py(tv)
            parts.append(f'<line x1="{MARGIN["left"] - 5}" y1="{y:.1f}" '
                         f'x2="{MARGIN["left"]}" y2="{y:.1f}" stroke="#444"/>')
            parts.append(f'<text x="{MARGIN["left"] - 8}" y="{y + 4:.1f}" '
                         f'text-anchor="end">{tv:g}</text>')
        if self.xlabel:
            parts.append(f'<text x="{MARGIN["left"] + box_w / 2}" '
                         f'y="{HEIGHT - 10}" text-anchor="middle">{self.xlabel}</text>')
        if self.ylabel:
            cx, cy = 16, MARGIN["top"] + box_h / 2
            parts.append(f'<text x="{cx}" y="{cy}" text-anchor="middle" '
                         f'transform="rotate(-90 {cx} {cy})">{self.ylabel}</text>')

        for idx, (x, y, err, label) in enumerate(self.series):
            color = COLORS[idx % len(COLORS)]
            pts = " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in zip(x, y))
            parts.append(f'<polyline points="{pts}" fill="none" '
                         f'stroke="{color}" stroke-width="1.5"/>')
            for a, b, e in zip(x, y, err):
                cx = px(a)
                parts.append(f'<circle cx="{cx:.1f}" cy="{py(b):.1f}" r="3" '
                             f'fill="{color}"/>')
                if e > 0:
                    parts.append(f'<line x1="{cx:.1f}" y1="{py(b - e):.1f}" '
                                 f'x2="{cx:.1f}" y2="{py(b + e):.1f}" '
                                 f'stroke="{color}" stroke-width="1"/>')
            if label:
                ly = MARGIN["top"] + 16 + 16 * idx
                lx = MARGIN["left"] + box_w - 130
                parts.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" '
                             f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
                parts.append(f'<text x="{lx + 26}" y="{ly}">{label}</text>')
        parts.append("</svg>")
        return "\n".join(parts)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.render() + "\n")


def convergence_plot(reports, path, title="convergence"):
    """Estimate with 95% CI bars against the partition mesh, log-x."""
    fig = SvgFigure(title=title, xlabel="mesh", ylabel="estimate", logx=True)
    fig.add_series([r.mesh for r in reports],
                   [r.estimate for r in reports],
                   [r.ci95 for r in reports])
    fig.save(path)
