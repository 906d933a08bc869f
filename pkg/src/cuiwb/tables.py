"""Plain-text table rendering for CLI output.

Output is deterministic byte for byte: fixed two-space gutters, widths from
content, no locale-dependent formatting.
"""

from __future__ import annotations

from typing import Sequence

GUTTER = "  "


def fmt_pct(value: float | None) -> str:
    """Percentages print with one decimal; undefined values print as -."""
    return "-" if value is None else f"{value:.1f}"


def fmt_ratio(value: float | None) -> str:
    return "-" if value is None else f"{value:.3f}"


def render_table(
    headers: Sequence[str],
    rows: Sequence[Sequence[str]],
    aligns: Sequence[str] | None = None,
) -> str:
    """Render rows of pre-formatted cells. aligns is 'l' or 'r' per column."""
    if aligns is None:
        aligns = ["l"] * len(headers)
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))

    def line(cells: Sequence[str]) -> str:
        out = []
        for i, cell in enumerate(cells):
            out.append(cell.rjust(widths[i]) if aligns[i] == "r" else cell.ljust(widths[i]))
        return GUTTER.join(out).rstrip()

    parts = [line(headers), line(["-" * w for w in widths])]
    parts.extend(line(row) for row in rows)
    return "\n".join(parts)
