"""
Modul Visualisasi
Layout komposisi dalam SVG: frame original dengan patch (biru) dan sub-frame
(kuning) di kiri, canvas setiap sub-frame di kanan, panah untuk relokasi.
"""

import logging
from pathlib import Path
from typing import Sequence, Union

import plotly.graph_objects as go

from geometry import CompositionPlan, Patch, PlacementMode, Rect

logger = logging.getLogger(__name__)

PATCH_COLOR = "royalblue"
SUBFRAME_COLOR = "gold"
PANEL_GAP = 40


def _rect_shape(rect: Rect, color: str, fill_opacity: float = 0.0, dx: float = 0.0) -> dict:
    return dict(
        type="rect",
        x0=rect.x + dx, y0=rect.y, x1=rect.x2 + dx, y1=rect.y2,
        line=dict(color=color, width=2),
        fillcolor=color if fill_opacity > 0 else "rgba(0,0,0,0)",
        opacity=fill_opacity if fill_opacity > 0 else 1.0,
        layer="above",
    )


def canvas_offset(plan: CompositionPlan, index: int) -> float:
    """Posisi x canvas sub-frame ke-index di panel kanan"""
    return plan.frame_size[0] + PANEL_GAP + index * (plan.detector_size + PANEL_GAP)


def layout_figure(plan: CompositionPlan, patches: Sequence[Patch] = ()) -> go.Figure:
    """
    Bangun figure layout komposisi

    Args:
        plan: CompositionPlan
        patches: Patch (opsional, default diambil dari src placement)

    Returns:
        plotly Figure dengan sumbu y terbalik (koordinat gambar)
    """
    width, height = plan.frame_size
    fig = go.Figure()
    shapes = [dict(type="rect", x0=0, y0=0, x1=width, y1=height, line=dict(color="black", width=1))]

    srcs = [p.rect for p in patches] or [p.src for p in plan.placements]
    shapes += [_rect_shape(r, PATCH_COLOR) for r in srcs]
    for j in range(plan.n_sub_frames):
        shapes.append(_rect_shape(plan.rect_of(j), SUBFRAME_COLOR))
        canvas = Rect(0, 0, plan.detector_size, plan.detector_size)
        shapes.append(_rect_shape(canvas, SUBFRAME_COLOR, dx=canvas_offset(plan, j)))

    annotations = []
    for p in plan.placements:
        dx = canvas_offset(plan, p.host)
        shapes.append(_rect_shape(p.dst, PATCH_COLOR, fill_opacity=0.3, dx=dx))
        if p.mode is PlacementMode.RELOCATED:
            sx, sy = p.src.center
            tx, ty = p.dst.center
            annotations.append(dict(
                x=tx + dx, y=ty, ax=sx, ay=sy,
                xref="x", yref="y", axref="x", ayref="y",
                showarrow=True, arrowhead=2, arrowcolor=PATCH_COLOR, text="",
            ))

    total_width = canvas_offset(plan, plan.n_sub_frames)
    fig.update_layout(
        shapes=shapes,
        annotations=annotations,
        showlegend=False,
        width=min(2400, int(total_width)),
        height=int(max(height, plan.detector_size) * min(2400, total_width) / total_width) + 40,
        margin=dict(l=10, r=10, t=10, b=10),
        plot_bgcolor="white",
    )
    fig.update_xaxes(range=[0, total_width], visible=False)
    fig.update_yaxes(range=[max(height, plan.detector_size), 0], visible=False, scaleanchor="x")
    return fig


def write_layout_svg(path: Union[str, Path], plan: CompositionPlan, patches: Sequence[Patch] = ()) -> None:
    """Simpan layout ke file SVG (butuh kaleido)"""
    fig = layout_figure(plan, patches)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.write_image(str(path), format="svg")
    logger.info(f"Layout written to {path}")
