"""
Enumerasi maximal empty rectangle di dalam canvas sub-frame.

Setiap obstacle memecah free rectangle yang ditabraknya menjadi slab
kiri/kanan/atas/bawah; free rectangle yang termuat di rectangle lain
dibuang. Hasil akhirnya adalah himpunan maximal empty rectangle yang tepat.
"""

from typing import List, Sequence

import numpy as np

from geometry import Rect, contains

# slab lebih tipis dari ini hanyalah noise floating point
MIN_EXTENT = 1e-9


def _split(free: Rect, obstacle: Rect) -> List[Rect]:
    pieces = []
    if obstacle.x - free.x > MIN_EXTENT:
        pieces.append(Rect(free.x, free.y, obstacle.x - free.x, free.h))
    if free.x2 - obstacle.x2 > MIN_EXTENT:
        pieces.append(Rect(obstacle.x2, free.y, free.x2 - obstacle.x2, free.h))
    if obstacle.y - free.y > MIN_EXTENT:
        pieces.append(Rect(free.x, free.y, free.w, obstacle.y - free.y))
    if free.y2 - obstacle.y2 > MIN_EXTENT:
        pieces.append(Rect(free.x, obstacle.y2, free.w, free.y2 - obstacle.y2))
    return pieces


def _prune(untouched: List[Rect], pieces: List[Rect]) -> List[Rect]:
    """
    Buang piece yang termuat di rectangle lain (duplikat disisakan satu).
    Rectangle yang tidak terkena obstacle sudah maximal satu sama lain dan
    tidak mungkin termuat di piece, jadi hanya piece yang perlu diperiksa.
    """
    kept = list(untouched)
    pieces = list(dict.fromkeys(pieces))
    for i, r in enumerate(pieces):
        if any(contains(o, r) for o in untouched):
            continue
        if any(i != j and contains(o, r) for j, o in enumerate(pieces)):
            continue
        kept.append(r)
    return kept


def maximal_empty_rectangles(container: Rect, obstacles: Sequence[Rect]) -> List[Rect]:
    """
    Semua maximal empty rectangle di container yang tidak beririsan dengan
    obstacle manapun (sisi bersentuhan diperbolehkan).

    Args:
        container: Canvas (biasanya 0, 0, D, D)
        obstacles: Footprint yang sudah terisi

    Returns:
        List Rect terurut: luas terbesar dulu, lalu y, lalu x
    """
    free = [container]
    for obstacle in obstacles:
        if not container.intersects(obstacle):
            continue
        untouched = []
        pieces = []
        for r in free:
            if r.intersects(obstacle):
                pieces.extend(_split(r, obstacle))
            else:
                untouched.append(r)
        free = _prune(untouched, pieces)
    return sorted(free, key=lambda r: (-r.area, r.y, r.x, -r.w))


def largest_blank_rectangles(container: Rect, obstacles: Sequence[Rect], n_r: int) -> List[Rect]:
    """Hingga n_r maximal empty rectangle terbesar"""
    return maximal_empty_rectangles(container, obstacles)[:n_r]


def occupied_area(container: Rect, obstacles: Sequence[Rect]) -> float:
    """Luas gabungan obstacle di dalam container (obstacle boleh saling beririsan)"""
    clipped = []
    for r in obstacles:
        x1, y1 = max(r.x, container.x), max(r.y, container.y)
        x2, y2 = min(r.x2, container.x2), min(r.y2, container.y2)
        if x2 > x1 and y2 > y1:
            clipped.append((x1, y1, x2, y2))
    if not clipped:
        return 0.0

    xs = np.unique([c[0] for c in clipped] + [c[2] for c in clipped])
    ys = np.unique([c[1] for c in clipped] + [c[3] for c in clipped])
    filled = np.zeros((len(ys) - 1, len(xs) - 1), dtype=bool)
    for x1, y1, x2, y2 in clipped:
        i0, i1 = np.searchsorted(xs, [x1, x2])
        j0, j1 = np.searchsorted(ys, [y1, y2])
        filled[j0:j1, i0:i1] = True
    cell_area = np.outer(np.diff(ys), np.diff(xs))
    return float(cell_area[filled].sum())
