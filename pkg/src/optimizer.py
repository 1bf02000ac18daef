"""
Modul Optimizer
Pencarian himpunan sub-frame: estimasi bound greedy, inisialisasi populasi,
genetic search dengan local search, terminasi, verifikasi + relokasi patch,
dan fallback tiling yang selalu feasible.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from blank_space import largest_blank_rectangles, occupied_area
from errors import CapacityError, InputError, VerificationFailure
from geometry import (
    CompositionPlan,
    FrameSize,
    Patch,
    Rect,
    SubFrame,
    contains,
    empty_plan,
    frame_rect,
    in_situ_placement,
    relocated_placement,
    round_half_up,
    subframe_rect,
)
from objective import ObjectiveConfig, ObjectiveEvaluator
from scaling import ScalingProfile, beta_for

logger = logging.getLogger(__name__)

Position = Tuple[float, float]

# toleransi fit footprint ke blank rectangle (floating point)
FIT_EPS = 1e-6
MAX_LOCAL_SWEEPS = 10
# perbaikan local search harus melebihi noise floating point skor batch
SCORE_TOLERANCE = 1e-12
# batas kandidat populasi akhir yang dicoba setelah verifikasi
MAX_SHRINK_TRIALS = 16

NEIGHBOR_DIRECTIONS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


@dataclass(frozen=True)
class Bounds:
    l_min: int
    l_max: int

    def __post_init__(self):
        if self.l_min < 1 or self.l_max < self.l_min:
            raise ValueError(f"invalid bounds: l_min={self.l_min}, l_max={self.l_max}")

    def shifted(self, by: int = 1) -> "Bounds":
        return Bounds(self.l_min + by, self.l_max + by)


@dataclass(frozen=True)
class GaConfig:
    """Konstanta genetic search"""

    alpha3: float = 2.0
    grid_stride: int = 16
    tournament_size: int = 2
    crossover_rate: float = 0.8
    mutation_rate: float = 0.2
    elite_count: int = 1
    patience: int = 4
    max_generations: int = 200
    local_search_radius: int = 8
    local_search_top_fraction: float = 0.25
    n_r: int = 10
    max_verification_retries: int = 3
    rng_seed: int = 0
    prune_redundant: bool = True

    def __post_init__(self):
        for name in ("crossover_rate", "mutation_rate", "local_search_top_fraction"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        if self.patience < 1 or self.elite_count < 1 or self.tournament_size < 1:
            raise ValueError("patience, elite_count and tournament_size must be >= 1")
        if self.grid_stride < 1 or self.alpha3 <= 0 or self.n_r < 1:
            raise ValueError("grid_stride, alpha3 and n_r must be positive")


@dataclass(frozen=True)
class Candidate:
    """Satu himpunan sub-frame (pusat di grid) beserta skornya"""

    positions: Tuple[Position, ...]
    sub_frames: Tuple[SubFrame, ...]
    score: float

    def __len__(self):
        return len(self.positions)


@dataclass
class ComposeReport:
    attempts: List[Bounds] = field(default_factory=list)
    generations: int = 0
    best_history: List[float] = field(default_factory=list)
    retries: int = 0
    used_fallback: bool = False
    pruned: int = 0
    evaluations: int = 0


@dataclass
class ComposeOutcome:
    plan: CompositionPlan
    report: ComposeReport


def grid_centers(frame_size: FrameSize, stride: int) -> Tuple[List[float], List[float]]:
    """Grid kasar posisi pusat sub-frame (frame di-downsample dengan stride)"""
    width, height = frame_size
    xs = [float(x) for x in range(0, width + 1, stride)]
    ys = [float(y) for y in range(0, height + 1, stride)]
    return xs, ys


def div_tiles(frame_size: FrameSize, tile: int) -> List[Rect]:
    """
    Tiling non-overlapping; tile baris/kolom terakhir di-clamp ke tepi frame.

    Returns:
        List Rect row-major, sebanyak ceil(W/tile) * ceil(H/tile)
    """
    width, height = frame_size
    tw, th = min(tile, width), min(tile, height)
    tiles = []
    for row in range(math.ceil(height / tile)):
        y = min(row * tile, height - th)
        for col in range(math.ceil(width / tile)):
            x = min(col * tile, width - tw)
            tiles.append(Rect(x, y, tw, th))
    return tiles


def validate_patches(patches: Sequence[Patch], frame_size: FrameSize) -> None:
    """
    Id patch harus unik dan rect harus berada di dalam frame.

    Raises:
        InputError: jika ada id ganda atau patch di luar batas frame
    """
    frame = frame_rect(frame_size)
    seen = set()
    for p in patches:
        if p.id in seen:
            raise InputError(f"duplicate patch id {p.id}")
        seen.add(p.id)
        if not contains(frame, p.rect):
            raise InputError(f"patch {p.id} {p.rect.as_list()} lies outside the {frame_size[0]}x{frame_size[1]} frame")


def validate_capacity(patches: Sequence[Patch], detector_size: int) -> None:
    for p in patches:
        fw, fh = p.footprint
        if fw > detector_size + FIT_EPS or fh > detector_size + FIT_EPS:
            raise CapacityError(
                p.id,
                f"patch {p.id} exceeds detector capacity ({fw:.1f}x{fh:.1f} > {detector_size})",
            )


def greedy_bounds(
    patches: Sequence[Patch],
    profile: ScalingProfile,
    detector_size: int,
    frame_size: FrameSize,
) -> Tuple[Bounds, List[SubFrame]]:
    """
    Tutup patch dari yang terbesar ke terkecil dengan sub-frame berpusat di
    patch; patch yang sudah tercakup dilewati. L_min diambil saat total luas
    sub-frame >= total luas patch, L_max saat >= 2x.

    Returns:
        (Bounds, sub-frame greedy sebagai seed)
    """
    if not patches:
        raise InputError("nothing to compose")

    total = sum(p.scaled_area for p in patches)
    ordered = sorted(patches, key=lambda p: (-p.scaled_area, p.id))

    seeds: List[SubFrame] = []
    rects: List[Rect] = []
    cumulative = 0.0
    l_min: Optional[int] = None
    l_max: Optional[int] = None
    for p in ordered:
        if any(contains(r, p.rect) for r in rects):
            continue
        cx, cy = p.rect.center
        f = SubFrame(cx=cx, cy=cy, beta=beta_for(profile, cy), detector_size=detector_size)
        r = subframe_rect(f, frame_size)
        seeds.append(f)
        rects.append(r)
        cumulative += r.area * f.beta
        if l_min is None and cumulative >= total:
            l_min = len(seeds)
        if l_max is None and cumulative >= 2 * total:
            l_max = len(seeds)

    n = len(seeds)
    l_min = max(1, l_min if l_min is not None else n)
    l_max = max(l_min, l_max if l_max is not None else n)
    return Bounds(l_min, l_max), seeds


def population_size(bounds: Bounds, alpha3: float) -> int:
    return max(1, math.ceil(alpha3 * (bounds.l_max ** 2 - (bounds.l_min - 1) ** 2)))


class SearchContext:
    """State bersama satu percobaan genetic search (evaluator, rng, grid, bound)"""

    def __init__(
        self,
        evaluator: ObjectiveEvaluator,
        cfg: GaConfig,
        bounds: Bounds,
        rng: np.random.Generator,
    ):
        self.evaluator = evaluator
        self.cfg = cfg
        self.bounds = bounds
        self.rng = rng
        self.xs, self.ys = grid_centers(evaluator.frame_size, cfg.grid_stride)
        self.max_x = self.xs[-1]
        self.max_y = self.ys[-1]
        self.local_optima: Dict[Tuple[Position, ...], Candidate] = {}
        self._neighbours: Dict[Position, List[Position]] = {}

    @property
    def patches(self) -> List[Patch]:
        return self.evaluator.patches

    def snap(self, x: float, y: float) -> Position:
        stride = self.cfg.grid_stride
        gx = min(max(stride * round_half_up(x / stride), 0), self.max_x)
        gy = min(max(stride * round_half_up(y / stride), 0), self.max_y)
        return (float(gx), float(gy))

    def neighbours(self, position: Position) -> List[Position]:
        """Tetangga grid pada jarak radius dan 2x radius (tanpa duplikat hasil clamp)"""
        options = self._neighbours.get(position)
        if options is not None:
            return options
        stride = self.cfg.grid_stride
        step = max(stride, stride * round_half_up(self.cfg.local_search_radius / stride))
        seen = {position}
        options = []
        for ring in (1, 2):
            for dx, dy in NEIGHBOR_DIRECTIONS:
                moved = self.snap(position[0] + dx * ring * step, position[1] + dy * ring * step)
                if moved not in seen:
                    seen.add(moved)
                    options.append(moved)
        self._neighbours[position] = options
        return options

    def random_position(self) -> Position:
        return (self.xs[int(self.rng.integers(len(self.xs)))], self.ys[int(self.rng.integers(len(self.ys)))])

    def make_candidate(self, positions: Sequence[Position]) -> Candidate:
        positions = tuple(positions)
        return Candidate(
            positions=positions,
            sub_frames=tuple(self.evaluator.sub_frames(positions)),
            score=self.evaluator.score(positions),
        )

    def covers_any(self, position: Position) -> bool:
        return self.evaluator.position(*position).covers_any

    def snap_covering(self, f: SubFrame, patch: Optional[Patch]) -> Position:
        """
        Snap pusat seed ke grid; pilih titik grid di sekitarnya yang masih
        memuat patch targetnya jika ada.
        """
        nearest = self.snap(f.cx, f.cy)
        if patch is None:
            return nearest
        stride = self.cfg.grid_stride
        fx = math.floor(f.cx / stride) * stride
        fy = math.floor(f.cy / stride) * stride
        options = [nearest, self.snap(fx, fy), self.snap(fx + stride, fy), self.snap(fx, fy + stride), self.snap(fx + stride, fy + stride)]
        for option in options:
            if contains(self.evaluator.position(*option).rect, patch.rect):
                return option
        return nearest


def _seed_positions(ctx: SearchContext, seeds: Sequence[SubFrame]) -> List[Position]:
    positions = []
    for f in seeds:
        target = next(
            (p for p in ctx.patches if p.rect.center == (f.cx, f.cy)),
            None,
        )
        positions.append(ctx.snap_covering(f, target))
    return positions


def init_population(ctx: SearchContext, seeds: Sequence[SubFrame] = ()) -> List[Candidate]:
    """
    Populasi awal berukuran ceil(alpha3 * (L_max^2 - (L_min - 1)^2)): jumlah
    sub-frame uniform di [L_min, L_max], pusat uniform di grid kasar, plus
    satu kandidat dari seed greedy.
    """
    bounds = ctx.bounds
    size = population_size(bounds, ctx.cfg.alpha3)
    population: List[Candidate] = []

    if seeds:
        genes = _seed_positions(ctx, seeds)[: bounds.l_max]
        while len(genes) < bounds.l_min:
            genes.append(ctx.random_position())
        population.append(ctx.make_candidate(genes))

    while len(population) < size:
        n = int(ctx.rng.integers(bounds.l_min, bounds.l_max + 1))
        population.append(ctx.make_candidate([ctx.random_position() for _ in range(n)]))
    return population


def _tournament(ctx: SearchContext, population: Sequence[Candidate]) -> Candidate:
    picks = ctx.rng.integers(len(population), size=ctx.cfg.tournament_size)
    best = None
    for idx in picks:
        c = population[int(idx)]
        if best is None or c.score > best.score:
            best = c
    return best


def _fit_length(ctx: SearchContext, genes: List[Position], pool: Sequence[Position]) -> List[Position]:
    bounds = ctx.bounds
    genes = genes[: bounds.l_max]
    while len(genes) < bounds.l_min:
        genes.append(pool[int(ctx.rng.integers(len(pool)))])
    return genes


def _crossover(ctx: SearchContext, a: Candidate, b: Candidate) -> Tuple[List[Position], List[Position]]:
    """One-point crossover: tukar ekor list sub-frame kedua parent"""
    cut_a = int(ctx.rng.integers(0, len(a) + 1))
    cut_b = int(ctx.rng.integers(0, len(b) + 1))
    pool = a.positions + b.positions
    child1 = list(a.positions[:cut_a]) + list(b.positions[cut_b:])
    child2 = list(b.positions[:cut_b]) + list(a.positions[cut_a:])
    return _fit_length(ctx, child1, pool), _fit_length(ctx, child2, pool)


def _mutate(ctx: SearchContext, genes: List[Position]) -> List[Position]:
    """
    Mutasi per gen (geser pusat dalam +-4*radius di grid) dan add/remove
    satu sub-frame. Sub-frame hasil mutasi/penambahan hanya diterima jika
    memuat minimal satu patch.
    """
    cfg = ctx.cfg
    rng = ctx.rng
    genes = list(genes)
    reach = max(1, round_half_up(4 * cfg.local_search_radius / cfg.grid_stride))

    for i in range(len(genes)):
        if rng.random() >= cfg.mutation_rate:
            continue
        dx = int(rng.integers(-reach, reach + 1)) * cfg.grid_stride
        dy = int(rng.integers(-reach, reach + 1)) * cfg.grid_stride
        moved = ctx.snap(genes[i][0] + dx, genes[i][1] + dy)
        if ctx.covers_any(moved):
            genes[i] = moved

    if rng.random() < cfg.mutation_rate:
        grow = rng.random() < 0.5
        if grow and len(genes) < ctx.bounds.l_max:
            # sub-frame baru diarahkan ke pusat patch acak
            patch = ctx.patches[int(rng.integers(len(ctx.patches)))]
            added = ctx.snap(*patch.rect.center)
            if ctx.covers_any(added):
                genes.append(added)
        elif not grow and len(genes) > ctx.bounds.l_min:
            del genes[int(rng.integers(len(genes)))]
    return genes


def _ranked(population: Sequence[Candidate]) -> List[Candidate]:
    return sorted(population, key=lambda c: -c.score)


def evolve_step(population: Sequence[Candidate], ctx: SearchContext) -> List[Candidate]:
    """
    Satu generasi: elite retention, tournament selection, one-point
    crossover, lalu mutasi. Ukuran populasi dipertahankan.
    """
    if not population:
        raise ValueError("evolve_step needs a non-empty population")

    size = len(population)
    next_gen = _ranked(population)[: ctx.cfg.elite_count]
    while len(next_gen) < size:
        a = _tournament(ctx, population)
        b = _tournament(ctx, population)
        if ctx.rng.random() < ctx.cfg.crossover_rate:
            children = _crossover(ctx, a, b)
        else:
            children = (list(a.positions), list(b.positions))
        for genes in children:
            if len(next_gen) >= size:
                break
            next_gen.append(ctx.make_candidate(_mutate(ctx, genes)))
    return next_gen


def local_search(candidate: Candidate, ctx: SearchContext) -> Candidate:
    """
    Hill climbing: setiap sub-frame mencoba 8 tetangga pada jarak radius dan
    2x radius di grid, pindah ke langkah terbaik bila skor naik strictly.
    Diulang sampai tidak ada perbaikan (maksimal 10 sweep).
    """
    known = ctx.local_optima.get(candidate.positions)
    if known is not None:
        return known

    genes = list(candidate.positions)
    best_score = candidate.score
    for _ in range(MAX_LOCAL_SWEEPS):
        improved = False
        for i in range(len(genes)):
            options = ctx.neighbours(genes[i])
            if not options:
                continue
            values = ctx.evaluator.swap_scores(genes, i, options)
            k = int(np.argmax(values))
            if values[k] > best_score + SCORE_TOLERANCE * max(1.0, abs(best_score)):
                best_score = float(values[k])
                genes[i] = options[k]
                improved = True
        if not improved:
            break

    result = candidate
    if tuple(genes) != candidate.positions:
        moved = ctx.make_candidate(genes)
        # skor batch hanya perkiraan; skor penuh yang menentukan
        if moved.score >= candidate.score:
            result = moved
    ctx.local_optima[candidate.positions] = result
    return result


def verify_and_relocate(
    sub_frames: Sequence[SubFrame],
    patches: Sequence[Patch],
    n_r: int,
    frame_size: FrameSize,
    detector_size: Optional[int] = None,
) -> CompositionPlan:
    """
    Verifikasi bahwa setiap patch benar-benar bisa ditempatkan.

    Patch yang tercakup sub-frame menjadi placement in situ (host = sub-frame
    pertama yang memuatnya) dan menjadi obstacle di canvas host. Patch sisanya,
    dari yang terbesar, dipindah ke blank rectangle terkecil yang cukup
    (best fit) di antara n_r rectangle terbesar tiap sub-frame.

    Raises:
        VerificationFailure: jika ada patch yang tidak muat di manapun
    """
    sub_frames = list(sub_frames)
    if detector_size is None:
        detector_size = sub_frames[0].detector_size if sub_frames else 300
    rects = [subframe_rect(f, frame_size) for f in sub_frames]

    placements: Dict[int, object] = {}
    obstacles: List[List[Rect]] = [[] for _ in sub_frames]
    uncovered: List[Patch] = []
    for p in sorted(patches, key=lambda q: q.id):
        host = next((j for j, r in enumerate(rects) if contains(r, p.rect)), None)
        if host is None:
            uncovered.append(p)
            continue
        placement = in_situ_placement(p, host, sub_frames[host], frame_size)
        placements[p.id] = placement
        obstacles[host].append(placement.dst)

    containers = [Rect(0.0, 0.0, f.detector_size, f.detector_size) for f in sub_frames]
    free_area: List[float] = []
    if uncovered:
        free_area = [c.area - occupied_area(c, obs) for c, obs in zip(containers, obstacles)]
    # blank rectangle dihitung saat host pertama kali dicoba
    blanks: List[Optional[List[Rect]]] = [None] * len(sub_frames)

    uncovered.sort(key=lambda q: (-q.scaled_area, q.id))
    for p in uncovered:
        fw, fh = p.footprint
        best_key = None
        best_slot = None
        for j in range(len(sub_frames)):
            if fw * fh > free_area[j] + FIT_EPS or fw > containers[j].w + FIT_EPS or fh > containers[j].h + FIT_EPS:
                continue
            if blanks[j] is None:
                blanks[j] = largest_blank_rectangles(containers[j], obstacles[j], n_r)
            for r in blanks[j]:
                if fw <= r.w + FIT_EPS and fh <= r.h + FIT_EPS:
                    key = (r.area, j, r.y, r.x)
                    if best_key is None or key < best_key:
                        best_key = key
                        best_slot = (j, r)
        if best_slot is None:
            raise VerificationFailure(p.id)

        host, slot = best_slot
        placement = relocated_placement(p, host, slot.x, slot.y)
        placements[p.id] = placement
        obstacles[host].append(placement.dst)
        free_area[host] -= placement.dst.area
        blanks[host] = None

    return CompositionPlan(
        sub_frames=tuple(sub_frames),
        placements=tuple(placements[pid] for pid in sorted(placements)),
        frame_size=tuple(frame_size),
        detector_size=detector_size,
    )


def prune_redundant(
    plan: CompositionPlan,
    patches: Sequence[Patch],
    n_r: int,
) -> Tuple[CompositionPlan, int]:
    """
    Buang sub-frame satu per satu (yang paling sedikit menampung placement
    dulu) selama himpunan sisanya masih lolos verifikasi. Sub-frame yang
    gagal dibuang sekali tetap dipertahankan dan tidak dicoba lagi.

    Returns:
        (plan baru, jumlah sub-frame yang dibuang)
    """
    current = plan
    removed = 0
    required = set()
    while current.n_sub_frames > 1:
        hosted = [len(current.placements_for(j)) for j in range(current.n_sub_frames)]
        order = sorted(range(current.n_sub_frames), key=lambda j: (hosted[j], -j))
        for j in order:
            if current.sub_frames[j] in required:
                continue
            trial = current.sub_frames[:j] + current.sub_frames[j + 1:]
            try:
                current = verify_and_relocate(trial, patches, n_r, current.frame_size, current.detector_size)
            except VerificationFailure:
                required.add(current.sub_frames[j])
                continue
            removed += 1
            break
        else:
            break
    return current, removed


def fallback_plan(
    patches: Sequence[Patch],
    profile: ScalingProfile,
    detector_size: int,
    frame_size: FrameSize,
    n_r: int,
) -> CompositionPlan:
    """
    Plan deterministik: setiap tile DIV yang berisi patch menjadi sub-frame.
    Jika tiling itu pun gagal diverifikasi, pakai cover greedy penuh yang
    memuat setiap patch in situ.
    """
    tiles = [t for t in div_tiles(frame_size, detector_size) if any(t.intersects(p.rect) for p in patches)]
    tile_frames = [SubFrame(cx=t.center[0], cy=t.center[1], beta=1.0, detector_size=detector_size) for t in tiles]
    try:
        return verify_and_relocate(tile_frames, patches, n_r, frame_size, detector_size)
    except VerificationFailure as e:
        logger.warning(f"DIV fallback cannot place patch {e.patch_id}, using greedy full cover")

    _, seeds = greedy_bounds(patches, profile, detector_size, frame_size)
    try:
        return verify_and_relocate(seeds, patches, n_r, frame_size, detector_size)
    except VerificationFailure:
        per_patch = [
            SubFrame(cx=p.rect.center[0], cy=p.rect.center[1], beta=beta_for(profile, p.rect.center[1]), detector_size=detector_size)
            for p in patches
        ]
        return verify_and_relocate(per_patch, patches, n_r, frame_size, detector_size)


def shrink_plan(
    plan: CompositionPlan,
    population: Sequence[Candidate],
    patches: Sequence[Patch],
    n_r: int,
) -> CompositionPlan:
    """
    Coba kandidat populasi akhir yang memakai sub-frame lebih sedikit dari plan
    (urut skor); plan diganti bila kandidat itu lolos verifikasi.
    """
    tried = 0
    for candidate in _ranked(population):
        if tried >= MAX_SHRINK_TRIALS:
            break
        if len(candidate) >= plan.n_sub_frames:
            continue
        tried += 1
        try:
            plan = verify_and_relocate(candidate.sub_frames, patches, n_r, plan.frame_size, plan.detector_size)
        except VerificationFailure:
            continue
        logger.debug(f"Population candidate verified with {plan.n_sub_frames} sub-frames")
    return plan


def _search(
    ctx: SearchContext,
    seeds: Sequence[SubFrame],
    report: ComposeReport,
) -> Tuple[Candidate, List[Candidate]]:
    """
    Loop generasi sampai skor terbaik tidak berubah selama `patience` iterasi.

    Returns:
        (kandidat terbaik, populasi akhir)
    """
    cfg = ctx.cfg
    population = init_population(ctx, seeds)
    best = _ranked(population)[0]
    report.best_history.append(best.score)

    stale = 0
    generation = 0
    while stale < cfg.patience and generation < cfg.max_generations:
        population = evolve_step(population, ctx)
        ranked = _ranked(population)
        n_local = max(1, math.ceil(cfg.local_search_top_fraction * len(ranked)))
        for i in range(n_local):
            ranked[i] = local_search(ranked[i], ctx)
        population = ranked
        generation += 1

        current = _ranked(population)[0]
        if current.score > best.score:
            best = current
            stale = 0
        else:
            stale += 1
        report.best_history.append(best.score)

    report.generations += generation
    logger.debug(f"Search finished after {generation} generations, best score {best.score:.4f}")
    return best, population


def compose_detailed(
    patches: Sequence[Patch],
    profile: ScalingProfile,
    objective_cfg: ObjectiveConfig,
    ga_cfg: GaConfig,
    detector_size: int,
    frame_size: FrameSize,
) -> ComposeOutcome:
    """
    Jalankan seluruh proses komposisi dan kembalikan plan beserta statistik.

    Raises:
        InputError: jika id patch ganda atau patch di luar frame
        CapacityError: jika ada patch yang footprint-nya > detector_size
    """
    report = ComposeReport()
    frame_size = tuple(frame_size)
    if not patches:
        return ComposeOutcome(empty_plan(frame_size, detector_size), report)
    validate_patches(patches, frame_size)
    validate_capacity(patches, detector_size)

    evaluator = ObjectiveEvaluator(patches, objective_cfg, profile, detector_size, frame_size)
    rng = np.random.default_rng(ga_cfg.rng_seed)
    bounds, seeds = greedy_bounds(patches, profile, detector_size, frame_size)
    logger.debug(f"Greedy bounds for {len(patches)} patches: L_min={bounds.l_min}, L_max={bounds.l_max}")

    plan: Optional[CompositionPlan] = None
    for attempt in range(ga_cfg.max_verification_retries + 1):
        report.attempts.append(bounds)
        ctx = SearchContext(evaluator, ga_cfg, bounds, rng)
        best, population = _search(ctx, seeds, report)
        try:
            plan = verify_and_relocate(best.sub_frames, patches, ga_cfg.n_r, frame_size, detector_size)
            if ga_cfg.prune_redundant:
                plan = shrink_plan(plan, population, patches, ga_cfg.n_r)
            break
        except VerificationFailure as e:
            report.retries += 1
            logger.info(
                f"Verification failed on attempt {attempt + 1} (patch {e.patch_id}), "
                f"bounds -> [{bounds.l_min + 1}, {bounds.l_max + 1}]"
            )
            bounds = bounds.shifted(1)

    if plan is None:
        logger.warning(f"Verification failed {report.retries} times, using DIV fallback plan")
        report.used_fallback = True
        plan = fallback_plan(patches, profile, detector_size, frame_size, ga_cfg.n_r)

    if ga_cfg.prune_redundant:
        plan, report.pruned = prune_redundant(plan, patches, ga_cfg.n_r)

    # jumlah sub-frame tidak boleh melebihi tiling DIV
    n_tiles = len(div_tiles(frame_size, detector_size))
    if plan.n_sub_frames > n_tiles and not report.used_fallback:
        tiled = fallback_plan(patches, profile, detector_size, frame_size, ga_cfg.n_r)
        if tiled.n_sub_frames < plan.n_sub_frames:
            logger.info(f"Plan uses {plan.n_sub_frames} sub-frames > {n_tiles} tiles, switching to DIV plan")
            report.used_fallback = True
            plan = tiled

    report.evaluations = evaluator.evaluations
    return ComposeOutcome(plan, report)


def compose(
    patches: Sequence[Patch],
    profile: ScalingProfile,
    objective_cfg: ObjectiveConfig,
    ga_cfg: GaConfig,
    detector_size: int,
    frame_size: FrameSize,
) -> CompositionPlan:
    """Komposisi patch menjadi plan sub-frame (lihat compose_detailed)"""
    return compose_detailed(patches, profile, objective_cfg, ga_cfg, detector_size, frame_size).plan
