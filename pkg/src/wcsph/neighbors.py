"""Neighbor search: brute force, uniform-grid cell lists and Verlet lists.

Neighbor lists are stored in CSR form. Every particle's list excludes the
particle itself and is sorted ascending, so any two search methods that
agree on sets also agree element by element, and downstream sums run in
a fixed order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .parallel import SERIAL, ExecPolicy, parallel_for_blocks


@dataclass(frozen=True)
class NeighborLists:
    offsets: np.ndarray  # int64, length n + 1
    indices: np.ndarray  # int32, concatenated per-particle lists

    def __len__(self):
        return self.offsets.shape[0] - 1

    def __getitem__(self, i: int) -> np.ndarray:
        return self.indices[self.offsets[i]: self.offsets[i + 1]]

    def __eq__(self, other):
        if not isinstance(other, NeighborLists):
            return NotImplemented
        return np.array_equal(self.offsets, other.offsets) and np.array_equal(
            self.indices, other.indices
        )

    @property
    def counts(self) -> np.ndarray:
        return np.diff(self.offsets)

    @property
    def directed_pairs(self) -> int:
        return int(self.indices.shape[0])

    def to_lists(self) -> list[list[int]]:
        return [self[i].tolist() for i in range(len(self))]

    def to_sets(self) -> list[set[int]]:
        return [set(self[i].tolist()) for i in range(len(self))]


def _positions(obj) -> np.ndarray:
    pos = getattr(obj, "position", obj)
    return np.ascontiguousarray(np.asarray(pos, dtype=np.float64).reshape(-1, 3))


def _assemble(n: int, counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return offsets, np.empty(int(offsets[-1]), dtype=np.int32)


# ---------------------------------------------------------------------------
# brute force


@nb.njit(cache=True, nogil=True)
def _brute_count(start, stop, pos, r2, counts):
    n = pos.shape[0]
    for i in range(start, stop):
        xi, yi, zi = pos[i, 0], pos[i, 1], pos[i, 2]
        c = 0
        for j in range(n):
            dx = xi - pos[j, 0]
            dy = yi - pos[j, 1]
            dz = zi - pos[j, 2]
            if dx * dx + dy * dy + dz * dz < r2 and j != i:
                c += 1
        counts[i] = c


@nb.njit(cache=True, nogil=True)
def _brute_fill(start, stop, pos, r2, offsets, out):
    n = pos.shape[0]
    for i in range(start, stop):
        xi, yi, zi = pos[i, 0], pos[i, 1], pos[i, 2]
        k = offsets[i]
        for j in range(n):
            dx = xi - pos[j, 0]
            dy = yi - pos[j, 1]
            dz = zi - pos[j, 2]
            if dx * dx + dy * dy + dz * dz < r2 and j != i:
                out[k] = j
                k += 1


def brute_force_neighbors(sys, radius: float, policy: ExecPolicy = SERIAL) -> NeighborLists:
    """All j != i with |r_i - r_j| < radius, by testing every pair."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    pos = _positions(sys)
    n = pos.shape[0]
    r2 = float(radius) ** 2
    counts = np.zeros(n, dtype=np.int64)
    parallel_for_blocks(n, policy, _brute_count, pos, r2, counts)
    offsets, out = _assemble(n, counts)
    parallel_for_blocks(n, policy, _brute_fill, pos, r2, offsets, out)
    return NeighborLists(offsets, out)


# ---------------------------------------------------------------------------
# uniform grid


@dataclass(frozen=True)
class UniformGrid:
    origin: np.ndarray
    cell_size: float
    dims: tuple[int, int, int]
    cell_start: np.ndarray
    cell_count: np.ndarray
    sorted_indices: np.ndarray
    particle_cell: np.ndarray
    sorted_positions: np.ndarray  # positions in cell order, for contiguous scans
    reach: int = 1  # stencil half-width in cells

    @property
    def n_cells(self) -> int:
        return self.dims[0] * self.dims[1] * self.dims[2]

    @property
    def search_radius(self) -> float:
        """Largest radius the stencil is guaranteed to cover."""
        return self.reach * self.cell_size

    def cell_of(self, point) -> tuple[int, int, int]:
        p = np.asarray(point, dtype=np.float64)
        c = np.floor((p - self.origin) / self.cell_size).astype(np.int64)
        c = np.clip(c, 0, np.asarray(self.dims) - 1)
        return tuple(int(x) for x in c)

    def flat_index(self, cell) -> int:
        ix, iy, iz = cell
        return (ix * self.dims[1] + iy) * self.dims[2] + iz

    def particles_in(self, cell) -> np.ndarray:
        c = self.flat_index(cell)
        s = self.cell_start[c]
        return self.sorted_indices[s: s + self.cell_count[c]]


@nb.njit(cache=True, nogil=True, inline="always")
def _axis_cell(x, origin, cell_size, dim):
    c = int(math.floor((x - origin) / cell_size))
    if c < 0:
        return 0
    if c >= dim:
        return dim - 1
    return c


@nb.njit(cache=True, nogil=True)
def _counting_sort(pos, origin, cell_size, dims, cell_of, cell_start, cell_count, sorted_idx):
    n = pos.shape[0]
    for i in range(n):
        ix = _axis_cell(pos[i, 0], origin[0], cell_size, dims[0])
        iy = _axis_cell(pos[i, 1], origin[1], cell_size, dims[1])
        iz = _axis_cell(pos[i, 2], origin[2], cell_size, dims[2])
        c = (ix * dims[1] + iy) * dims[2] + iz
        cell_of[i] = c
        cell_count[c] += 1
    running = 0
    for c in range(cell_count.shape[0]):
        cell_start[c] = running
        running += cell_count[c]
    fill = cell_start.copy()
    # index-ordered scatter keeps each cell's range ascending
    for i in range(n):
        c = cell_of[i]
        sorted_idx[fill[c]] = i
        fill[c] += 1


def build_grid(sys, cell_size: float, domain_min, domain_max, reach: int = 1) -> UniformGrid:
    """Bin particles into cubic cells with a two-pass counting sort.

    ``reach`` is the stencil half-width; a grid of cells of size
    ``support / s`` is built with ``reach = s``.
    """
    if not cell_size > 0:
        raise ValueError("cell_size must be positive")
    if reach < 1:
        raise ValueError("reach must be >= 1")
    pos = _positions(sys)
    lo = np.asarray(domain_min, dtype=np.float64)
    hi = np.asarray(domain_max, dtype=np.float64)
    if pos.shape[0]:
        outside = ~((pos >= lo) & (pos <= hi)).all(axis=1)
        if outside.any():
            bad = int(np.flatnonzero(outside)[0])
            raise ValueError(f"particle {bad} at {pos[bad].tolist()} lies outside the grid domain")
    dims = tuple(max(1, int(math.ceil((h - l) / cell_size - 1e-12))) for l, h in zip(lo, hi))
    n_cells = dims[0] * dims[1] * dims[2]
    cell_of = np.empty(pos.shape[0], dtype=np.int64)
    cell_start = np.zeros(n_cells, dtype=np.int64)
    cell_count = np.zeros(n_cells, dtype=np.int64)
    sorted_idx = np.empty(pos.shape[0], dtype=np.int64)
    _counting_sort(pos, lo, float(cell_size), np.asarray(dims, dtype=np.int64),
                   cell_of, cell_start, cell_count, sorted_idx)
    return UniformGrid(lo, float(cell_size), dims, cell_start, cell_count,
                       sorted_idx, cell_of, np.ascontiguousarray(pos[sorted_idx]), int(reach))


@nb.njit(cache=True, nogil=True, inline="always")
def _merge_runs(a, lo, hi, tmp):
    """Sort a[lo:hi] in place by merging its ascending runs pairwise.

    Candidate lists are concatenations of per-cell ranges that are each
    ascending, so a natural merge sort does only a few passes.
    """
    while True:
        i = lo
        w = 0
        merged = False
        while i < hi:
            m = i + 1
            while m < hi and a[m - 1] <= a[m]:
                m += 1
            if m == hi:
                for q in range(i, hi):
                    tmp[w] = a[q]
                    w += 1
                break
            e = m + 1
            while e < hi and a[e - 1] <= a[e]:
                e += 1
            merged = True
            p, q = i, m
            while p < m and q < e:
                if a[q] < a[p]:
                    tmp[w] = a[q]
                    q += 1
                else:
                    tmp[w] = a[p]
                    p += 1
                w += 1
            while p < m:
                tmp[w] = a[p]
                p += 1
                w += 1
            while q < e:
                tmp[w] = a[q]
                q += 1
                w += 1
            i = e
        if not merged:
            return
        for q in range(w):
            a[lo + q] = tmp[q]


@nb.njit(cache=True, nogil=True)
def _grid_block(start, stop, pos, spos, origin, cell_size, dims, reach,
                cell_start, cell_count, sorted_idx, r2, counts):
    """Neighbor lists of particles [start, stop), concatenated."""
    buf = np.empty(max(1024, 64 * (stop - start)), dtype=np.int32)
    tmp = np.empty(1024, dtype=np.int32)
    k = 0
    for i in range(start, stop):
        xi, yi, zi = pos[i, 0], pos[i, 1], pos[i, 2]
        cx = _axis_cell(xi, origin[0], cell_size, dims[0])
        cy = _axis_cell(yi, origin[1], cell_size, dims[1])
        cz = _axis_cell(zi, origin[2], cell_size, dims[2])
        x0, x1 = max(cx - reach, 0), min(cx + reach + 1, dims[0])
        y0, y1 = max(cy - reach, 0), min(cy + reach + 1, dims[1])
        z0, z1 = max(cz - reach, 0), min(cz + reach + 1, dims[2])
        # reserve room for every candidate up front; a growth check inside
        # the distance loop costs more than the loop itself
        cand = 0
        for ax in range(x0, x1):
            for ay in range(y0, y1):
                base = (ax * dims[1] + ay) * dims[2]
                cand += cell_start[base + z1 - 1] + cell_count[base + z1 - 1] - cell_start[base + z0]
        if k + cand > buf.shape[0]:
            grown = np.empty(2 * (k + cand), dtype=np.int32)
            grown[:k] = buf[:k]
            buf = grown
        if cand > tmp.shape[0]:
            tmp = np.empty(2 * cand, dtype=np.int32)
        k0 = k
        for ax in range(x0, x1):
            for ay in range(y0, y1):
                base = (ax * dims[1] + ay) * dims[2]
                # cells along z are adjacent in the sorted order: one contiguous run
                p0 = cell_start[base + z0]
                p1 = cell_start[base + z1 - 1] + cell_count[base + z1 - 1]
                for p in range(p0, p1):
                    dx = xi - spos[p, 0]
                    dy = yi - spos[p, 1]
                    dz = zi - spos[p, 2]
                    if dx * dx + dy * dy + dz * dz < r2:
                        j = sorted_idx[p]
                        if j != i:
                            buf[k] = j
                            k += 1
        _merge_runs(buf, k0, k, tmp)
        counts[i] = k - k0
    return buf[:k]


def _grid_lists(grid: UniformGrid, pos: np.ndarray, radius: float, policy: ExecPolicy) -> NeighborLists:
    n = pos.shape[0]
    counts = np.zeros(n, dtype=np.int64)
    parts = parallel_for_blocks(n, policy, _grid_block, pos, grid.sorted_positions, grid.origin,
                                grid.cell_size, np.asarray(grid.dims, dtype=np.int64), grid.reach,
                                grid.cell_start, grid.cell_count, grid.sorted_indices,
                                float(radius) ** 2, counts)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    indices = np.concatenate(parts) if parts else np.empty(0, dtype=np.int32)
    return NeighborLists(offsets, indices)


def grid_neighbors(grid: UniformGrid, sys, radius: float, policy: ExecPolicy = SERIAL) -> NeighborLists:
    """Neighbor lists from a grid built on the current positions."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    if radius > grid.search_radius * (1 + 1e-12):
        raise ValueError(
            f"radius {radius} exceeds the stencil coverage {grid.search_radius} "
            f"(cell_size {grid.cell_size}, reach {grid.reach})"
        )
    pos = _positions(sys)
    if pos.shape[0] != grid.particle_cell.shape[0]:
        raise ValueError("grid was built for a different particle count")
    return _grid_lists(grid, pos, radius, policy)


# ---------------------------------------------------------------------------
# Verlet lists


@dataclass(frozen=True)
class VerletList:
    cutoff: float
    skin: float
    lists: NeighborLists
    reference_positions: np.ndarray

    @property
    def radius(self) -> float:
        return self.cutoff + self.skin


def build_verlet(sys, cutoff: float, skin: float, grid: UniformGrid,
                 policy: ExecPolicy = SERIAL) -> VerletList:
    """Lists gathered at ``cutoff + skin`` plus a snapshot of the positions."""
    if not cutoff > 0 or skin < 0:
        raise ValueError("cutoff must be positive and skin non-negative")
    if grid.search_radius * (1 + 1e-12) < cutoff + skin:
        raise ValueError(
            f"grid covers radius {grid.search_radius}, Verlet lists need {cutoff + skin}"
        )
    pos = _positions(sys)
    lists = _grid_lists(grid, pos, cutoff + skin, policy)
    return VerletList(float(cutoff), float(skin), lists, pos.copy())


def max_displacement(verlet: VerletList, sys) -> float:
    pos = _positions(sys)
    if pos.shape != verlet.reference_positions.shape:
        raise ValueError(
            f"Verlet list built for {verlet.reference_positions.shape[0]} particles, "
            f"got {pos.shape[0]}"
        )
    if pos.shape[0] == 0:
        return 0.0
    d = pos - verlet.reference_positions
    return float(np.sqrt(np.einsum("ij,ij->i", d, d).max()))


def is_valid(verlet: VerletList, sys) -> bool:
    """True while every particle is closer than skin/2 to its reference position."""
    return max_displacement(verlet, sys) < 0.5 * verlet.skin


@nb.njit(cache=True, nogil=True)
def _filter_scan(start, stop, pos, src_off, src_idx, r2, offsets, out, counts):
    fill = out.shape[0] > 0
    for i in range(start, stop):
        k = offsets[i] if fill else 0
        for p in range(src_off[i], src_off[i + 1]):
            j = src_idx[p]
            dx = pos[i, 0] - pos[j, 0]
            dy = pos[i, 1] - pos[j, 1]
            dz = pos[i, 2] - pos[j, 2]
            if dx * dx + dy * dy + dz * dz < r2:
                if fill:
                    out[k] = j
                k += 1
        if not fill:
            counts[i] = k


def filter_by_distance(lists: NeighborLists, sys, radius: float,
                       policy: ExecPolicy = SERIAL) -> NeighborLists:
    """Keep only entries closer than ``radius``; order is preserved."""
    pos = _positions(sys)
    n = pos.shape[0]
    r2 = float(radius) ** 2
    counts = np.zeros(n, dtype=np.int64)
    parallel_for_blocks(n, policy, _filter_scan, pos, lists.offsets, lists.indices, r2,
                        np.zeros(1, dtype=np.int64), np.empty(0, dtype=np.int32), counts)
    offsets, out = _assemble(n, counts)
    if out.shape[0]:
        parallel_for_blocks(n, policy, _filter_scan, pos, lists.offsets, lists.indices,
                            r2, offsets, out, counts)
    return NeighborLists(offsets, out)


def verlet_neighbors(verlet: VerletList, sys, policy: ExecPolicy = SERIAL) -> NeighborLists:
    """Interaction lists at the cutoff, filtered from the cached lists."""
    if not is_valid(verlet, sys):
        raise ValueError("Verlet list is stale; rebuild it")
    return filter_by_distance(verlet.lists, sys, verlet.cutoff, policy)


def mean_occupancy(lists: NeighborLists) -> float:
    n = len(lists)
    return lists.directed_pairs / n if n else 0.0
