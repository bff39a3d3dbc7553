"""Uniform local binary patterns over blocks of colour channels.

Neighbour ``p`` of a pixel sits at the nearest integer position on the circle
of radius ``R``: ``(round(-R sin(2 pi p / P)), round(R cos(2 pi p / P)))`` as
(row, col) offsets. Bit ``p`` is set when ``neighbour >= centre``. With 8
neighbours and radius 1 this is the 3x3 ring.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np


def neighbour_offsets(n_neighbors: int, radius: int) -> list[tuple[int, int]]:
    offsets = []
    for p in range(n_neighbors):
        angle = 2.0 * math.pi * p / n_neighbors
        offsets.append((int(round(-radius * math.sin(angle))), int(round(radius * math.cos(angle)))))
    return offsets


def transitions(code: int, n_neighbors: int) -> int:
    """Number of circular 0/1 transitions in a ``P``-bit pattern."""
    rotated = ((code >> 1) | ((code & 1) << (n_neighbors - 1)))
    return bin(code ^ rotated).count("1")


def n_bins(n_neighbors: int, uniform: bool = True) -> int:
    # P(P-1) + 2 uniform patterns plus one shared non-uniform bin
    if uniform:
        return n_neighbors * (n_neighbors - 1) + 3
    return 2 ** n_neighbors


@lru_cache(maxsize=None)
def uniform_lookup(n_neighbors: int) -> np.ndarray:
    """Map raw codes to bin indices: uniform patterns in increasing code
    order, then one bin for every non-uniform code."""
    size = 2 ** n_neighbors
    table = np.empty(size, dtype=np.intp)
    nxt = 0
    for code in range(size):
        if transitions(code, n_neighbors) <= 2:
            table[code] = nxt
            nxt += 1
        else:
            table[code] = -1
    table[table < 0] = nxt
    table.setflags(write=False)
    return table


def lbp_codes(channel: np.ndarray, n_neighbors: int = 8, radius: int = 1) -> np.ndarray:
    """Raw LBP codes for every pixel with a full neighbourhood.

    Output shape is ``(H - 2R, W - 2R)``; entry ``(i, j)`` belongs to input
    pixel ``(i + R, j + R)``.
    """
    img = np.asarray(channel).astype(np.int32)
    h, w = img.shape
    r = radius
    centre = img[r:h - r, r:w - r]
    codes = np.zeros(centre.shape, dtype=np.int64)
    for bit, (dy, dx) in enumerate(neighbour_offsets(n_neighbors, radius)):
        neighbour = img[r + dy:h - r + dy, r + dx:w - r + dx]
        codes |= (neighbour >= centre).astype(np.int64) << bit
    return codes


def block_origins(size: int, block: int, stride: int) -> list[int]:
    return list(range(0, size - block + 1, stride))


def n_blocks(height: int, width: int, block: int, stride: int) -> int:
    return len(block_origins(height, block, stride)) * len(block_origins(width, block, stride))


def block_histograms(
    channel: np.ndarray,
    n_neighbors: int = 8,
    radius: int = 1,
    uniform: bool = True,
    block: int = 16,
    stride: int = 8,
) -> np.ndarray:
    """Per-block LBP histograms, blocks in row-major order.

    Each block counts the codes of its own interior pixels (those whose
    neighbourhood lies inside the block), so every histogram sums to
    ``(block - 2R) ** 2``.
    """
    codes = lbp_codes(channel, n_neighbors, radius)
    if uniform:
        codes = uniform_lookup(n_neighbors)[codes]
    bins = n_bins(n_neighbors, uniform)
    h, w = np.asarray(channel).shape
    inner = block - 2 * radius
    hists = []
    # codes[i, j] is pixel (i + R, j + R): the interior of the block at (by, bx)
    # starts at code index (by, bx)
    for by in block_origins(h, block, stride):
        for bx in block_origins(w, block, stride):
            patch = codes[by:by + inner, bx:bx + inner]
            hists.append(np.bincount(patch.ravel(), minlength=bins))
    return np.asarray(hists, dtype=np.float64)
