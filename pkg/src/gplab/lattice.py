"""Truncated momentum lattice 2*pi*Z^3 restricted to a cube.

Momenta are stored as integer triples ``n`` (units of 2*pi); the physical
momentum is ``p = 2*pi*n`` and ``p**2 = 4*pi**2 * |n|**2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True, eq=False)
class MomentumLattice:
    """Cube ``|n|_inf <= pmax`` of the dual lattice, lexicographically ordered.

    Attributes
    ----------
    pmax : int
        Half-width of the cube in units of 2*pi.
    modes : ndarray, shape (M, 3)
        Integer momentum labels sorted lexicographically.
    zero_index : int
        Row of ``(0, 0, 0)`` in ``modes``.
    """

    pmax: int
    modes: np.ndarray = field(repr=False)
    zero_index: int = field(repr=False)

    def __eq__(self, other):
        return isinstance(other, MomentumLattice) and other.pmax == self.pmax

    def __hash__(self):
        return hash(("MomentumLattice", self.pmax))

    @property
    def mode_count(self) -> int:
        return len(self.modes)

    @property
    def mode_count_plus(self) -> int:
        return len(self.modes) - 1

    @cached_property
    def _index_table(self) -> np.ndarray:
        w = 2 * self.pmax + 1
        table = np.empty((w, w, w), dtype=np.int64)
        shifted = self.modes + self.pmax
        table[shifted[:, 0], shifted[:, 1], shifted[:, 2]] = np.arange(len(self.modes))
        return table

    @cached_property
    def neg(self) -> np.ndarray:
        """``neg[i]`` is the index of ``-mode_at(i)``."""
        return self.indices_of(-self.modes)

    @cached_property
    def nonzero(self) -> np.ndarray:
        """Indices of the modes of Lambda*_+ (all but the zero mode)."""
        idx = np.arange(len(self.modes))
        return idx[idx != self.zero_index]

    @cached_property
    def p2(self) -> np.ndarray:
        """Physical ``p**2`` for every mode."""
        return TWO_PI**2 * np.sum(self.modes.astype(float) ** 2, axis=1)

    @cached_property
    def pnorm(self) -> np.ndarray:
        return np.sqrt(self.p2)

    def mode_at(self, i: int) -> tuple[int, int, int]:
        return tuple(int(c) for c in self.modes[i])

    def index_of(self, n) -> int | None:
        n = np.asarray(n, dtype=np.int64)
        if np.any(np.abs(n) > self.pmax):
            return None
        s = n + self.pmax
        return int(self._index_table[s[0], s[1], s[2]])

    def indices_of(self, ns) -> np.ndarray:
        """Vectorized ``index_of``; out-of-cube rows map to -1."""
        ns = np.asarray(ns, dtype=np.int64).reshape(-1, 3)
        inside = np.all(np.abs(ns) <= self.pmax, axis=1)
        out = np.full(len(ns), -1, dtype=np.int64)
        s = ns[inside] + self.pmax
        out[inside] = self._index_table[s[:, 0], s[:, 1], s[:, 2]]
        return out

    def add(self, i: int, j: int) -> int:
        """Index of ``mode_at(i) + mode_at(j)``, or -1 if it leaves the cube."""
        k = self.index_of(self.modes[i] + self.modes[j])
        return -1 if k is None else k

    @cached_property
    def sum_table(self) -> np.ndarray:
        """``sum_table[i, j]`` = index of mode i + mode j, -1 outside the cube."""
        s = self.modes[:, None, :] + self.modes[None, :, :]
        return self.indices_of(s.reshape(-1, 3)).reshape(len(self.modes), len(self.modes))


def build_lattice(pmax: int) -> MomentumLattice:
    """Build the cube ``|n|_inf <= pmax`` with lexicographic mode ordering."""
    if pmax < 0:
        raise ValueError("pmax must be non-negative")
    r = np.arange(-pmax, pmax + 1)
    # meshgrid with ij indexing enumerates lexicographically in (nx, ny, nz)
    g = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1).reshape(-1, 3)
    modes = np.ascontiguousarray(g.astype(np.int64))
    modes.setflags(write=False)
    zero = int(np.flatnonzero(np.all(modes == 0, axis=1))[0])
    return MomentumLattice(pmax=pmax, modes=modes, zero_index=zero)


def index_of(lattice: MomentumLattice, n) -> int | None:
    return lattice.index_of(n)
