"""Zero-magnetization sector of a spin-1/2 chain.

Bit convention, used everywhere in the package: site ``i`` (1-based) is bit
``i - 1`` of the configuration integer, so site 1 is the least significant
bit. A set bit means spin up.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb

import numpy as np

MAX_SITES = 20


@dataclass(frozen=True)
class SectorBasis:
    """Half-filled configurations of ``n_sites`` spins in ascending order."""

    n_sites: int
    states: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.states)

    def index_of(self, config) -> np.ndarray | int:
        """Position(s) of configuration(s) in ``states``.

        Raises ``KeyError`` for configurations outside the sector.
        """
        config_arr = np.asarray(config, dtype=np.int64)
        pos = np.searchsorted(self.states, config_arr)
        pos_c = np.clip(pos, 0, self.dim - 1)
        if not np.all(self.states[pos_c] == config_arr):
            raise KeyError(f"configuration not in sector: {config!r}")
        return int(pos_c) if pos_c.ndim == 0 else pos_c

    def occupations(self) -> np.ndarray:
        """``(dim, n_sites)`` array of 0/1 occupations, column ``i`` = site ``i + 1``."""
        shifts = np.arange(self.n_sites, dtype=np.int64)
        return (self.states[:, None] >> shifts) & 1


@dataclass(frozen=True)
class BipartitionMap:
    """Split of each sector state into (A, B) halves.

    Subsystem A holds sites ``1..cut`` and B the rest. ``rows`` is the A
    pattern (bit ``i - 1`` for site ``i``) and ``cols`` the B pattern shifted
    down so that site ``cut + 1`` is bit 0.
    """

    n_sites: int
    cut: int
    rows: np.ndarray = field(repr=False)
    cols: np.ndarray = field(repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return (1 << self.cut, 1 << (self.n_sites - self.cut))


def _check_sites(n_sites: int) -> None:
    if not isinstance(n_sites, (int, np.integer)) or isinstance(n_sites, bool):
        raise ValueError(f"n_sites must be an integer, got {n_sites!r}")
    if n_sites < 2 or n_sites % 2:
        raise ValueError(f"n_sites must be even and >= 2, got {n_sites}")
    if n_sites > MAX_SITES:
        raise ValueError(
            f"n_sites={n_sites} exceeds the dense-storage cap of {MAX_SITES}"
        )


def sector_dim(n_sites: int) -> int:
    return comb(n_sites, n_sites // 2)


def build_sector_basis(n_sites: int) -> SectorBasis:
    """Enumerate all configurations with ``n_sites / 2`` up spins.

    Examples
    --------
    >>> build_sector_basis(4).states.tolist()
    [3, 5, 6, 9, 10, 12]
    """
    _check_sites(n_sites)
    states = np.fromiter(
        (sum(1 << i for i in c) for c in combinations(range(n_sites), n_sites // 2)),
        dtype=np.int64,
        count=sector_dim(n_sites),
    )
    states.sort()
    states.setflags(write=False)
    return SectorBasis(n_sites=int(n_sites), states=states)


def bipartition_shape(basis: SectorBasis, cut: int | None = None) -> BipartitionMap:
    n = basis.n_sites
    cut = n // 2 if cut is None else cut
    if not 0 < cut < n:
        raise ValueError(f"cut must lie strictly between 0 and {n}, got {cut}")
    rows = basis.states & ((1 << cut) - 1)
    cols = basis.states >> cut
    rows.setflags(write=False)
    cols.setflags(write=False)
    return BipartitionMap(n_sites=n, cut=cut, rows=rows, cols=cols)
