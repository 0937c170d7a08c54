"""Dense sector Hamiltonians for the lossy XXZ chain and the interacting
Hatano-Nelson chain, both with periodic boundaries.

All energies are in units of ``J``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import SectorBasis


@dataclass(frozen=True)
class XxzLossSpec:
    """XXZ chain with random site-dependent losses ``gamma_i`` in ``[0, gamma_max)``."""

    n_sites: int
    gamma_max: float
    J: float = 1.0
    Delta: float = 1.0

    model = "xxz_loss"

    def __post_init__(self):
        if self.J <= 0:
            raise ValueError(f"J must be positive, got {self.J}")
        if self.gamma_max < 0:
            raise ValueError(f"gamma_max must be non-negative, got {self.gamma_max}")

    @property
    def strength(self) -> float:
        return self.gamma_max


@dataclass(frozen=True)
class HatanoNelsonSpec:
    """Interacting Hatano-Nelson chain: asymmetric hopping ``e^{+-g}`` and
    random fields ``h_i`` in ``[-h_max, h_max)``."""

    n_sites: int
    h_max: float
    J: float = 1.0
    Delta: float = 1.0
    g: float = 0.1

    model = "hatano_nelson"

    def __post_init__(self):
        if self.J <= 0:
            raise ValueError(f"J must be positive, got {self.J}")
        if self.h_max < 0:
            raise ValueError(f"h_max must be non-negative, got {self.h_max}")

    @property
    def strength(self) -> float:
        return self.h_max


ModelSpec = XxzLossSpec | HatanoNelsonSpec


@dataclass(frozen=True)
class DisorderRealization:
    seed: int
    index: int
    values: np.ndarray = field(repr=False)


def realization_rng(master_seed: int, realization_index: int) -> np.random.Generator:
    """Independent stream keyed by ``(master_seed, realization_index)``.

    The key is hashed by ``SeedSequence``, so streams do not depend on the
    order in which realizations are evaluated.
    """
    if master_seed < 0 or realization_index < 0:
        raise ValueError("seed and realization index must be non-negative")
    return np.random.default_rng(np.random.SeedSequence([master_seed, realization_index]))


def sample_disorder(spec: ModelSpec, master_seed: int, realization_index: int) -> DisorderRealization:
    rng = realization_rng(master_seed, realization_index)
    u = rng.random(spec.n_sites)
    if isinstance(spec, XxzLossSpec):
        values = spec.gamma_max * u
    elif isinstance(spec, HatanoNelsonSpec):
        values = spec.h_max * (2.0 * u - 1.0)
    else:
        raise TypeError(f"unknown model spec {type(spec).__name__}")
    values.setflags(write=False)
    return DisorderRealization(seed=int(master_seed), index=int(realization_index), values=values)


def _check_basis(n_sites: int, basis: SectorBasis) -> None:
    if basis.n_sites != n_sites:
        raise ValueError(
            f"basis has {basis.n_sites} sites but the model has {n_sites}"
        )


def _bonds(n_sites: int):
    # periodic sum over i = 1..N, including the doubled bond when N = 2
    for i in range(n_sites):
        yield i, (i + 1) % n_sites


def _assemble(basis: SectorBasis, J: float, Delta: float, forward: float, backward: float) -> np.ndarray:
    """Nearest-neighbour flip-flop plus Ising terms.

    ``forward`` multiplies S+_i S-_{i+1} (spin moves from site i+1 to i),
    ``backward`` multiplies S-_i S+_{i+1}.
    """
    states = basis.states
    occ = basis.occupations()
    D = basis.dim
    H = np.zeros((D, D), dtype=np.complex128)
    diag = np.zeros(D)
    cols = np.arange(D)
    for i, j in _bonds(basis.n_sites):
        bi, bj = occ[:, i], occ[:, j]
        diag += J * Delta * (bi - 0.5) * (bj - 0.5)
        flip = bi != bj
        src = cols[flip]
        dst = basis.index_of(states[flip] ^ ((1 << i) | (1 << j)))
        amp = np.where(bi[flip] == 0, forward, backward) * (J / 2)
        np.add.at(H, (dst, src), amp)
    H[cols, cols] += diag
    return H


def build_xxz(spec: ModelSpec, basis: SectorBasis) -> np.ndarray:
    """Hermitian XXZ part: real symmetric, hopping ``J/2``, Ising ``J Delta s_i s_{i+1}``."""
    _check_basis(spec.n_sites, basis)
    return _assemble(basis, spec.J, spec.Delta, 1.0, 1.0)


def build_loss_diagonal(realization: DisorderRealization | np.ndarray, basis: SectorBasis) -> np.ndarray:
    """Diagonal loss operator: sum of ``gamma_i`` over up spins of each configuration."""
    gammas = np.asarray(getattr(realization, "values", realization), dtype=float)
    if gammas.shape != (basis.n_sites,):
        raise ValueError(f"expected {basis.n_sites} loss rates, got shape {gammas.shape}")
    if np.any(gammas < 0):
        raise ValueError("loss rates must be non-negative")
    return np.diag(basis.occupations() @ gammas).astype(np.complex128)


def build_nh_xxz(spec: XxzLossSpec, realization: DisorderRealization, basis: SectorBasis) -> np.ndarray:
    H = build_xxz(spec, basis)
    H -= 0.5j * build_loss_diagonal(realization, basis)
    return H


def build_hatano_nelson(spec: HatanoNelsonSpec, realization: DisorderRealization, basis: SectorBasis) -> np.ndarray:
    _check_basis(spec.n_sites, basis)
    fields = np.asarray(realization.values, dtype=float)
    if fields.shape != (basis.n_sites,):
        raise ValueError(f"expected {basis.n_sites} fields, got shape {fields.shape}")
    H = _assemble(basis, spec.J, spec.Delta, np.exp(spec.g), np.exp(-spec.g))
    sz = basis.occupations() - 0.5
    H[np.diag_indices(basis.dim)] += sz @ fields
    return H


def build_matrix(spec: ModelSpec, realization: DisorderRealization, basis: SectorBasis) -> np.ndarray:
    if isinstance(spec, XxzLossSpec):
        return build_nh_xxz(spec, realization, basis)
    if isinstance(spec, HatanoNelsonSpec):
        return build_hatano_nelson(spec, realization, basis)
    raise TypeError(f"unknown model spec {type(spec).__name__}")


def make_spec(model: str, n_sites: int, strength: float, *, J: float = 1.0,
              Delta: float = 1.0, g: float = 0.1) -> ModelSpec:
    if model == "xxz_loss":
        return XxzLossSpec(n_sites=n_sites, gamma_max=strength, J=J, Delta=Delta)
    if model == "hatano_nelson":
        return HatanoNelsonSpec(n_sites=n_sites, h_max=strength, J=J, Delta=Delta, g=g)
    raise ValueError(f"unknown model {model!r}; expected 'xxz_loss' or 'hatano_nelson'")
