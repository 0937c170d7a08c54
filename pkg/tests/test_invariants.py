"""Randomized invariants, at least 100 trials each."""

import math

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from nhmbl.basis import bipartition_shape, build_sector_basis
from nhmbl.diagnostics import (complex_gap_ratios, entanglement_entropy, ipr,
                               log_time_grid, ratio_statistics, singular_form_factor)
from nhmbl.ensemble import SweepPlan, run_point
from nhmbl.models import build_matrix, make_spec, sample_disorder
from nhmbl.spectral import eig_biorthogonal, svd

TRIALS = settings(max_examples=100, deadline=None,
                  suppress_health_check=[HealthCheck.too_slow])

seeds = st.integers(min_value=0, max_value=2 ** 63 - 1)
models = st.sampled_from(["xxz_loss", "hatano_nelson"])
sizes = st.sampled_from([2, 4, 6, 8])
strengths = st.floats(min_value=0.0, max_value=60.0, allow_nan=False)


def model_matrix(model, n, strength, seed):
    spec = make_spec(model, n, strength)
    return build_matrix(spec, sample_disorder(spec, seed, 0), build_sector_basis(n))


@TRIALS
@given(models, sizes, strengths, seeds)
def test_singular_vectors_unitary_and_reconstruct(model, n, strength, seed):
    H = model_matrix(model, n, strength, seed)
    res = svd(H)
    eye = np.eye(len(H))
    assert np.max(np.abs(res.left.conj().T @ res.left - eye)) < 1e-10
    assert np.max(np.abs(res.right.conj().T @ res.right - eye)) < 1e-10
    recon = (res.left * res.sigma) @ res.right.conj().T
    assert np.max(np.abs(H - recon)) <= 1e-10 * max(1.0, np.max(np.abs(H)))


@TRIALS
@given(models, sizes, strengths, seeds)
def test_frobenius_identity(model, n, strength, seed):
    H = model_matrix(model, n, strength, seed)
    s = svd(H, compute_vectors=False).sigma
    assert math.isclose(np.sum(s ** 2), np.trace(H.conj().T @ H).real, rel_tol=1e-10)


@TRIALS
@given(models, sizes, strengths, seeds)
def test_adjoint_has_same_singular_values_and_form_factor(model, n, strength, seed):
    H = model_matrix(model, n, strength, seed)
    s = svd(H, compute_vectors=False).sigma
    s_adj = svd(H.conj().T, compute_vectors=False).sigma
    assert np.max(np.abs(s - s_adj)) <= 1e-12 * max(1.0, s[0])
    t = log_time_grid(len(H), n_points=60)
    a = singular_form_factor(s, t).values
    b = singular_form_factor(s_adj, t).values
    # |d sigmaFF| <= 2 t max|d sigma|, so roundoff in sigma is allowed for
    assert np.all(np.abs(a - b) <= 1e-12 + 2 * t * np.max(np.abs(s - s_adj)))


@TRIALS
@given(seeds, st.integers(min_value=3, max_value=300),
       st.floats(min_value=-1e3, max_value=1e3), st.floats(min_value=1e-3, max_value=1e3))
def test_ratios_invariant_under_shift_and_scale(seed, size, shift, scale):
    x = np.random.default_rng(seed).uniform(0, 10, size)
    base = ratio_statistics(x).ratios
    moved = ratio_statistics(scale * x + shift).ratios
    assert base.shape == moved.shape
    # the shift costs absolute precision of order eps * |shift| / spacing
    assert np.max(np.abs(base - moved)) < 1e-6


@TRIALS
@given(seeds, st.integers(min_value=3, max_value=300),
       st.complex_numbers(max_magnitude=100, allow_nan=False, allow_infinity=False),
       st.floats(min_value=0, max_value=2 * np.pi), st.floats(min_value=1e-2, max_value=1e2))
def test_complex_ratios_invariant_under_similarity(seed, size, shift, angle, scale):
    rng = np.random.default_rng(seed)
    E = rng.normal(size=size) + 1j * rng.normal(size=size)
    base = complex_gap_ratios(E)
    moved = complex_gap_ratios(scale * np.exp(1j * angle) * E + shift)
    if base.z.shape != moved.z.shape or np.max(np.abs(base.z - moved.z)) > 1e-6:
        # only a near-tie in neighbour distances may legitimately reorder
        d = np.abs(E[:, None] - E[None, :])
        np.fill_diagonal(d, np.inf)
        d.sort(axis=1)
        assert np.min(np.abs(d[:, 1] - d[:, 0]) / d[:, 1]) < 1e-8 or \
            np.min(np.abs(d[:, 2] - d[:, 1]) / d[:, 2]) < 1e-8
    assert np.all(np.abs(moved.z) <= 1 + 1e-12)


@TRIALS
@given(models, st.sampled_from([2, 4, 6, 8, 10]), strengths, seeds)
def test_entropy_and_ipr_bounds(model, n, strength, seed):
    basis = build_sector_basis(n)
    H = model_matrix(model, n, strength, seed)
    V = svd(H).right
    D = basis.dim
    p = ipr(V)
    assert np.all(p >= 1 / D - 1e-12) and np.all(p <= 1 + 1e-12)
    S = entanglement_entropy(V, bipartition_shape(basis))
    assert np.all(S >= 0) and np.all(S <= n / 2 * math.log(2) + 1e-10)


@TRIALS
@given(models, sizes, st.floats(min_value=0.1, max_value=60.0), seeds)
def test_biorthonormal_eigenvectors(model, n, strength, seed):
    H = model_matrix(model, n, strength, seed)
    res = eig_biorthogonal(H)
    if res.defective:
        return
    R, L = res.right, res.left
    assert np.max(np.abs(L.conj().T @ R - np.eye(len(H)))) < 1e-6
    assert np.linalg.norm(H @ R - R * res.eigenvalues) <= 1e-9 * max(1.0, np.linalg.norm(H))


@TRIALS
@given(models, seeds, st.integers(min_value=2, max_value=3))
def test_aggregates_independent_of_worker_count(model, seed, workers):
    plan = SweepPlan(model=model, n_sites=(4,), strengths=(2.0,), realizations=4,
                     master_seed=seed, n_times=20,
                     diagnostics=("sff", "ratios", "ipr", "entropy", "complex_ratios"))
    a = run_point(plan, 4, 2.0, workers=1)
    b = run_point(plan, 4, 2.0, workers=workers, chunk_size=1)
    assert a.stats == b.stats
    assert np.array_equal(a.sff_mean, b.sff_mean)
    assert np.array_equal(a.ratio_hist, b.ratio_hist)
