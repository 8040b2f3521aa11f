import math

import numpy as np
import pytest

from deflatecrb import (
    AsymptoticRatios,
    BoundDomainError,
    DimensionError,
    ParameterError,
    ProblemDims,
    RankDeficiencyError,
    SupportPair,
    deflate_system,
    deflated_gram,
    draw_amplitudes,
    draw_supports,
    gen_dictionary,
    gen_f_direct,
    gen_steering_dictionary,
    orth_complement,
    projector_perp,
    synthesize_observation,
)
from deflatecrb.model import sample_supports


def _scene(seed=0, n=40, k=80, l_a=4, l_b=4, noise_var=1e-30, alpha=None, beta=None):
    rng = np.random.default_rng(seed)
    dims = ProblemDims(n=n, k=k, l_a=l_a, l_b=l_b)
    h = gen_dictionary(dims, rng)
    supports = draw_supports(dims, rng)
    alpha = draw_amplitudes(l_a, 1.0, rng) if alpha is None else alpha
    beta = draw_amplitudes(l_b, 1.0, rng) if beta is None else beta
    return synthesize_observation(h, supports, alpha, beta, noise_var, rng)


def test_ratios_follow_dimensions():
    ratios = ProblemDims(n=100, k=200, l_a=10, l_b=10).ratios()
    assert ratios == AsymptoticRatios(rho=10.0, c=1.0)
    assert ratios.rho_tilde == pytest.approx(9.0)
    assert ratios.rho_bar == pytest.approx(5.0)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"n": 10, "k": 20, "l_a": 0, "l_b": 1},
        {"n": 10, "k": 20, "l_a": 5, "l_b": 5},
        {"n": 10, "k": 10, "l_a": 2, "l_b": 2},
        {"n": 10.0, "k": 20, "l_a": 2, "l_b": 2},
        {"n": 10, "k": 20, "l_a": 2, "l_b": -1},
    ],
)
def test_problem_dims_rejects_invalid_sizes(kwargs):
    with pytest.raises(DimensionError):
        ProblemDims(**kwargs)


def test_ratios_reject_rho_at_most_one():
    with pytest.raises(ParameterError):
        AsymptoticRatios(rho=1.0)


@pytest.mark.parametrize("rho,c", [(2.0, 1.0), (3.0, 2.5), (11.0, 10.0)])
def test_ratios_reject_rho_tilde_at_most_one(rho, c):
    with pytest.raises(BoundDomainError):
        AsymptoticRatios(rho=rho, c=c)


def test_ratios_just_inside_the_domain_have_both_effective_ratios_above_one():
    ratios = AsymptoticRatios(rho=2.01, c=1.0)
    assert ratios.rho_tilde > 1.0
    assert ratios.rho_bar > 1.0


def test_gen_dictionary_entry_variance_and_determinism():
    dims = ProblemDims(n=100, k=400, l_a=10, l_b=10)
    first = gen_dictionary(dims, np.random.default_rng(1))
    second = gen_dictionary(dims, np.random.default_rng(1))
    assert 0.008 <= first.var() <= 0.012
    assert np.array_equal(first, second)


def test_gen_dictionary_column_norms_concentrate_near_one():
    dims = ProblemDims(n=4, k=8, l_a=1, l_b=1)
    h = gen_dictionary(dims, np.random.default_rng(3))
    assert 0.5 <= np.mean(np.linalg.norm(h, axis=0)) <= 1.5


def test_rademacher_dictionary_has_scaled_signs():
    dims = ProblemDims(n=25, k=50, l_a=2, l_b=2)
    h = gen_dictionary(dims, np.random.default_rng(0), kind="rademacher")
    assert set(np.unique(h)) <= {-0.2, 0.2}


def test_gen_f_direct_shape_and_variance():
    dims = ProblemDims(n=500, k=1000, l_a=50, l_b=50)
    f = gen_f_direct(dims, np.random.default_rng(4))
    assert f.shape == (450, 50)
    assert f.var() == pytest.approx(1.0 / 500, rel=0.05)


def test_impulse_waveform_leaves_dictionary_unchanged():
    dims = ProblemDims(n=6, k=12, l_a=1, l_b=1)
    impulse = lambda t: 1.0 if t == 0.0 else 0.0
    steered = gen_steering_dictionary(impulse, 1.0, dims, np.random.default_rng(5))
    assert np.allclose(steered, gen_dictionary(dims, np.random.default_rng(5)))


def test_gaussian_waveform_gives_finite_nonzero_columns():
    dims = ProblemDims(n=32, k=64, l_a=2, l_b=2)
    steered = gen_steering_dictionary(lambda t: math.exp(-t * t / 2), 1.0, dims, np.random.default_rng(6))
    norms = np.linalg.norm(steered, axis=0)
    assert np.all(np.isfinite(norms)) and np.all(norms > 0)


def test_draw_supports_are_disjoint_and_sorted():
    dims = ProblemDims(n=5, k=8, l_a=2, l_b=2)
    supports = draw_supports(dims, np.random.default_rng(7))
    assert not set(supports.t) & set(supports.t_tilde)
    assert list(supports.t) == sorted(supports.t)
    assert all(0 <= i < 8 for i in (*supports.t, *supports.t_tilde))


def test_sample_supports_can_fill_the_index_set():
    supports = sample_supports(4, 2, 2, np.random.default_rng(8))
    assert set(supports.t) | set(supports.t_tilde) == {0, 1, 2, 3}


def test_supports_are_uniform():
    rng = np.random.default_rng(9)
    counts = np.zeros(10)
    for _ in range(10000):
        counts[list(sample_supports(10, 1, 1, rng).t)] += 1
    assert np.all(np.abs(counts / 10000 - 0.1) <= 0.02)


def test_support_pair_rejects_overlap():
    with pytest.raises(DimensionError):
        SupportPair(t=(1, 2), t_tilde=(2, 3))


def test_amplitude_priors():
    rng = np.random.default_rng(10)
    signs = draw_amplitudes(5, 1.0, rng, prior="rademacher")
    assert set(np.abs(signs)) == {1.0}
    assert 9.7 <= draw_amplitudes(100_000, 10.0, rng).var() <= 10.3
    with pytest.raises(ParameterError):
        draw_amplitudes(3, 0.0, rng)


def test_synthesize_noiseless_reconstruction():
    scene = _scene()
    clean = scene.a_psi @ scene.alpha + scene.b_psi @ scene.beta
    assert np.linalg.norm(scene.y - clean) <= 1e-12
    assert np.allclose(scene.h @ scene.x, clean)


def test_orth_complement_of_first_basis_vector():
    e1 = np.array([[1.0], [0.0], [0.0], [0.0]])
    u = orth_complement(e1)
    assert u.shape == (4, 3)
    assert np.allclose(u.T @ e1, 0.0)
    assert np.allclose(u @ u.T, np.diag([0.0, 1.0, 1.0, 1.0]))


def test_orth_complement_residuals_on_random_input():
    b = np.random.default_rng(11).standard_normal((100, 10))
    u = orth_complement(b)
    assert np.max(np.abs(u.T @ b)) <= 1e-10
    assert np.max(np.abs(u.T @ u - np.eye(90))) <= 1e-10


def test_orth_complement_rejects_duplicated_column():
    b = np.random.default_rng(12).standard_normal((10, 3))
    b[:, 2] = b[:, 0]
    with pytest.raises(RankDeficiencyError) as excinfo:
        orth_complement(b)
    assert excinfo.value.rank == 2
    assert excinfo.value.expected == 3


def test_projector_perp_identities():
    assert np.allclose(projector_perp(np.array([1.0, 0.0, 0.0])), np.diag([0.0, 1.0, 1.0]))
    b = np.random.default_rng(13).standard_normal((100, 10))
    p = projector_perp(b)
    u = orth_complement(b)
    assert np.trace(p) == pytest.approx(90.0, abs=1e-9)
    assert np.max(np.abs(p @ p - p)) <= 1e-9
    assert np.max(np.abs(p - p.T)) <= 1e-12
    assert np.max(np.abs(p - u @ u.T)) <= 1e-9


def test_deflation_rejects_interference():
    scene = _scene(alpha=np.zeros(4))
    system = deflate_system(orth_complement(scene.b_psi), scene)
    assert np.linalg.norm(system.y_bar) <= 1e-10 * np.linalg.norm(scene.beta)


def test_deflation_without_interference_amplitudes_gives_f_alpha():
    scene = _scene(beta=np.zeros(4))
    system = deflate_system(orth_complement(scene.b_psi), scene)
    assert np.allclose(system.y_bar, system.f @ scene.alpha)
    assert np.allclose(system.f, system.u.T @ scene.a_psi)


def test_deflation_is_a_contraction_and_keeps_noise_white():
    scene = _scene(noise_var=0.5)
    u = orth_complement(scene.b_psi)
    system = deflate_system(u, scene)
    assert np.linalg.norm(system.y_bar) <= np.linalg.norm(scene.y) + 1e-12
    vectors = np.random.default_rng(14).standard_normal((40, 1000))
    p = projector_perp(scene.b_psi)
    assert np.all(np.linalg.norm(u.T @ vectors, axis=0) <= np.linalg.norm(vectors, axis=0) + 1e-12)
    assert np.allclose(np.linalg.norm(u.T @ (p @ vectors), axis=0), np.linalg.norm(p @ vectors, axis=0), atol=1e-9)


def test_deflate_system_rejects_mismatched_basis():
    scene = _scene()
    with pytest.raises(DimensionError):
        deflate_system(np.eye(5), scene)


def test_deflated_gram_matches_f_transpose_f():
    scene = _scene(seed=15)
    system = deflate_system(orth_complement(scene.b_psi), scene)
    assert np.allclose(deflated_gram(scene.a_psi, scene.b_psi), system.f.T @ system.f, atol=1e-12)


def test_deflated_f_entries_are_centred_with_variance_one_over_n():
    rng = np.random.default_rng(16)
    dims = ProblemDims(n=500, k=1000, l_a=50, l_b=50)
    h = gen_dictionary(dims, rng)
    supports = draw_supports(dims, rng)
    u = orth_complement(h[:, list(supports.t_tilde)])
    f = u.T @ h[:, list(supports.t)]
    assert abs(f.mean()) <= 3.0 / math.sqrt(f.size)
    assert f.var() == pytest.approx(1.0 / 500, rel=0.05)
