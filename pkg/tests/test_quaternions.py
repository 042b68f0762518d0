import numpy as np
import pytest

from spihet import quaternions as quat


def test_rotation_matrix_orthonormal(rng):
    q = quat.random_uniform(rng, 50)
    mats = quat.rotation_matrix(q)
    for m in mats:
        assert np.allclose(m @ m.T, np.eye(3), atol=1e-12)
        assert np.linalg.det(m) == pytest.approx(1.0, abs=1e-12)


def test_unit_norm(rng):
    q = quat.random_uniform(rng, 100)
    assert np.allclose(np.linalg.norm(q, axis=1), 1.0, atol=1e-9)


def test_q_and_minus_q_same_rotation(rng):
    q = quat.random_uniform(rng)
    assert np.allclose(quat.rotation_matrix(q), quat.rotation_matrix(-q), atol=1e-14)


def test_compose_matches_matrix_product(rng):
    a, b = quat.random_uniform(rng, 2)
    lhs = quat.rotation_matrix(quat.compose(a, b))
    rhs = quat.rotation_matrix(a) @ quat.rotation_matrix(b)
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_from_matrix_roundtrip(rng):
    for q in quat.random_uniform(rng, 20):
        m = quat.rotation_matrix(q)
        back = quat.from_matrix(m)
        assert quat.geodesic_distance(q, back) < 1e-6


def test_octahedral_group_properties():
    g = quat.octahedral_group()
    assert g.shape == (24, 4)
    # identity present (listed first by construction)
    assert np.allclose(g[0], [1, 0, 0, 0])
    # pairwise distinct rotations
    for i in range(24):
        for j in range(i + 1, 24):
            assert quat.geodesic_distance(g[i], g[j]) > 1e-6
    # closed under composition (up to sign)
    for i in range(24):
        prod = quat.compose(g[i], g)
        for p in prod:
            d = quat.geodesic_distance(p[None], g).min()
            assert d < 1e-6


def test_canonicalize_collapses_equivalence_class(rng):
    q = quat.random_uniform(rng)
    group = quat.octahedral_group()
    reps = [quat.canonicalize(quat.compose(g, q)) for g in group]
    reps += [quat.canonicalize(-quat.compose(g, q)) for g in group]
    for r in reps[1:]:
        assert np.allclose(r, reps[0], atol=1e-10)


def test_canonicalize_identity_class_is_identity_like():
    group = quat.octahedral_group()
    reps = np.array([quat.canonicalize(g) for g in group])
    # the entire identity equivalence class collapses to one representative
    assert np.allclose(reps, reps[0], atol=1e-12)


def test_inplane_rotates_about_z():
    q = quat.inplane(0.3)
    m = quat.rotation_matrix(q)
    assert np.allclose(m @ [0, 0, 1], [0, 0, 1], atol=1e-14)
    v = m @ [1, 0, 0]
    assert v[0] == pytest.approx(np.cos(0.3))
    assert v[1] == pytest.approx(np.sin(0.3))


def test_sym_distance_zero_for_equivalent(rng):
    q = quat.random_uniform(rng)
    g = quat.octahedral_group()[7]
    assert quat.sym_distance(q, quat.compose(g, q)) < 1e-9
