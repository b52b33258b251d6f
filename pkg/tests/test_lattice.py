import numpy as np

from flowsteer.lattice import C, W, OPP, MIRROR_X, X_PAIRS, X_ZERO, Q, CS2, self_check


def test_velocity_set_shape():
    assert C.shape == (19, 3)
    speeds = sorted((C ** 2).sum(axis=1).tolist())
    assert speeds.count(0) == 1
    assert speeds.count(1) == 6
    assert speeds.count(2) == 12


def test_weight_values():
    assert W[0] == 1.0 / 3.0
    for i in range(1, Q):
        sq = int((C[i] ** 2).sum())
        assert W[i] == (1.0 / 18.0 if sq == 1 else 1.0 / 36.0)


def test_weight_moment_identities():
    # zeroth, first and second moments of the weights
    assert abs(W.sum() - 1.0) < 1e-15
    first = (W[:, None] * C).sum(axis=0)
    assert np.all(np.abs(first) < 1e-15)
    second = np.einsum("i,ia,ib->ab", W, C.astype(float), C.astype(float))
    assert np.all(np.abs(second - CS2 * np.eye(3)) < 1e-15)


def test_opposites_are_negations():
    for i in range(Q):
        assert np.array_equal(C[OPP[i]], -C[i])
        assert OPP[OPP[i]] == i


def test_mirror_pairs_flip_x():
    for i in range(Q):
        expect = C[i] * np.array([-1, 1, 1])
        assert np.array_equal(C[MIRROR_X[i]], expect)
        assert MIRROR_X[MIRROR_X[i]] == i
    # pair table is exactly the +x/-x couples, the rest have cx = 0
    for a, b in X_PAIRS:
        assert C[a, 0] == 1 and C[b, 0] == -1
        assert MIRROR_X[a] == b
    for i in X_ZERO:
        assert C[i, 0] == 0 and MIRROR_X[i] == i


def test_self_check_runs():
    self_check()
