"""D3Q19 lattice constants.

Velocity set: one rest vector, six axis vectors (weight 1/18) and twelve
face-diagonal vectors (weight 1/36); rest weight 1/3; lattice speed of
sound c_s^2 = 1/3.

Ordering convention: directions 1..10 are grouped as five (+x, -x) mirror
pairs, directions 11..18 have cx = 0.  Reductions over directions (density,
momentum, mass exchange) accumulate pair sums first.  Because IEEE addition
is commutative, a state that is mirror symmetric about the x mid-plane then
produces bitwise mirror-symmetric moments, which is what keeps symmetric
dam breaks symmetric to round-off instead of drifting.
"""

from __future__ import annotations

import numpy as np

# (cx, cy, cz) per direction; see ordering note above.
C = np.array(
    [
        (0, 0, 0),
        (1, 0, 0), (-1, 0, 0),
        (1, 1, 0), (-1, 1, 0),
        (1, -1, 0), (-1, -1, 0),
        (1, 0, 1), (-1, 0, 1),
        (1, 0, -1), (-1, 0, -1),
        (0, 1, 0), (0, -1, 0),
        (0, 0, 1), (0, 0, -1),
        (0, 1, 1), (0, -1, -1),
        (0, 1, -1), (0, -1, 1),
    ],
    dtype=np.int64,
)

Q = 19

W = np.array(
    [1 / 3]
    + [1 / 18 if int(np.abs(c).sum()) == 1 else 1 / 36 for c in C[1:]],
    dtype=np.float64,
)

CS2 = 1.0 / 3.0


def _find(vec) -> int:
    for i in range(Q):
        if tuple(C[i]) == tuple(vec):
            return i
    raise ValueError(f"not a lattice vector: {vec}")


# OPP[i] is the direction with all components negated (bounce-back partner).
OPP = np.array([_find(-C[i]) for i in range(Q)], dtype=np.int64)

# MIRROR_X[i] is the direction with cx negated (x mid-plane reflection).
MIRROR_X = np.array([_find(C[i] * (-1, 1, 1)) for i in range(Q)], dtype=np.int64)

# Index bookkeeping for symmetric pair-grouped reductions.
X_PAIRS = tuple((i, i + 1) for i in range(1, 11, 2))       # (+x, -x) pairs
X_ZERO = tuple(range(11, 19))                              # cx == 0


def self_check(tol: float = 1e-15) -> None:
    """Verify the discrete moment identities the collision operator relies on.

    sum(w) = 1, sum(w c) = 0, sum(w c c^T) = c_s^2 I.  Raises AssertionError
    if any identity is off by more than `tol`.
    """
    assert abs(W.sum() - 1.0) <= tol
    first = W @ C.astype(np.float64)
    assert np.all(np.abs(first) <= tol)
    second = np.einsum("i,ia,ib->ab", W, C.astype(np.float64), C.astype(np.float64))
    assert np.all(np.abs(second - CS2 * np.eye(3)) <= tol)
    # structural checks
    assert len({tuple(c) for c in C}) == Q
    assert np.all(OPP[OPP] == np.arange(Q))
    assert np.all(MIRROR_X[MIRROR_X] == np.arange(Q))
    for a, b in X_PAIRS:
        assert MIRROR_X[a] == b
    for i in X_ZERO:
        assert MIRROR_X[i] == i
