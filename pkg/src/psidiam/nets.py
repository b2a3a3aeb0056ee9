"""Certified lattice covers and dyadic block nets for sparse unit vectors.

The block net ``B_m`` discretizes the m-sparse part of the Euclidean sphere
in R^N: a member is supported on disjoint blocks of sizes 2, 2, 4, ..., m/2
and restricts on each block to a member of a fixed lattice cover of that
block's ball (the leading block) or box-capped ball (the later blocks).
Snapping the dyadic blocks of the monotone rearrangement of an m-sparse unit
vector onto these covers approximates it within m/N in Euclidean norm — an
exact guarantee, not a tolerance, which is why the covers are constructed
lattices rather than greedy nets over random points.

The leading (top-two-coordinates) block is covered WITHOUT a sup-norm cap:
the two largest coordinates of a unit vector are not sup-bounded by 1/sqrt(2)
in general (a single spike has a coordinate equal to 1), and the exact m/N
guarantee forces the full ball there.  Every later block genuinely satisfies
the cap: entries of rank above 2^r cannot exceed (2^r + 1)^{-1/2}.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from ._rng import stream

_COVER_BUDGET = 2_000_000


@dataclass(frozen=True)
class BlockNetParams:
    """Shape of a block net: ambient length N and block budget m = 2**r0."""

    N: int
    m: int

    def __post_init__(self):
        if self.N < 4:
            raise ValueError(f"need N >= 4, got {self.N}")
        if self.m < 2 or self.m & (self.m - 1):
            raise ValueError(f"m must be a power of two >= 2, got {self.m}")
        if self.m > self.N // 2:
            raise ValueError(f"m={self.m} exceeds N/2 with N={self.N}")

    @property
    def r0(self) -> int:
        return self.m.bit_length() - 1

    @property
    def block_sizes(self) -> tuple[int, ...]:
        """Sizes (2, 2, 4, ..., 2**(r0-1)); they sum to m."""
        return (2,) + tuple(2**r for r in range(1, self.r0))

    def eps(self, block_len: int) -> float:
        """Per-level cover tolerance: a block of length l is covered at l/N."""
        return block_len / self.N

    @property
    def norm_cap(self) -> float:
        return 1.0 + self.m / self.N


@dataclass(frozen=True)
class BlockVector:
    """A member of the block net: disjoint support blocks plus local covers."""

    blocks: tuple[tuple[int, ...], ...]
    members: tuple[np.ndarray, ...]
    vector: np.ndarray

    @property
    def support_size(self) -> int:
        return int(np.count_nonzero(self.vector))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))

    def to_json(self) -> str:
        return json.dumps(
            {
                "blocks": [list(b) for b in self.blocks],
                "members": [m.tolist() for m in self.members],
            }
        )


def _lattice_points(dim: int, radius: float, h: float, budget: int):
    """All points of (h Z)^dim with Euclidean norm <= radius, by DFS."""
    out = []
    point = np.zeros(dim)

    def rec(j: int, rem_sq: float):
        if j == dim - 1:
            kmax = int(math.floor(math.sqrt(max(rem_sq, 0.0)) / h))
            for k in range(-kmax, kmax + 1):
                point[j] = k * h
                out.append(point.copy())
                if len(out) > budget:
                    raise ValueError(
                        f"lattice cover exceeds budget of {budget} points")
            return
        kmax = int(math.floor(math.sqrt(max(rem_sq, 0.0)) / h))
        for k in range(-kmax, kmax + 1):
            point[j] = k * h
            rec(j + 1, rem_sq - (k * h) ** 2)

    rec(0, radius * radius)
    return np.array(out)


def _dedup(points: np.ndarray) -> np.ndarray:
    return np.unique(points.round(12) + 0.0, axis=0)  # +0.0 clears -0.0


def cover_ball(dim: int, eps: float, budget: int = _COVER_BUDGET) -> np.ndarray:
    """A certified eps-cover of the Euclidean unit ball in ``dim`` dimensions.

    The cover is the axis-aligned lattice of spacing eps/sqrt(dim),
    restricted to the (1+eps)-ball and radially projected onto the unit
    ball.  Rounding a target to the lattice costs at most eps/2 and the
    projection only contracts distances to points of the ball, so this is in
    fact an (eps/2)-cover.

    Parameters
    ----------
    dim : int
        1 <= dim <= 24.
    eps : float
        0 < eps <= 1.
    budget : int
        Hard cap on lattice cardinality; exceeded => ValueError.

    Returns
    -------
    ndarray of shape (count, dim)
    """
    if not 1 <= dim <= 24:
        raise ValueError(f"cover dimension must be in [1, 24], got {dim}")
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"cover tolerance must be in (0, 1], got {eps}")
    h = eps / math.sqrt(dim)
    pts = _lattice_points(dim, 1.0 + eps, h, budget)
    norms = np.linalg.norm(pts, axis=1)
    big = norms > 1.0
    pts[big] /= norms[big, None]
    return _dedup(pts)


def cover_capped_ball(dim: int, eps: float, cap: float,
                      budget: int = _COVER_BUDGET) -> np.ndarray:
    """eps-cover of {z in unit ball : ||z||_inf <= cap}.

    Same lattice as :func:`cover_ball` but clamped into the sup-norm box
    before projecting; clamping and projecting both contract distances to
    targets of the capped ball, so the eps/2 rounding bound survives.
    """
    if not 1 <= dim <= 24:
        raise ValueError(f"cover dimension must be in [1, 24], got {dim}")
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"cover tolerance must be in (0, 1], got {eps}")
    h = eps / math.sqrt(dim)
    pts = _lattice_points(dim, 1.0 + eps, h, budget)
    np.clip(pts, -cap, cap, out=pts)
    norms = np.linalg.norm(pts, axis=1)
    big = norms > 1.0
    pts[big] /= norms[big, None]
    return _dedup(pts)


def _block_cover(block_len: int, eps: float, leading: bool) -> np.ndarray:
    if leading:
        return cover_ball(block_len, eps)
    return cover_capped_ball(block_len, eps, block_len ** -0.5)


def _snap_block(u: np.ndarray, eps: float, leading: bool) -> np.ndarray:
    """Snap a block of a unit vector onto its lattice cover member."""
    dim = u.size
    h = eps / math.sqrt(dim)
    y = np.round(u / h) * h
    if not leading:
        np.clip(y, -(dim**-0.5), dim**-0.5, out=y)
    nrm = np.linalg.norm(y)
    if nrm > 1.0:
        y /= nrm
    return y + 0.0  # +0.0 clears -0.0 so members byte-match the cover


def log_cardinality(params: BlockNetParams) -> float:
    """log of the product-structure size of the block net.

    Counts support patterns times per-block cover sizes.  The global norm
    filter applied during enumeration can only shrink the net, so this is an
    upper bound on the enumerated cardinality; it is the quantity compared
    against m*log(eN/m) in the scaling checks.
    """
    N = params.N
    total = 0.0
    remaining = N
    for size in params.block_sizes:
        total += math.log(math.comb(remaining, size))
        remaining -= size
    for k, size in enumerate(params.block_sizes):
        cov = _block_cover(size, params.eps(size), leading=(k == 0))
        total += math.log(len(cov))
    return total


def build_block_net(params: BlockNetParams, sample: int | None = None,
                    seed: int = 0, budget: int = _COVER_BUDGET):
    """Yield members of the block net, exhaustively or by uniform sampling.

    Parameters
    ----------
    params : BlockNetParams
    sample : int, optional
        If given, yield this many members sampled uniformly from the
        product structure (support pattern and per-block cover members),
        rejecting the few that violate the global norm cap.  Without it the
        full product is enumerated, which requires the estimated
        cardinality to fit the budget.
    seed : int
        Seed for sampled access.
    budget : int
        Enumeration cap.

    Yields
    ------
    BlockVector
        Every yielded member satisfies: support size <= m, per-block
        sup-norm caps on non-leading blocks, Euclidean norm <= 1 + m/N.
    """
    N = params.N
    sizes = params.block_sizes
    covers = [
        _block_cover(size, params.eps(size), leading=(k == 0))
        for k, size in enumerate(sizes)
    ]

    def assemble(supports, choice):
        v = np.zeros(N)
        members = []
        for idx, member in zip(supports, choice):
            v[list(idx)] = member
            members.append(np.asarray(member))
        return BlockVector(tuple(tuple(s) for s in supports),
                           tuple(members), v)

    if sample is not None:
        if sample < 1:
            raise ValueError("sample count must be positive")
        produced = 0
        attempt = 0
        while produced < sample:
            rng = stream(seed, attempt)
            attempt += 1
            if attempt > 1000 * sample:
                raise RuntimeError("rejection sampling failed to make progress")
            perm = rng.permutation(N)
            supports, at = [], 0
            for size in sizes:
                supports.append(np.sort(perm[at:at + size]))
                at += size
            choice = [cov[rng.integers(len(cov))] for cov in covers]
            bv = assemble(supports, choice)
            if bv.norm <= params.norm_cap + 1e-12:
                produced += 1
                yield bv
        return

    est = math.exp(min(log_cardinality(params), 700.0))
    if est > budget:
        raise ValueError(
            f"full enumeration of ~{est:.2e} members exceeds budget {budget}; "
            f"pass sample= for sampled access")

    def support_patterns(avail, k):
        if k == len(sizes):
            yield []
            return
        for pick in itertools.combinations(avail, sizes[k]):
            rest = [i for i in avail if i not in pick]
            for tail in support_patterns(rest, k + 1):
                yield [pick] + tail

    for supports in support_patterns(list(range(N)), 0):
        for choice in itertools.product(*covers):
            bv = assemble(supports, choice)
            if bv.norm <= params.norm_cap + 1e-12:
                yield bv


def approximate_in_block_net(v, params: BlockNetParams):
    """Snap an m-sparse vector of the unit ball onto the block net.

    The monotone rearrangement of ``v`` is cut into dyadic blocks (top two
    coordinates, then sizes 2, 4, ..., m/2, ties broken by lowest original
    index) and each block is snapped to its lattice cover.  Block ``r``
    carries tolerance |I_r|/N and rounding costs at most half of that, so
    the total error is at most (2 + sum 2^r)/(2N) <= m/N — exactly, with no
    tolerance.

    Parameters
    ----------
    v : array_like of length N
        ||v||_2 <= 1 with at most m nonzero entries.
    params : BlockNetParams

    Returns
    -------
    (BlockVector, float)
        The net member and the achieved Euclidean error.
    """
    v = np.asarray(v, dtype=float).ravel()
    N, m = params.N, params.m
    if v.size != N:
        raise ValueError(f"vector length {v.size} != N={N}")
    nrm = np.linalg.norm(v)
    if nrm > 1.0 + 1e-12:
        raise ValueError(f"vector norm {nrm:.6f} exceeds 1")
    if np.count_nonzero(v) > m:
        raise ValueError(
            f"vector has {np.count_nonzero(v)} nonzeros, budget is m={m}")

    order = np.argsort(-np.abs(v), kind="stable")
    blocks, members = [], []
    out = np.zeros(N)
    at = 0
    for k, size in enumerate(params.block_sizes):
        idx = order[at:at + size]
        at += size
        snapped = _snap_block(v[idx], params.eps(size), leading=(k == 0))
        out[idx] = snapped
        blocks.append(tuple(int(i) for i in idx))
        members.append(snapped)
    bv = BlockVector(tuple(blocks), tuple(members), out)
    return bv, float(np.linalg.norm(v - out))


def covering_number(points, eps: float, metric="l2") -> int:
    """Greedy farthest-point cover size for a finite point set.

    Centers start at the first point; while any point sits farther than eps
    from all centers, the farthest such point (lowest index on ties) joins.
    The result covers the input at radius eps and upper-bounds the covering
    number of the sampled set.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.size == 0:
        raise ValueError("empty point set")
    if callable(metric):
        dist_to = lambda c: np.array([metric(p, c) for p in pts])
    elif metric == "l2":
        dist_to = lambda c: np.linalg.norm(pts - c, axis=1)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    mindist = dist_to(pts[0])
    count = 1
    while True:
        far = int(np.argmax(mindist))
        if mindist[far] <= eps:
            return count
        count += 1
        mindist = np.minimum(mindist, dist_to(pts[far]))


@dataclass(frozen=True)
class LinearizationReport:
    """Both sides of the net-linearization inequality D_m <= 2 sup_{B_m}."""

    d_m: float
    net_sup: float
    ratio: float
    members: int


def linearization_check(X, index_class, m: int,
                        budget: int = _COVER_BUDGET) -> LinearizationReport:
    """Compare the coordinate diameter D_m against the block-net supremum.

    ``D_m`` is the largest Euclidean norm of m coordinates of a class
    member's sample vector; the net side is sup over the block net of
    sum_i v_i f(X_i).  Reports both and their ratio (the guarantee is
    D_m <= 2 * sup).

    The sphere class is handled in closed form (submatrix singular values
    for D_m, ||X^T v||_2 for the net side); finite classes by direct
    evaluation.
    """
    from .complexity import IndexClass, class_rows  # local: avoid cycle

    if not isinstance(index_class, IndexClass):
        raise TypeError("index_class must be an IndexClass")
    mat = X.matrix if hasattr(X, "matrix") else np.asarray(X, dtype=float)
    N = mat.shape[0]
    params = BlockNetParams(N, m)

    if index_class.variant == "sphere":
        d_m = 0.0
        for idx in itertools.combinations(range(N), m):
            sub = mat[list(idx)]
            d_m = max(d_m, float(np.linalg.svd(sub, compute_uv=False)[0]))
        d_m *= index_class.radius
        net_sup, members = 0.0, 0
        for bv in build_block_net(params, budget=budget):
            members += 1
            net_sup = max(net_sup, float(np.linalg.norm(mat.T @ bv.vector)))
        net_sup *= index_class.radius
    else:
        rows = class_rows(index_class, mat)  # (F, N)
        if rows.shape[0] == 0:
            raise ValueError("empty index class")
        topm = -np.sort(-np.abs(rows), axis=1)[:, :m]
        d_m = float(np.max(np.linalg.norm(topm, axis=1)))
        net_sup, members = 0.0, 0
        for bv in build_block_net(params, budget=budget):
            members += 1
            net_sup = max(net_sup, float(np.max(rows @ bv.vector)))

    if net_sup > 0:
        ratio = d_m / net_sup
    else:
        ratio = 0.0 if d_m == 0 else math.inf
    return LinearizationReport(d_m, net_sup, ratio, members)
