"""Graph-based Douglas-Rachford splitting for N >= 2 operators.

A splitting graph is a connected arc-ordered digraph G = (nodes, E) together
with a spanning tree G' = (nodes, E'); arcs always point from the smaller to
the larger node index, which makes the resolvent sweep below well defined
(node i only consumes z_h with h < i).

Conventions used throughout (the degree symbol is overloaded in parts of the
literature, so they are pinned here):

* the sweep, the relocation vector e and the Lipschitz recursion use the
  degree d_i of node i in the FULL graph G;
* the Laplacian is that of the spanning tree, L = Z Z^T with Z the incidence
  matrix of E' (columns in lexicographic arc order), so its diagonal carries
  the tree degrees.

This is the only assignment under which the ring specialization (all d_i = 2)
and the identity L = Z Z^T hold simultaneously.
"""

from dataclasses import dataclass

import numpy as np

from .driver import (
    STATUS_CONVERGED,
    STATUS_DIVERGED,
    STATUS_MAX_ITERS,
    STATUS_SCHEDULE_REJECTED,
    ConvergenceTrace,
    OperatorFamily,
    PositiveIncrementMonitor,
    Relocator,
)
from .errors import (
    ConsistencyError,
    ConstructionError,
    DimensionError,
    InfeasibleError,
    ParameterError,
)
from .linalg import BlockVector, kron_apply, pseudo_inverse
from .operators import AffineMonotone, CountingOperator, Scaled, ScaledIdentity, Translated, Zero

_ALGEBRA_TOL = 1e-12


@dataclass(frozen=True)
class GraphMatrices:
    """Matrices derived from a splitting graph.

    Z: tree incidence (N x N-1); L = Z Z^T; Zdag: pseudo-inverse of Z with
    operator norm Zdag_norm; R: skew part of the off-tree coupling; P: chord
    correction; M = C C^T with C^T = [Z^T  I].
    """

    Z: np.ndarray
    L: np.ndarray
    Zdag: np.ndarray
    Zdag_norm: float
    R: np.ndarray
    P: np.ndarray
    M: np.ndarray
    C: np.ndarray


class SplittingGraph:
    """Validated splitting graph with cached degrees and matrices.

    Nodes are 1-based in the public interface. Construction raises
    ConstructionError naming the violated invariant: backward or duplicate
    arcs, E' not a subset of E, E' not a spanning tree, or a disconnected G.
    """

    def __init__(self, n_nodes, arcs, tree_arcs):
        n = int(n_nodes)
        if n < 2:
            raise ConstructionError(f"need at least 2 nodes, got {n}")
        arcs = _normalize_arcs(n, arcs, "E")
        tree = _normalize_arcs(n, tree_arcs, "E'")
        if not set(tree) <= set(arcs):
            raise ConstructionError("E' must be a subset of E")
        if len(tree) != n - 1:
            raise ConstructionError(
                f"E' must contain exactly N-1 = {n - 1} arcs, got {len(tree)}"
            )
        if not _is_connected(n, tree):
            raise ConstructionError("E' is not spanning: (nodes, E') is disconnected")
        if not _is_connected(n, arcs):
            raise ConstructionError("(nodes, E) is disconnected")

        self.n_nodes = n
        self.arcs = arcs
        self.tree_arcs = tree
        self.deg = _degree_vector(n, arcs)
        self.indeg = np.array([sum(1 for (_, j) in arcs if j == i) for i in _nodes(n)])
        self.outdeg = np.array([sum(1 for (i_, _) in arcs if i_ == i) for i in _nodes(n)])
        self.tree_deg = _degree_vector(n, tree)
        chords = tuple(a for a in arcs if a not in set(tree))
        self.chord_arcs = chords
        self.chord_deg = _degree_vector(n, chords)
        self._in_arcs = [[h for (h, j) in arcs if j == i] for i in _nodes(n)]
        self._assert_degree_identities()
        self.matrices = _build_matrices(self)

    def in_neighbors(self, node):
        """Tails h of the arcs (h, node) of the full graph, 1-based."""
        return tuple(self._in_arcs[node - 1])

    def _assert_degree_identities(self):
        n_arcs = len(self.arcs)
        if int(self.deg.sum()) != 2 * n_arcs:
            raise ConsistencyError("sum of degrees != 2 |E|")
        if int(self.indeg.sum()) != n_arcs or int(self.outdeg.sum()) != n_arcs:
            raise ConsistencyError("in/out degree totals != |E|")
        if self.indeg[0] != 0:
            raise ConsistencyError("node 1 must have in-degree 0")

    def __repr__(self):
        return (f"SplittingGraph(N={self.n_nodes}, |E|={len(self.arcs)}, "
                f"|E'|={len(self.tree_arcs)})")


def _nodes(n):
    return range(1, n + 1)


def _degree_vector(n, arcs):
    deg = np.zeros(n, dtype=int)
    for (i, j) in arcs:
        deg[i - 1] += 1
        deg[j - 1] += 1
    return deg


def _normalize_arcs(n, arcs, label):
    seen = set()
    out = []
    for arc in arcs:
        arc = tuple(int(v) for v in arc)
        if len(arc) != 2:
            raise ConstructionError(f"{label}: arc {arc} is not a pair")
        i, j = arc
        if not (1 <= i <= n and 1 <= j <= n):
            raise ConstructionError(f"{label}: arc {arc} references a node outside 1..{n}")
        if i >= j:
            raise ConstructionError(
                f"{label}: arc {arc} violates the ordering rule i < j"
            )
        if arc in seen:
            raise ConstructionError(f"{label}: duplicate arc {arc}")
        seen.add(arc)
        out.append(arc)
    return tuple(sorted(out))


def _is_connected(n, arcs):
    if n == 1:
        return True
    adjacency = [[] for _ in range(n)]
    for (i, j) in arcs:
        adjacency[i - 1].append(j - 1)
        adjacency[j - 1].append(i - 1)
    seen = {0}
    stack = [0]
    while stack:
        v = stack.pop()
        for u in adjacency[v]:
            if u not in seen:
                seen.add(u)
                stack.append(u)
    return len(seen) == n


def build_graph(n_nodes, arcs, tree_arcs):
    """Validate and build a splitting graph from 1-based arc lists."""
    return SplittingGraph(n_nodes, arcs, tree_arcs)


def _build_matrices(g):
    n = g.n_nodes
    z = np.zeros((n, n - 1))
    for col, (i, j) in enumerate(g.tree_arcs):
        z[i - 1, col] = 1.0
        z[j - 1, col] = -1.0
    lap = z @ z.T

    r = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            r[i, j] = lap[i, j] if i > j else -lap[i, j]

    p = np.diag(g.chord_deg.astype(float))
    for (i, j) in g.chord_arcs:
        p[j - 1, i - 1] = -2.0

    c = np.vstack([z, np.eye(n - 1)])
    m = np.block([[lap, z], [z.T, np.eye(n - 1)]])

    zdag, zdag_norm = pseudo_inverse(z)

    checks = {
        "L = Z Z^T": np.max(np.abs(lap - z @ z.T)),
        "M = C C^T": np.max(np.abs(m - c @ c.T)),
        "R skew": np.max(np.abs(r + r.T)),
        "Z^T 1 = 0": np.max(np.abs(z.T @ np.ones(n))),
    }
    for label, err in checks.items():
        if err > _ALGEBRA_TOL:
            raise ConsistencyError(f"graph algebra identity {label} off by {err:.3e}")

    return GraphMatrices(Z=z, L=lap, Zdag=zdag, Zdag_norm=zdag_norm, R=r, P=p, M=m, C=c)


def graph_matrices(g):
    """The cached GraphMatrices of a built graph."""
    return g.matrices


def _check_ops(ops, g):
    if len(ops) != g.n_nodes:
        raise DimensionError(
            f"graph has {g.n_nodes} nodes but {len(ops)} operators were given"
        )
    dims = {op.dim for op in ops}
    if len(dims) != 1:
        raise DimensionError(f"operators act on mixed dimensions {sorted(dims)}")


def _check_x(x, g):
    if not isinstance(x, BlockVector):
        x = BlockVector(x)
    if x.nblocks != g.n_nodes - 1:
        raise DimensionError(
            f"governing iterate needs {g.n_nodes - 1} blocks, got {x.nblocks}"
        )
    return x


def graph_z_sweep(ops, g, gamma, x):
    """The forward resolvent sweep z_1, ..., z_N driven by x.

    z_i = J_{(gamma/d_i) A_i}( (2/d_i) sum_{(h,i) in E} z_h
                               + (1/d_i) sum_j Z_ij x_j ),
    evaluated in node order; the arc ordering guarantees every needed z_h is
    already available. Exactly one resolvent per operator.
    """
    if gamma <= 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    _check_ops(ops, g)
    x = _check_x(x, g)
    z_mat = g.matrices.Z
    blocks = []
    for i in _nodes(g.n_nodes):
        d_i = float(g.deg[i - 1])
        u = np.zeros(x.dim)
        for h in g.in_neighbors(i):
            u += 2.0 * blocks[h - 1]
        u += z_mat[i - 1] @ x.data
        u /= d_i
        blocks.append(ops[i - 1].resolvent(gamma / d_i, u))
    return BlockVector.from_blocks(blocks)


def graph_dr_apply(ops, g, gamma, theta, x):
    """One graph-DR step T_gamma x = x - theta (Z^T kron I) z; returns (w, z)."""
    if not 0.0 < theta < 2.0:
        raise ParameterError(f"theta must lie in (0, 2), got {theta}")
    x = _check_x(x, g)
    z = graph_z_sweep(ops, g, gamma, x)
    w = x - theta * kron_apply(g.matrices.Z.T, z)
    return w, z


def relocation_vector_e(g, z):
    """The mean-free relocation vector built from a sweep output.

    Component i is (d_i - 2 d_i^+) z_i minus the blockwise mean of those
    terms, so the blocks always sum to zero and the vector lies in Im(Z).
    For node 1 the coefficient equals d_1 because d_1^+ = 0.
    """
    if not isinstance(z, BlockVector):
        z = BlockVector(z)
    if z.nblocks != g.n_nodes:
        raise DimensionError(f"expected {g.n_nodes} blocks, got {z.nblocks}")
    coeff = (g.deg - 2 * g.indeg).astype(float)
    raw = coeff[:, None] * z.data
    mean = raw.sum(axis=0) / g.n_nodes
    return BlockVector(raw - mean[None, :])


def graph_relocator_apply(ops, g, gamma, delta, x):
    """Q_{delta<-gamma} x = (delta/gamma) x + (1 - delta/gamma) Zdag e(x).

    e(x) is built from the sweep of x at gamma, so a relocation costs one
    full sweep (N resolvents) unless delta == gamma, where Q is the identity.
    """
    if gamma <= 0 or delta <= 0:
        raise ParameterError("gamma and delta must be positive")
    x = _check_x(x, g)
    ratio = delta / gamma
    if ratio == 1.0:
        return x
    z = graph_z_sweep(ops, g, gamma, x)
    e = relocation_vector_e(g, z)
    return ratio * x + (1.0 - ratio) * kron_apply(g.matrices.Zdag, e)


def relocator_system_residual(ops, g, gamma, delta, x, y=None):
    """Residual of the relocation system Z y = (delta/gamma) Z x + (1 - delta/gamma) e(x).

    When y is omitted it is computed with graph_relocator_apply; the residual
    then measures how exactly the pseudo-inverse solves the system.
    """
    x = _check_x(x, g)
    if y is None:
        y = graph_relocator_apply(ops, g, gamma, delta, x)
    else:
        y = _check_x(y, g)
    ratio = delta / gamma
    z = graph_z_sweep(ops, g, gamma, x)
    e = relocation_vector_e(g, z)
    z_mat = g.matrices.Z
    lhs = kron_apply(z_mat, y)
    rhs = ratio * kron_apply(z_mat, x) + (1.0 - ratio) * e
    return (lhs - rhs).norm()


def graph_relocator_lipschitz_bound(g, zdag_norm, gamma, delta):
    """Upper bound on the Lipschitz constant of the graph relocator.

    Uses the sweep recursion L_1 = ||Z row 1||, L_i = 2 sum_{(h,i) in E}
    L_h / d_h + ||Z row i||, then
    delta/gamma + |1 - delta/gamma| * ||Zdag|| * sqrt(sum ((d_i - 2 d_i^+)^2
    / d_i^2) L_i^2).
    """
    if gamma <= 0 or delta <= 0:
        raise ParameterError("gamma and delta must be positive")
    z_mat = g.matrices.Z
    row_norms = np.linalg.norm(z_mat, axis=1)
    lips = []
    for i in _nodes(g.n_nodes):
        acc = row_norms[i - 1]
        for h in g.in_neighbors(i):
            acc += 2.0 * lips[h - 1] / g.deg[h - 1]
        lips.append(acc)
    coeff = (g.deg - 2 * g.indeg).astype(float) / g.deg
    radicand = float(np.sum((coeff * np.array(lips)) ** 2))
    ratio = delta / gamma
    return ratio + abs(1.0 - ratio) * zdag_norm * np.sqrt(radicand)


def consensus_point(z):
    """Blockwise mean of a sweep output, the natural solution estimate."""
    if not isinstance(z, BlockVector):
        z = BlockVector(z)
    return z.data.mean(axis=0)


def graph_family(ops, g, theta):
    """The graph-DR operators as a driver family (theta/2-averaged)."""

    def apply(gamma, x):
        w, z = graph_dr_apply(ops, g, gamma, theta, x)
        return w, {"z": z, "shadow": z}

    def feedback(gamma, w):
        zw = graph_z_sweep(ops, g, gamma, w)
        return zw.block(0), w.block(0)

    return OperatorFamily(apply, averagedness_alpha=theta / 2.0, feedback=feedback,
                          name="graph_dr")


def graph_relocator(ops, g):
    """The pseudo-inverse relocator as a driver relocator."""
    zdag_norm = g.matrices.Zdag_norm
    return Relocator(
        lambda gamma, delta, x: graph_relocator_apply(ops, g, gamma, delta, x),
        lambda gamma, delta: graph_relocator_lipschitz_bound(g, zdag_norm, gamma, delta),
        name="graph_dr",
    )


def graph_relocated_run(ops, g, theta, schedule, x0, stop, solution_residual=None,
                        pos_increment_budget=None):
    """Relocated graph-DR run.

    Per iteration: one sweep for the operator step and, when the stepsize
    actually changes, a second sweep inside the relocation. The trace records
    the consensus residual ||Z^T z_n|| and the per-block sweep points; the
    solution residual, when requested, is evaluated at the blockwise mean of
    the sweep.
    """
    if not 0.0 < theta < 2.0:
        raise ParameterError(f"theta must lie in (0, 2), got {theta}")
    _check_ops(ops, g)
    schedule.reset()
    trace = ConvergenceTrace()
    gamma = schedule.gamma_at(0)
    x = _check_x(x0, g)
    if gamma <= 0 or not np.isfinite(gamma):
        trace.status = STATUS_SCHEDULE_REJECTED
        trace.final_x = x
        return trace
    monitor = PositiveIncrementMonitor(gamma, pos_increment_budget)
    zdag = g.matrices.Zdag
    z_t = g.matrices.Z.T

    for n in range(stop.max_iters + 1):
        z = graph_z_sweep(ops, g, gamma, x)
        disagreement = kron_apply(z_t, z)
        w = x - theta * disagreement
        residual = float((x - w).norm())
        consensus = disagreement.norm()
        sol = None
        if solution_residual is not None:
            sol = solution_residual(consensus_point(z))
        trace.record(gamma, residual, sol, point=z.ravel(), iterate=x,
                     scalars={"consensus_residual": consensus})

        gamma_next = None
        zw = None
        settled = True
        if n < stop.max_iters:
            feedback = None
            if schedule.is_adaptive:
                zw = graph_z_sweep(ops, g, gamma, w)
                feedback = (zw.block(0), w.block(0))
            gamma_next = schedule.gamma_at(n + 1, feedback=feedback)
            if gamma_next <= 0 or not np.isfinite(gamma_next):
                trace.status = STATUS_SCHEDULE_REJECTED
                break
            settled = stop.settled(gamma, gamma_next)
        if residual <= stop.residual_tol and settled:
            trace.status = STATUS_CONVERGED
            break
        if n == stop.max_iters:
            trace.status = STATUS_MAX_ITERS
            break
        trace.sum_pos_increments = monitor.update(gamma, gamma_next)

        ratio = gamma_next / gamma
        if ratio == 1.0:
            x = w
        else:
            if zw is None:
                zw = graph_z_sweep(ops, g, gamma, w)
            e = relocation_vector_e(g, zw)
            x = ratio * w + (1.0 - ratio) * kron_apply(zdag, e)
        if not np.all(np.isfinite(x.data)):
            trace.status = STATUS_DIVERGED
            break
        gamma = gamma_next

    trace.final_x = x
    return trace


def _affine_parts(op):
    """Represent an operator as u -> M u + b, or raise ParameterError."""
    if isinstance(op, CountingOperator):
        return _affine_parts(op.inner)
    if isinstance(op, Zero):
        return np.zeros((op.dim, op.dim)), np.zeros(op.dim)
    if isinstance(op, ScaledIdentity):
        return op.lam * np.eye(op.dim), np.zeros(op.dim)
    if isinstance(op, AffineMonotone):
        return op.matrix.copy(), op.offset.copy()
    if isinstance(op, Scaled):
        m, b = _affine_parts(op.inner)
        return op.sigma * m, op.sigma * b
    if isinstance(op, Translated):
        m, b = _affine_parts(op.inner)
        return m, b - m @ op.shift
    raise ParameterError(
        f"the affine fixed-point oracle requires affine operators, got {op!r}"
    )


def fix_point_oracle_affine(ops, g, gamma, tol=1e-8):
    """A fixed point of T_gamma for affine instances, plus the consensus zero.

    Solves the stacked linear system gamma (M_i z_i + b_i) + ((R + P) z)_i
    = (Z v)_i, Z^T z = 0 in the least-squares sense (minimum-norm member
    when the solution set has positive dimension), returns (x, z_star) with
    x = v and z_star the consensus block, and verifies the fixed-point
    residual via graph_dr_apply. Raises InfeasibleError when the system is
    inconsistent, i.e. the operators have no common zero.
    """
    if gamma <= 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    _check_ops(ops, g)
    n = g.n_nodes
    d = ops[0].dim
    parts = [_affine_parts(op) for op in ops]
    eye_d = np.eye(d)
    mats = g.matrices

    size = (2 * n - 1) * d
    system = np.zeros((size, size))
    rhs = np.zeros(size)
    system[: n * d, : n * d] = np.kron(mats.R + mats.P, eye_d)
    for i, (m_i, b_i) in enumerate(parts):
        system[i * d:(i + 1) * d, i * d:(i + 1) * d] += gamma * m_i
        rhs[i * d:(i + 1) * d] = -gamma * b_i
    system[: n * d, n * d:] = -np.kron(mats.Z, eye_d)
    system[n * d:, : n * d] = np.kron(mats.Z.T, eye_d)

    solution, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    residual = np.linalg.norm(system @ solution - rhs)
    if residual > tol * (1.0 + np.linalg.norm(rhs)):
        raise InfeasibleError(
            f"stacked system residual {residual:.3e}: the operators admit no "
            "common zero"
        )

    z_blocks = solution[: n * d].reshape(n, d)
    v_blocks = solution[n * d:].reshape(n - 1, d)
    z_star = z_blocks.mean(axis=0)
    spread = np.max(np.abs(z_blocks - z_star[None, :]))
    if spread > tol * (1.0 + np.linalg.norm(z_star)):
        raise ConsistencyError(
            f"zero of the stacked system is not consensus (spread {spread:.3e})"
        )

    x = BlockVector(v_blocks)
    w, _ = graph_dr_apply(ops, g, gamma, 1.0, x)
    fix_resid = (x - w).norm()
    if fix_resid > 1e-8:
        raise ConsistencyError(
            f"oracle point fails the fixed-point test (residual {fix_resid:.3e})"
        )
    return x, z_star
