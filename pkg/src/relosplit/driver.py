"""Generic relocated fixed-point iteration x_{n+1} = Q_{g_{n+1}<-g_n} T_{g_n} x_n.

The driver is agnostic to the ambient space: iterates may be plain 1-D
arrays or BlockVectors. Families bundle the parametrized operator T_gamma
with its averagedness constant; relocators bundle Q with a Lipschitz bound.
"""

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import FixedPointError, ParameterError, ScheduleError
from .linalg import BlockVector

STATUS_CONVERGED = "converged"
STATUS_MAX_ITERS = "max_iters"
STATUS_DIVERGED = "diverged"
STATUS_SCHEDULE_REJECTED = "schedule_rejected"


class ScheduleBudgetWarning(RuntimeWarning):
    """The accumulated positive stepsize increments exceeded their budget."""


class PositiveIncrementMonitor:
    """Accumulates (gamma_{n+1} - gamma_n)_+ and warns once above a budget.

    The summability hypothesis is asymptotic and cannot be certified from a
    finite run; the budget (default 1e3 * gamma_0) is a practical tripwire.
    """

    def __init__(self, gamma0, budget=None):
        self.budget = float(budget) if budget is not None else 1e3 * float(gamma0)
        self.total = 0.0
        self._warned = False

    def update(self, gamma, gamma_next):
        self.total += max(gamma_next - gamma, 0.0)
        if not self._warned and self.total > self.budget:
            self._warned = True
            warnings.warn(
                f"positive stepsize increments exceeded budget {self.budget:.3e}; "
                "the schedule may not satisfy the summability condition",
                ScheduleBudgetWarning,
                stacklevel=3,
            )
        return self.total


def ambient_norm(x):
    if isinstance(x, BlockVector):
        return x.norm()
    return float(np.linalg.norm(np.asarray(x, dtype=float)))


def ambient_flat(x):
    if isinstance(x, BlockVector):
        return x.ravel()
    return np.asarray(x, dtype=float).ravel().copy()


def ambient_isfinite(x):
    if isinstance(x, BlockVector):
        return bool(np.all(np.isfinite(x.data)))
    return bool(np.all(np.isfinite(np.asarray(x, dtype=float))))


@dataclass(frozen=True)
class StopRule:
    """Terminate when the run has converged, or after max_iters iterations.

    Convergence means the fixed-point residual ||x_n - T_{gamma_n} x_n|| is
    at most residual_tol AND the upcoming stepsize increment
    |gamma_{n+1} - gamma_n| is at most residual_tol * max(1, gamma_n). The
    second condition matters: an iterate sitting exactly on the moving
    fixed-point curve has residual zero at every n, yet it only approaches
    Fix T at the limit stepsize as the schedule settles.
    """

    residual_tol: float
    max_iters: int

    def __post_init__(self):
        if self.residual_tol <= 0:
            raise ParameterError("residual_tol must be positive")
        if self.max_iters < 1:
            raise ParameterError("max_iters must be >= 1")

    def settled(self, gamma, gamma_next):
        return abs(gamma_next - gamma) <= self.residual_tol * max(1.0, abs(gamma))


class OperatorFamily:
    """A stepsize-parametrized family (T_gamma) of averaged operators.

    apply(gamma, x) returns (T_gamma x, aux) where aux is a dict of
    auxiliary points produced during the evaluation (e.g. the resolvent
    sweep under key "z", and the monitored shadow point under "shadow").
    feedback(gamma, w), when provided, computes the pair (z, w_ref) fed to
    the adaptive stepsize rule.
    """

    def __init__(self, apply, averagedness_alpha, feedback=None, name=""):
        if not 0.0 < averagedness_alpha < 1.0:
            raise ParameterError("averagedness_alpha must lie in (0, 1)")
        self._apply = apply
        self.averagedness_alpha = float(averagedness_alpha)
        self._feedback = feedback
        self.name = name

    def apply(self, gamma, x):
        result, aux = self._apply(gamma, x)
        return result, (aux or {})

    def feedback(self, gamma, x):
        if self._feedback is None:
            raise ScheduleError(
                f"family {self.name or type(self).__name__} provides no feedback "
                "points; adaptive schedules are unavailable"
            )
        return self._feedback(gamma, x)

    @property
    def has_feedback(self):
        return self._feedback is not None


class Relocator:
    """A family Q_{delta<-gamma} mapping Fix T_gamma onto Fix T_delta.

    lipschitz_bound(gamma, delta) must return a global Lipschitz constant
    for Q_{delta<-gamma}; it equals 1 when delta == gamma.
    """

    def __init__(self, apply, lipschitz_bound, name=""):
        self._apply = apply
        self._bound = lipschitz_bound
        self.name = name

    def apply(self, gamma, delta, x):
        if gamma <= 0 or delta <= 0:
            raise ParameterError("relocator stepsizes must be positive")
        return self._apply(gamma, delta, x)

    def lipschitz_bound(self, gamma, delta):
        return float(self._bound(gamma, delta))


@dataclass
class ConvergenceTrace:
    """Per-iteration record of a run.

    residuals[n] is ||x_n - T_{gamma_n} x_n||; points[n] holds the flattened
    monitored (shadow) point when the family produces one. iterates keeps the
    governing x_n themselves for programmatic use; they are not serialized.
    """

    gammas: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    solution_residuals: list = field(default_factory=list)
    points: list = field(default_factory=list)
    iterates: list = field(default_factory=list)
    extra_scalars: dict = field(default_factory=dict)
    extra_vectors: dict = field(default_factory=dict)
    status: str = STATUS_MAX_ITERS
    sum_pos_increments: float = 0.0
    final_x: object = None
    seed: int | None = None

    def record(self, gamma, residual, solution_residual=None, point=None,
               iterate=None, scalars=None, vectors=None):
        self.gammas.append(float(gamma))
        self.residuals.append(float(residual))
        self.solution_residuals.append(
            float(solution_residual) if solution_residual is not None else math.nan
        )
        self.points.append(None if point is None else np.asarray(point, dtype=float).ravel())
        self.iterates.append(iterate)
        for key, value in (scalars or {}).items():
            self.extra_scalars.setdefault(key, []).append(float(value))
        for key, value in (vectors or {}).items():
            self.extra_vectors.setdefault(key, []).append(ambient_flat(value))

    def __len__(self):
        return len(self.residuals)

    @property
    def iterations(self):
        """Index of the last recorded iteration."""
        return len(self.residuals) - 1

    @property
    def final_residual(self):
        return self.residuals[-1] if self.residuals else math.nan

    @property
    def final_gamma(self):
        return self.gammas[-1] if self.gammas else math.nan

    def summary(self):
        out = {
            "status": self.status,
            "iters": self.iterations,
            "final_residual": self.final_residual,
            "final_gamma": self.final_gamma,
            "sum_pos_increments": self.sum_pos_increments,
        }
        if self.points and self.points[-1] is not None:
            out["final_point"] = [float(v) for v in self.points[-1]]
        last_solution = self.solution_residuals[-1] if self.solution_residuals else math.nan
        if not math.isnan(last_solution):
            out["final_solution_residual"] = last_solution
        if self.seed is not None:
            out["seed"] = self.seed
        return out

    def _csv_header(self):
        header = ["n", "gamma", "residual", "solution_residual"]
        point_dim = 0
        for p in self.points:
            if p is not None:
                point_dim = len(p)
                break
        header += [f"point_{i}" for i in range(point_dim)]
        for key in self.extra_scalars:
            header.append(key)
        for key, series in self.extra_vectors.items():
            header += [f"{key}_{i}" for i in range(len(series[0]))]
        return header, point_dim

    def write_csv(self, path_or_file):
        """Serialize the trace; floats carry 17 significant digits."""
        header, point_dim = self._csv_header()

        def fmt(v):
            return format(float(v), ".17g")

        def emit(fh):
            writer = csv.writer(fh)
            writer.writerow(header)
            for n in range(len(self.residuals)):
                row = [str(n), fmt(self.gammas[n]), fmt(self.residuals[n]),
                       fmt(self.solution_residuals[n])]
                point = self.points[n]
                if point_dim:
                    row += [fmt(v) for v in (point if point is not None
                                             else [math.nan] * point_dim)]
                # step-indexed series (e.g. relocator bounds) are one entry
                # shorter than the trace; pad the missing tail with nan
                for series in self.extra_scalars.values():
                    row.append(fmt(series[n] if n < len(series) else math.nan))
                for series in self.extra_vectors.values():
                    if n < len(series):
                        row += [fmt(v) for v in series[n]]
                    else:
                        row += [fmt(math.nan)] * len(series[0])
                writer.writerow(row)

        if hasattr(path_or_file, "write"):
            emit(path_or_file)
        else:
            with open(path_or_file, "w", newline="") as fh:
                emit(fh)


def run_relocated(family, relocator, schedule, x0, stop, solution_residual=None,
                  anchor0=None, pos_increment_budget=None):
    """Run the relocated fixed-point iteration until the stop rule fires.

    solution_residual, when given, is called on the shadow point (or the
    iterate itself when the family has no shadow) and recorded per iteration.
    anchor0, when given, must be a fixed point of T_{gamma_0}; it is relocated
    alongside the run and the distances ||x_n - c_n|| are recorded together
    with the relocator bounds, mirroring the decrease inequality of the
    convergence proof.
    """
    schedule.reset()
    gamma = schedule.gamma_at(0)
    trace = ConvergenceTrace()
    if gamma <= 0 or not np.isfinite(gamma):
        trace.status = STATUS_SCHEDULE_REJECTED
        trace.final_x = x0
        return trace
    monitor = PositiveIncrementMonitor(gamma, pos_increment_budget)

    x = x0
    anchor = anchor0
    for n in range(stop.max_iters + 1):
        w, aux = family.apply(gamma, x)
        residual = ambient_norm(x - w)
        shadow = aux.get("shadow")
        monitored = shadow if shadow is not None else x
        sol = None
        if solution_residual is not None:
            sol = solution_residual(monitored)
        scalars = {}
        if anchor is not None:
            scalars["anchor_distance"] = ambient_norm(x - anchor)
        trace.record(gamma, residual, sol, point=ambient_flat(monitored),
                     iterate=x, scalars=scalars or None)

        gamma_next = None
        settled = True
        if n < stop.max_iters:
            feedback = None
            if schedule.is_adaptive:
                z_fb, w_fb = family.feedback(gamma, w)
                feedback = (ambient_flat(z_fb), ambient_flat(w_fb))
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

        if anchor is not None:
            bound = relocator.lipschitz_bound(gamma, gamma_next)
            trace.extra_scalars.setdefault("relocator_bound", []).append(bound)
            anchor = relocator.apply(gamma, gamma_next, anchor)

        x = relocator.apply(gamma, gamma_next, w)
        if not ambient_isfinite(x):
            trace.status = STATUS_DIVERGED
            break
        gamma = gamma_next

    trace.final_x = x
    return trace


@dataclass
class RelocatorAxiomReport:
    """Outcome of the fixed-point relocator axiom harness."""

    bijection_ok: bool
    continuity_ok: bool
    semigroup_ok: bool
    lipschitz_ok: bool
    continuity_modulus: float
    max_lipschitz_ratio_excess: float
    violations: list = field(default_factory=list)

    @property
    def passed(self):
        return (self.bijection_ok and self.continuity_ok and self.semigroup_ok
                and self.lipschitz_ok)

    def to_dict(self):
        return {
            "bijection_ok": self.bijection_ok,
            "continuity_ok": self.continuity_ok,
            "semigroup_ok": self.semigroup_ok,
            "lipschitz_ok": self.lipschitz_ok,
            "continuity_modulus": self.continuity_modulus,
            "max_lipschitz_ratio_excess": self.max_lipschitz_ratio_excess,
            "violations": list(self.violations),
            "passed": self.passed,
        }


def _perturb(x, rng, scale):
    if isinstance(x, BlockVector):
        return BlockVector(x.data + scale * rng.standard_normal(x.data.shape))
    return np.asarray(x, dtype=float) + scale * rng.standard_normal(np.shape(x))


def check_relocator_axioms(family, relocator, fixed_points, gammas, tol=1e-9,
                           rng=None, lipschitz_samples=40, continuity_points=60):
    """Check the four fixed-point relocator axioms on sampled data.

    fixed_points is a list of pairs (gamma, x) with x in Fix T_gamma; each is
    verified against the residual test up front (FixedPointError otherwise).
    The checks performed over the gamma grid are: relocated points are fixed
    points and the reverse relocation inverts (bijection); delta -> Q x has a
    finite difference quotient on a fine grid (continuity); compositions
    collapse (semigroup); and sampled Lipschitz ratios stay within the
    declared bound (up to tol).
    """
    if rng is None:
        rng = np.random.default_rng(0)
    gammas = [float(g) for g in gammas]
    if not gammas or not fixed_points:
        raise ParameterError("need at least one gamma and one fixed point")

    for g, x in fixed_points:
        w, _ = family.apply(g, x)
        resid = ambient_norm(x - w)
        if resid > tol:
            raise FixedPointError(
                f"supplied pair (gamma={g}, x={ambient_flat(x)}) has "
                f"fixed-point residual {resid:.3e} > {tol}"
            )

    violations = []
    bijection_ok = True
    semigroup_ok = True
    lipschitz_ok = True
    continuity_modulus = 0.0
    max_excess = -math.inf

    for g, x in fixed_points:
        for d in gammas:
            y = relocator.apply(g, d, x)
            resid = ambient_norm(y - family.apply(d, y)[0])
            if resid > tol:
                bijection_ok = False
                violations.append(
                    f"Q_({d}<-{g}) image has fixed-point residual {resid:.3e}"
                )
            back = relocator.apply(d, g, y)
            if ambient_norm(back - x) > tol:
                bijection_ok = False
                violations.append(
                    f"Q_({g}<-{d}) Q_({d}<-{g}) differs from identity at gamma={g}"
                )
            for e in gammas:
                composed = relocator.apply(d, e, y)
                direct = relocator.apply(g, e, x)
                if ambient_norm(composed - direct) > tol:
                    semigroup_ok = False
                    violations.append(
                        f"semigroup fails for ({e}<-{d})({d}<-{g}) vs ({e}<-{g})"
                    )

        grid = np.linspace(min(gammas), max(gammas), continuity_points)
        images = [relocator.apply(g, float(d), x) for d in grid]
        for a, b, da, db in zip(images, images[1:], grid, grid[1:]):
            slope = ambient_norm(b - a) / (db - da)
            continuity_modulus = max(continuity_modulus, slope)
    continuity_ok = math.isfinite(continuity_modulus)
    if not continuity_ok:
        violations.append("delta -> Q x is not finitely Lipschitz on the grid")

    base_points = [x for _, x in fixed_points]
    for g in sorted({g for g, _ in fixed_points}):
        for d in gammas:
            bound = relocator.lipschitz_bound(g, d)
            for _ in range(lipschitz_samples):
                base = base_points[rng.integers(len(base_points))]
                u = _perturb(base, rng, scale=2.0)
                v = _perturb(base, rng, scale=2.0)
                denom = ambient_norm(u - v)
                if denom == 0.0:
                    continue
                ratio = ambient_norm(relocator.apply(g, d, u) - relocator.apply(g, d, v)) / denom
                max_excess = max(max_excess, ratio - bound)
                if ratio > bound + tol:
                    lipschitz_ok = False
                    violations.append(
                        f"Lipschitz ratio {ratio:.6f} exceeds bound {bound:.6f} "
                        f"for ({d}<-{g})"
                    )

    return RelocatorAxiomReport(
        bijection_ok=bijection_ok,
        continuity_ok=continuity_ok,
        semigroup_ok=semigroup_ok,
        lipschitz_ok=lipschitz_ok,
        continuity_modulus=continuity_modulus,
        max_lipschitz_ratio_excess=max_excess,
        violations=violations,
    )
