"""Two-operator Douglas-Rachford with variable stepsizes.

The iteration operator is T_gamma = Id - J_{gamma A} + J_{gamma B} R_{gamma A}
and its fixed points are {z + gamma w : w in Az, -w in Bz}, so they move with
gamma. The relocator Q_{delta<-gamma} = (delta/gamma) Id +
(1 - delta/gamma) J_{gamma A} carries Fix T_gamma onto Fix T_delta, and the
efficient runner below folds the relocation into the iteration at no extra
resolvent cost.
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
from .errors import CertificateError, DimensionError, ParameterError
from .linalg import as_vector
from .operators import MonotoneOperator, inclusion_residual
from .schedules import kappa_ratio

#: Residual tolerance for accepting a point as a fixed point of T_gamma.
FIXED_POINT_TOL = 1e-9


@dataclass(frozen=True)
class DRProblem:
    """An ordered pair (A, B) of operators on the same R^d."""

    op_a: MonotoneOperator
    op_b: MonotoneOperator

    def __post_init__(self):
        if self.op_a.dim != self.op_b.dim:
            raise DimensionError(
                f"A acts on R^{self.op_a.dim} but B on R^{self.op_b.dim}"
            )

    @property
    def dim(self):
        return self.op_a.dim


def dr_apply(problem, gamma, x):
    """One Douglas-Rachford step; returns (w, z, y).

    z = J_{gamma A} x, y = J_{gamma B}(2z - x) and w = x - z + y = T_gamma x.
    Exactly one resolvent of A and one of B are evaluated.
    """
    x = as_vector(x)
    z = problem.op_a.resolvent(gamma, x)
    y = problem.op_b.resolvent(gamma, 2.0 * z - x)
    w = x - z + y
    return w, z, y


def dr_relocator_apply(op_a, gamma, delta, x):
    """Q_{delta<-gamma} x = (delta/gamma) x + (1 - delta/gamma) J_{gamma A} x."""
    if gamma <= 0 or delta <= 0:
        raise ParameterError("gamma and delta must be positive")
    x = as_vector(x)
    r = delta / gamma
    if r == 1.0:
        return x.copy()
    return r * x + (1.0 - r) * op_a.resolvent(gamma, x)


def dr_lipschitz(gamma, delta):
    """Lipschitz constant of the DR relocator, max{1, delta/gamma}."""
    return max(1.0, delta / gamma)


class DRCertificate:
    """A solution certificate: z in zer(A+B) witnessed by w in Az, -w in Bz.

    Membership is checked in closed form for operator kinds where it is
    decidable; the fixed-point residual of z + w under T_1 is always checked.
    """

    def __init__(self, problem, z, w, tol=1e-8):
        self.problem = problem
        self.z = as_vector(z)
        self.w = as_vector(w)
        if self.z.size != problem.dim or self.w.size != problem.dim:
            raise DimensionError("certificate dimension disagrees with the problem")
        res_a = inclusion_residual(problem.op_a, self.z, self.w)
        if res_a is not None and res_a > tol:
            raise CertificateError(f"w not in Az: membership residual {res_a:.3e}")
        res_b = inclusion_residual(problem.op_b, self.z, -self.w)
        if res_b is not None and res_b > tol:
            raise CertificateError(f"-w not in Bz: membership residual {res_b:.3e}")
        y = self.z + self.w
        t_y, _, _ = dr_apply(problem, 1.0, y)
        resid = float(np.linalg.norm(y - t_y))
        if resid > FIXED_POINT_TOL:
            raise CertificateError(
                f"certificate fails the fixed-point residual test ({resid:.3e})"
            )


def dr_fixed_point(cert, gamma):
    """The point z + gamma w of Fix T_gamma encoded by a certificate."""
    if gamma <= 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    y = cert.z + gamma * cert.w
    t_y, _, _ = dr_apply(cert.problem, gamma, y)
    resid = float(np.linalg.norm(y - t_y))
    if resid > FIXED_POINT_TOL:
        raise CertificateError(
            f"certificate point has residual {resid:.3e} at gamma={gamma}"
        )
    return y


def adaptive_kappa(z, w_prev):
    """Stepsize feedback ratio ||z|| / ||z - w_prev||; None signals z == w_prev."""
    return kappa_ratio(as_vector(z), as_vector(w_prev))


def dr_family(problem):
    """The DR operators as a driver family (firmly nonexpansive, alpha = 1/2)."""

    def apply(gamma, x):
        w, z, y = dr_apply(problem, gamma, x)
        return w, {"z": z, "y": y, "shadow": z}

    def feedback(gamma, w):
        return problem.op_a.resolvent(gamma, as_vector(w)), w

    return OperatorFamily(apply, averagedness_alpha=0.5, feedback=feedback, name="dr2")


def dr_relocator(problem):
    """The DR relocator as a driver relocator with bound max{1, delta/gamma}."""
    return Relocator(
        lambda gamma, delta, x: dr_relocator_apply(problem.op_a, gamma, delta, x),
        dr_lipschitz,
        name="dr2",
    )


def algorithm1_run(problem, schedule, x0, stop, solution_residual=None,
                   pos_increment_budget=None):
    """Efficient relocated DR run; one resolvent of A and one of B per iteration.

    Matches the naive composition Q_{gamma_{n+1}<-gamma_n} T_{gamma_n} applied
    by run_relocated, but reuses z_{n+1} = J_{gamma_n A} w_n both inside the
    relocation and as the next sweep's resolvent of A. The trace records the
    governing x_n, the shadow z_n (also the monitored point), and y_n, w_n.
    """
    schedule.reset()
    trace = ConvergenceTrace()
    gamma = schedule.gamma_at(0)
    x = as_vector(x0)
    if gamma <= 0 or not np.isfinite(gamma):
        trace.status = STATUS_SCHEDULE_REJECTED
        trace.final_x = x
        return trace
    monitor = PositiveIncrementMonitor(gamma, pos_increment_budget)

    z = problem.op_a.resolvent(gamma, x)
    for n in range(stop.max_iters + 1):
        y = problem.op_b.resolvent(gamma, 2.0 * z - x)
        w = x - z + y
        residual = float(np.linalg.norm(x - w))
        sol = solution_residual(z) if solution_residual is not None else None
        trace.record(gamma, residual, sol, point=z, iterate=x,
                     vectors={"z": z, "y": y, "w": w})

        gamma_next = None
        z_next = None
        settled = True
        if n < stop.max_iters:
            feedback = None
            if schedule.is_adaptive:
                z_next = problem.op_a.resolvent(gamma, w)
                feedback = (z_next, w)
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

        if z_next is None:
            z_next = problem.op_a.resolvent(gamma, w)
        ratio = gamma_next / gamma
        x = ratio * w + (1.0 - ratio) * z_next
        if not np.all(np.isfinite(x)):
            trace.status = STATUS_DIVERGED
            break
        z = z_next
        gamma = gamma_next

    trace.final_x = x
    return trace
