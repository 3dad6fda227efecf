import numpy as np
import pytest

from relosplit import dr2, problems
from relosplit.errors import ConstructionError, NoOracleError


class TestIndicatorNeglog:
    def test_instance(self):
        inst = problems.make_problem("indicator_neglog")
        assert inst.dim == 1
        assert inst.n_ops == 2
        assert inst.solution_point[0] == 1.0
        assert problems.solution_residual(inst, [1.0]) == 0.0

    def test_certificate_fixed_points_exact(self):
        inst = problems.make_problem("indicator_neglog")
        for gamma in (0.25, 0.5, 1.0, 2.0, 4.0):
            y = dr2.dr_fixed_point(inst.dr_certificate, gamma)
            assert y[0] == 1.0 + gamma

    def test_dr_problem_helper(self):
        inst = problems.make_problem("indicator_neglog")
        problem = inst.dr_problem()
        w, _, _ = dr2.dr_apply(problem, 1.0, [2.0])
        assert w[0] == pytest.approx(2.0, abs=1e-15)


class TestAffineConsensus:
    def test_explicit_centers(self):
        inst = problems.make_problem("affine_consensus",
                                     {"c": [[1.0], [3.0], [5.0]]})
        assert inst.solution_point[0] == pytest.approx(3.0)
        assert problems.solution_residual(inst, [3.0]) == pytest.approx(0.0, abs=1e-12)
        assert problems.solution_residual(inst, [0.0]) == pytest.approx(9.0)

    def test_seeded_generation_is_reproducible(self):
        a = problems.make_problem("affine_consensus",
                                  {"count": 4, "dim": 3}, seed=7)
        b = problems.make_problem("affine_consensus",
                                  {"count": 4, "dim": 3}, seed=7)
        assert np.array_equal(a.solution_point, b.solution_point)
        c = problems.make_problem("affine_consensus",
                                  {"count": 4, "dim": 3}, seed=8)
        assert not np.array_equal(a.solution_point, c.solution_point)

    def test_needs_two_centers(self):
        with pytest.raises(ConstructionError):
            problems.make_problem("affine_consensus", {"c": [[1.0]]})


class TestAffineRandom:
    def test_planted_zero_validates(self):
        inst = problems.make_problem("affine_random",
                                     {"count": 4, "dim": 3}, seed=3)
        assert problems.solution_residual(inst, inst.solution_point) <= 1e-8

    def test_nonzero_candidate_has_positive_residual(self):
        inst = problems.make_problem("affine_random",
                                     {"count": 3, "dim": 2}, seed=5)
        off = inst.solution_point + 1.0
        assert problems.solution_residual(inst, off) > 1e-3


class TestBoxFeasibility:
    def test_disjoint_boxes_have_no_oracle(self):
        inst = problems.make_problem(
            "box_feasibility",
            {"boxes": [[[0.0], [1.0]], [[2.0], [3.0]]]})
        assert not inst.has_oracle
        with pytest.raises(NoOracleError):
            problems.solution_residual(inst, [0.5])

    def test_overlapping_boxes_distance(self):
        inst = problems.make_problem(
            "box_feasibility",
            {"boxes": [[[0.0], [2.0]], [[1.0], [3.0]]]})
        assert inst.has_oracle
        assert problems.solution_residual(inst, [1.5]) == 0.0
        assert problems.solution_residual(inst, [0.0]) == pytest.approx(1.0)


class TestCustomProblem:
    def test_operator_specs(self):
        inst = problems.make_problem("custom", {
            "ops": [
                {"kind": "normal_cone_point", "c": [1.0]},
                {"kind": "neg_log", "dim": 1},
            ],
            "solution": [1.0],
        })
        assert inst.n_ops == 2
        assert problems.solution_residual(inst, [1.0]) == 0.0

    def test_bad_declared_solution_rejected(self):
        # both single valued at 2: 2*(2) + (2 - 5) = 1 != 0
        with pytest.raises(ConstructionError):
            problems.make_problem("custom", {
                "ops": [
                    {"kind": "scaled_identity", "lam": 2.0, "dim": 1},
                    {"kind": "affine", "M": [[1.0]], "b": [-5.0]},
                ],
                "solution": [2.0],
            })

    def test_needs_two_specs(self):
        with pytest.raises(ConstructionError):
            problems.make_problem("custom", {"ops": [{"kind": "zero", "dim": 1}]})


class TestBundledConvergence:
    """Every solvable bundled problem converges under an accepted schedule."""

    def test_runs_converge(self):
        import numpy as np

        from relosplit import malitsky_tam as mt, schedules as sch
        from relosplit.driver import StopRule
        from relosplit.linalg import BlockVector

        schedule = sch.GeometricToLimit(limit=1.0, start=2.0, ratio=0.5)
        stop = StopRule(residual_tol=1e-9, max_iters=3000)

        inst = problems.make_problem("indicator_neglog")
        trace = dr2.algorithm1_run(inst.dr_problem(), schedule,
                                   np.array([3.0]), stop)
        assert trace.status == "converged"

        for name, params in (("affine_consensus", {"count": 4, "dim": 2}),
                             ("affine_random", {"count": 3, "dim": 2})):
            inst = problems.make_problem(name, params, seed=2)
            problem = mt.MTProblem(tuple(inst.ops), theta=0.5)
            trace = mt.algorithm2_run(
                problem, schedule, BlockVector.zeros(inst.n_ops - 1, inst.dim),
                stop, solution_residual=lambda z: problems.solution_residual(inst, z))
            assert trace.status == "converged"
            assert trace.solution_residuals[-1] <= 1e-6


class TestFactory:
    def test_unknown_name(self):
        with pytest.raises(ConstructionError):
            problems.make_problem("mystery_problem")

    def test_names_listed(self):
        names = problems.problem_names()
        assert "indicator_neglog" in names
        assert "affine_consensus" in names
        assert "custom" in names
