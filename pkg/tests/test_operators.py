import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import GAMMA_GRID, operator_zoo
from relosplit import operators as ops
from relosplit.errors import ConstructionError, DimensionError, ParameterError

finite_floats = st.floats(min_value=-10.0, max_value=10.0,
                          allow_nan=False, allow_infinity=False)


class TestResolventExamples:
    def test_zero_is_identity(self):
        op = ops.Zero(2)
        assert np.allclose(op.resolvent(3.0, [7.0, -1.0]), [7.0, -1.0])

    def test_normal_cone_point_is_constant(self):
        op = ops.NormalConePoint([1.0])
        assert op.resolvent(5.0, [42.0])[0] == 1.0

    def test_neg_log_closed_form(self):
        op = ops.NegLog(1)
        # (0 + sqrt(0 + 4)) / 2 = 1
        assert op.resolvent(1.0, [0.0])[0] == pytest.approx(1.0, abs=1e-15)

    def test_scaled_identity_linear_solve(self):
        # y + 2y = 6  =>  y = 2
        op = ops.ScaledIdentity(1.0, 1)
        assert op.resolvent(2.0, [6.0])[0] == pytest.approx(2.0, abs=1e-15)

    def test_resolvent_defining_inclusion(self, rng):
        # (x - y) / gamma must lie in A(y) for the single-valued kinds
        for op in operator_zoo(rng):
            x = rng.standard_normal(op.dim)
            gamma = float(rng.choice(GAMMA_GRID))
            y = op.resolvent(gamma, x)
            resid = ops.inclusion_residual(op, y, (x - y) / gamma)
            if resid is not None:
                assert resid <= 1e-9

    def test_parameter_and_dimension_errors(self):
        op = ops.Zero(2)
        with pytest.raises(ParameterError):
            op.resolvent(0.0, [1.0, 2.0])
        with pytest.raises(ParameterError):
            op.resolvent(-1.0, [1.0, 2.0])
        with pytest.raises(DimensionError):
            op.resolvent(1.0, [1.0, 2.0, 3.0])


class TestReflectent:
    def test_zero(self):
        assert ops.Zero(1).reflectent(2.0, [4.0])[0] == 4.0

    def test_normal_cone_point(self):
        assert ops.NormalConePoint([1.0]).reflectent(1.0, [3.0])[0] == -1.0

    def test_neg_log(self):
        assert ops.NegLog(1).reflectent(1.0, [0.0])[0] == pytest.approx(2.0, abs=1e-15)

    def test_matches_definition(self, zoo, rng):
        for op in zoo:
            x = rng.standard_normal(op.dim)
            expected = 2.0 * op.resolvent(1.5, x) - x
            assert np.allclose(op.reflectent(1.5, x), expected)


class TestMakeOperator:
    def test_zero(self):
        op = ops.make_operator({"kind": "zero", "dim": 2})
        assert isinstance(op, ops.Zero) and op.dim == 2

    def test_normal_cone_point(self):
        op = ops.make_operator({"kind": "normal_cone_point", "c": [1.0]})
        assert op.resolvent(5.0, [42.0])[0] == 1.0

    def test_skew_affine_accepted(self):
        op = ops.make_operator(
            {"kind": "affine", "M": [[0.0, 1.0], [-1.0, 0.0]], "b": [0.0, 0.0]}
        )
        assert isinstance(op, ops.AffineMonotone)

    def test_non_monotone_affine_rejected(self):
        with pytest.raises(ConstructionError):
            ops.make_operator({"kind": "affine", "M": [[-1.0]], "b": [0.0]})

    def test_unknown_kind(self):
        with pytest.raises(ConstructionError):
            ops.make_operator({"kind": "mystery"})

    def test_bad_radius(self):
        with pytest.raises(ConstructionError):
            ops.make_operator({"kind": "normal_cone_ball", "center": [0.0], "radius": 0.0})

    def test_missing_parameter(self):
        with pytest.raises(ConstructionError):
            ops.make_operator({"kind": "zero"})

    def test_nested_kinds(self):
        op = ops.make_operator({
            "kind": "scaled", "sigma": 2.0,
            "inner": {"kind": "translated", "shift": [1.0],
                      "inner": {"kind": "neg_log", "dim": 1}},
        })
        assert op.dim == 1
        assert np.isfinite(op.resolvent(1.0, [0.0])[0])

    def test_bad_box(self):
        with pytest.raises(ConstructionError):
            ops.make_operator({"kind": "normal_cone_box", "lo": [1.0], "hi": [0.0]})


class TestScalingIdentity:
    """J_{beta A}((beta/alpha) x + (1 - beta/alpha) J_{alpha A} x) = J_{alpha A} x."""

    def test_catalog(self, rng):
        for op in operator_zoo(rng):
            for _ in range(40):
                x = 4.0 * rng.standard_normal(op.dim)
                alpha, beta = rng.choice(GAMMA_GRID, size=2)
                jx = op.resolvent(alpha, x)
                moved = (beta / alpha) * x + (1.0 - beta / alpha) * jx
                assert np.linalg.norm(op.resolvent(beta, moved) - jx) <= 1e-10

    @given(x=finite_floats, alpha=st.sampled_from(GAMMA_GRID),
           beta=st.sampled_from(GAMMA_GRID))
    @settings(max_examples=200, deadline=None)
    def test_neg_log_hypothesis(self, x, alpha, beta):
        op = ops.NegLog(1)
        jx = op.resolvent(alpha, [x])
        moved = (beta / alpha) * np.array([x]) + (1.0 - beta / alpha) * jx
        assert abs(op.resolvent(beta, moved)[0] - jx[0]) <= 1e-10


class TestNonexpansivenessProperties:
    def test_firm_nonexpansiveness(self, rng):
        for op in operator_zoo(rng):
            for _ in range(30):
                x = 4.0 * rng.standard_normal(op.dim)
                y = 4.0 * rng.standard_normal(op.dim)
                gamma = float(rng.choice(GAMMA_GRID))
                jx, jy = op.resolvent(gamma, x), op.resolvent(gamma, y)
                lhs = (np.linalg.norm(jx - jy) ** 2
                       + np.linalg.norm((x - jx) - (y - jy)) ** 2)
                assert lhs <= np.linalg.norm(x - y) ** 2 + 1e-10

    @given(x=finite_floats, y=finite_floats, gamma=st.sampled_from(GAMMA_GRID))
    @settings(max_examples=200, deadline=None)
    def test_firm_nonexpansiveness_neg_log(self, x, y, gamma):
        op = ops.NegLog(1)
        jx, jy = op.resolvent(gamma, [x])[0], op.resolvent(gamma, [y])[0]
        lhs = (jx - jy) ** 2 + ((x - jx) - (y - jy)) ** 2
        assert lhs <= (x - y) ** 2 + 1e-10

    def test_stepsize_lipschitz(self, rng):
        # ||J_{gamma A} x - J_{lam gamma A} x|| <= |1 - lam| ||J_{gamma A} x - x||
        for op in operator_zoo(rng):
            for _ in range(30):
                x = 4.0 * rng.standard_normal(op.dim)
                gamma = float(rng.choice(GAMMA_GRID))
                lam = float(rng.uniform(0.1, 4.0))
                jg = op.resolvent(gamma, x)
                jl = op.resolvent(lam * gamma, x)
                assert (np.linalg.norm(jg - jl)
                        <= abs(1.0 - lam) * np.linalg.norm(jg - x) + 1e-10)


class TestRelocatorContraction:
    """Q_{beta<-alpha} = (beta/alpha) Id + (1 - beta/alpha) J_{alpha A}."""

    def test_lipschitz_bound(self, rng):
        for op in operator_zoo(rng):
            for _ in range(30):
                alpha, beta = rng.choice(GAMMA_GRID, size=2)
                z = 4.0 * rng.standard_normal(op.dim)
                zb = 4.0 * rng.standard_normal(op.dim)
                r = beta / alpha
                qz = r * z + (1 - r) * op.resolvent(alpha, z)
                qzb = r * zb + (1 - r) * op.resolvent(alpha, zb)
                bound = max(1.0, r) * np.linalg.norm(z - zb)
                assert np.linalg.norm(qz - qzb) <= bound + 1e-10

    def test_refined_inequality_expanding(self, rng):
        # for beta >= alpha: ||Qz - Qz'||^2 + (r^2 - 1) ||Jz - Jz'||^2 <= r^2 ||z - z'||^2
        for op in operator_zoo(rng):
            for _ in range(30):
                alpha = float(rng.choice(GAMMA_GRID))
                beta = alpha * float(rng.uniform(1.0, 4.0))
                z = 4.0 * rng.standard_normal(op.dim)
                zb = 4.0 * rng.standard_normal(op.dim)
                r = beta / alpha
                jz, jzb = op.resolvent(alpha, z), op.resolvent(alpha, zb)
                qz = r * z + (1 - r) * jz
                qzb = r * zb + (1 - r) * jzb
                lhs = (np.linalg.norm(qz - qzb) ** 2
                       + (r ** 2 - 1.0) * np.linalg.norm(jz - jzb) ** 2)
                assert lhs <= r ** 2 * np.linalg.norm(z - zb) ** 2 + 1e-10


class TestJointContinuity:
    def test_bounded_modulus_on_grid(self, rng):
        # ||J_gamma x - J_lam y|| <= (||J_gamma x - x|| / gamma) |gamma - lam| + ||x - y||
        for op in operator_zoo(rng):
            for _ in range(40):
                x = rng.uniform(-5.0, 5.0, size=op.dim)
                y = rng.uniform(-5.0, 5.0, size=op.dim)
                gamma = float(rng.uniform(0.1, 4.0))
                lam = float(rng.uniform(0.1, 4.0))
                jx = op.resolvent(gamma, x)
                jy = op.resolvent(lam, y)
                bound = (np.linalg.norm(jx - x) / gamma) * abs(gamma - lam) \
                    + np.linalg.norm(x - y)
                assert np.linalg.norm(jx - jy) <= bound + 1e-10


class TestAsymptoticProjection:
    def test_small_gamma_projects_onto_domain(self, rng):
        box = ops.NormalConeBox(-np.ones(3), np.ones(3))
        neglog = ops.NegLog(3)
        for op in (box, neglog):
            for _ in range(20):
                x = 4.0 * rng.standard_normal(3)
                j_small = op.resolvent(1e-8, x)
                proj = op.domain_projection(x)
                assert np.linalg.norm(j_small - proj) <= 1e-3


class TestCountingOperator:
    def test_counts_calls(self):
        op = ops.CountingOperator(ops.Zero(1))
        op.resolvent(1.0, [1.0])
        op.resolvent(2.0, [1.0])
        assert op.calls == 2
