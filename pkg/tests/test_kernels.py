from fractions import Fraction

import pytest

from bkfourier.algebra import CycNum, character_twist, make_field
from bkfourier.errors import FieldError, KernelError, SectorError
from bkfourier.groups import (
    GroupId,
    StackPoint,
    embed,
    enumerate_group_points,
    enumerate_stack_points,
    torus_stack_points,
    twisted_alphas,
)
from bkfourier.groupoid import check_involutive
from bkfourier.kernels import (
    Phi_helper,
    assembled_stack_kernel,
    calT_table_check,
    calTsigma_checks,
    char2_checks,
    compare_values,
    descent_check,
    extension_check,
    extension_operator_check,
    gl2_calT_pullback,
    gl2_delta_witness,
    gl2_table_general_check,
    non_descent_witness,
    phi_calT_involutivity,
    phi_calTsigma_table,
    phi_G,
    phi_G_matrix,
    phi_stack,
    phi_stack_gl2_involutivity,
    phi_T_closed,
    pushforward_identities,
    restriction_check,
    stack_kernel,
    stated_gl2_push_constant,
    t3_twist,
    torus_oracles,
    torus_stack_extension,
    torus_stack_kernel,
)

ODD_GROUPS = [GroupId.SL2, GroupId.PGL2, GroupId.GL2]


def holds(result):
    return result.passed and not result.exceptional


class TestTorusKernels:
    @pytest.mark.parametrize("group", ODD_GROUPS)
    @pytest.mark.parametrize("q", [3, 5])
    def test_closed_forms_match_pushforwards(self, group, q):
        for check in torus_oracles(group, make_field(q)):
            assert check.passed, check.witness
            assert check.compared > 0

    def test_sl2_value_at_one(self, f3):
        assert phi_T_closed(GroupId.SL2, f3)[1] == 1

    @pytest.mark.parametrize("group", ODD_GROUPS)
    def test_torus_stack_extends_phi_T(self, f3, group):
        check = torus_stack_extension(torus_stack_points(group, f3))
        assert check.passed, check.witness

    def test_sl2_kernel_of_rho(self, f3):
        model = torus_stack_points(GroupId.SL2, f3)
        assert len(model.source.extras["models"].kernel) == 4


class TestGroupKernels:
    def test_sl2_at_minus_identity(self, f3):
        assert phi_G(GroupId.SL2, f3)(StackPoint((2, 0, 0, 2), 1, 1)) == -2

    def test_gl2_at_identity(self, f3, chars3):
        want = CycNum.from_int(3, 1) - chars3.crucial(1) - chars3.gauss(1) * 3
        assert phi_G_matrix(f3, (1, 0, 0, 1), chars3) == want

    def test_gl2_vanishes_off_square_determinants(self, f3):
        assert phi_G_matrix(f3, (0, 1, 1, 0)).is_zero()

    def test_pgl2_vanishes_on_twisted_sector(self, f3):
        phi = phi_G(GroupId.PGL2, f3)
        points = enumerate_group_points(GroupId.PGL2, f3)
        assert all(phi(p).is_zero() for p in points.points if p.sector == "twisted")

    def test_needs_odd_characteristic(self, f4):
        with pytest.raises(FieldError):
            phi_G_matrix(f4, (1, 0, 0, 1))

    def test_no_group_kernel_for_tori(self, f3):
        with pytest.raises(KernelError):
            phi_G(GroupId.T, f3)

    @pytest.mark.parametrize("group", ODD_GROUPS)
    def test_restriction(self, f3, group):
        check = restriction_check(group, f3)
        assert check.passed, check.witness

    @pytest.mark.parametrize("group", [GroupId.SL2, GroupId.PGL2])
    @pytest.mark.parametrize("q", [3, 5])
    def test_descent(self, group, q):
        assert descent_check(group, make_field(q)).passed

    @pytest.mark.parametrize("q", [3, 5])
    def test_gl2_general_table(self, q):
        check = gl2_table_general_check(make_field(q))
        assert check.passed, check.witness

    def test_gl2_does_not_descend(self, f3):
        check = non_descent_witness(f3)
        assert check.passed
        assert " vs " in check.witness


class TestStackKernels:
    def test_sl2_values(self, f3):
        phi = phi_stack(GroupId.SL2, f3)
        assert phi(StackPoint((1, 0, 0, 1), 1, 1)) == 1
        assert phi(StackPoint((2, 0, 0, 2), 1, 0)) == 4

    def test_Phi_helper(self, f3, chars3):
        assert Phi_helper(f3, StackPoint((1, 0, 0, 1), 1, 0), chars3) == -2
        assert Phi_helper(f3, StackPoint((0, 0, 0, 0), 0, 1), chars3) == -2
        assert Phi_helper(f3, StackPoint((1, 0, 0, 0), 0, 1), chars3) == chars3.crucial(1) * 2

    def test_Phi_helper_rejects_twisted_points(self, f3):
        with pytest.raises(SectorError):
            Phi_helper(f3, StackPoint((0, 0, 0, 0), 0, 1, "twisted"))

    def test_char2_value(self, f2):
        assert phi_stack(GroupId.GL2_CHAR2, f2)(StackPoint((1, 0, 0, 0), 0, 1)) == -1

    @pytest.mark.parametrize("q", [2, 4])
    def test_char2_checks(self, q):
        for check in char2_checks(make_field(2, q // 2)):
            assert check.passed, check.witness

    @pytest.mark.parametrize("group", ODD_GROUPS)
    def test_extension(self, f3, group):
        check = extension_check(group, f3)
        assert check.passed, check.witness

    @pytest.mark.parametrize("group", [GroupId.SL2, GroupId.PGL2])
    def test_extension_operator(self, f3, group):
        check = extension_operator_check(group, f3, threads=2)
        assert check.passed, check.witness

    def test_group_classes_stay_distinct(self, f3):
        stack = enumerate_stack_points(GroupId.SL2, f3)
        group = enumerate_group_points(GroupId.SL2, f3)
        images = {stack.groupoid.class_of(embed(p)) for p in group.points}
        assert len(images) == 24


class TestPushforwards:
    def test_identities(self, f3):
        checks = {c.name: c for c in pushforward_identities(f3)}
        assert checks["f-pushforward"].passed
        assert checks["pi-pushforward"].passed
        assert checks["mu2-pushforward-stack"].passed
        assert checks["mu2-quotient-kernel"].passed

    def test_stated_constant_is_off(self, f3):
        checks = {c.name: c for c in pushforward_identities(f3)}
        stated = checks["pi-pushforward-stated-constant"]
        assert not stated.passed
        assert stated.detail["stated_constant"] == "-1/3"
        assert stated.detail["computed_constant"] == "-1"

    def test_stated_constant(self):
        assert stated_gl2_push_constant(5) == Fraction(-1, 5)


class TestInvolutivity:
    def test_sl2_stack(self, f3):
        points = enumerate_stack_points(GroupId.SL2, f3)
        result = check_involutive(stack_kernel(points).kernel, 3**5, groupoid=points.groupoid)
        assert result.passed
        assert result.scale == 243

    def test_sl2_stack_with_twisted_character(self, f3):
        points = enumerate_stack_points(GroupId.SL2, f3)
        kernel = stack_kernel(points, character_twist(f3)).kernel
        assert check_involutive(kernel, 3**5, groupoid=points.groupoid).passed

    def test_pgl2_assembled(self, f3):
        points = enumerate_stack_points(GroupId.PGL2, f3)
        result = check_involutive(assembled_stack_kernel(points), 3**5, groupoid=points.groupoid)
        assert result.passed

    def test_pgl2_needs_the_twisted_zero(self, f3):
        points = enumerate_stack_points(GroupId.PGL2, f3, include_twisted_zero=False)
        result = check_involutive(stack_kernel(points).kernel, 3**5, groupoid=points.groupoid)
        assert not holds(result)

    @pytest.mark.parametrize("group", ODD_GROUPS)
    def test_torus_stack_model(self, f3, group):
        model = torus_stack_points(group, f3)
        kernel = torus_stack_kernel(model).kernel
        result = check_involutive(kernel, 27, twist=t3_twist(f3), groupoid=model.source.groupoid)
        assert result.passed

    @pytest.mark.parametrize("group", [GroupId.SL2, GroupId.PGL2])
    def test_calT(self, f3, group):
        assert holds(phi_calT_involutivity(torus_stack_points(group, f3)))

    def test_gl2_calT_is_not_involutive(self, f3):
        assert not holds(phi_calT_involutivity(torus_stack_points(GroupId.GL2, f3)))

    def test_gl2_delta_witness(self, f3):
        check = gl2_delta_witness(torus_stack_points(GroupId.GL2, f3))
        assert check.passed
        assert check.detail["expected"] == str(CycNum.from_int(3, -12))

    def test_gl2_stack_table_is_not_involutive(self, f3):
        points = enumerate_stack_points(GroupId.GL2, f3)
        assert not holds(phi_stack_gl2_involutivity(points))

    @pytest.mark.parametrize("q", [3, 5])
    def test_gl2_stack_mismatch_search(self, q):
        points = enumerate_stack_points(GroupId.GL2, make_field(q))
        result = phi_stack_gl2_involutivity(points, exhaustive=False)
        assert result.method == "search"
        assert not holds(result)
        assert result.mismatches == 1

    def test_gl2_stack_only(self, f3):
        with pytest.raises(KernelError):
            phi_stack_gl2_involutivity(enumerate_stack_points(GroupId.SL2, f3))


class TestGl2Tables:
    @pytest.mark.parametrize("q", [3, 5])
    def test_calT_pullback(self, q):
        check = gl2_calT_pullback(torus_stack_points(GroupId.GL2, make_field(q)))
        assert check.passed, check.witness

    @pytest.mark.parametrize("q", [3, 5])
    def test_calT_table(self, q):
        assert calT_table_check(make_field(q)).passed

    @pytest.mark.parametrize("q", [3, 5])
    def test_calTsigma_table(self, q):
        general, zero_entry = calTsigma_checks(make_field(q))
        assert general.passed, general.witness
        assert not zero_entry.passed
        assert zero_entry.mismatches == q - 1

    def test_twisted_entry_is_not_covered(self, f3):
        a1 = twisted_alphas(f3, include_zero=False)[0]
        with pytest.raises(KernelError):
            phi_calTsigma_table(f3, a1, 1)


def test_compare_values_keeps_first_witness():
    one, two = CycNum.from_int(3, 1), CycNum.from_int(3, 2)
    check = compare_values("demo", [("a", one, one), ("b", one, two), ("c", two, one)])
    assert not check.passed
    assert check.compared == 3
    assert check.mismatches == 2
    assert check.witness.startswith("b:")
