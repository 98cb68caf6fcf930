from fractions import Fraction

import pandas as pd
import pytest

from bkfourier.algebra import CycNum
from bkfourier.errors import ActionError, KernelError, SectorError
from bkfourier.groupoid import (
    CycMatrix,
    FnOnGroupoid,
    FTOperator,
    GroupAction,
    KernelFn,
    apply,
    apply_classwise,
    assemble_sectors,
    check_involutive,
    class_map_summary,
    delta,
    export_kernel_csv,
    extend_by_zero,
    multiplicative_kernel,
    orbits,
    push_quotient,
    push_set_map,
    quotient_kernel,
    restrict,
    transport,
)


def trivial_action(name, points):
    return GroupAction(name, list(points), [0], lambda g, x: x, identity=0, compose=lambda g, h: 0)


def scaling_action(ctx):
    return GroupAction(
        "scaling",
        list(range(ctx.q)),
        list(range(1, ctx.q)),
        lambda g, x: int(ctx.mul[g, x]),
        identity=1,
        compose=lambda g, h: int(ctx.mul[g, h]),
    )


def sign_action(ctx):
    return GroupAction(
        "sign",
        list(range(ctx.q)),
        [1, -1],
        lambda g, x: x if g == 1 else int(ctx.neg[x]),
        identity=1,
        compose=lambda g, h: g * h,
    )


def fourier_kernel(action, ctx, chars):
    return KernelFn(action, lambda y, x: chars.psi(ctx.mul[y, x]), "fourier")


class TestOrbits:
    def test_scaling_classes(self, f5):
        groupoid = orbits(scaling_action(f5))
        assert len(groupoid) == 2
        assert groupoid.classes[0].aut == 4
        assert groupoid.classes[1].aut == 1
        assert groupoid.class_of(3) == 1
        assert list(groupoid.sizes()) == [1, 4]
        assert groupoid.balanced()
        assert groupoid.mass_balance() == {"plain": (Fraction(5), 5)}

    def test_class_table(self, f5):
        table = orbits(scaling_action(f5)).class_table()
        assert list(table.columns) == ["representative", "sector", "aut", "orbit_size"]
        assert table["orbit_size"].sum() == 5

    def test_points_must_stay_inside(self):
        action = GroupAction("shift", [0, 1], [0, 1], lambda g, x: x + 2 * g)
        with pytest.raises(ActionError):
            orbits(action)

    def test_identity_must_fix_points(self):
        action = GroupAction("bad", [0, 1], [0, 1], lambda g, x: 1 - x, identity=0)
        with pytest.raises(ActionError):
            orbits(action)

    def test_unknown_point(self, f5):
        groupoid = orbits(scaling_action(f5))
        with pytest.raises(ActionError):
            groupoid.class_of(7)


class TestFunctions:
    def test_push_quotient_sums_over_group(self, f5, chars5):
        action = scaling_action(f5)
        groupoid = orbits(action)
        pushed = push_quotient(lambda x: chars5.psi(x), action, groupoid)
        assert pushed[0] == 4
        assert pushed[1] == -1

    def test_apply_agrees_with_classwise(self, f5, chars5):
        action = scaling_action(f5)
        groupoid = orbits(action)
        kernel = KernelFn(action, lambda y, x: chars5.line_sum(f5.mul[y, x]), "line")
        op = FTOperator(kernel, groupoid)
        f = FnOnGroupoid(groupoid, [CycNum.from_int(5, 2), CycNum.zeta(5, 1)])
        assert apply(op, f) == apply_classwise(op, f)
        assert apply(op, f, threads=2) == apply(op, f)

    def test_arithmetic(self, f5):
        groupoid = orbits(scaling_action(f5))
        f = FnOnGroupoid(groupoid, [CycNum.from_int(5, 1), CycNum.zeta(5, 2)])
        assert (f + f) == f.scale(2)
        assert f.at(4) == CycNum.zeta(5, 2)

    def test_push_set_map_weights_by_automorphisms(self, f5):
        target = orbits(scaling_action(f5))
        one = CycNum.from_int(5, 1)
        pushed = push_set_map(((x, one) for x in range(5)), lambda x: x, target, CycNum.zero(5))
        assert pushed.values == [4, 4]

    def test_transport_rejects_identifications(self, f5):
        source = orbits(trivial_action("points", range(5)))
        target = orbits(scaling_action(f5))
        f = FnOnGroupoid(source, [CycNum.from_int(5, x) for x in range(5)])
        with pytest.raises(KernelError):
            transport(f, lambda x: x, target)

    def test_transport_identity(self):
        groupoid = orbits(trivial_action("points", range(5)))
        f = FnOnGroupoid(groupoid, [CycNum.from_int(5, x) for x in range(5)])
        assert transport(f, lambda x: x, groupoid) == f

    def test_extend_then_restrict(self):
        units = orbits(trivial_action("units", range(1, 5)))
        line = orbits(trivial_action("line", range(5)))
        f = FnOnGroupoid(units, [CycNum.zeta(5, x) for x in range(1, 5)])
        extended = extend_by_zero(f, lambda x: x, line, CycNum.zero(5))
        assert extended.at(0).is_zero()
        assert extended.at(3) == CycNum.zeta(5, 3)
        assert restrict(extended, lambda x: x, units) == f

    def test_class_map_summary(self, f5):
        source = orbits(trivial_action("points", range(5)))
        summary = class_map_summary(source, lambda x: x, orbits(scaling_action(f5)))
        assert len(summary) == 5
        assert summary.loc[0, "target_aut"] == 4


class TestInvolutivity:
    def test_fourier_on_the_line(self, f5, chars5):
        kernel = fourier_kernel(trivial_action("line", range(5)), f5, chars5)
        result = check_involutive(kernel, 5, twist=lambda x: int(f5.neg[x]))
        assert result.passed
        assert result.method == "matrix"
        assert result.mismatches == 0

    def test_missing_twist_is_reported(self, f5, chars5):
        kernel = fourier_kernel(trivial_action("line", range(5)), f5, chars5)
        result = check_involutive(kernel, 5)
        assert not result.passed
        assert result.mismatches == 8
        assert result.witness is not None
        assert result.witness.value != result.witness.expected

    def test_pairwise_fallback(self, f5, chars5):
        kernel = fourier_kernel(trivial_action("line", range(5)), f5, chars5)
        result = check_involutive(kernel, 5, twist=lambda x: int(f5.neg[x]), matrix_cap=1)
        assert result.passed
        assert result.method == "pairs"

    def test_search_stops_at_the_first_mismatch(self, f5, chars5):
        kernel = fourier_kernel(trivial_action("line", range(5)), f5, chars5)
        result = check_involutive(kernel, 5, search=lambda x: -x)
        assert result.method == "search"
        assert not result.passed
        assert result.mismatches == 1
        assert (result.witness.z, result.witness.x) == (4, 4)

    def test_search_without_mismatches(self, f5, chars5):
        kernel = fourier_kernel(trivial_action("line", range(5)), f5, chars5)
        result = check_involutive(kernel, 5, twist=lambda x: int(f5.neg[x]), search=lambda x: x)
        assert result.passed
        assert result.method == "search"

    def test_wrong_scale(self, f5, chars5):
        kernel = fourier_kernel(trivial_action("line", range(5)), f5, chars5)
        assert not check_involutive(kernel, 25, twist=lambda x: int(f5.neg[x])).passed
        assert not check_involutive(kernel, Fraction(5, 2), twist=lambda x: int(f5.neg[x])).passed

    def test_delta(self, f5, chars5):
        kernel = fourier_kernel(trivial_action("line", range(5)), f5, chars5)
        assert delta(kernel, kernel, 2, 3) == 5
        assert delta(kernel, kernel, 2, 2).is_zero()

    def test_multiplicative_kernel(self, f5, chars5):
        action = trivial_action("line", range(5))
        kernel = multiplicative_kernel(
            action, lambda u, v: int(f5.mul[u, v]), chars5.psi, "fourier"
        )
        assert kernel(2, 3) == chars5.psi(1)
        assert kernel.phi(3) == chars5.psi(3)
        assert check_involutive(kernel, 5, twist=lambda x: int(f5.neg[x])).passed

    def test_quotient_by_sign(self, f5, chars5):
        kernel = fourier_kernel(trivial_action("line", range(5)), f5, chars5)
        signs = sign_action(f5)
        quotient = quotient_kernel(kernel, signs, signs)
        assert quotient(1, 2) == chars5.psi(2) + chars5.psi(3)
        assert check_involutive(quotient, 5).passed

    def test_quotient_needs_invariance(self, f5, chars5):
        kernel = KernelFn(trivial_action("line", range(5)), lambda y, x: chars5.psi(x), "one-sided")
        signs = sign_action(f5)
        with pytest.raises(KernelError):
            quotient_kernel(kernel, signs, signs)


class TestSectors:
    def two_sectors(self, f5, chars5):
        points = [(s, x) for s in ("a", "b") for x in range(5)]
        action = GroupAction(
            "sectors",
            points,
            [0],
            lambda g, p: p,
            identity=0,
            compose=lambda g, h: 0,
            sector_of=lambda p: p[0],
        )
        block = KernelFn(action, lambda y, x: chars5.psi(f5.mul[y[1], x[1]]), "block")
        return action, block

    def test_assembled_kernel_is_block_diagonal(self, f5, chars5):
        action, block = self.two_sectors(f5, chars5)
        kernel = assemble_sectors({"a": block, "b": block}, action)
        assert kernel(("a", 1), ("b", 1)).is_zero()
        assert kernel(("b", 1), ("b", 2)) == chars5.psi(2)
        result = check_involutive(kernel, 5, twist=lambda p: (p[0], int(f5.neg[p[1]])))
        assert result.passed

    def test_unknown_sector(self, f5, chars5):
        action, block = self.two_sectors(f5, chars5)
        kernel = assemble_sectors({"a": block}, action)
        with pytest.raises(SectorError):
            kernel(("b", 1), ("a", 1))


class TestCycMatrix:
    def test_entries_survive(self):
        rows = [
            [CycNum.zeta(5, 1) / 3, CycNum.from_int(5, 2)],
            [CycNum.zero(5), CycNum.zeta(5, 4) - CycNum.zeta(5, 2)],
        ]
        matrix = CycMatrix.from_rows(5, rows)
        assert matrix.shape == (2, 2)
        for i in range(2):
            for j in range(2):
                assert matrix.entry(i, j) == rows[i][j]

    def test_product(self):
        a = [[CycNum.zeta(3, 1), CycNum.from_int(3, 1)], [CycNum.zero(3), CycNum.zeta(3, 2)]]
        product = CycMatrix.from_rows(3, a).matmul(CycMatrix.from_rows(3, a))
        for i in range(2):
            for j in range(2):
                assert product.entry(i, j) == a[i][0] * a[0][j] + a[i][1] * a[1][j]


def test_export_kernel_csv(tmp_path, f5, chars5):
    action = trivial_action("line", range(5))
    kernel = fourier_kernel(action, f5, chars5)
    path = export_kernel_csv(kernel, orbits(action), tmp_path / "tables" / "line.csv")
    frame = pd.read_csv(path, index_col=0)
    assert frame.shape == (5, 5)


def test_line_kernel_on_the_scaling_quotient(f3, chars3):
    action = scaling_action(f3)
    groupoid = orbits(action)
    kernel = KernelFn(action, lambda y, x: chars3.line_sum(f3.mul[y, x]), "gl1")
    assert delta(kernel, kernel, 0, 0) == 6
    result = check_involutive(kernel, 3, groupoid=groupoid)
    assert result.passed
    assert result.classes == 2
