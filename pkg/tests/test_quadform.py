import pytest
from hypothesis import given
from hypothesis import strategies as st

from bkfourier import quadform
from bkfourier.algebra import CycNum, make_chars, make_field
from bkfourier.errors import FieldError
from bkfourier.groups import matrices
from bkfourier.quadform import (
    EvenQuadSpace,
    QuadSpace,
    check_isotropic_count,
    check_isotropic_sums,
    check_theo2,
    check_weil_sums,
    gl2_model,
    gl2_pair,
    gl2_vector,
    isotropic_closed,
    isotropic_groupoid,
    isotropic_psi_sum,
    proof_identities,
    weil_sum,
)

F3_VECTORS = st.lists(st.integers(0, 2), min_size=3, max_size=3).map(tuple)


def grid():
    for q in (3, 5):
        ctx = make_field(q)
        for c in (1, ctx.nonsquare):
            yield ctx, 1, c
    yield make_field(3), 2, 1


GRID = list(grid())
IDS = [f"q{ctx.q}-m{m}-c{c}" for ctx, m, c in GRID]


class TestForms:
    def test_polarization(self, f3):
        space = QuadSpace(f3, 1)
        assert space.eval_B((1, 0, 0), (0, 0, 1)) == 1
        assert space.eval_B((0, 1, 0), (0, 1, 0)) == 2
        assert (space.gram() == space.gram().T).all()
        assert space.nondegenerate()

    @given(F3_VECTORS, F3_VECTORS)
    def test_vectorised_and_scalar_forms_agree(self, u, v):
        space = QuadSpace(make_field(3), 1, 2)
        assert int(space.values([u])[0]) == space.eval_Q(u)
        assert int(space.polarize([u], [v])[0]) == space.eval_B(u, v)
        assert space.eval_B(u, v) == space.eval_B(v, u)

    def test_even_space(self, f3):
        space = EvenQuadSpace(f3, 1)
        assert space.n == 2
        assert len(space.isotropic) == 2 * 3 - 1

    def test_bad_parameters(self, f3, f4):
        with pytest.raises(FieldError):
            QuadSpace(f3, 1, 0)
        with pytest.raises(FieldError):
            EvenQuadSpace(f3, 0)
        with pytest.raises(FieldError):
            QuadSpace(f4, 1)
        with pytest.raises(FieldError):
            QuadSpace(f3, 1).eval_Q((1, 0))
        with pytest.raises(FieldError):
            weil_sum(QuadSpace(f3, 1), 0)


class TestIsotropicCone:
    def test_small_cone(self, f3):
        groupoid = isotropic_groupoid(QuadSpace(f3, 1))
        assert len(groupoid.action.points) == 9
        assert [c.aut for c in groupoid.classes] == [2, 1, 1, 1, 1]

    def test_m2_count(self, f3):
        check = check_isotropic_count(QuadSpace(f3, 2))
        assert check.passed
        assert check.detail["count"] == "81"

    def test_example_sums(self, f3, chars3):
        space = QuadSpace(f3, 1)
        assert isotropic_psi_sum(space, (0, 1, 0), chars3) == 3
        assert isotropic_psi_sum(space, (1, 0, 0), chars3).is_zero()
        assert isotropic_psi_sum(space, (0, 0, 0), chars3) == 9
        assert isotropic_closed(space, (0, 0, 0)) == 9

    @pytest.mark.parametrize("ctx,m,c", GRID, ids=IDS)
    def test_closed_forms(self, ctx, m, c):
        space = QuadSpace(ctx, m, c)
        chars = make_chars(ctx)
        assert check_isotropic_count(space).passed
        sums = check_isotropic_sums(space, chars)
        assert sums.passed, sums.witness
        assert sums.compared == ctx.q ** space.n
        assert check_weil_sums(space, chars).passed

    def test_sums_go_through_isotropic_psi_sum(self, f3, monkeypatch):
        monkeypatch.setattr(quadform, "isotropic_psi_sum", lambda space, v, chars: CycNum.zero(3))
        check = check_isotropic_sums(QuadSpace(f3, 1))
        assert not check.passed
        assert check.witness is not None

    @pytest.mark.parametrize("ctx,m,c", GRID, ids=IDS)
    def test_involutive_in_odd_dimension(self, ctx, m, c):
        result = check_theo2(QuadSpace(ctx, m, c))
        assert result.passed
        assert result.scale == ctx.q ** (2 * m)

    def test_even_dimension_fails(self, f3):
        result = check_theo2(EvenQuadSpace(f3, 1))
        assert not result.passed
        assert result.witness is not None

    @pytest.mark.parametrize("q", [3, 5])
    def test_proof_identities(self, q):
        ctx = make_field(q)
        for check in proof_identities(QuadSpace(ctx, 1, ctx.nonsquare)):
            assert check.passed, check.name


class TestGl2Model:
    def test_vector_round_trip(self, f3):
        for x in matrices(f3)[::5]:
            for a in range(3):
                assert gl2_pair(f3, gl2_vector(f3, x, a)) == (x, a)

    def test_model(self, f3, chars3):
        model = gl2_model(f3, chars3)
        assert all(model.identities.values()), model.identities
        assert model.conjugate.passed, model.conjugate.witness
        assert model.cone.passed
        assert model.multiplicative.passed
        assert model.passed
