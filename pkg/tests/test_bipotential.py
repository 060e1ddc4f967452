import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lawgen import off_graph, on_graph
from sbenpy.bipotential import (
    Bipotential,
    ContactKinematics,
    axiom_audit,
    bipotential_gap,
    block_bipotential,
    box_sampler,
    coulomb_bipotential,
    coulomb_sampler,
    lift_to_symplectic,
    reflect_bipotential,
    separated_bipotential,
    symplectic_bipotential_gap,
    transpose_bipotential,
)
from sbenpy.convex import Point, fenchel_gap, make_indicator, quadratic, scaled_norm
from sbenpy.errors import ConstructionError, UnsupportedOperation
from sbenpy.extended import INF, is_inf
from sbenpy.symplectic import PhaseVector, j_apply, j_inverse

coord = st.floats(-3.0, 3.0, allow_nan=False)


def vecs(n):
    return st.lists(coord, min_size=n, max_size=n).map(np.array)


# --- separated ---------------------------------------------------------------


def test_separated_examples():
    b = separated_bipotential(scaled_norm(1.0))
    assert b([0.5], [0.8]) == pytest.approx(0.5)
    assert bipotential_gap(b, [0.5], [0.8]) == pytest.approx(0.1)
    assert bipotential_gap(b, [0.5], [1.0]) == pytest.approx(0.0, abs=1e-15)
    b0 = separated_bipotential(make_indicator(Point([0.0])))
    for y in (-3.0, 0.0, 5.5):
        assert bipotential_gap(b0, [0.0], [y]) == 0.0


def test_separated_needs_conjugate():
    f = quadratic([[1.0]])
    bare = type(f)(dim=1, evaluate=f.evaluate, name="bare")
    with pytest.raises(UnsupportedOperation):
        separated_bipotential(bare)


@given(vecs(2), vecs(2))
def test_separated_reduces_to_fenchel_gap(x, y):
    phi = quadratic([[2.0, 0.3], [0.3, 1.0]])
    assert bipotential_gap(separated_bipotential(phi), x, y) == fenchel_gap(phi, x, y)
    phi = scaled_norm(1.2, 2)
    a, c = bipotential_gap(separated_bipotential(phi), x, y), fenchel_gap(phi, x, y)
    assert (is_inf(a) and is_inf(c)) or a == c


# --- Coulomb ------------------------------------------------------------------


def test_coulomb_examples():
    b = coulomb_bipotential(0.5)
    assert b([0, 0, 0], [0.3, 0, 2]) == 0.0
    assert bipotential_gap(b, [0, 0, 0], [0.3, 0, 2]) == 0.0
    assert b([0.4, 0, 0], [1.0, 0, 2]) == pytest.approx(0.4)
    assert bipotential_gap(b, [0.4, 0, 0], [1.0, 0, 2]) == pytest.approx(0.0, abs=1e-15)
    assert b([0.4, 0, 0], [0.5, 0, 2]) == pytest.approx(0.4)
    assert bipotential_gap(b, [0.4, 0, 0], [0.5, 0, 2]) == pytest.approx(0.2)


def test_coulomb_domain():
    b = coulomb_bipotential(0.5)
    assert b([0, 0, 0], [1.1, 0, 2]) is INF  # outside the cone
    assert b([0, 0, 0], [0, 0, -1]) is INF  # tensile reaction
    assert b([0, 0, 0.1], [0, 0, 1]) is INF  # interpenetration rate
    assert b([1, 1, -0.5], [0, 0, 0]) == 0.0  # separated, free opening
    assert b([1, 0, 0], [0, 0, 0]) == 0.0  # t_n = 0 forces t_t = 0
    assert b([1, 0, 0], [1e-3, 0, 0]) is INF
    with pytest.raises(ConstructionError):
        coulomb_bipotential(0.0)


def test_contact_kinematics_orientation():
    c = ContactKinematics(relative_velocity=np.array([-0.4, 0.0, 0.0]), reaction=np.array([1.0, 0.0, 2.0]))
    assert bipotential_gap(coulomb_bipotential(0.5), c.v, c.t) == pytest.approx(0.0, abs=1e-15)


def test_coulomb_characterization(rng):
    b = coulomb_bipotential(0.5)
    for _ in range(1000):
        _, v, t = on_graph(rng, 0.5)
        assert bipotential_gap(b, v, t) <= 1e-10
    for _ in range(1000):
        kind, v, t, bound = off_graph(rng, 0.5)
        g = bipotential_gap(b, v, t)
        assert bound >= 0.1 - 1e-12
        assert is_inf(g) or g >= 0.05, kind


# --- combinators ----------------------------------------------------------------


def test_transpose_and_reflect():
    b = coulomb_bipotential(0.5)
    tb = transpose_bipotential(b)
    rb = reflect_bipotential(b)
    v, t = np.array([0.4, 0, 0]), np.array([1.0, 0, 2])
    assert tb(t, v) == b(v, t)
    assert rb(-v, -t) == b(v, t)


def test_block_partition_is_checked():
    b = separated_bipotential(scaled_norm(1.0))
    with pytest.raises(ConstructionError):
        block_bipotential(3, [(b, [0])], pinned=[1])
    with pytest.raises(ConstructionError):
        block_bipotential(2, [(b, [0, 1])], pinned=[])


def test_block_pins_first_argument():
    b = separated_bipotential(scaled_norm(1.0))
    blk = block_bipotential(2, [(b, [1])], pinned=[0], atol=1e-9)
    assert blk([0.0, 0.5], [3.0, 1.0]) == pytest.approx(0.5)
    assert blk([1e-3, 0.5], [3.0, 1.0]) is INF
    assert blk([1e-10, 0.5], [3.0, 1.0]) == pytest.approx(0.5)


def test_bipotential_dimension_check():
    with pytest.raises(ConstructionError):
        Bipotential(1, 2, lambda x, y: 0.0)


# --- lift -------------------------------------------------------------------------


def test_lift_of_point_indicator():
    bh = lift_to_symplectic(separated_bipotential(make_indicator(Point([0.0, 0.0]))))
    assert bh(PhaseVector([0.0], [0.0]), PhaseVector([2.0], [-1.0])) == 0.0
    assert bh(PhaseVector([0.1], [0.0]), PhaseVector([2.0], [-1.0])) is INF


def test_lift_dimension_checks():
    with pytest.raises(ConstructionError):
        lift_to_symplectic(coulomb_bipotential(0.5))
    bh = lift_to_symplectic(separated_bipotential(quadratic(np.eye(2))))
    with pytest.raises(ValueError):
        bh(PhaseVector([0.0, 1.0], [0.0, 1.0]), PhaseVector([0.0, 1.0], [0.0, 1.0]))


def _coulomb_phase():
    # positions carry the contact block, momenta are free (separated quadratic)
    return block_bipotential(
        6, [(coulomb_bipotential(0.5), [0, 1, 2]), (separated_bipotential(quadratic(np.eye(3))), [3, 4, 5])]
    )


@given(vecs(6), vecs(6))
def test_lift_transports_gap(a, c):
    for b in (_coulomb_phase(), separated_bipotential(quadratic(np.diag([1, 2, 3, 4, 5, 6.0])))):
        bh = lift_to_symplectic(b)
        z_irr, z_dot = PhaseVector.from_flat(a), PhaseVector.from_flat(c)
        lhs = symplectic_bipotential_gap(bh, z_irr, z_dot)
        rhs = bipotential_gap(b, j_inverse(z_irr).flat(), c)
        assert is_inf(lhs) == is_inf(rhs)
        if not is_inf(lhs):
            assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs))


def test_extremal_coulomb_pairs_stay_extremal_after_lift(rng):
    bh = lift_to_symplectic(_coulomb_phase())
    for _ in range(300):
        _, v, t = on_graph(rng, 0.5)
        p = rng.normal(size=3)
        zp = np.concatenate([v, p])  # J^{-1} z_I; momentum block extremal for 1/2|.|^2
        z = np.concatenate([t, p])
        z_irr = j_apply(PhaseVector.from_flat(zp))
        assert symplectic_bipotential_gap(bh, z_irr, PhaseVector.from_flat(z)) <= 1e-10


# --- audits ---------------------------------------------------------------------------


def test_audit_coulomb_box_sampler():
    rep = axiom_audit(coulomb_bipotential(0.5), box_sampler(3), n=10_000)
    assert rep.passed and rep.n_cross_violations == 0 and rep.n_biconvexity_violations == 0


def test_audit_coulomb_cone_sampler():
    rep = axiom_audit(coulomb_bipotential(0.5), coulomb_sampler(0.5), n=5000)
    assert rep.passed
    assert rep.n_infinite < rep.n_samples


def test_audit_separated_quadratic():
    rep = axiom_audit(separated_bipotential(quadratic([[2.0, 0.3], [0.3, 1.0]])), box_sampler(2), n=10_000)
    assert rep.passed and rep.min_cross_margin >= -1e-9


def test_audit_detects_broken_bipotential():
    broken = Bipotential(2, 2, lambda x, y: float(x @ y) - 1.0, name="broken")
    rep = axiom_audit(broken, box_sampler(2), n=2000)
    assert not rep.passed
    assert rep.n_cross_violations == rep.n_samples
    assert rep.as_dict()["passed"] is False


def test_audit_symplectic_lift():
    bh = lift_to_symplectic(_coulomb_phase())
    rep = axiom_audit(bh, box_sampler(6), n=3000)
    assert rep.passed
