"""Geometry kernel: validation, frames, squeezing, reference map, collapse."""

import numpy as np
import pytest

from fisslab.errors import (
    DisconnectedBlockError,
    GeometryError,
    InvalidEpsilon,
    OverlapError,
    PointOutsideDomain,
    VerticalTangentError,
)
from fisslab.geometry import (
    CurveSpec,
    collapse_T,
    collapsed_curves,
    epsilon_scale,
    gradient_jacobian,
    inverse_phi,
    local_frame,
    map_phi,
    normal_vector,
    validate_collapsed,
    validate_medium,
)


def const(v, lo=0.0, hi=1.0):
    return CurveSpec.constant(v, lo, hi)


def line(a, b, lo=0.0, hi=1.0):
    # a + b * (x - lo)
    return CurveSpec((lo, hi), ((a, b, 0.0, 0.0),))


@pytest.fixture
def two_fissures():
    return validate_medium(
        0.0, 1.0, 0.0, 2.0,
        [(const(0.3), 0.2), (const(1.0), 0.4)],
    )


# --- curves -----------------------------------------------------------------------


def test_curve_continuity_enforced():
    with pytest.raises(GeometryError):
        CurveSpec((0.0, 0.5, 1.0), ((0.0, 1.0, 0.0, 0.0), (10.0, 0.0, 0.0, 0.0)))


def test_curve_breakpoint_derivative_from_left():
    # slope 1 then slope -1; at the breakpoint the left value wins
    c = CurveSpec((0.0, 0.5, 1.0), ((0.0, 1.0, 0.0, 0.0), (0.5, -1.0, 0.0, 0.0)))
    assert c.derivative(0.5) == 1.0
    assert c.derivative(0.25) == 1.0
    assert c.derivative(0.75) == -1.0


def test_curve_range_and_slope_exact_for_cubic():
    # z = x^2 (1 - x) on [0, 1]: max at x = 2/3, value 4/27; max slope at x=0
    c = CurveSpec((0.0, 1.0), ((0.0, 0.0, 1.0, -1.0),))
    lo, hi = c.range_bounds()
    assert lo == pytest.approx(0.0, abs=1e-15)
    assert hi == pytest.approx(4.0 / 27.0, rel=1e-12)
    assert c.max_abs_slope() == pytest.approx(1.0, rel=1e-12)  # |2x - 3x^2| max on [0,1]


# --- validation -------------------------------------------------------------------


def test_validate_overlap_from_example():
    # heights push the first fissure past the second curve
    with pytest.raises(OverlapError):
        validate_medium(0.0, 1.0, -1.0, 2.0,
                        [(const(0.0), 0.2), (const(0.1), 0.1)])


def test_validate_single_flat_fissure_ok():
    medium = validate_medium(0.0, 1.0, 0.0, 1.2, [(const(0.5), 0.2)])
    assert medium.n_fissures == 1
    assert medium.block_walls(0)[1].value(0.3) == 0.5
    assert medium.block_walls(1)[0].value(0.3) == pytest.approx(0.7)


def test_validate_slope_cap():
    steep = line(0.0, 1e6)
    with pytest.raises(VerticalTangentError):
        validate_medium(0.0, 1.0, -1.0, 2e6, [(steep, 0.2)], slope_cap=50.0)


def test_validate_pinched_blocks():
    with pytest.raises(DisconnectedBlockError):
        validate_medium(0.0, 1.0, 0.5, 2.0, [(const(0.5), 0.2)])
    with pytest.raises(DisconnectedBlockError):
        validate_medium(0.0, 1.0, 0.0, 0.7, [(const(0.5), 0.2)])


def test_validate_requires_fissures():
    with pytest.raises(GeometryError):
        validate_medium(0.0, 1.0, 0.0, 1.0, [])


# --- frames -----------------------------------------------------------------------


def test_normal_vector_examples():
    flat = const(0.0)
    assert np.allclose(normal_vector(flat, 0.5), [0.0, 1.0])
    up = line(0.0, 1.0)
    assert np.allclose(normal_vector(up, 0.5),
                       [-0.70710678118654746, 0.70710678118654746])
    down = line(0.0, -0.75)
    assert np.allclose(normal_vector(down, 0.5), [0.6, 0.8], atol=1e-15)


def test_local_frame_examples():
    assert np.allclose(local_frame(const(0.0), 0.5).matrix, np.eye(2))
    m = local_frame(line(0.0, 1.0), 0.5).matrix
    s = 1.0 / np.sqrt(2.0)
    assert np.allclose(m, [[s, -s], [s, s]], atol=1e-15)
    assert np.max(np.abs(m.T @ m - np.eye(2))) < 1e-12


def test_normal_vector_unit_and_bounded_below():
    # |n| = 1 and n.k >= 1/sqrt(1 + max_slope^2) at every sample
    c = CurveSpec((0.0, 1.0), ((0.1, 0.5, 1.0, -1.2),))
    bound = 1.0 / np.hypot(1.0, c.max_abs_slope())
    for x in np.linspace(0.0, 1.0, 200):
        n = normal_vector(c, float(x))
        assert abs(np.linalg.norm(n) - 1.0) < 1e-14
        assert n[1] >= bound - 1e-14


def test_local_frame_isometry_property():
    rng = np.random.default_rng(7)
    slopes = rng.uniform(-5.0, 5.0, size=1000)
    for s in slopes:
        frame = local_frame(line(0.0, s), 0.5)
        w = rng.normal(size=2)
        assert abs(np.linalg.norm(frame.matrix.T @ w) - np.linalg.norm(w)) < 1e-12


# --- epsilon squeezing --------------------------------------------------------------


def test_epsilon_scale_identity_at_one(two_fissures):
    scaled = epsilon_scale(two_fissures, 1.0)
    assert scaled.medium == two_fissures
    # shared curve objects, bit-for-bit identity
    for f_in, f_out in zip(two_fissures.fissures, scaled.medium.fissures):
        assert f_out.curve is f_in.curve
        assert f_out.height == f_in.height


def test_epsilon_scale_single_fissure_example():
    medium = validate_medium(0.0, 1.0, 0.0, 1.2, [(const(0.5), 0.2)])
    scaled = epsilon_scale(medium, 0.5).medium
    # first curve never shifts (no heights below it)
    assert scaled.fissures[0].curve.value(0.3) == 0.5
    assert scaled.fissures[0].height == pytest.approx(0.1)
    assert scaled.top == pytest.approx(1.2 - 0.5 * 0.2)


def test_epsilon_scale_two_fissure_example(two_fissures):
    scaled = epsilon_scale(two_fissures, 0.25).medium
    # second curve drops by (1 - eps) * h1 = 0.15
    assert scaled.fissures[1].curve.value(0.2) == pytest.approx(1.0 - 0.15)
    # top block drops by (1 - eps) * (h1 + h2) = 0.45
    assert scaled.top == pytest.approx(2.0 - 0.45)
    assert scaled.fissures[0].height == pytest.approx(0.05)
    assert scaled.fissures[1].height == pytest.approx(0.1)


def test_epsilon_scale_result_revalidates(two_fissures):
    for eps in (1.0, 0.5, 0.2, 0.03):
        m = epsilon_scale(two_fissures, eps).medium
        validate_medium(m.x_lo, m.x_hi, m.bottom, m.top,
                        [(f.curve, f.height) for f in m.fissures], m.slope_cap)


def test_epsilon_scale_rejects_bad_eps(two_fissures):
    for eps in (0.0, -1.0, 1.5):
        with pytest.raises(InvalidEpsilon):
            epsilon_scale(two_fissures, eps)


# --- reference-domain map -----------------------------------------------------------


def test_map_phi_strip_example():
    medium = validate_medium(0.0, 1.0, -1.0, 1.2, [(const(0.0), 0.2)])
    region, p = map_phi(medium, 0.5, (0.4, 0.05))
    assert region == ("strip", 1)
    assert p[1] == pytest.approx(0.1, abs=1e-15)


def test_map_phi_block_example():
    medium = validate_medium(0.0, 1.0, -1.0, 1.2, [(const(0.0), 0.2)])
    region, p = map_phi(medium, 0.5, (0.4, 0.4))
    assert region == ("block", 1)
    assert p[1] == pytest.approx(0.5, abs=1e-15)


def test_map_phi_roundtrip_random(two_fissures):
    rng = np.random.default_rng(11)
    for _ in range(1000):
        eps = rng.uniform(0.05, 1.0)
        x = rng.uniform(0.0, 1.0)
        z = rng.uniform(0.0, 2.0)
        region, ref = map_phi(two_fissures, eps, inverse_phi(two_fissures, eps, (x, z))[1])
        assert region == two_fissures.locate(x, z)
        assert abs(ref[0] - x) < 1e-12
        assert abs(ref[1] - z) < 1e-12


def test_map_phi_outside_domain(two_fissures):
    with pytest.raises(PointOutsideDomain):
        map_phi(two_fissures, 0.5, (2.0, 0.5))


def test_gradient_jacobian_examples(two_fissures):
    medium = validate_medium(0.0, 1.0, -1.0, 2.0, [(line(0.2, 1.0), 0.3)])
    rock = gradient_jacobian(medium, 0.5, (0.5, -0.5))
    assert np.array_equal(rock, np.eye(2))
    strip = gradient_jacobian(medium, 0.5, (0.5, 0.8))
    assert np.allclose(strip, [[1.0, -1.0], [0.0, 2.0]])
    # eps = 1 collapses to the identity in strips as well
    assert np.allclose(gradient_jacobian(medium, 1.0, (0.5, 0.8)), np.eye(2))


def test_gradient_jacobian_determinant(two_fissures):
    rng = np.random.default_rng(3)
    for _ in range(200):
        eps = rng.uniform(0.05, 1.0)
        x = rng.uniform(0.0, 1.0)
        i = rng.integers(1, 3)
        curve = two_fissures.fissures[i - 1].curve
        z = curve.value(x) + rng.uniform(0.0, 1.0) * two_fissures.fissures[i - 1].height * 0.999
        jac = gradient_jacobian(two_fissures, eps, (x, z))
        assert abs(np.linalg.det(jac) - 1.0 / eps) < 1e-12 / eps


# --- collapse ------------------------------------------------------------------------


def test_collapse_block_shift():
    medium = validate_medium(0.0, 1.0, 0.0, 1.2, [(const(0.5), 0.2)])
    region, p = collapse_T(medium, (0.3, 0.9))
    assert region == ("block", 1)
    assert p[1] == pytest.approx(0.7)


def test_collapse_strip_to_curve():
    medium = validate_medium(0.0, 1.0, 0.0, 1.2, [(const(0.5), 0.2)])
    region, p = collapse_T(medium, (0.3, 0.62))
    assert region == ("strip", 1)
    assert p[1] == pytest.approx(0.5)


def test_collapse_two_fissures_validates(two_fissures):
    validate_collapsed(two_fissures)
    lams = collapsed_curves(two_fissures)
    assert lams[0].value(0.1) == pytest.approx(0.3)
    assert lams[1].value(0.1) == pytest.approx(0.8)  # 1.0 - h1


def test_collapse_rigid_on_blocks(two_fissures):
    rng = np.random.default_rng(5)
    pts = []
    while len(pts) < 50:
        x, z = rng.uniform(0.0, 1.0), rng.uniform(0.5 + 1e-6, 1.0 - 1e-6)
        if two_fissures.locate(x, z) == ("block", 1):
            pts.append((x, z))
    for (x1, z1), (x2, z2) in zip(pts, pts[1:]):
        _, q1 = collapse_T(two_fissures, (x1, z1))
        _, q2 = collapse_T(two_fissures, (x2, z2))
        d_before = np.hypot(x2 - x1, z2 - z1)
        d_after = np.linalg.norm(q2 - q1)
        assert abs(d_before - d_after) < 1e-12


def test_locate_tie_breaking(two_fissures):
    # on a lower wall: strip; on an upper wall: block above
    assert two_fissures.locate(0.4, 0.3) == ("strip", 1)
    assert two_fissures.locate(0.4, 0.5) == ("block", 1)
    assert two_fissures.locate(0.4, 1.0) == ("strip", 2)
    assert two_fissures.locate(0.4, 1.4) == ("block", 2)


def test_region_area_exact():
    medium = validate_medium(0.0, 1.0, 0.0, 1.2, [(line(0.4, 0.2), 0.2)])
    # block 0 under z = 0.4 + 0.2 x: area = 0.4 + 0.1
    assert medium.region_area(("block", 0)) == pytest.approx(0.5)
    assert medium.region_area(("strip", 1)) == pytest.approx(0.2)
