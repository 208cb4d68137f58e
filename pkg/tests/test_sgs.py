import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ablmini.grid import BC, BCSpec, CellVectorField, build_grid, fill_ghost, plane_average_array
from ablmini.sgs import (SgsConfig, StrainField, fluctuating_strain, isotropy_gamma,
                         mean_stress_tendency, mfev_nuT, sgs_contributions, smagorinsky_nut,
                         strain_rate)

LINEAR = BCSpec(BC("gradient", 0.0), BC("gradient", 0.0))


def _velocity(grid, fu=None, fv=None, fw=None, bcs=None):
    u = CellVectorField.zeros(grid)
    x = grid.x_centers()[:, None, None]
    y = grid.y_centers()[None, :, None]
    z = grid.z_centers()[None, None, :]
    for comp, f in zip(u.components, (fu, fv, fw)):
        if f is not None:
            comp.interior[...] = f(x, y, z) + np.zeros(grid.shape)
    if bcs is not None:
        fill_ghost(u, bcs)
    return u


def test_pure_shear():
    grid = build_grid(8, 8, 8, 8.0, 8.0, 8.0)
    rate = 0.3
    bcs = (BCSpec(BC("gradient", rate), BC("gradient", rate)), LINEAR, LINEAR)
    u = _velocity(grid, fu=lambda x, y, z: rate * z, bcs=bcs)
    S = strain_rate(u)
    np.testing.assert_allclose(S.s13, rate / 2, rtol=1e-13)
    for c in (S.s11, S.s22, S.s33, S.s12, S.s23):
        assert np.abs(c).max() < 1e-15
    np.testing.assert_allclose(S.magnitude, rate, rtol=1e-13)


def test_rigid_rotation_has_no_strain():
    grid = build_grid(8, 8, 8, 1.0, 1.0, 1.0, periodic_x=False, periodic_y=False)
    om = 0.7
    side_u = dict(xlo=BC("gradient", 0.0), xhi=BC("gradient", 0.0),
                  ylo=BC("gradient", -om), yhi=BC("gradient", -om))
    side_v = dict(xlo=BC("gradient", om), xhi=BC("gradient", om),
                  ylo=BC("gradient", 0.0), yhi=BC("gradient", 0.0))
    side_w = dict(xlo=BC("even"), xhi=BC("even"), ylo=BC("even"), yhi=BC("even"))
    bcs = (BCSpec(BC("even"), BC("even"), **side_u), BCSpec(BC("even"), BC("even"), **side_v),
           BCSpec(BC("even"), BC("even"), **side_w))
    u = _velocity(grid, fu=lambda x, y, z: -om * y, fv=lambda x, y, z: om * x, bcs=bcs)
    S = strain_rate(u)
    assert max(np.abs(c).max() for c in S.components) < 1e-14


def test_strain_matches_naive_loop(rng):
    grid = build_grid(6, 5, 4, 1.2, 1.0, 0.8)
    u = CellVectorField.zeros(grid)
    for c in u.components:
        c.data[...] = rng.standard_normal(c.data.shape)
    S = strain_rate(u)
    g = grid.ghost
    h = (grid.dx, grid.dy, grid.dz)
    data = [c.data for c in u.components]
    for i in range(grid.nx):
        for j in range(grid.ny):
            for k in range(grid.nz):
                grad = np.empty((3, 3))
                for a in range(3):
                    for b in range(3):
                        e = [0, 0, 0]
                        e[b] = 1
                        hi = data[a][i + g + e[0], j + g + e[1], k + g + e[2]]
                        lo = data[a][i + g - e[0], j + g - e[1], k + g - e[2]]
                        grad[a, b] = (hi - lo) / (2 * h[b])
                s = 0.5 * (grad + grad.T)
                got = (S.s11, S.s22, S.s33, S.s12, S.s13, S.s23)
                want = (s[0, 0], s[1, 1], s[2, 2], s[0, 1], s[0, 2], s[1, 2])
                for a, b in zip(got, want):
                    assert a[i, j, k] == pytest.approx(b, abs=1e-15)


def test_fluctuating_strain_has_zero_plane_mean(rng):
    comps = [rng.standard_normal((8, 8, 5)) for _ in range(6)]
    Sf = fluctuating_strain(StrainField(*comps))
    for c in Sf.components:
        assert np.abs(plane_average_array(c)).max() < 1e-13


def test_mean_shear_has_no_fluctuation():
    s13 = np.broadcast_to(np.linspace(0.1, 0.5, 5), (8, 8, 5)).copy()
    zero = np.zeros_like(s13)
    Sf = fluctuating_strain(StrainField(zero, zero, zero, zero, s13, zero))
    assert np.abs(Sf.s13).max() < 1e-15


def test_smagorinsky_arithmetic():
    grid = build_grid(4, 4, 4, 25.0, 25.0, 25.0)
    cfg = SgsConfig(Cs=0.16)
    z = np.zeros(grid.shape)
    # |S| = 2 |s13| for a lone off-diagonal component
    S = StrainField(z, z, z, z, np.full(grid.shape, 0.02), z)
    np.testing.assert_allclose(smagorinsky_nut(S, cfg, grid), 0.04, rtol=1e-14)
    assert not smagorinsky_nut(StrainField(z, z, z, z, z, z), cfg, grid).any()


def test_gamma_unity_and_limits():
    n = (8, 8, 3)
    z = np.zeros(n)
    # laminar shear: no fluctuation, gamma clipped just above zero
    S = StrainField(z, z, z, z, np.full(n, 0.1), z)
    g = isotropy_gamma(S, "sullivan").values
    assert np.all(g > 0) and np.all(g < 1e-6)
    assert np.all(isotropy_gamma(S, "unity").values == 1.0)
    # pure fluctuation: no mean strain
    chk = np.indices(n).sum(axis=0) % 2 * 2.0 - 1.0
    S = StrainField(z, z, z, z, 0.1 * chk, z)
    np.testing.assert_allclose(isotropy_gamma(S, "sullivan").values, 1.0)
    # zero strain everywhere: gamma = 1
    assert np.all(isotropy_gamma(StrainField(z, z, z, z, z, z), "sullivan").values == 1.0)


def test_gamma_half_when_fluctuation_equals_mean():
    n = (8, 8, 2)
    chk = np.indices(n)[:2].sum(axis=0) % 2 * 2.0 - 1.0
    z = np.zeros(n)
    S = StrainField(z, z, z, z, 0.2 + 0.2 * chk, z)
    np.testing.assert_allclose(isotropy_gamma(S, "sullivan").values, 0.5, rtol=1e-14)


def test_unknown_gamma_mode():
    z = np.zeros((2, 2, 2))
    with pytest.raises(ValueError):
        isotropy_gamma(StrainField(z, z, z, z, z, z), "bogus")


def test_nuT_neutral_arithmetic():
    nuT = mfev_nuT(np.array([3.125]), 0.3, np.inf, 0.4, h_blend=None)
    assert nuT[0] == pytest.approx(0.375, rel=1e-14)


def test_nuT_zero_without_friction():
    assert not mfev_nuT(np.linspace(1, 100, 10), 0.0, 50.0).any()


def test_nuT_taper_vanishes_above_blend_height():
    z = np.array([10.0, 50.0, 100.0, 150.0])
    nuT = mfev_nuT(z, 0.3, 50.0, h_blend=100.0)
    assert nuT[0] > nuT[1] > 0 and nuT[2] == 0 and nuT[3] == 0
    untapered = mfev_nuT(z, 0.3, 50.0, h_blend=0.0)
    assert nuT[1] == pytest.approx(untapered[1] * (1 - 50.0 / 100.0) ** 2, rel=1e-14)


def test_nuT_stable_correction():
    z = np.array([3.125])
    L = 20.0
    got = mfev_nuT(z, 0.3, L, 0.4, 4.8, h_blend=None)[0]
    assert got == pytest.approx(0.4 * 0.3 * 3.125 / (1 + 4.8 * 3.125 / L), rel=1e-14)


def test_mean_tendency_of_linear_shear():
    nz, dz, nuT0, slope = 10, 2.0, 0.3, 0.01
    zc = (np.arange(nz) + 0.5) * dz
    s13 = np.broadcast_to(slope * zc, (4, 4, nz)).copy()
    z = np.zeros_like(s13)
    tx, ty, tz = mean_stress_tendency(StrainField(z, z, z, z, s13, z), np.full(nz, nuT0), dz)
    # interior: d/dz(2 nu_T <S13>) = 2 nu_T slope; the walls carry no mean-stress flux
    np.testing.assert_allclose(tx[1:-1], 2 * nuT0 * slope, rtol=1e-12)
    assert tx.sum() * dz == pytest.approx(0.0, abs=1e-15)
    assert not ty.any() and not tz.any()


def test_contributions_without_mean_field():
    rng = np.random.default_rng(3)
    nu_t = rng.uniform(0, 0.1, (4, 4, 6))
    z = np.zeros_like(nu_t)
    S = StrainField(z, z, z, z, z, z)
    c = sgs_contributions(S, nu_t, np.zeros(6), np.ones(6), 1e-5, 1.0, Pr=0.7, Pr_t=1.0)
    np.testing.assert_allclose(c.nu_eff, 1e-5 + nu_t)
    np.testing.assert_allclose(c.kappa_eff, 1e-5 / 0.7 + nu_t)
    assert not any(t.any() for t in c.mean_tendency)


@settings(max_examples=25, deadline=None)
@given(cs=st.floats(0.05, 0.3), rate=st.one_of(st.just(0.0), st.floats(1e-6, 1.0)))
def test_smagorinsky_scaling(cs, rate):
    grid = build_grid(4, 4, 4, 4.0, 4.0, 4.0)
    z = np.zeros(grid.shape)
    S = StrainField(z, z, z, z, np.full(grid.shape, rate / 2), z)
    got = smagorinsky_nut(S, SgsConfig(Cs=cs), grid)
    np.testing.assert_allclose(got, cs ** 2 * rate, rtol=1e-12)


def test_config_validation():
    with pytest.raises(ValueError):
        SgsConfig(model="dynamic")
    with pytest.raises(ValueError):
        SgsConfig(Cs=0.0)
