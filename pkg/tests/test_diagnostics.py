import math

import numpy as np
import pytest

from ighartree.diagnostics import (Cutoff, profile_value, DiagnosticConfig, DiagnosticsSeries, Recorder, VirialWeight,
                                   averaged_morawetz, classify, coercivity_check, local_mass, morawetz_action,
                                   morawetz_double_integral, morawetz_rhs, trend, weight_profile)
from ighartree.errors import EmptySeries, GridMismatch, InsufficientSamples
from ighartree.evolve import EvolveConfig, free_gaussian, run
from ighartree.functionals import HartreeModel, Potential
from ighartree.ground_state import constants
from ighartree.spectral import GridSpec


@pytest.fixture(scope="module")
def g32():
    return GridSpec(32, 16.0)


def test_weight_profile_pieces():
    R = 2.0
    r = np.linspace(0.01, 10, 2001)
    a, a1, a2, a3 = weight_profile(r, R)
    inner, outer = r <= R, r > 2 * R
    assert np.allclose(a[inner], r[inner] ** 2)
    assert np.allclose(a1[outer], 3 * R) and np.allclose(a2[outer], 0)
    lap = a2 + 2 * a1 / r
    assert np.allclose(lap[inner], 6) and np.allclose(lap[outer], 6 * R / r[outer])
    # continuity of a, a', a'' at R and 2R
    for x in (R, 2 * R):
        for f in weight_profile(np.array([x - 1e-9, x + 1e-9]), R)[:3]:
            assert abs(f[1] - f[0]) < 1e-7
    blend = ~inner & ~outer
    assert a1[blend].min() >= 0 and a2[blend].min() >= 0
    # derivative bounds |d^k a| <= C R r^(1-k)
    for k, d in enumerate((a1, a2), start=1):
        assert np.all(np.abs(d[r > R]) <= 4 * R * r[r > R] ** (1 - k))


def test_virial_weight_samples(g32):
    w = VirialWeight(g32, 3.0)
    r = g32.r
    assert np.allclose(w.lap[r <= 3.0], 6.0)
    assert np.allclose(w.bilap[(r <= 3.0) | (r > 6.0)], 0.0)
    H = w.hessian()
    assert np.allclose(H[0][0] + H[1][1] + H[2][2], w.lap)
    assert np.allclose(H[0][1][r <= 3.0], 0, atol=1e-12)
    with pytest.raises(ValueError):
        VirialWeight(g32, 0.0)


def test_cutoff(g32):
    c = Cutoff(g32, 4.0)
    r = g32.r
    assert c.chi.min() >= 0 and c.chi.max() <= 1
    assert np.all(c.chi[r < 2.0] == 1) and np.all(c.chi[r > 4.0] == 0)
    assert np.all(c.ball[r < 4.0] == 1) and np.all(c.ball[r >= 4.0] == 0)


def test_action_real_and_odd(g32, rng):
    w = VirialWeight(g32, 4.0)
    assert morawetz_action(np.exp(-g32.r2), w) == 0.0
    X, Y, Z = g32.axes()
    u = np.exp(-g32.r2) * np.exp(1j * (0.7 * X - 0.3 * Z))
    assert abs(morawetz_action(u, w)) < 1e-12
    with pytest.raises(GridMismatch):
        morawetz_action(np.zeros((8, 8, 8)), w)


def test_action_bound(g32, rng):
    w = VirialWeight(g32, 4.0)
    sup_grad_a = np.max(np.abs(w.da))
    for _ in range(10):
        u = rng.standard_normal(g32.shape) + 1j * rng.standard_normal(g32.shape)
        u *= np.exp(-g32.r2 / 8)
        bound = 2 * sup_grad_a * g32.norm(u) * math.sqrt(g32.kinetic(u))
        assert abs(morawetz_action(u, w)) <= bound


def test_classical_virial_inside_ball(params):
    g = GridSpec(64, 16.0)
    m = HartreeModel(params, g)
    w = VirialWeight(g, 7.0)
    u = np.exp(-2 * g.r2) * (1 + 0.3j * np.exp(-g.r2))
    tb = morawetz_rhs(m, u, None, w)
    assert tb.a == pytest.approx(8 * g.kinetic(u), rel=1e-8)
    assert tb.d == 0.0
    assert morawetz_rhs(m, u, Potential.zero(g), w).d == 0.0


def test_nonlocal_terms_collapse(params, g32):
    # (b) + (c) + (e) = -2 int Lap a Phi F - 4 int G Re(conj(u) grad u . grad a)
    m = HartreeModel(params, g32)
    w = VirialWeight(g32, 3.0)
    u = np.exp(-g32.r2 / 2) * np.exp(0.4j * g32.axes()[0])
    tb = morawetz_rhs(m, u, None, w)
    phi = m.potential(u)
    G = m.phase_potential(u, phi)
    grads = g32.gradient(u)
    flux = sum((np.conj(u) * d).real * ga for d, ga in zip(grads, w.grad))
    rhs = -2 * g32.integrate(w.lap * phi * m.density(u)) - 4 * g32.integrate(G * flux)
    assert tb.b + tb.c + tb.e == pytest.approx(rhs, rel=1e-10)


def test_double_integral_cross_check(params):
    g = GridSpec(64, 16.0)
    m = HartreeModel(params, g)
    w = VirialWeight(g, 4.0)
    u = np.exp(-g.r2 / 2) + 0j
    e = morawetz_rhs(m, u, None, w).e
    assert morawetz_double_integral(m, u, w, stride=4) == pytest.approx(e, rel=3e-2)


def test_local_mass(g32):
    assert local_mass(np.zeros(g32.shape), 3.0, g32) == 0
    u = np.exp(-g32.r2 / 4)
    assert local_mass(u, g32.L * math.sqrt(3) / 2 + 1, g32) == pytest.approx(g32.norm(u) ** 2, rel=1e-14)
    with pytest.raises(ValueError):
        local_mass(u, 0.0, g32)


def test_local_mass_free_gaussian_decays():
    g = GridSpec(64, 32.0)
    vals = [local_mass(free_gaussian(g, t), 5.0, g) for t in np.linspace(0.5, 5, 10)]
    assert np.all(np.diff(vals) < 0)


def test_shell_profile_matches_direct(params, g32):
    m = HartreeModel(params, g32)
    rec = Recorder(m, None, DiagnosticConfig(R_local=(2.0, 5.0)))
    s = rec.new_series()
    u = np.exp(-g32.r2 / 3)
    rec.sample(s, 0.0, u)
    assert s.columns["local_mass_R"][0] == pytest.approx(local_mass(u, 2.0, g32), rel=1e-12)
    assert s.columns["local_mass_R5"][0] == pytest.approx(local_mass(u, 5.0, g32), rel=1e-12)


def test_coercivity_zero_field(params, gs64):
    m = HartreeModel(params, gs64.grid, oversample=1.5)
    rep = coercivity_check(m, np.zeros(gs64.grid.shape), gs64, delta=0.5)
    assert rep.applicable and rep.holds and rep.lhs == 0 and rep.rhs == 0


def test_coercivity_not_applicable_for_Q(params, gs64):
    m = HartreeModel(params, gs64.grid, oversample=1.5)
    rep = coercivity_check(m, gs64.Q, gs64, delta=0.1)
    assert not rep.applicable and not rep.holds


def test_cutoff_monotone_random_fields(params, gs64, rng):
    m = HartreeModel(params, gs64.grid)
    g = gs64.grid
    for _ in range(20):
        c = rng.uniform(-3, 3, 3)
        X, Y, Z = g.axes()
        u = rng.uniform(0.2, 2) * np.exp(-((X - c[0]) ** 2 + (Y - c[1]) ** 2 + (Z - c[2]) ** 2) / rng.uniform(1, 8))
        k = rng.normal(size=3)
        u = u * np.exp(1j * (k[0] * X + k[1] * Y + k[2] * Z))
        rep = coercivity_check(m, u, gs64, delta=0.5, radii=(2.0, 4.0, 8.0))
        assert all(cc["mass_monotone"] and cc["P_monotone"] for cc in rep.cutoff)


def _initial_series(params, grid, u0, V=None):
    m = HartreeModel(params, grid)
    return run(m, u0, V, EvolveConfig(dt=0.1, t_end=0.0))


def test_classify_small_multiple_of_Q(params, gs64):
    s = _initial_series(params, gs64.grid, 0.1 * gs64.Q)
    v = classify(s, gs64, params)
    assert v.below_mass_energy and v.below_gradient and v.theorem_condition_held
    assert v.mass_energy_margin > 0 and v.gradient_margin > 0
    assert "below mass-energy threshold" in v.summary()


def test_classify_Q_is_on_gradient_boundary(params, gs64):
    v = classify(_initial_series(params, gs64.grid, gs64.Q), gs64, params)
    assert not v.below_gradient
    assert abs(v.gradient_margin) < 1e-9 * constants(gs64, params).mass_gradient


def test_classify_negative_energy(params, gs64):
    # the mass-energy threshold is positive, so negative energy sits strictly below it;
    # such data fails the gradient condition instead
    s = _initial_series(params, gs64.grid, 3 * np.exp(-gs64.grid.r2 / 2))
    assert s.array("E")[0] < 0
    v = classify(s, gs64, params)
    assert constants(gs64, params).mass_energy > 0
    assert v.below_mass_energy and v.mass_energy_margin > 0
    assert not v.below_gradient


def test_classify_empty(params, gs64):
    with pytest.raises(EmptySeries):
        classify(DiagnosticsSeries(), gs64, params)


def test_trend():
    t = np.linspace(0, 10, 50)
    assert trend(t, np.exp(-0.5 * t))[0] == "decaying"
    assert trend(t, np.exp(0.5 * t))[0] == "growing"
    assert trend(t, np.ones_like(t))[0] == "flat"


def test_averaged_morawetz_static_and_zero(params, g32):
    m = HartreeModel(params, g32)
    rec = Recorder(m, None)
    s = rec.new_series()
    u = np.exp(-g32.r2 / 2)
    for t in (0.0, 0.5, 1.0, 2.0):
        rec.sample(s, t, u)
    val = averaged_morawetz(s, 3.0, 1.5)
    assert val == pytest.approx(profile_value(s.radii, s.P_profiles[0], 3.0), rel=1e-14)
    z = rec.new_series()
    for t in (0.0, 1.0):
        rec.sample(z, t, np.zeros(g32.shape))
    assert averaged_morawetz(z, 3.0, 1.0) == 0.0
    with pytest.raises(InsufficientSamples):
        averaged_morawetz(s, 3.0, 5.0)


def test_series_csv_roundtrip(params, g32, tmp_path):
    m = HartreeModel(params, g32)
    s = run(m, np.exp(-g32.r2 / 2), None, EvolveConfig(dt=0.01, t_end=0.03, diagnostic_stride=1),
            diagnostics=DiagnosticConfig(terms=True))
    s.to_csv(tmp_path / "s.csv")
    r = DiagnosticsSeries.from_csv(tmp_path / "s.csv")
    assert list(r.columns) == list(s.columns)
    for c in ("t", "E", "term_total"):
        assert np.array_equal(r.array(c), s.array(c))
