import math

import numpy as np
import pytest

from ighartree.errors import DivergedRenormalizer, NonPositiveIterate, NotConverged
from ighartree.ground_state import SolverOptions, constants, pohozaev_residuals, solve
from ighartree.spectral import GridSpec


def test_converged_and_residuals(gs64):
    assert gs64.converged
    assert gs64.equation_residual < 1e-6
    assert max(gs64.pohozaev_residuals) < 1e-2


def test_shape(gs64):
    Q = gs64.Q
    assert np.isrealobj(Q) and Q.min() > 0
    assert np.abs(Q - Q[::-1, ::-1, ::-1]).max() < 1e-8 * Q.max()
    assert np.abs(Q - Q.transpose(1, 0, 2)).max() < 1e-8 * Q.max()
    c = gs64.grid.n // 2
    core = gs64.grid.x[c:] <= 6.0
    for ray in (Q[c:, c, c], Q[c, c:, c], Q[c, c, c:], Q[:c, c, c][::-1]):
        assert np.all(np.diff(ray[core]) <= 1e-6 * Q.max())


@pytest.mark.xfail(strict=True, reason="spectral ringing of order 1e-4 max(Q) in the far tail (r > 6)")
def test_monotone_full_ray(gs64):
    Q = gs64.Q
    c = gs64.grid.n // 2
    assert np.all(np.diff(Q[c:, c, c]) <= 1e-6 * Q.max())


def test_constants(params, gs64):
    th = constants(gs64, params)
    assert th.C_op == pytest.approx(th.C_op_closed_form, rel=1e-2)
    assert gs64.E0_Q > 0
    assert th.mass_P == pytest.approx(gs64.P_Q * gs64.mass_Q**params.sigma_c)
    assert set(th.to_dict()) == {"mass_energy", "mass_gradient", "mass_P", "C_op", "C_op_closed_form"}


def test_pohozaev_residuals_vanish_on_exact_relations(params):
    mass = 2.0
    kin = params.B * mass / params.A
    P = 2 * params.p / params.B * kin
    assert max(pohozaev_residuals(params, mass, kin, P)) < 1e-14


def test_residuals_converge_with_resolution(params, gs64):
    coarse = solve(params, GridSpec(32, 16.0))
    for rc, rf in zip(coarse.pohozaev_residuals, gs64.pohozaev_residuals):
        assert rc / rf >= 4.0      # at least second order under halving h


def test_not_converged(params):
    gs = solve(params, GridSpec(16, 12.0), SolverOptions(max_iter=2))
    assert not gs.converged
    with pytest.raises(NotConverged):
        constants(gs, params)


def test_bad_seeds(params):
    g = GridSpec(16, 12.0)
    with pytest.raises(NonPositiveIterate):
        solve(params, g, seed=-np.exp(-g.r2))
    with pytest.raises(DivergedRenormalizer):
        solve(params, g, seed=np.zeros(g.shape))


def test_summary_is_jsonable(gs64):
    import json
    d = gs64.summary()
    json.dumps(d)
    assert "Q" not in d and math.isfinite(d["C_op"])
