import math

import numpy as np
import pytest

from lploc.bands import FiniteOperator, assemble
from lploc.errors import PreconditionError
from lploc.hull import embed, hull_identity, random_hull_point
from lploc.lattice import Box
from lploc.localization import (
    R_CAP,
    dynamical_decay,
    fit_decay,
    hull_ule_survey,
    interior_pairs,
    localization_center,
    phase_stability,
    rate_vs_epsilon,
    uniform_fit,
    verify_bound,
)
from lploc.potential import tail_bound, tower_hierarchy
from lploc.spectral import EigenSystem, eig_sym

BOX = Box.cube(1, 256)


def test_centers():
    box = Box((-10,), (10,))
    k = np.arange(-10, 11)
    assert localization_center(np.exp(-0.7 * np.abs(k)), box) == (0,)
    assert localization_center(np.eye(21)[5], box) == (-5,)
    tie = np.zeros(21)
    tie[10] = tie[11] = 1 / math.sqrt(2)
    assert localization_center(tie, box) == (0,)


@pytest.mark.parametrize("C, r", [(1.0, 0.7), (3.0, 1.2)])
def test_fit_exact_exponential(C, r):
    box = Box((-20,), (20,))
    u = C * np.exp(-r * np.abs(np.arange(-20, 21)))
    fit = fit_decay(u, (0,), box=box)
    assert fit.rate == pytest.approx(r, abs=1e-12)
    assert fit.prefactor == pytest.approx(C, rel=1e-12)
    assert not fit.capped


def test_fit_capped_for_basis_vector():
    fit = fit_decay(np.eye(9)[4], (4,), box=Box.cube(1, 9))
    assert fit.capped and fit.rate == R_CAP


def test_uniform_fit_zero_coupling():
    E = eig_sym(FiniteOperator(Box.cube(1, 32), "dirichlet", 0.0, np.random.default_rng(0).random(32)))
    rep = uniform_fit(E)
    assert rep.uniform_rate == R_CAP and rep.uniform_prefactor == 1.0
    assert rep.violations == 0


def test_uniform_fit_synthetic_shifts():
    box = Box.cube(1, 64)
    k = np.arange(64)
    U = np.stack([np.exp(-0.7 * np.abs(k - m)) for m in range(64)], axis=1)
    H = FiniteOperator(box, "dirichlet", 0.0, np.zeros(64))
    E = EigenSystem(H, np.arange(64.0), U, 1e-10, 0.0, 0.0)
    rep = uniform_fit(E)
    assert rep.uniform_rate == pytest.approx(0.7, abs=1e-10)
    assert rep.uniform_prefactor == pytest.approx(1.0, rel=1e-9)
    assert rep.violations == 0


def test_uniform_fit_pipeline(system256):
    rep = uniform_fit(system256, 16)
    assert rep.localized and rep.uniform_rate > 0.5
    assert math.isfinite(rep.uniform_prefactor)
    assert rep.violations == 0 and rep.n_checked == 256 * 256
    assert verify_bound(system256, rep.uniform_prefactor, rep.uniform_rate) == 0
    # a visibly larger rate must be caught
    assert verify_bound(system256, rep.uniform_prefactor, 2 * rep.uniform_rate) > 0


def test_uniform_fit_all_boundary():
    E = eig_sym(FiniteOperator(Box.cube(1, 4), "dirichlet", 0.1, np.arange(4.0)))
    with pytest.raises(PreconditionError):
        uniform_fit(E, 5)


def test_rate_table_small():
    hier = tower_hierarchy(1, 2, 6)
    table = rate_vs_epsilon(hull_identity(hier, 5), Box.cube(1, 128), [0.1, 0.01], level=5)
    assert table.increasing and len(table.rows) == 2
    with pytest.raises(PreconditionError):
        rate_vs_epsilon(hier, BOX, [0.01, 0.1], level=5)


def test_rate_zero_coupling_capped():
    E = eig_sym(assemble(hull_identity(tower_hierarchy(1, 2, 6), 5), Box.cube(1, 64), 0.0, level=5))
    assert uniform_fit(E).uniform_rate == R_CAP


def test_interior_pairs():
    pairs = interior_pairs(BOX, 50, 16, 24, seed=3)
    assert pairs == interior_pairs(BOX, 50, 16, 24, seed=3)
    for n, m in pairs:
        assert 16 <= n[0] <= 239 and 16 <= m[0] <= 239 and abs(n[0] - m[0]) <= 24
    with pytest.raises(PreconditionError):
        interior_pairs(Box.cube(1, 8), 1, 4, 2)


def test_dynamical_zero_coupling():
    E = eig_sym(FiniteOperator(Box.cube(1, 32), "dirichlet", 0.0, np.random.default_rng(1).random(32)))
    fit = dynamical_decay(E, interior_pairs(E.box, 40, 2, 5, seed=0), n_times=5)
    assert fit.r_dyn == R_CAP
    assert np.array_equal(E.eigenvectors @ E.eigenvectors.T, np.eye(32))


def test_dynamical_pipeline(system256):
    rep = uniform_fit(system256)
    fit = dynamical_decay(system256, interior_pairs(BOX, 60, rep.boundary_margin, 24, seed=1), n_times=20)
    assert fit.r_dyn >= rep.uniform_rate / 2
    assert fit.bound_violations == 0 and fit.amplitude_violations == 0
    assert fit.diag_error <= 1e-10


def test_phase_stability_small():
    hier = tower_hierarchy(1, 2, 6)
    rep = phase_stability(hier, 2, [(t,) for t in range(4)], 0.1)
    assert rep.spectra_deviation <= 1e-9 and rep.translation_exactness <= 1e-8
    same = phase_stability(hier, 3, [(0,), (16,)], 0.05)
    assert same.spectra_deviation == 0.0 and same.translation_exactness == 0.0
    assert phase_stability(tower_hierarchy(2, 2, 4), 2, [(0, 0), (1, 3), (2, 1)], 0.05).spectra_deviation <= 1e-9


def test_survey_identity_and_shift():
    hier = tower_hierarchy(1, 2, 6)
    e = hull_identity(hier, 5)
    rep = hull_ule_survey(hier, [e, embed(hier, (1,), 5)], BOX, 0.01, 5)
    rates = [row["r"] for row in rep.ule_table]
    assert abs(rates[0] - rates[1]) / max(rates) <= 0.10
    assert rep.pooled_violations == 0 and rep.translation_exactness is None


def test_depth_sensitivity():
    hier = tower_hierarchy(1, 2, 6)
    for seed in range(3):
        w = random_hull_point(seed, hier, 5)
        r = []
        for k in (4, 5):
            E = eig_sym(assemble(w, BOX, 0.01, level=k))
            r.append(uniform_fit(E).uniform_rate)
        assert abs(r[0] - r[1]) / r[1] < 0.05
        E4 = eig_sym(assemble(w, BOX, 0.01, level=4))
        E5 = eig_sym(assemble(w, BOX, 0.01, level=5))
        assert np.max(np.abs(E4.eigenvalues - E5.eigenvalues)) <= float(tail_bound(hier, 4))
