import mpmath
import numpy as np
import pytest

from graphene_search.bloch import SQRT3, band_energies
from graphene_search.exceptions import DiracUnavailable, NumericalError, PoleProximity
from graphene_search.lattice import LatticeSpec
from graphene_search.resolvent import (
    S_DIRAC,
    bisect_secant,
    box_sum,
    epstein_zeta,
    leading_order_root,
    moment,
    moment_sums,
    perturbed_energies,
    pole_table,
    resolvent_dF,
    resolvent_F,
    resolvent_root,
    verify_moment_limit,
)
from graphene_search.spectral import gap_at_crossing, smallest_positive_band_energy

DIRAC_SIZES = [(3, 3), (6, 6), (9, 6), (12, 12), (15, 15), (18, 18), (21, 21), (24, 24)]


def zeta_hex(x):
    """Closed form of Z_2(S_K, x): (1/2) (8 pi^2)^(-x) * 6 zeta(x) L(x, chi_-3)."""
    L = mpmath.mpf(3) ** (-x) * (mpmath.zeta(x, mpmath.mpf(1) / 3) - mpmath.zeta(x, mpmath.mpf(2) / 3))
    return float(0.5 * (8 * mpmath.pi**2) ** (-x) * 6 * mpmath.zeta(x) * L)


def zeta_square(x):
    """Closed form of Z_2(4 pi^2 I, x): (1/2) (4 pi^2)^(-x) * 4 zeta(x) beta(x)."""
    beta = mpmath.mpf(4) ** (-x) * (mpmath.zeta(x, mpmath.mpf(1) / 4) - mpmath.zeta(x, mpmath.mpf(3) / 4))
    return float(0.5 * (4 * mpmath.pi**2) ** (-x) * 4 * mpmath.zeta(x) * beta)


def F_bruteforce(spec, E):
    eps = band_energies(spec)
    return SQRT3 / spec.num_sites * np.sum(1 / (E - eps) + 1 / (E + eps))


def test_F_matches_direct_sum_and_is_odd(spec12):
    for E in (0.05, 0.3, 1.1, 2.2):
        assert resolvent_F(spec12, E) == pytest.approx(F_bruteforce(spec12, E), rel=1e-12)
        assert resolvent_F(spec12, -E) == pytest.approx(-resolvent_F(spec12, E), rel=1e-14)


def test_F_vectorized(spec12):
    E = np.array([0.05, 0.3, -0.7])
    np.testing.assert_allclose(resolvent_F(spec12, E), [resolvent_F(spec12, e) for e in E])


def test_dF_is_derivative(spec12):
    for E in (0.07, 0.4, 1.3):
        h = 1e-6
        fd = (resolvent_F(spec12, E + h) - resolvent_F(spec12, E - h)) / (2 * h)
        assert resolvent_dF(spec12, E) == pytest.approx(fd, rel=1e-6)
        assert resolvent_dF(spec12, E) < 0


def test_dirac_term_dominates_near_zero(spec12):
    E = 1e-4
    assert resolvent_F(spec12, E) * spec12.num_sites * E / (4 * SQRT3) == pytest.approx(1.0, rel=1e-5)


def test_single_sign_change_below_first_band_level(spec12):
    eps_min = smallest_positive_band_energy(spec12)
    grid = np.linspace(1e-4, eps_min - 1e-6, 20001)
    f = resolvent_F(spec12, grid)
    assert np.count_nonzero(np.diff(np.sign(f)) != 0) == 1


def test_pole_proximity(spec12):
    eps = pole_table(spec12).poles[3]
    with pytest.raises(PoleProximity) as info:
        resolvent_F(spec12, eps + 1e-14)
    assert info.value.pole == pytest.approx(eps)
    with pytest.raises(PoleProximity):
        resolvent_dF(spec12, 0.0)
    assert isinstance(info.value, NumericalError)


@pytest.mark.parametrize("m,n", DIRAC_SIZES)
def test_root_matches_eigensolver(m, n):
    spec = LatticeSpec(m, n)
    E = resolvent_root(spec)
    assert E == pytest.approx(gap_at_crossing(spec).E_plus, abs=1e-8)
    assert 0 < E < smallest_positive_band_energy(spec)
    assert abs(resolvent_F(spec, E)) <= 1e-12 * abs(resolvent_dF(spec, E)) * E


def test_root_below_leading_order_estimate():
    for m in range(6, 31, 6):
        spec = LatticeSpec(m, m)
        assert resolvent_root(spec) < leading_order_root(spec)


def test_root_approaches_leading_order():
    ratios = []
    for m in (6, 12, 18, 24, 30):
        spec = LatticeSpec(m, m)
        E = resolvent_root(spec)
        ratios.append(E**2 * spec.num_sites * moment_sums(spec, 1)[0] / (4 * SQRT3))
    assert np.all(np.diff(ratios) > 0) and ratios[-1] < 1
    assert 1 - ratios[-1] < 0.5 * (1 - ratios[0])


def test_dF_at_root_tends_to_minus_two_I2():
    dev = []
    for m in (6, 12, 18, 24):
        spec = LatticeSpec(m, m)
        E = resolvent_root(spec)
        dev.append(resolvent_dF(spec, E) / (-2 * moment_sums(spec, 1)[0]) - 1)
    assert np.all(np.diff(dev) < 0) and dev[-1] > 0


def test_root_needs_dirac_points():
    with pytest.raises(DiracUnavailable):
        resolvent_root(LatticeSpec(10, 10))


def test_perturbed_energies_against_eigensolver(spec12, spectrum12):
    E = perturbed_energies(spec12)
    np.testing.assert_allclose(E, -E[::-1], atol=1e-12)
    w = spectrum12.eigenvalues
    for e in E:
        assert np.min(np.abs(w - e)) < 1e-8
    assert np.all(np.abs(resolvent_F(spec12, E)) < 1e-8)


def test_perturbed_energies_without_dirac_points():
    spec = LatticeSpec(4, 5)
    E = perturbed_energies(spec)
    assert np.any(E == 0.0)


def test_bisect_secant():
    r = bisect_secant(lambda x: 2.0 - x * x, 0.0, 3.0)
    assert r == pytest.approx(np.sqrt(2), abs=1e-13)
    with pytest.raises(NumericalError):
        bisect_secant(lambda x: x, 0.5, 1.0)


def test_moments(spec12):
    eps = band_energies(spec12)
    eps = eps[eps > 1e-9]
    I2, I4 = moment_sums(spec12, 2)
    assert I2 == pytest.approx(2 * SQRT3 / 288 * np.sum(eps**-2.0), rel=1e-13)
    assert I4 == pytest.approx(2 * SQRT3 / 288 * np.sum(eps**-4.0), rel=1e-13)
    assert moment(spec12, 3) == 0.0 and moment(spec12, 4) == I4
    assert I2 > moment_sums(LatticeSpec(6, 6), 1)[0] > 0


def test_I2_grows_like_ln_N():
    N, I2 = [], []
    for m in range(6, 31, 3):
        spec = LatticeSpec(m, m)
        N.append(spec.num_sites)
        I2.append(moment_sums(spec, 1)[0])
    r = np.corrcoef(np.log(N), I2)[0, 1]
    assert r**2 >= 0.99


def test_I4_over_N_settles():
    vals = [moment_sums(LatticeSpec(m, m), 2)[1] / (2 * m * m) for m in (12, 18, 24, 30)]
    steps = np.abs(np.diff(vals))
    assert np.all(np.diff(steps) < 0)


def test_epstein_matches_closed_form():
    r = epstein_zeta(S_DIRAC, 2, cutoff=1000)
    assert r.value == pytest.approx(zeta_hex(2), rel=1e-10)
    assert abs(r.value - r.truncated) <= r.tail_bound
    assert epstein_zeta(S_DIRAC, 3, cutoff=200).value == pytest.approx(zeta_hex(3), rel=1e-12)


def test_epstein_square_control():
    S = 4 * np.pi**2 * np.eye(2)
    a = epstein_zeta(S, 2, cutoff=1000).value
    b = epstein_zeta(S, 2, cutoff=2000).value
    assert abs(a - b) / b < 1e-8
    assert a == pytest.approx(zeta_square(2), rel=1e-10)


def test_epstein_homogeneity():
    c = 2.5
    a = epstein_zeta(c * S_DIRAC, 2, cutoff=300).value
    b = epstein_zeta(S_DIRAC, 2, cutoff=300).value
    assert a == pytest.approx(c**-2 * b, rel=1e-12)


def test_epstein_rejects_bad_input():
    with pytest.raises(ValueError):
        epstein_zeta(np.array([[1.0, 2.0], [2.0, 1.0]]), 2)
    with pytest.raises(ValueError):
        epstein_zeta(S_DIRAC, 1.5)
    with pytest.raises(ValueError):
        epstein_zeta(S_DIRAC, 2, cutoff=5)


def test_box_sum_small():
    S = np.eye(2)
    # ring max(|p|,|q|) = 1: four points at Q=1, four at Q=2
    assert box_sum(S, 2, 1) == pytest.approx(4 + 4 / 4)


def test_moment_limit_prefers_4_sqrt3():
    rep = verify_moment_limit(range(6, 31, 3), k=2)
    assert rep.verdict == "4*sqrt(3)"
    assert rep.monotone
    assert rep.candidates["4*sqrt(3)"] == pytest.approx(4 * SQRT3 * 2 * zeta_hex(2), rel=1e-9)
    assert abs(rep.extrapolated / rep.candidates["4*sqrt(3)"] - 1) < 0.1


def test_moment_limit_control_square():
    S = 4 * np.pi**2 * np.eye(2)
    rep = verify_moment_limit([20, 40, 80, 160, 320], k=2, S=S)
    assert rep.verdict == "Z2" and rep.monotone
    assert rep.extrapolated == pytest.approx(zeta_square(2), rel=1e-4)


def test_moment_limit_requires_k2():
    with pytest.raises(ValueError):
        verify_moment_limit([6, 9, 12], k=1)
