import warnings

import numpy as np
import pytest
from scipy.linalg import expm

from eit_entangle.errors import BracketingError, PairIdentificationError, ParameterError, TrackDiscontinuityError
from eit_entangle.model import SystemParams, dressed_states
from eit_entangle.spectral import (
    damping_threshold,
    effective_eigs,
    find_avoided_crossing,
    gamma1,
    gamma1_approx,
    gap_approx,
    lz_coupling_element_analytic,
    lz_coupling_element_numeric,
    lz_pair,
    predict_negativity_damped,
    predict_negativity_pure,
    spectrum_scan,
    steady_negativity_limit,
)

TWO_PI = 2 * np.pi


# -- scans -------------------------------------------------------------------


def test_scan_eta_zero_exact_crossing():
    p = SystemParams(eta=0.0)
    scan = spectrum_scan(p, (0.8, 1.2), 41, 12)
    a, b = scan.track_of(1, 3), scan.track_of(0, 2)
    sep = scan.separation(a, b)
    k = int(np.argmin(sep))
    assert abs(scan.control[k] - 1.0) <= 0.01 + 1e-12
    assert sep[k] < 1e-9
    # diabatic tracks really cross: the sign of the difference flips
    diff = scan.tracks[:, a] - scan.tracks[:, b]
    assert diff[0] * diff[-1] < 0


def test_scan_reference_minimum_near_resonance(ref_params):
    scan = spectrum_scan(ref_params, (0.8, 1.2), 41, 28)
    sep = scan.separation(scan.track_of(1, 3), scan.track_of(0, 2))
    assert abs(scan.control[np.argmin(sep)] - 1.0) <= 0.02
    assert scan.min_overlap > 0.9


def test_scan_tracks_are_permutations(ref_params):
    scan = spectrum_scan(ref_params, (0.9, 1.1), 11, 8)
    for i in range(scan.control.size):
        np.testing.assert_array_equal(np.sort(scan.tracks[i]), scan.eigenvalues[i])


def test_scan_single_point(ref_params):
    scan = spectrum_scan(ref_params, (1.0, 1.0), 1, 8)
    assert scan.control.tolist() == [1.0]
    assert scan.tracks is None
    assert scan.eigenvalues.shape == (1, 24)


def test_scan_input_errors(ref_params):
    with pytest.raises(BracketingError):
        spectrum_scan(ref_params, (1.1, 1.3), 5, 8)
    with pytest.raises(ParameterError):
        spectrum_scan(ref_params, (0.9, 1.1), 2, 8)


def test_scan_discontinuity_reports_index(ref_params, crossing3):
    # a grid point placed on the crossing center sees fully mixed eigenvectors
    c = crossing3.center
    with pytest.raises(TrackDiscontinuityError) as info:
        spectrum_scan(ref_params, (0.8, 2 * c - 0.8), 3, 28)
    assert info.value.index == 1


# -- crossings ---------------------------------------------------------------


def test_crossing_n3_within_20_percent(ref_params, crossing3):
    approx = gap_approx(ref_params, 3)
    assert approx == pytest.approx(0.0020734, abs=1e-7)
    assert abs(crossing3.gap - approx) / approx < 0.2
    assert crossing3.gap == pytest.approx(crossing3.e_plus - crossing3.e_minus, abs=1e-15)


def test_crossing_n30_within_20_percent(ref_params):
    approx = gap_approx(ref_params, 30)
    assert approx == pytest.approx(0.0065566, abs=1e-7)
    gap = find_avoided_crossing(ref_params, 30).gap
    assert abs(gap - approx) / approx < 0.2, f"gap {gap:.6g} vs approximation {approx:.6g}"


def test_crossing_eta_zero_closes(ref_params):
    c = find_avoided_crossing(ref_params.replace(eta=0.0), 3, 20)
    assert c.gap < 1e-10
    assert abs(c.center - 1.0) < 1e-6


def test_crossing_approaches_approximation_for_small_eta(ref_params):
    p = ref_params.replace(eta=0.02)
    c = find_avoided_crossing(p, 3, 20)
    assert abs(c.gap / gap_approx(p, 3) - 1) < 0.05


def test_crossing_sqrt_n_scaling(ref_params):
    g1 = find_avoided_crossing(ref_params, 1).gap
    g4 = find_avoided_crossing(ref_params, 4).gap
    assert 1.9 <= g4 / g1 <= 2.1, f"gap(4)/gap(1) = {g4 / g1:.4f}"


def test_crossing_symmetric_under_laser_exchange(ref_params, crossing3):
    swapped = ref_params.replace(g1=ref_params.g2, g2=ref_params.g1)
    c = find_avoided_crossing(swapped, 3, 28)
    assert c.gap == pytest.approx(crossing3.gap, rel=1e-6)
    assert c.center == pytest.approx(crossing3.center, abs=1e-6)


def test_crossing_errors():
    with pytest.raises(ParameterError):
        find_avoided_crossing(SystemParams(), 0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        bad = SystemParams(delta=0.06, g1=0.1, g2=0.05, eta=0.8)
        with pytest.raises(PairIdentificationError):
            find_avoided_crossing(bad, 5)


def test_lz_pair_fidelity(ref_params, crossing3):
    pair = lz_pair(ref_params, crossing3)
    assert min(pair.overlap_quality) > 0.98
    assert not pair.degenerate
    assert pair.e_plus - pair.e_minus == crossing3.gap
    m = np.column_stack([pair.chi_plus, pair.chi_minus])
    assert np.max(np.abs(m.conj().T @ m - np.eye(2))) < 1e-12


def test_lz_pair_degenerate_at_eta_zero(ref_params):
    p = ref_params.replace(eta=0.0)
    pair = lz_pair(p, find_avoided_crossing(p, 3, 20))
    assert pair.degenerate
    m = np.column_stack([pair.chi_plus, pair.chi_minus])
    assert np.max(np.abs(m.conj().T @ m - np.eye(2))) < 1e-12


# -- closed forms --------------------------------------------------------------


def test_pure_prediction():
    gap = 0.0019389
    assert predict_negativity_pure(gap, 0.0) == 0.0
    t_peak = np.pi / (2 * TWO_PI * gap)
    assert predict_negativity_pure(gap, t_peak) == pytest.approx(0.5, abs=1e-15)
    zeros = np.arange(1, 5) * np.pi / (TWO_PI * gap)
    assert np.all(predict_negativity_pure(gap, zeros) < 1e-12)


def test_damped_reduces_to_pure():
    gap = 0.0019389
    t = np.linspace(0, 1000, 2001)
    np.testing.assert_allclose(predict_negativity_damped(gap, 0.0, t), predict_negativity_pure(gap, t), atol=1e-15)
    assert predict_negativity_damped(gap, 0.0012, 0.0) == 0.0


def test_damped_critical_limit():
    gap = 0.002
    g = 2 * gap
    d, gr = TWO_PI * gap, TWO_PI * g
    t = np.linspace(0, 50, 101)
    limit = 0.5 * d * (t + gr * t**2 / 4) * np.exp(-gr * t / 2)
    np.testing.assert_allclose(predict_negativity_damped(gap, g, t), limit, atol=1e-8)


def test_damped_continuous_across_critical_point():
    gap = 0.002
    t = np.linspace(0, 2000, 4001)
    lo = predict_negativity_damped(gap, 2 * gap * (1 - 1e-6), t)
    hi = predict_negativity_damped(gap, 2 * gap * (1 + 1e-6), t)
    assert np.max(np.abs(lo - hi)) < 1e-8


def test_damped_has_no_jump_at_critical_point():
    # a jump would survive as the offset shrinks; smooth dependence scales with it
    gap = 0.002
    t = np.linspace(0, 2000, 4001)

    def spread(eps):
        lo = predict_negativity_damped(gap, 2 * gap * (1 - eps), t)
        hi = predict_negativity_damped(gap, 2 * gap * (1 + eps), t)
        return np.max(np.abs(lo - hi))

    assert spread(1e-8) < 1e-8
    assert spread(1e-6) / spread(1e-8) == pytest.approx(100, rel=0.05)


def _two_state_negativity(gap, g1rate, t):
    """|a b| of the damped two-state model, by matrix exponential."""
    d, g = TWO_PI * gap, TWO_PI * g1rate
    h = np.array([[-0.5j * g, 0.5 * d], [0.5 * d, 0.0]])  # (phi1,n-1 ; phi2,n)
    out = []
    for tk in np.atleast_1d(t):
        a, b = expm(-1j * h * tk) @ np.array([0.0, 1.0])
        out.append(abs(a * b))
    return np.array(out)


@pytest.mark.parametrize("ratio", [0.0, 0.3, 1.0, 1.7, 8.0])
def test_damped_matches_two_state_model(ratio):
    gap = 0.002
    g = ratio * 2 * gap
    t = np.linspace(0, 1500, 301)
    np.testing.assert_allclose(
        predict_negativity_damped(gap, g, t), _two_state_negativity(gap, g, t), atol=1e-12
    )


def test_damped_large_times_do_not_overflow():
    val = predict_negativity_damped(0.002, 5.0, np.array([1e4, 1e6]))
    assert np.all(np.isfinite(val))


def test_rate_and_threshold_values(ref_params):
    p = ref_params.replace(gamma=0.6)
    assert gamma1(p) == pytest.approx(0.0012090, abs=1e-7)
    assert gamma1_approx(p) == pytest.approx(0.0011971, abs=1e-7)
    assert damping_threshold(ref_params, 3) == pytest.approx(8 * 0.1 * np.sqrt(3) * 15 * 0.1, rel=1e-12)
    assert damping_threshold(ref_params, 3) == pytest.approx(2.0785, abs=1e-4)
    assert steady_negativity_limit(ref_params) == pytest.approx(0.01, abs=1e-15)
    assert steady_negativity_limit(ref_params.replace(g2=0.0)) == 0.0
    assert lz_coupling_element_analytic(ref_params) == pytest.approx(2.9927e-4, abs=1e-8)


@pytest.mark.parametrize("n", [1, 3, 30])
def test_threshold_consistency(ref_params, n):
    gam = damping_threshold(ref_params, n)
    assert gamma1_approx(ref_params.replace(gamma=gam)) / 2 == pytest.approx(gap_approx(ref_params, n), rel=1e-12)


def test_coupling_element_numeric(ref_params):
    val = lz_coupling_element_numeric(ref_params, 30)
    ref = lz_coupling_element_analytic(ref_params)
    assert abs(val - ref) / ref < 0.05, f"numeric {val:.5g} vs closed form {ref:.5g}"


def test_coupling_element_eta_zero(ref_params):
    assert lz_coupling_element_numeric(ref_params.replace(eta=0.0), 10) < 1e-15


def test_coupling_element_linear_in_eta(ref_params):
    etas = np.linspace(0.01, 0.2, 8)
    vals = np.array([lz_coupling_element_numeric(ref_params.replace(eta=e), 30) for e in etas])
    slope = vals[0] / etas[0]
    assert np.max(np.abs(vals / (slope * etas) - 1)) < 0.02


def test_coupling_element_is_half_the_gap_scale(ref_params):
    # in the two-state matrix the off-diagonal is gap/2 = eta g1 g2 / (2 Delta) for n = 1
    p = ref_params.replace(eta=0.01)
    val = lz_coupling_element_numeric(p, 20)
    assert val == pytest.approx(gap_approx(p, 1) / 2, rel=0.01)


def test_effective_eigs_hermitian_limit(ref_params):
    e = effective_eigs(ref_params)
    assert np.all(np.abs(e.exact.imag) < 1e-12)
    d = dressed_states(ref_params)
    g = max(ref_params.g1, ref_params.g2)
    np.testing.assert_allclose(e.exact.real, d.energies, atol=1e-10)
    assert np.max(np.abs(e.discrepancy)) < 5 * g**4 / ref_params.delta**3


def test_effective_eigs_gamma6(ref_params):
    p = ref_params.replace(gamma=6.0)
    e = effective_eigs(p, n=3)
    half = gamma1(p) / 2
    assert abs(e.exact[0].imag + half) < 0.1 * half
    assert abs(e.exact[1].imag) < 1e-3 * p.gamma
    assert e.gap_used == gap_approx(p, 3)
    # gamma1/2 exceeds the splitting at Gamma = 6: overdamped, nu is imaginary
    assert e.nu is not None and abs(e.nu.real) < 1e-15 and e.nu.imag > 0
    assert e.gamma1 >= 0 and e.eps1.imag <= 0 and e.eps3.imag <= 0
