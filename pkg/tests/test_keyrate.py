import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlcvqkd.errors import InvalidParameterError, NumericalDomainError
from mlcvqkd.keyrate import (
    KeyRateParams,
    Protocol,
    _golden_section_max,
    _weights_eight,
    _weights_four,
    covariance_z,
    delta_n,
    entropy_g,
    holevo_chi_be,
    mutual_information,
    optimize_vm,
    rate_asymptotic,
    rate_finite,
    symplectic_eigenvalues,
)
from oracles import constellation_weights_series, correlation_from_weights

# values frozen from 50-digit evaluations of the same formulas; the
# double-precision implementation reproduced each to ~1e-15 relative
G_HALF = 1.377443751081734272181
G_THREE = 3.245112497836531455639

Z4_VM_HALF = 1.09654401979516362397
Z8_VM_HALF = 1.100658186630211218492
ZG_VM_HALF = 1.118033988749894848205

L4_A2_085 = [
    0.4367142067060517628034,
    0.3648833506055413413414,
    0.1546275553203155623085,
    0.04377488736809133354666,
]
L8_A2_085 = [
    0.4274178205032722403996,
    0.3633029649643469058969,
    0.1544036673551514917432,
    0.04374770097235404135634,
    0.009296386202779522403762,
    0.001580385641194435444457,
    0.0002238879651640705653883,
    0.00002718639573729219032011,
]

# operating point: vm = 0.35, 20 km (T = 10^-0.4), xi = 0.01, eta = 0.6,
# v_el = 0.05, beta = 0.98
I_20KM = 0.05625817205280776877627
Z8_POINT = 0.8961064338108300968542
CHI8_POINT = 0.03293959332182526365578
K8_POINT = 0.02219341528992634974496
LAM8_POINT = (1.214410754619479771448, 1.007729336018738781726,
              1.206442765252937192532, 1.003193756591125814948)
Z4_POINT = 0.8948360754385179470144
CHI4_POINT = 0.03376100215305445756224
K4_POINT = 0.0213720064586971558385
LAM4_POINT = (1.214818282029597065629, 1.008136863428856075906,
              1.206859744189199366989, 1.003362130017216618125)

DELTA_HALF_MILLION = 0.0580421987653897353353
I_10KM = 0.08811743081231075799043
K_ML_FINITE_10KM = 0.01100448121518104793434

REL = 1e-13


def params_20km(**kw):
    defaults = dict(vm=0.35, excess_noise=0.01, eta=0.6, v_el=0.05, beta=0.98)
    defaults.update(kw)
    return KeyRateParams.at_distance(20.0, **defaults)


class TestEntropyG:
    def test_zero(self):
        assert entropy_g(0.0) == 0.0

    def test_frozen_values(self):
        assert entropy_g(0.5) == pytest.approx(G_HALF, rel=REL)
        assert entropy_g(3.0) == pytest.approx(G_THREE, rel=REL)

    def test_rounding_noise_below_zero_clamps(self):
        assert entropy_g(-1e-12) == 0.0

    def test_genuinely_negative_argument_rejected(self):
        with pytest.raises(NumericalDomainError) as err:
            entropy_g(-0.5)
        assert err.value.exit_code == 3

    def test_monotone_increasing(self):
        xs = np.linspace(0.0, 10.0, 50)
        gs = [entropy_g(float(x)) for x in xs]
        assert all(b > a for a, b in zip(gs, gs[1:]))

    @pytest.mark.parametrize("x", [1e4, 1e6, 1e8])
    def test_large_argument_tracks_the_logarithm(self, x):
        # G(x) -> log2(e x) from above, gap below the first-order 1/x term
        g = entropy_g(x)
        assert math.isfinite(g)
        assert 0.0 < g - math.log2(math.e * x) < math.log2(math.e) / x


class TestNoiseDecomposition:
    def test_detector_term(self):
        p = params_20km()
        assert p.chi_het == pytest.approx((2 - 0.6 + 2 * 0.05) / 0.6)

    def test_line_term(self):
        p = KeyRateParams(vm=1.0, transmittance=0.1, excess_noise=0.01)
        assert p.chi_line == pytest.approx(10.0 - 1.0 + 0.01)

    @given(
        st.floats(min_value=1e-4, max_value=1.0),
        st.floats(min_value=0.0, max_value=0.2),
        st.floats(min_value=0.05, max_value=1.0),
        st.floats(min_value=0.0, max_value=0.5),
    )
    @settings(max_examples=200, deadline=None)
    def test_total_noise_collapses_to_closed_form(self, t, xi, eta, v_el):
        p = KeyRateParams(vm=1.0, transmittance=t, excess_noise=xi, eta=eta, v_el=v_el)
        closed = xi - 1.0 + 2.0 * (1.0 + v_el) / (eta * t)
        assert p.chi_tot == pytest.approx(closed, rel=1e-12, abs=1e-12)

    def test_at_distance_uses_fiber_loss_law(self):
        p = KeyRateParams.at_distance(20.0, vm=0.35)
        assert p.transmittance == pytest.approx(10.0 ** -0.4)

    def test_validation(self):
        with pytest.raises(InvalidParameterError):
            KeyRateParams(vm=0.0, transmittance=0.5)
        with pytest.raises(InvalidParameterError):
            KeyRateParams(vm=1.0, transmittance=1.5)
        with pytest.raises(InvalidParameterError):
            KeyRateParams(vm=1.0, transmittance=0.5, eta=0.0)
        with pytest.raises(InvalidParameterError):
            KeyRateParams(vm=1.0, transmittance=0.5, n=100)  # missing big_n
        with pytest.raises(InvalidParameterError):
            KeyRateParams(vm=1.0, transmittance=0.5, n=200, big_n=100)


class TestMutualInformation:
    def test_frozen_values(self):
        assert mutual_information(params_20km()) == pytest.approx(I_20KM, rel=REL)
        p10 = KeyRateParams.at_distance(10.0, vm=0.35)
        assert mutual_information(p10) == pytest.approx(I_10KM, rel=REL)

    def test_direct_formula(self):
        p = params_20km(vm=5.0)
        want = math.log2((6.0 + p.chi_tot) / (1.0 + p.chi_tot))
        assert mutual_information(p) == want

    def test_increases_with_variance(self):
        rates = [mutual_information(params_20km(vm=v)) for v in (0.1, 1.0, 10.0, 100.0)]
        assert rates == sorted(rates)


class TestConstellationWeights:
    def test_four_state_frozen_values(self):
        np.testing.assert_allclose(_weights_four(0.85), L4_A2_085, rtol=REL)

    def test_eight_state_frozen_values(self):
        np.testing.assert_allclose(_weights_eight(0.85), L8_A2_085, rtol=1e-13)

    @pytest.mark.parametrize("a2", [0.05, 0.25, 0.85, 2.0, 10.0])
    def test_weights_match_fourier_series(self, a2):
        np.testing.assert_allclose(
            _weights_four(a2), constellation_weights_series(a2, 4), rtol=1e-10, atol=1e-15
        )
        np.testing.assert_allclose(
            _weights_eight(a2), constellation_weights_series(a2, 8), rtol=1e-10, atol=1e-15
        )

    def test_small_amplitude_weights_against_high_precision(self):
        # at a2 = 0.005 both the closed forms and the Fourier route cancel
        # below double precision; a 50-digit evaluation of the closed
        # forms is the only trustworthy reference there
        mpmath = pytest.importorskip("mpmath")
        mpmath.mp.dps = 50
        a2 = mpmath.mpf("0.005")
        e = mpmath.exp(-a2)
        want4 = [
            0.5 * e * (mpmath.cosh(a2) + mpmath.cos(a2)),
            0.5 * e * (mpmath.sinh(a2) + mpmath.sin(a2)),
            0.5 * e * (mpmath.cosh(a2) - mpmath.cos(a2)),
            0.5 * e * (mpmath.sinh(a2) - mpmath.sin(a2)),
        ]
        r = a2 / mpmath.sqrt(2)
        even = 2 * mpmath.cos(r) * mpmath.cosh(r)
        odd_a = mpmath.sqrt(2) * (mpmath.cos(r) * mpmath.sinh(r) + mpmath.sin(r) * mpmath.cosh(r))
        odd_b = mpmath.sqrt(2) * (mpmath.sin(r) * mpmath.cosh(r) - mpmath.cos(r) * mpmath.sinh(r))
        want8 = [
            0.25 * e * (mpmath.cosh(a2) + mpmath.cos(a2) + even),
            0.25 * e * (mpmath.sinh(a2) + mpmath.sin(a2) + odd_a),
            0.25 * e * (mpmath.cosh(a2) - mpmath.cos(a2) + 2 * mpmath.sin(r) * mpmath.sinh(r)),
            0.25 * e * (mpmath.sinh(a2) - mpmath.sin(a2) + odd_b),
            0.25 * e * (mpmath.cosh(a2) + mpmath.cos(a2) - even),
            0.25 * e * (mpmath.sinh(a2) + mpmath.sin(a2) - odd_a),
            0.25 * e * (mpmath.cosh(a2) - mpmath.cos(a2) - 2 * mpmath.sin(r) * mpmath.sinh(r)),
            0.25 * e * (mpmath.sinh(a2) - mpmath.sin(a2) - odd_b),
        ]
        np.testing.assert_allclose(_weights_four(0.005), [float(w) for w in want4], rtol=1e-13)
        np.testing.assert_allclose(_weights_eight(0.005), [float(w) for w in want8], rtol=1e-13)

    def test_tiny_variance_stays_finite_and_positive(self):
        # vm = 0.01 used to drive the closed-form small weights negative
        for vm in (0.01, 0.02, 0.1):
            z4 = covariance_z(Protocol.FOUR_STATE, vm)
            z8 = covariance_z(Protocol.EIGHT_STATE, vm)
            zg = covariance_z(Protocol.GAUSSIAN, vm)
            assert 0.0 < z4 <= z8 <= zg
            assert all(w > 0 for w in _weights_eight(vm / 2.0))

    @pytest.mark.parametrize("a2", [0.1, 0.85, 3.0])
    def test_weights_form_a_distribution(self, a2):
        for weights in (_weights_four(a2), _weights_eight(a2)):
            assert all(w > 0 for w in weights)
            assert sum(weights) == pytest.approx(1.0, abs=1e-12)


class TestCorrelationZ:
    def test_frozen_values_at_vm_half(self):
        assert covariance_z(Protocol.FOUR_STATE, 0.5) == pytest.approx(Z4_VM_HALF, rel=REL)
        assert covariance_z(Protocol.EIGHT_STATE, 0.5) == pytest.approx(Z8_VM_HALF, rel=REL)
        assert covariance_z(Protocol.GAUSSIAN, 0.5) == pytest.approx(ZG_VM_HALF, rel=REL)

    def test_gaussian_closed_form(self):
        assert covariance_z(Protocol.GAUSSIAN, 3.0) == pytest.approx(math.sqrt(16.0 - 1.0))
        assert covariance_z(Protocol.ML, 3.0) == covariance_z(Protocol.GAUSSIAN, 3.0)

    def test_zero_variance(self):
        for protocol in Protocol:
            assert covariance_z(protocol, 0.0) == 0.0

    def test_negative_variance_rejected(self):
        with pytest.raises(InvalidParameterError):
            covariance_z(Protocol.GAUSSIAN, -0.1)

    @pytest.mark.parametrize("vm", [0.05, 0.1, 0.2])
    def test_small_variance_approaches_gaussian(self, vm):
        zg = covariance_z(Protocol.GAUSSIAN, vm)
        assert abs(covariance_z(Protocol.FOUR_STATE, vm) - zg) / zg < 0.01
        assert abs(covariance_z(Protocol.EIGHT_STATE, vm) - zg) / zg < 0.01

    @pytest.mark.parametrize("vm", [0.1, 0.5, 2.0, 20.0, 80.0])
    def test_discrete_correlations_are_ordered(self, vm):
        z4 = covariance_z(Protocol.FOUR_STATE, vm)
        z8 = covariance_z(Protocol.EIGHT_STATE, vm)
        zg = covariance_z(Protocol.GAUSSIAN, vm)
        assert z4 <= z8 + 1e-15
        assert z8 <= zg + 1e-15

    @pytest.mark.parametrize("vm", [0.3, 1.0, 4.0])
    def test_matches_series_oracle(self, vm):
        a2 = vm / 2.0
        for protocol, n in ((Protocol.FOUR_STATE, 4), (Protocol.EIGHT_STATE, 8)):
            oracle = correlation_from_weights(a2, constellation_weights_series(a2, n))
            assert covariance_z(protocol, vm) == pytest.approx(oracle, rel=1e-10)


class TestSymplecticSpectrum:
    def test_fifth_eigenvalue_is_exactly_one(self):
        p = params_20km()
        lams = symplectic_eigenvalues(p, covariance_z(Protocol.EIGHT_STATE, p.vm))
        assert lams[4] == 1.0

    def test_frozen_eight_state_spectrum(self):
        p = params_20km(protocol=Protocol.EIGHT_STATE)
        chi, z, lams = holevo_chi_be(p)
        assert z == pytest.approx(Z8_POINT, rel=REL)
        assert chi == pytest.approx(CHI8_POINT, rel=REL)
        np.testing.assert_allclose(lams[:4], LAM8_POINT, rtol=REL)

    def test_frozen_four_state_spectrum(self):
        p = params_20km(protocol=Protocol.FOUR_STATE)
        chi, z, lams = holevo_chi_be(p)
        assert z == pytest.approx(Z4_POINT, rel=REL)
        assert chi == pytest.approx(CHI4_POINT, rel=REL)
        np.testing.assert_allclose(lams[:4], LAM4_POINT, rtol=REL)

    def test_all_eigenvalues_physical(self):
        for distance in (5.0, 20.0, 50.0, 100.0):
            for vm in (0.1, 0.35, 5.0, 50.0):
                p = KeyRateParams.at_distance(distance, vm=vm, protocol=Protocol.EIGHT_STATE)
                _, _, lams = holevo_chi_be(p)
                assert all(l >= 1.0 for l in lams)

    def test_perfect_channel_leaks_nothing(self):
        # T = 1, xi = 0: Eve holds a purification of a pure state, so the
        # Holevo bound collapses to zero whatever the detector noise
        p = KeyRateParams(vm=0.35, transmittance=1.0, excess_noise=0.0,
                          protocol=Protocol.GAUSSIAN)
        chi, _, _ = holevo_chi_be(p)
        assert chi == pytest.approx(0.0, abs=1e-9)


class TestRates:
    def test_frozen_asymptotic_rates(self):
        r8 = rate_asymptotic(params_20km(protocol=Protocol.EIGHT_STATE))
        assert r8.key_rate == pytest.approx(K8_POINT, rel=REL)
        assert r8.mutual_information == pytest.approx(I_20KM, rel=REL)
        assert r8.holevo_term == pytest.approx(CHI8_POINT, rel=REL)
        r4 = rate_asymptotic(params_20km(protocol=Protocol.FOUR_STATE))
        assert r4.key_rate == pytest.approx(K4_POINT, rel=REL)

    def test_asymptotic_ml_rate_is_scaled_mutual_information(self):
        p = params_20km(protocol=Protocol.ML, lam=0.927)
        result = rate_asymptotic(p)
        assert result.key_rate == pytest.approx(0.98 * 0.927 * I_20KM, rel=REL)
        assert result.holevo_term == 0.0

    def test_ml_eve_term_is_charged(self):
        base = rate_asymptotic(params_20km(protocol=Protocol.ML)).key_rate
        taxed = rate_asymptotic(params_20km(protocol=Protocol.ML, ml_eve_term=0.01)).key_rate
        assert taxed == pytest.approx(base - 0.01, rel=1e-12)

    def test_frozen_finite_size_penalty(self):
        p = params_20km(n=500_000, big_n=1_000_000)
        assert delta_n(p) == pytest.approx(DELTA_HALF_MILLION, rel=REL)

    def test_penalty_formula_and_shrinkage(self):
        p = params_20km(n=10_000, big_n=20_000)
        want = 7.0 * math.sqrt(math.log2(2.0 / 1e-10) / 10_000) + (2.0 / 10_000) * math.log2(1e10)
        assert delta_n(p) == pytest.approx(want, rel=1e-12)
        assert delta_n(params_20km(n=10**8, big_n=10**8)) < delta_n(p)

    def test_penalty_requires_block_sizes(self):
        with pytest.raises(InvalidParameterError):
            delta_n(params_20km())

    def test_frozen_finite_size_ml_rate(self):
        p = KeyRateParams.at_distance(
            10.0, vm=0.35, protocol=Protocol.ML, lam=0.927, n=500_000, big_n=1_000_000
        )
        result = rate_finite(p)
        assert result.key_rate == pytest.approx(K_ML_FINITE_10KM, rel=REL)
        assert result.key_rate > 0.0
        assert result.delta_n == pytest.approx(DELTA_HALF_MILLION, rel=REL)

    def test_finite_size_composition(self):
        p = params_20km(protocol=Protocol.EIGHT_STATE, n=500_000, big_n=1_000_000)
        result = rate_finite(p)
        want = 0.5 * (0.98 * result.mutual_information - result.holevo_term - result.delta_n)
        assert result.key_rate == pytest.approx(want, rel=1e-12)

    def test_finite_size_approaches_the_asymptotic_rate(self):
        # with n = N the only gap is the vanishing penalty Delta(n)
        big = 10**14
        asym = rate_asymptotic(params_20km()).key_rate
        fin = rate_finite(params_20km(n=big, big_n=big)).key_rate
        assert fin < asym
        assert asym - fin < 1e-4

    def test_rates_decay_with_distance(self):
        rates = [
            rate_asymptotic(KeyRateParams.at_distance(d, vm=0.35, protocol=Protocol.EIGHT_STATE)).key_rate
            for d in (5.0, 20.0, 50.0, 80.0)
        ]
        assert rates == sorted(rates, reverse=True)

    def test_more_states_help_at_fixed_variance(self):
        # the eight-state correlation is closer to Gaussian, so its rate
        # dominates the four-state one at the same operating point
        for vm in (0.35, 1.0, 3.0):
            k4 = rate_asymptotic(params_20km(vm=vm, protocol=Protocol.FOUR_STATE)).key_rate
            k8 = rate_asymptotic(params_20km(vm=vm, protocol=Protocol.EIGHT_STATE)).key_rate
            assert k8 >= k4


class TestOptimizeVm:
    def test_golden_section_on_parabola(self):
        got = _golden_section_max(lambda x: -(x - 2.0) ** 2, 0.0, 5.0, 0.001)
        assert got == pytest.approx(2.0, abs=0.001)

    def test_matches_dense_grid_scan(self):
        params = KeyRateParams(vm=1.0, transmittance=0.5)
        results = optimize_vm(Protocol.EIGHT_STATE, [50.0], params, v_lo=0.05, v_hi=20.0)
        best = results[0]
        dense = np.geomspace(0.05, 20.0, 4000)
        dense_rates = [
            rate_asymptotic(dataclasses.replace(
                params, vm=float(v),
                transmittance=10.0 ** (-0.2 * 50.0 / 10.0),
                protocol=Protocol.EIGHT_STATE,
            )).key_rate
            for v in dense
        ]
        assert best.key_rate >= max(dense_rates) - 1e-6
        assert not best.no_positive_rate
        assert best.key_rate > 0

    def test_flags_distances_with_no_positive_rate(self):
        params = KeyRateParams(vm=1.0, transmittance=0.5)
        results = optimize_vm(Protocol.EIGHT_STATE, [10.0, 400.0], params)
        assert not results[0].no_positive_rate
        assert results[1].no_positive_rate

    def test_invalid_bracket_rejected(self):
        params = KeyRateParams(vm=1.0, transmittance=0.5)
        with pytest.raises(InvalidParameterError):
            optimize_vm(Protocol.EIGHT_STATE, [10.0], params, v_lo=2.0, v_hi=1.0)
