import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from isaclab.constellations import (BerModel, ConstellationError, InfeasibleSubcarrierError,
                                    apsk32, ber, builtin, draw_symbols, load_constellation,
                                    min_power, min_snr_for_ber, moments, normalize, q_function,
                                    qpsk, square_qam)

BUILTINS = ["QPSK", "16QAM", "64QAM", "32APSK"]


def exact_moments(raw_points):
    """Rational (mu4, nu) from integer-grid points, by enumeration."""
    m2 = [Fraction(int(p.real) ** 2 + int(p.imag) ** 2) for p in raw_points]
    n = len(m2)
    e2 = sum(m2) / n
    e4 = sum(v * v for v in m2) / n
    einv = sum(1 / v for v in m2) / n
    return e4 / (e2 * e2), einv * e2


def raw_square_grid(order):
    side = math.isqrt(order)
    lv = range(-(side - 1), side, 2)
    return [complex(a, b) for a in lv for b in lv]


class TestNormalize:
    def test_qpsk_scale(self):
        c = normalize([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j])
        np.testing.assert_allclose(np.abs(c.points), 1.0)
        np.testing.assert_allclose(np.abs(c.points.real), 1 / math.sqrt(2))

    def test_16qam_scale_is_inverse_sqrt10(self):
        raw = np.array(raw_square_grid(16))
        c = normalize(raw)
        np.testing.assert_allclose(c.points, raw / math.sqrt(10), atol=1e-15)

    @pytest.mark.parametrize("pts", [[1, 1, 1, 1], [2 + 1j] * 8])
    def test_repeated_point_rejected(self, pts):
        with pytest.raises(ConstellationError, match="distinct"):
            normalize(pts)

    def test_non_power_of_two_rejected(self):
        with pytest.raises(ConstellationError, match="power of two"):
            normalize([1, -1, 1j, -1j, 2])

    def test_origin_rejected(self):
        with pytest.raises(ConstellationError, match="origin"):
            normalize([0, 0, 1, -1, 1j, -1j, 2, -2])

    def test_points_read_only(self):
        with pytest.raises(ValueError):
            qpsk().points[0] = 0

    @pytest.mark.parametrize("name", BUILTINS)
    def test_invariants(self, name):
        c = builtin(name)
        assert abs(c.points.sum()) / c.size < 1e-12
        assert abs(np.mean(np.abs(c.points) ** 2) - 1) < 1e-12
        assert c.size & (c.size - 1) == 0

    @pytest.mark.parametrize("name", BUILTINS)
    def test_idempotent(self, name):
        c = builtin(name)
        np.testing.assert_allclose(normalize(c.points).points, c.points, atol=1e-14)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=8, max_size=8,
                    unique=True))
    def test_random_alphabets_normalized(self, pts):
        z = [complex(a, b) for a, b in pts]
        try:
            c = normalize(z)
        except ConstellationError:
            return
        assert abs(np.mean(np.abs(c.points) ** 2) - 1) < 1e-12
        mo = moments(c)
        assert mo.mu4 >= 1 - 1e-12 and mo.nu_minus2 >= 1 - 1e-12


class TestMoments:
    def test_qpsk_exact(self):
        mo = moments(qpsk())
        assert (mo.mu4, mo.nu_minus2, mo.rate_bits) == (1.0, 1.0, 2)

    @pytest.mark.parametrize("order", [16, 64])
    def test_square_qam_against_rational_oracle(self, order):
        mu4, nu = exact_moments(raw_square_grid(order))
        mo = moments(square_qam(order))
        assert abs(mo.mu4 - float(mu4)) < 1e-12
        assert abs(mo.nu_minus2 - float(nu)) < 1e-12

    def test_16qam_values(self):
        mo = moments(square_qam(16))
        assert mo.mu4 == pytest.approx(1.32, abs=1e-12)
        assert mo.nu_minus2 == pytest.approx(17 / 9, abs=1e-12)

    def test_64qam_kurtosis(self):
        assert moments(square_qam(64)).mu4 == pytest.approx(1.3810, abs=5e-5)

    def test_apsk32_ring_oracle(self):
        # moments depend only on the ring radii and populations
        r2 = np.array([1.0] * 4 + [2.84**2] * 12 + [5.27**2] * 16)
        e2 = r2.mean()
        mo = moments(apsk32())
        assert mo.mu4 == pytest.approx(np.mean(r2**2) / e2**2, rel=1e-12)
        assert mo.nu_minus2 == pytest.approx(np.mean(1 / r2) * e2, rel=1e-12)
        assert mo.rate_bits == 5

    @pytest.mark.parametrize("name", BUILTINS)
    def test_constant_modulus_iff_unit_moments(self, name):
        c = builtin(name)
        mo = moments(c)
        const = np.ptp(np.abs(c.points)) < 1e-12
        assert (mo.mu4 == 1.0) == const == (mo.nu_minus2 == 1.0)

    @pytest.mark.parametrize("name", BUILTINS)
    def test_matches_plain_enumeration(self, name):
        c = builtin(name)
        m2 = [float(z.real * z.real + z.imag * z.imag) for z in c.points]
        e2 = math.fsum(m2) / len(m2)
        mu4 = math.fsum(v * v for v in m2) / len(m2) / (e2 * e2)
        if np.ptp(m2) > 0:
            assert moments(c).mu4 == mu4


class TestBer:
    def test_qpsk_zero_snr(self):
        assert ber(qpsk(), 0.0) == 0.5

    def test_qpsk_reference_point(self):
        assert ber(qpsk(), 3.719**2) == pytest.approx(1e-4, rel=2e-3)

    def test_16qam_zero_snr(self):
        assert ber(square_qam(16), 0.0) == pytest.approx(0.375)

    def test_q_function_tail_accuracy(self):
        x = np.sqrt(np.logspace(0, 4, 50))
        np.testing.assert_allclose(q_function(x), norm.sf(x), rtol=1e-12)

    @pytest.mark.parametrize("name", BUILTINS)
    def test_strictly_decreasing(self, name):
        c = builtin(name)
        g = np.linspace(0.5, 200, 200)
        assert np.all(np.diff(ber(c, g)) < 0)

    def test_negative_snr_rejected(self):
        with pytest.raises(ValueError):
            ber(qpsk(), -1.0)

    def test_non_square_closed_form_rejected(self):
        blob = {"id": "8PSK", "ber_model": "closed_form_square_qam",
                "points": [[math.cos(k * math.pi / 4), math.sin(k * math.pi / 4)] for k in range(8)]}
        with pytest.raises(ConstellationError, match="table"):
            load_constellation(blob)

    def test_table_range_enforced(self):
        c = apsk32()
        with pytest.raises(ConstellationError, match="range"):
            ber(c, 1e6)

    def test_bad_table_rejected(self):
        with pytest.raises(ConstellationError):
            BerModel("table", ((0.0, 0.1), (1.0, 0.2)))


class TestMinSnr:
    def test_qpsk_1e4(self):
        assert min_snr_for_ber(qpsk(), 1e-4) == pytest.approx(norm.isf(1e-4) ** 2, rel=1e-9)

    def test_near_half_goes_to_zero(self):
        assert min_snr_for_ber(qpsk(), 0.5 - 1e-9) < 1e-6

    @pytest.mark.parametrize("name", BUILTINS)
    def test_inverse_of_ber(self, name):
        c = builtin(name)
        for th in (1e-2, 1e-3, 1e-4):
            g = min_snr_for_ber(c, th)
            assert ber(c, g) == pytest.approx(th, rel=1e-6)
            assert ber(c, g * (1 - 1e-6)) > th

    @pytest.mark.parametrize("name", BUILTINS)
    def test_monotone_in_target(self, name):
        c = builtin(name)
        assert min_snr_for_ber(c, 1e-4) > min_snr_for_ber(c, 1e-3)

    def test_unreachable_table_target(self):
        with pytest.raises(ConstellationError, match="table range"):
            min_snr_for_ber(apsk32(), 1e-9)


class TestMinPower:
    def test_qpsk_reference(self):
        assert min_power(qpsk(), 1.0, 1.0, 1e-4) == pytest.approx(13.83, abs=0.01)

    def test_inverse_gain_scaling(self):
        c = square_qam(16)
        assert min_power(c, 2.0, 1.0, 1e-4) == pytest.approx(min_power(c, 1.0, 1.0, 1e-4) / 2)

    def test_identity_scaling(self):
        c = qpsk()
        g = min_snr_for_ber(c, 1e-3)
        assert min_power(c, 1.0, 1.0, 1e-3) == pytest.approx(g)

    def test_zero_gain(self):
        with pytest.raises(InfeasibleSubcarrierError):
            min_power(qpsk(), 0.0, 1.0, 1e-4)


class TestDrawSymbols:
    def test_empty(self):
        assert draw_symbols(qpsk(), 0, seed=0).size == 0

    def test_unit_power_and_kurtosis(self):
        s = draw_symbols(square_qam(16), 10**6, seed=1)
        p2 = np.abs(s) ** 2
        se2 = p2.std() / math.sqrt(p2.size)
        assert abs(p2.mean() - 1) < 3 * se2
        p4 = p2**2
        assert abs(p4.mean() - 1.32) < 3 * p4.std() / math.sqrt(p4.size)

    def test_reproducible(self):
        np.testing.assert_array_equal(draw_symbols(apsk32(), 100, seed=4),
                                      draw_symbols(apsk32(), 100, seed=4))


class TestLoading:
    def test_builtin_aliases(self):
        assert builtin("qam16") == builtin("16QAM")
        with pytest.raises(ConstellationError):
            builtin("256QAM")

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"id": "sq", "points": [[1, 1], [1, -1], [-1, 1], [-1, -1]],
                                    "ber_table": [[0, 0.4], [10, 0.01], [100, 1e-6]]}))
        c = load_constellation(path)
        assert moments(c).mu4 == 1.0
        assert ber(c, 10.0) == pytest.approx(0.01)

    def test_malformed(self):
        with pytest.raises(ConstellationError, match="malformed"):
            load_constellation({"points": [[1, 1]]})
