import numpy as np
import pytest

from twpacal import errors
from twpacal.network import (
    Band,
    ComponentSpec,
    NetworkData,
    attenuator,
    band_average,
    cascade,
    coupler,
    delay_line,
    flip,
    interpolate,
    isolator,
    make_component,
    max_singular_value,
    moving_average,
    offset_short,
    renormalize,
    s_to_t,
    t_to_s,
    thru,
)
from conftest import random_passive_s

F3 = np.array([4e9, 5e9, 6e9])


def ident_thru(n=3):
    s = np.zeros((n, 2, 2), dtype=complex)
    s[:, 0, 1] = s[:, 1, 0] = 1.0
    return s


# --- S <-> T ---------------------------------------------------------------

def test_s_to_t_identity_thru():
    t = s_to_t(ident_thru())
    assert np.allclose(t, np.eye(2), atol=1e-15)


def test_s_to_t_matched_attenuator_is_diagonal():
    a = 10 ** (-6 / 20)
    s = np.zeros((1, 2, 2), dtype=complex)
    s[:, 0, 1] = s[:, 1, 0] = a
    t = s_to_t(s)
    assert t[0, 0, 0] == pytest.approx(a, rel=1e-15)
    assert t[0, 1, 1] == pytest.approx(1 / a, rel=1e-15)
    assert abs(t[0, 0, 1]) == 0 and abs(t[0, 1, 0]) == 0
    assert np.allclose(t_to_s(t), s, rtol=1e-15)


def test_reciprocal_network_has_unit_t_determinant():
    rng = np.random.default_rng(11)
    s = random_passive_s(rng, 64)
    s[:, 0, 1] = s[:, 1, 0]  # force reciprocity
    t = s_to_t(s)
    det = t[:, 0, 0] * t[:, 1, 1] - t[:, 0, 1] * t[:, 1, 0]
    assert np.allclose(det, 1.0, atol=1e-12)


def test_t_to_s_identity_is_thru():
    s = t_to_s(np.broadcast_to(np.eye(2, dtype=complex), (2, 2, 2)).copy())
    assert np.allclose(s, ident_thru(2))


def test_roundtrip_s_t_s():
    rng = np.random.default_rng(5)
    s = random_passive_s(rng, 1000)
    assert np.abs(t_to_s(s_to_t(s)) - s).max() < 1e-13


def test_singular_conversion_raises():
    s = ident_thru(1)
    s[:, 1, 0] = 0.0
    with pytest.raises(errors.SingularConversion):
        s_to_t(s)


# --- cascade ---------------------------------------------------------------

def test_cascade_identity_element():
    rng = np.random.default_rng(2)
    x = NetworkData(F3, random_passive_s(rng, 3))
    t = thru(F3)
    assert np.abs(cascade(t, x).s - x.s).max() < 1e-15
    assert np.abs(cascade(x, t).s - x.s).max() < 1e-15


def test_cascade_attenuators_add_in_db():
    a3 = attenuator(F3, 3.0)
    out = cascade(a3, a3)
    assert np.allclose(np.abs(out.s21), 10 ** (-6 / 20), rtol=1e-12)
    # T-product route agrees with dB addition for a pair of 3 dB pads
    t = s_to_t(a3.s) @ s_to_t(a3.s)
    assert np.allclose(np.abs(t_to_s(t)[:, 1, 0]), 10 ** (-6 / 20), rtol=1e-12)


def test_cascade_associative_on_random_passive_triples():
    rng = np.random.default_rng(7)
    n = 1000
    f = np.linspace(1e9, 2e9, n)
    a, b, c = (NetworkData(f, random_passive_s(rng, n)) for _ in range(3))
    left = cascade(cascade(a, b), c)
    right = cascade(a, cascade(b, c))
    assert np.abs(left.s - right.s).max() < 1e-12


def test_cascade_grid_and_zref_mismatch():
    rng = np.random.default_rng(0)
    a = NetworkData(F3, random_passive_s(rng, 3))
    b = NetworkData(F3 * 1.001, random_passive_s(rng, 3))
    with pytest.raises(errors.GridMismatch):
        cascade(a, b)
    c = NetworkData(F3, random_passive_s(rng, 3), z_ref=75)
    with pytest.raises(errors.ZRefMismatch):
        cascade(a, c)


# --- flip ------------------------------------------------------------------

def test_flip_examples_and_involution():
    t = thru(F3)
    assert np.array_equal(flip(t).s, t.s)
    iso = isolator(F3, 0.0, np.inf) if False else isolator(F3, 0.0, 300.0)
    # an isolator swaps transmission directions under flip
    flipped = flip(isolator(F3, 1.0, 20.0))
    assert np.allclose(np.abs(flipped.s12), 10 ** (-1 / 20))
    assert np.allclose(np.abs(flipped.s21), 10 ** (-20 / 20))
    rng = np.random.default_rng(1)
    x = NetworkData(F3, random_passive_s(rng, 3))
    assert np.array_equal(flip(flip(x)).s, x.s)  # exact involution


# --- renormalize -----------------------------------------------------------

def test_renormalize_noop():
    rng = np.random.default_rng(4)
    x = NetworkData(F3, random_passive_s(rng, 3))
    y = renormalize(x, 50.0)
    assert np.array_equal(y.s, x.s)


def test_renormalize_matched_load_sees_old_impedance():
    # a matched 50-ohm termination on both ports, re-referenced to 49.94 ohm
    net = NetworkData(F3, np.zeros((3, 2, 2), dtype=complex), z_ref=50.0)
    out = renormalize(net, 49.94)
    expected = (50 - 49.94) / (50 + 49.94)
    assert np.allclose(np.abs(out.s11), expected, rtol=1e-12)
    assert np.allclose(np.abs(out.s22), expected, rtol=1e-12)


def test_renormalize_roundtrip():
    rng = np.random.default_rng(9)
    x = NetworkData(F3, random_passive_s(rng, 3))
    back = renormalize(renormalize(x, 75.0), 50.0)
    assert np.abs(back.s - x.s).max() < 1e-12
    assert back.z_ref == 50.0


def test_renormalize_thru_stays_transparent():
    out = renormalize(thru(F3), 75.0)
    assert np.abs(out.s - thru(F3).s).max() < 1e-14


def test_renormalize_rejects_nonpositive_real_part():
    with pytest.raises(errors.InvalidImpedance):
        renormalize(thru(F3), -50.0)


# --- interpolate -----------------------------------------------------------

def test_interpolate_identity_on_same_grid():
    rng = np.random.default_rng(12)
    x = NetworkData(F3, random_passive_s(rng, 3))
    assert np.abs(interpolate(x, F3).s - x.s).max() == 0.0


def test_interpolate_midpoint_linearity():
    f = np.array([4e9, 5e9])
    s = np.zeros((2, 2, 2), dtype=complex)
    s[:, 1, 0] = [0.4, 0.6]
    net = NetworkData(f, s)
    mid = interpolate(net, np.array([4.5e9]))
    assert mid.s21[0] == pytest.approx(0.5, abs=1e-15)


def test_interpolate_phase_ramp_tracks_analytic_line():
    tau = 50e-12
    f = np.linspace(4e9, 8e9, 401)
    line = delay_line(f, tau)
    fine = np.linspace(4e9, 8e9, 1601)
    out = interpolate(line, fine)
    analytic = np.exp(-2j * np.pi * fine * tau)
    # linear-in-re/im interpolation error bound: (phase step)^2 / 8
    step = 2 * np.pi * (f[1] - f[0]) * tau
    assert np.abs(out.s21 - analytic).max() < step**2 / 8 + 1e-12


def test_interpolate_refuses_extrapolation():
    line = delay_line(F3, 10e-12)
    with pytest.raises(errors.ExtrapolationRequested):
        interpolate(line, np.array([3e9]))


# --- components ------------------------------------------------------------

def test_attenuator_values():
    a = attenuator(F3, 6.0)
    assert np.allclose(np.abs(a.s21), 0.5011872336272722, rtol=1e-12)
    assert np.all(a.s11 == 0) and np.all(a.s22 == 0)
    assert np.array_equal(a.s12, a.s21)


def test_isolator_values():
    iso = isolator(F3, 1.0, 20.0)
    assert np.allclose(np.abs(iso.s21), 0.8912509381337456, rtol=1e-12)
    assert np.allclose(np.abs(iso.s12), 0.1, rtol=1e-12)
    assert not np.array_equal(iso.s12, iso.s21)


def test_offset_short_phase():
    short = offset_short(np.array([4e9]), 25e-12)
    assert abs(short.s11[0]) == pytest.approx(1.0, rel=1e-15)
    assert np.angle(short.s11[0]) == pytest.approx(np.pi - 2 * 2 * np.pi * 4e9 * 25e-12, abs=1e-12)


def test_make_component_dispatch_and_errors():
    net = make_component(ComponentSpec("attenuator", {"db": 6.0}), F3)
    assert np.allclose(np.abs(net.s21), 0.5011872336272722)
    with pytest.raises(errors.InvalidSpec):
        make_component(ComponentSpec("gyrator", {}), F3)
    with pytest.raises(errors.InvalidSpec):
        make_component(ComponentSpec("attenuator", {"volume": 11}), F3)
    with pytest.raises(errors.InvalidSpec):
        make_component(ComponentSpec("attenuator", {"db": -3}), F3)


def test_synthesized_passive_components_are_passive_and_reciprocal():
    f = np.linspace(1e9, 10e9, 301)
    nets = [
        thru(f),
        attenuator(f, 6.0),
        delay_line(f, 80e-12, loss_db=1.0),
        delay_line(f, 80e-12, loss_db_per_sqrt_hz=1e-5),
        offset_short(f, 25e-12),
        coupler(f, 0.3, 23.0),
    ]
    for net in nets:
        assert max_singular_value(net).max() <= 1 + 1e-12
    for net in nets[:4] + [nets[5]]:
        assert np.array_equal(net.s12, net.s21)  # reciprocity is exact


# --- band average and smoothing ---------------------------------------------

def test_band_average_constant_trace():
    a = attenuator(np.linspace(4e9, 8e9, 101), 6.020599913279624)
    band = Band(4e9, 8e9)
    assert band_average(a, "s21", band, "linear") == pytest.approx(0.5, rel=1e-12)
    assert band_average(a, "s21", band, "db") == pytest.approx(-6.020599913279624, rel=1e-12)


def test_band_average_with_exclusion_matches_bruteforce_loop():
    f = np.linspace(4e9, 8e9, 4001)
    rng = np.random.default_rng(21)
    mags = rng.uniform(0.1, 1.0, f.size)
    s = np.zeros((f.size, 2, 2), dtype=complex)
    s[:, 1, 0] = mags
    net = NetworkData(f, s)
    band = Band(4e9, 8e9, ((5.5e9, 6.5e9),))
    # independent oracle: explicit accumulation loop
    total = 0.0
    count = 0
    for k in range(f.size):
        if 4e9 <= f[k] <= 8e9 and not (5.5e9 <= f[k] <= 6.5e9):
            total += 20 * np.log10(mags[k])
            count += 1
    assert band_average(net, "s21", band, "db") == pytest.approx(total / count, rel=1e-12)


def test_two_segment_band_equals_exclusion_form():
    f = np.linspace(4e9, 8e9, 801)
    band = Band(4.5e9, 7.5e9, ((5.5e9, 6.5e9),))
    mask = band.mask(f)
    manual = ((f >= 4.5e9) & (f <= 5.5e9)) | ((f >= 6.5e9) & (f <= 7.5e9))
    # the exclusion-form band keeps exactly the two requested segments
    # (boundary points belong to the exclusion, matching its closed interval)
    manual &= ~((f > 5.5e9) & (f < 6.5e9))
    boundary = (f == 5.5e9) | (f == 6.5e9)
    assert np.array_equal(mask | boundary, manual | boundary)


def test_band_average_empty_band():
    a = attenuator(F3, 3.0)
    with pytest.raises(errors.EmptyBand):
        band_average(a, "s21", Band(1e9, 2e9), "db")


def test_band_validation():
    with pytest.raises(errors.ValidationError):
        Band(8e9, 4e9)
    with pytest.raises(errors.ValidationError):
        Band(4e9, 8e9, ((3e9, 5e9),))
    with pytest.raises(errors.ValidationError):
        Band(4e9, 8e9, ((5e9, 6e9), (5.5e9, 7e9)))


def test_moving_average_window_one_is_identity():
    x = np.arange(10, dtype=float)
    assert np.array_equal(moving_average(x, 1), x)


def test_moving_average_constant_series():
    x = np.full(9, 3.3)
    assert np.allclose(moving_average(x, 5), 3.3)


def test_moving_average_impulse_plateau():
    x = np.zeros(11)
    x[5] = 1.0
    out = moving_average(x, 5)
    # hand convolution: the impulse spreads into a 5-point plateau of 0.2
    assert np.allclose(out[3:8], 0.2)
    assert np.allclose(out[:3], 0) and np.allclose(out[8:], 0)


def test_moving_average_shrunken_edges():
    x = np.zeros(7)
    x[0] = 1.0
    out = moving_average(x, 5)
    assert out[0] == 1.0          # edge window shrinks to the point itself
    assert out[1] == pytest.approx(1 / 3)  # symmetric 3-point window
    assert out[2] == pytest.approx(1 / 5)


def test_moving_average_bad_window():
    x = np.zeros(5)
    for w in (0, 2, 7, -1):
        with pytest.raises(errors.BadWindow):
            moving_average(x, w)


# --- NetworkData validation --------------------------------------------------

def test_network_data_validation():
    with pytest.raises(errors.NonMonotonicFrequency):
        NetworkData(np.array([2e9, 1e9]), np.zeros((2, 2, 2)))
    with pytest.raises(errors.ValidationError):
        NetworkData(np.array([-1e9, 1e9]), np.zeros((2, 2, 2)))
    bad = np.zeros((1, 2, 2), dtype=complex)
    bad[0, 0, 0] = np.nan
    with pytest.raises(errors.ValidationError):
        NetworkData(np.array([1e9]), bad)
    with pytest.raises(errors.InvalidImpedance):
        NetworkData(np.array([1e9]), np.zeros((1, 2, 2)), z_ref=-50)
