import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hatchsens.model import (
    Band,
    Classification,
    CultureSpec,
    IncompleteSnapshotError,
    InvalidReadingError,
    InvalidSpecError,
    SensorKind,
    classify,
    default_thresholds,
    param_score,
    round_half_away,
    suitability,
    validate_culture,
)

from conftest import random_band


def naive_classify(value, band):
    """Five-way oracle written straight from the class definitions."""
    if value > band.hard_hi:
        return Classification.HIGH_HARD
    if value < band.hard_lo:
        return Classification.LOW_HARD
    if band.soft_hi < value <= band.hard_hi:
        return Classification.HIGH_SOFT
    if band.hard_lo <= value < band.soft_lo:
        return Classification.LOW_SOFT
    return Classification.IN_RANGE


class TestDefaults:
    def test_ph_soft_band(self):
        thr = default_thresholds()
        assert (thr.ph.soft_lo, thr.ph.soft_hi) == (7.2, 8.5)

    def test_incubation_time(self):
        assert default_thresholds().t_hatch_s == 86400

    def test_temperature_centered_on_25(self):
        band = default_thresholds().temperature
        assert (band.soft_lo + band.soft_hi) / 2 == 25.0
        assert (band.soft_lo, band.soft_hi) == (24.0, 26.0)
        assert (band.hard_lo, band.hard_hi) == (18.0, 35.0)

    def test_salinity_density_feeding(self):
        thr = default_thresholds()
        assert thr.salinity_ppt == (5.0, 8.0)
        assert thr.max_density_g_per_l == 10.0
        assert thr.feeding_window_s == (64800, 79200)

    def test_wire_codes_stable(self):
        assert [int(k) for k in SensorKind] == [1, 2, 3, 4, 5]
        assert len(SensorKind) == 5

    def test_band_invariant_enforced(self):
        with pytest.raises(ValueError):
            Band(10.0, 5.0, 15.0, 20.0)


class TestRounding:
    @pytest.mark.parametrize(
        "x,expected",
        [(0.5, 1), (1.5, 2), (2.5, 3), (-0.5, -1), (-1.5, -2), (0.49, 0), (-0.49, 0)],
    )
    def test_half_away_from_zero(self, x, expected):
        assert round_half_away(x) == expected


class TestValidateCulture:
    def test_bench_recipe_passes(self, thresholds):
        spec = CultureSpec(
            seawater_parts=1, tapwater_parts=1, volume_l=2.0, cysts_g=1.0, salinity_ppt=6.5
        )
        report = validate_culture(spec, thresholds)
        assert report.passed
        assert report.density_g_per_l == 0.5

    def test_overdense_fails(self, thresholds):
        spec = CultureSpec(volume_l=2.0, cysts_g=25.0, salinity_ppt=6.5)
        report = validate_culture(spec, thresholds)
        assert not report.passed
        assert report.density_g_per_l == 12.5
        assert any(v.parameter == "density_g_per_l" for v in report.violations)

    def test_low_salinity_fails(self, thresholds):
        report = validate_culture(
            CultureSpec(volume_l=2.0, cysts_g=1.0, salinity_ppt=4.9), thresholds
        )
        assert not report.passed
        assert any(v.parameter == "salinity_ppt" for v in report.violations)

    def test_salinity_boundaries_inclusive(self, thresholds):
        for ppt in (5.0, 8.0):
            assert validate_culture(CultureSpec(salinity_ppt=ppt), thresholds).passed

    def test_zero_volume_rejected(self, thresholds):
        with pytest.raises(InvalidSpecError):
            validate_culture(CultureSpec(volume_l=0.0), thresholds)


class TestClassify:
    def test_interior_point(self, thresholds):
        assert classify(8.0, thresholds.ph) is Classification.IN_RANGE

    def test_boundary_belongs_to_inner_class(self, thresholds):
        ph = thresholds.ph
        assert classify(8.5, ph) is Classification.IN_RANGE
        assert classify(7.2, ph) is Classification.IN_RANGE
        assert classify(ph.hard_hi, ph) is Classification.HIGH_SOFT
        assert classify(ph.hard_lo, ph) is Classification.LOW_SOFT

    def test_soft_and_hard_outliers(self, thresholds):
        assert classify(9.0, thresholds.ph) is Classification.HIGH_SOFT
        assert classify(9.3, thresholds.ph) is Classification.HIGH_HARD

    def test_nan_rejected(self, thresholds):
        with pytest.raises(InvalidReadingError):
            classify(float("nan"), thresholds.ph)

    def test_matches_naive_oracle_bulk(self):
        rng = random.Random(2024)
        for _ in range(100_000):
            band = random_band(rng)
            value = rng.uniform(band.hard_lo - 20.0, band.hard_hi + 20.0)
            assert classify(value, band) is naive_classify(value, band)


class TestParamScore:
    def test_plateau(self, thresholds):
        band = thresholds.temperature
        mid = (band.soft_lo + band.soft_hi) / 2
        assert param_score(mid, band) == 1.0

    def test_hard_edges_are_zero(self, thresholds):
        band = thresholds.temperature
        assert param_score(band.hard_lo, band) == 0.0
        assert param_score(band.hard_hi, band) == 0.0
        assert param_score(band.hard_lo - 5.0, band) == 0.0

    def test_linear_ramp_value(self, thresholds):
        # soft_lo 24, hard_lo 18: 21 degC sits exactly halfway up
        assert param_score(21.0, thresholds.temperature) == pytest.approx(0.5)

    def test_nan_rejected(self, thresholds):
        with pytest.raises(InvalidReadingError):
            param_score(float("nan"), thresholds.temperature)

    def test_continuity_scan(self, thresholds):
        for band in (thresholds.temperature, thresholds.ph, thresholds.o2):
            ramps = [band.soft_lo - band.hard_lo, band.hard_hi - band.soft_hi]
            min_ramp = min(r for r in ramps if r > 0)
            step = min_ramp / 500.0
            bound = step / min_ramp + 1e-12
            x = band.hard_lo - 1.0
            prev = param_score(x, band)
            while x < band.hard_hi + 1.0:
                x += step
                cur = param_score(x, band)
                assert abs(cur - prev) <= bound
                prev = cur

    @given(st.floats(min_value=-1000, max_value=1000), st.integers(0, 2**32 - 1))
    @settings(max_examples=300, derandomize=True)
    def test_hard_class_iff_zero_score(self, value, seed):
        band = random_band(random.Random(seed))
        cls = classify(value, band)
        score = param_score(value, band)
        if cls in (Classification.LOW_HARD, Classification.HIGH_HARD):
            assert score == 0.0
        if cls is Classification.IN_RANGE:
            assert score == 1.0
        assert 0.0 <= score <= 1.0


class TestSuitability:
    @staticmethod
    def _mid(band):
        return (band.soft_lo + band.soft_hi) / 2

    def test_all_mid_is_one(self, thresholds):
        snapshot = {
            SensorKind.TEMPERATURE_C: self._mid(thresholds.temperature),
            SensorKind.PH: self._mid(thresholds.ph),
            SensorKind.O2_MG_L: self._mid(thresholds.o2),
            SensorKind.LIGHT_LUX: self._mid(thresholds.light),
        }
        assert suitability(snapshot, thresholds) == 1.0

    def test_hard_limit_zeroes_product(self, thresholds):
        snapshot = {
            SensorKind.TEMPERATURE_C: self._mid(thresholds.temperature),
            SensorKind.PH: self._mid(thresholds.ph),
            SensorKind.O2_MG_L: self._mid(thresholds.o2),
            SensorKind.LIGHT_LUX: thresholds.light.hard_lo,
        }
        assert suitability(snapshot, thresholds) == 0.0

    def test_single_half_factor(self, thresholds):
        snapshot = {
            SensorKind.TEMPERATURE_C: 21.0,  # score 0.5 on the low ramp
            SensorKind.PH: self._mid(thresholds.ph),
            SensorKind.O2_MG_L: self._mid(thresholds.o2),
            SensorKind.LIGHT_LUX: self._mid(thresholds.light),
        }
        assert suitability(snapshot, thresholds) == pytest.approx(0.5)

    def test_humidity_not_required_and_ignored(self, thresholds):
        snapshot = {
            SensorKind.TEMPERATURE_C: self._mid(thresholds.temperature),
            SensorKind.PH: self._mid(thresholds.ph),
            SensorKind.O2_MG_L: self._mid(thresholds.o2),
            SensorKind.LIGHT_LUX: self._mid(thresholds.light),
            SensorKind.HUMIDITY_PCT: 1.0,  # terrible, but never scored
        }
        assert suitability(snapshot, thresholds) == 1.0

    def test_missing_kind_rejected(self, thresholds):
        with pytest.raises(IncompleteSnapshotError):
            suitability({SensorKind.PH: 8.0}, thresholds)

    def test_monotone_toward_soft_band(self, thresholds):
        base = {
            SensorKind.TEMPERATURE_C: 20.0,
            SensorKind.PH: 6.9,
            SensorKind.O2_MG_L: 3.5,
            SensorKind.LIGHT_LUX: 900.0,
        }
        targets = {
            SensorKind.TEMPERATURE_C: 25.0,
            SensorKind.PH: 7.85,
            SensorKind.O2_MG_L: 8.5,
            SensorKind.LIGHT_LUX: 5000.0,
        }
        for kind in base:
            prev = suitability(base, thresholds)
            improved = dict(base)
            for frac in (0.2, 0.5, 0.8, 1.0):
                improved[kind] = base[kind] + frac * (targets[kind] - base[kind])
                cur = suitability(improved, thresholds)
                assert cur >= prev - 1e-12
                prev = cur


def test_reading_value_is_centi_over_100():
    from hatchsens.model import Reading

    r = Reading(node_addr=1, kind=SensorKind.TEMPERATURE_C, seq=0, t=0, centi=2502)
    assert r.value == 25.02


def test_kind_key_roundtrip():
    for kind in SensorKind:
        assert SensorKind.from_key(kind.key) is kind
