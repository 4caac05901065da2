"""Geometric drive-by channel tests.

Oracles are closed-form: image-source path lengths computed by hand, Doppler
from the radial-speed derivative, gains from the horn model plus free-space
path loss.
"""

import dataclasses
import math

import numpy as np
import pytest
from scipy.constants import c as C0

from ddsounder._kernels import interpolate_periodic
from ddsounder.channel import (
    BeamPattern,
    PlanarReflector,
    ScenarioConfig,
    apply_channel,
    default_scenario,
    horn_gain,
    scenario_paths,
    transfer_function,
    tx_position,
)
from ddsounder.params import ConfigError, free_space_path_loss, narrowband_config
from ddsounder.waveform import multitone_waveform, tone_plan


@pytest.fixture(scope="module")
def scenario():
    return default_scenario()


def _path(paths, kind):
    found = [p for p in paths.paths if p.kind == kind]
    return found[0] if found else None


class TestHornGain:
    def test_boresight(self):
        beam = BeamPattern(boresight_elevation_deg=15.0)
        assert horn_gain(beam, 0.0, 15.0) == pytest.approx(20.0)

    def test_half_beamwidth_is_3db_down(self):
        beam = BeamPattern()
        assert horn_gain(beam, 0.0, 7.5) == pytest.approx(17.0, abs=1e-9)
        assert horn_gain(beam, 7.5, 0.0) == pytest.approx(17.0, abs=1e-9)

    def test_floor_clips_far_sidelobes(self):
        beam = BeamPattern()
        assert horn_gain(beam, 90.0, 0.0) == beam.floor_dbi
        assert horn_gain(beam, 180.0, 45.0) == beam.floor_dbi

    def test_quadratic_rolloff(self):
        beam = BeamPattern()
        assert horn_gain(beam, 0.0, 3.75) == pytest.approx(20.0 - 0.75, abs=1e-9)


class TestGeometry:
    def test_trigger_distance_sets_start(self, scenario):
        d0 = np.linalg.norm(tx_position(scenario, 0.0) - scenario.rx_position)
        assert d0 == pytest.approx(scenario.trigger_distance)

    def test_linear_motion(self, scenario):
        p = tx_position(scenario, 1.5)
        np.testing.assert_allclose(
            p, scenario.tx_start_position + 1.5 * scenario.tx_velocity
        )

    def test_trigger_shorter_than_height_offset_rejected(self):
        with pytest.raises(ConfigError):
            default_scenario(trigger_distance=2.0)

    def test_reflector_census(self):
        kinds = [r.kind for r in default_scenario().reflectors]
        assert kinds.count("wall") == 2
        assert "ground" in kinds and "truck" in kinds
        kinds = [r.kind for r in default_scenario(truck=False, ground=False).reflectors]
        assert kinds == ["wall", "wall"]

    @pytest.mark.parametrize(
        "kwargs", [{}, {"y": 1.0, "z": 1.0}], ids=["neither", "both"]
    )
    def test_reflector_needs_exactly_one_plane(self, kwargs):
        with pytest.raises(ValueError):
            PlanarReflector(kind="bad", **kwargs)


class TestScenarioPaths:
    def test_los_delay_and_doppler_at_trigger(self, scenario, narrowband):
        paths = scenario_paths(scenario, narrowband, 0.0, 0)
        los = _path(paths, "los")
        assert los.delay == pytest.approx(41.0 / C0)
        # radial speed at trigger: v * |x0| / 41
        x0 = scenario.tx_start_position[0]
        expected = -x0 * 14.0 / 41.0 * narrowband.center_frequency / C0
        assert los.doppler == pytest.approx(expected)
        assert los.doppler == pytest.approx(2801.4, abs=0.1)

    def test_doppler_goes_negative_after_pass(self, scenario, narrowband):
        t_pass = -scenario.tx_start_position[0] / 14.0
        nu = _path(scenario_paths(scenario, narrowband, t_pass + 0.25, 0), "los").doppler
        assert nu < 0

    def test_wall_image_source_length(self, scenario, narrowband):
        tx = tx_position(scenario, 1.0)
        image = np.array([0.0, 20.0, 5.0])  # RX mirrored across y=+10
        expected = np.linalg.norm(tx - image) / C0
        walls = [p for p in scenario_paths(scenario, narrowband, 1.0, 0).paths if p.kind == "wall"]
        assert len(walls) == 2
        assert any(p.delay == pytest.approx(expected) for p in walls)

    def test_ground_bounce_length(self, scenario, narrowband):
        tx = tx_position(scenario, 0.0)
        image = np.array([0.0, 0.0, -5.0])  # RX mirrored across the street
        expected = np.linalg.norm(tx - image) / C0
        ground = _path(scenario_paths(scenario, narrowband, 0.0, 0), "ground")
        assert ground.delay == pytest.approx(expected)

    def test_reflections_are_longer_than_los(self, scenario, narrowband):
        paths = scenario_paths(scenario, narrowband, 0.5, 0).paths
        los = paths[0].delay
        assert all(p.delay > los for p in paths[1:])

    def test_truck_visible_only_while_specular_point_on_it(self, scenario, narrowband):
        # TX and RX both sit at y=0, 4 m from the truck plane, so the
        # specular x is the midpoint of tx.x and 0; on the truck iff
        # tx.x in [-60, -20].
        assert _path(scenario_paths(scenario, narrowband, 0.0, 0), "truck") is not None
        x0 = scenario.tx_start_position[0]
        t_gone = (x0 - (-19.0)) / -14.0  # tx.x = -19
        assert _path(scenario_paths(scenario, narrowband, t_gone, 0), "truck") is None

    def test_plane_between_endpoints_is_skipped(self, narrowband):
        base = default_scenario(truck=False, ground=False)
        blocked = dataclasses.replace(
            base, reflectors=[PlanarReflector(kind="ceiling", z=3.0)]
        )
        kinds = [p.kind for p in scenario_paths(blocked, narrowband, 0.0, 0).paths]
        assert kinds == ["los"]

    def test_los_gain_composition(self, scenario, narrowband):
        """|gain| must equal horn gain + RX gain - FSPL, in linear scale."""
        los = _path(scenario_paths(scenario, narrowband, 0.0, 0), "los")
        x0 = scenario.tx_start_position[0]
        elevation = math.degrees(math.asin(3.0 / 41.0))
        azimuth = math.degrees(math.acos(-x0 / math.hypot(x0, 0.0)))
        level = (
            horn_gain(scenario.tx_beams[0], azimuth, elevation)
            + scenario.rx_gain_dbi
            - free_space_path_loss(41.0, narrowband.center_frequency)
        )
        assert abs(los.gain) == pytest.approx(10 ** (level / 20.0))

    def test_wall_loss_applied(self, scenario, narrowband):
        """Disabling the wall loss raises the wall path by exactly 6 dB."""
        lossless = dataclasses.replace(
            scenario,
            reflectors=[PlanarReflector(kind="wall", y=10.0, loss_db=0.0)],
        )
        lossy = dataclasses.replace(
            scenario,
            reflectors=[PlanarReflector(kind="wall", y=10.0, loss_db=6.0)],
        )
        g0 = _path(scenario_paths(lossless, narrowband, 1.0, 0), "wall").gain
        g1 = _path(scenario_paths(lossy, narrowband, 1.0, 0), "wall").gain
        assert 20 * math.log10(abs(g0) / abs(g1)) == pytest.approx(6.0)

    def test_uptilted_beam_suppresses_street_bounce(self, scenario, narrowband):
        """The street reflection departs below the horizon; the 15 deg beam
        pushes it to the pattern floor while barely touching the LOS."""
        by_beam = [scenario_paths(scenario, narrowband, 0.0, tx) for tx in (0, 1)]
        rel = [
            abs(_path(p, "ground").gain) / abs(_path(p, "los").gain) for p in by_beam
        ]
        assert rel[0] > 10 * rel[1]

    def test_time_bounds_checked(self, scenario, narrowband):
        with pytest.raises(ValueError):
            scenario_paths(scenario, narrowband, scenario.duration + 1.0, 0)
        with pytest.raises(ConfigError):
            scenario_paths(scenario, narrowband, 0.0, 5)


class TestTransferFunction:
    def test_matches_path_sum(self, scenario, narrowband):
        plan = tone_plan(narrowband, 0)
        times = np.array([0.0, 0.7])
        grid = transfer_function(scenario, narrowband, plan, times)
        fc = narrowband.center_frequency
        for row, t in enumerate(times):
            paths = scenario_paths(scenario, narrowband, t, 0).paths
            expected = sum(
                p.gain * np.exp(-2j * np.pi * (fc + plan.tone_frequencies) * p.delay)
                for p in paths
            )
            np.testing.assert_allclose(grid[row], expected, rtol=1e-12)


@pytest.fixture(scope="module")
def short_scenario():
    return default_scenario(duration=0.002, cfo=0.0, noise_psd=0.0)


@pytest.fixture(scope="module")
def signals(narrowband):
    return [
        multitone_waveform(narrowband, tone_plan(narrowband, i))
        for i in range(narrowband.tx_count)
    ]


class TestApplyChannel:
    def test_deterministic_per_seed(self, narrowband, signals):
        scn = default_scenario(duration=0.002)
        a = apply_channel(signals, scn, narrowband, seed=9)
        b = apply_channel(signals, scn, narrowband, seed=9)
        np.testing.assert_array_equal(a.samples, b.samples)
        c = apply_channel(signals, scn, narrowband, seed=10)
        assert np.any(c.samples != a.samples)

    def test_static_single_path_matches_direct_delay(self, narrowband, signals):
        """Parked TX, LOS only: RX is the delayed, phase-rotated waveform sum."""
        scn = dataclasses.replace(
            default_scenario(duration=0.002, cfo=0.0, noise_psd=0.0),
            tx_velocity=np.zeros(3),
            reflectors=[],
        )
        rx = apply_channel(signals, scn, narrowband, seed=0)
        fs = narrowband.sample_rate
        t = np.arange(rx.samples.size) / fs
        expected = np.zeros_like(rx.samples)
        for tx_index, sig in enumerate(signals):
            path = scenario_paths(scn, narrowband, 0.0, tx_index).paths[0]
            shifted = interpolate_periodic(sig.samples, (t - path.delay) * fs)
            expected += (
                path.gain
                * np.exp(-2j * np.pi * narrowband.center_frequency * path.delay)
                * shifted
            )
        np.testing.assert_allclose(rx.samples, expected, atol=1e-9 * np.max(np.abs(expected)))

    def test_cfo_rotates_carrier(self, narrowband, signals, short_scenario):
        with_cfo = dataclasses.replace(short_scenario, cfo=200.0)
        a = apply_channel(signals, short_scenario, narrowband, seed=0)
        b = apply_channel(signals, with_cfo, narrowband, seed=0)
        t = np.arange(a.samples.size) / narrowband.sample_rate
        np.testing.assert_allclose(
            b.samples,
            a.samples * np.exp(2j * np.pi * 200.0 * t),
            atol=1e-9 * np.max(np.abs(a.samples)),
        )

    def test_noise_scales_with_psd(self, narrowband, signals):
        quiet = default_scenario(duration=0.002, noise_psd=1e-16)
        loud = default_scenario(duration=0.002, noise_psd=1e-12)
        silent = dataclasses.replace(quiet, noise_psd=0.0)
        base = apply_channel(signals, silent, narrowband, seed=3).samples
        nq = apply_channel(signals, quiet, narrowband, seed=3).samples - base
        nl = apply_channel(signals, loud, narrowband, seed=3).samples - base
        ratio = np.var(nl) / np.var(nq)
        assert ratio == pytest.approx(1e4, rel=0.05)
