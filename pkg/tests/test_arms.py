import math

import numpy as np
import pytest
from conftest import lattice, seeded_samples
from pydantic import ValidationError

from perclab.arms import (
    ArmReport,
    ArmSpec,
    arm_event,
    crossing_clusters,
    dense_event,
    hat_arm_event,
    interface_endpoints,
    raster_arm_clusters,
)
from perclab.connectivity import Color
from perclab.geometry import build_index
from perclab.regions import Sector, rectangle
from perclab.sampling import Configuration, Environment, Window


def annulus_lattice(color_of):
    """6 x 6 unit cells around the origin: A(1,3) is made of the outer 32"""
    return lattice(6, 6, lambda i, j: color_of(i - 3, j - 3), x0=-3, y0=-3)


def halves(i, j):
    return 1 if i >= 0 else -1


def quadrants(i, j):
    # Q2 and Q4 black, Q1 and Q3 white
    return 1 if (i >= 0) != (j >= 0) else -1


def test_arm_spec_validation():
    with pytest.raises(ValidationError):
        ArmSpec(j=0, r=1, R=2)
    with pytest.raises(ValidationError):
        ArmSpec(j=1, r=-1, R=2)
    with pytest.raises(ValidationError):
        ArmSpec(j=1, r=0.5, R=2)
    with pytest.raises(ValidationError):
        ArmSpec(j=1, r=1, R=4).with_radii(0.5, 4)
    spec = ArmSpec(j=2, r=1, R=4)
    assert not spec.degenerate
    assert spec.with_radii(4, 4).degenerate
    assert spec.region().area == pytest.approx(64 - 4)


def test_degenerate_annulus_holds():
    config, index = annulus_lattice(lambda i, j: -1)
    report = crossing_clusters(config, index, ArmSpec(j=4, r=3, R=3))
    assert report.holds
    assert report.clusters == ()


def test_all_black():
    config, index = annulus_lattice(lambda i, j: 1)
    report = crossing_clusters(config, index, ArmSpec(j=1, r=1, R=3))
    assert report.holds
    assert report.black_clusters == 1
    assert report.alternation_count == 0
    assert not arm_event(config, index, ArmSpec(j=2, r=1, R=3))


def test_all_white_has_no_black_arm():
    config, index = annulus_lattice(lambda i, j: -1)
    assert not arm_event(config, index, ArmSpec(j=1, r=1, R=3))


@pytest.mark.parametrize("j, expected", [(1, True), (2, True), (3, False), (4, False)])
def test_two_halves(j, expected):
    config, index = annulus_lattice(halves)
    report = crossing_clusters(config, index, ArmSpec(j=j, r=1, R=3))
    assert report.alternation_count == 2
    assert report.interface_count == 2
    assert [c for _, c in report.clusters].count(Color.BLACK) == 1
    assert report.holds == expected


@pytest.mark.parametrize("j, expected", [(2, True), (3, True), (4, True), (5, False), (6, False)])
def test_four_quadrants(j, expected):
    config, index = annulus_lattice(quadrants)
    report = crossing_clusters(config, index, ArmSpec(j=j, r=1, R=3))
    assert len(report.clusters) == 4
    assert report.alternation_count == 4
    assert report.holds == expected
    # clusters come in attachment order around the centre
    assert list(report.positions) == sorted(report.positions)


@pytest.mark.parametrize("j, expected", [(1, True), (2, True), (3, False)])
def test_half_plane_sector(j, expected):
    config, index = annulus_lattice(quadrants)
    spec = ArmSpec(j=j, r=1, R=3, sector=Sector.UPPER_HALF)
    report = crossing_clusters(config, index, spec)
    assert not report.cyclic
    # Q1 (white) comes first from the start of the wedge, then Q2 (black)
    assert [c for _, c in report.clusters] == [Color.WHITE, Color.BLACK]
    assert report.holds == expected


def test_sector_single_arm_must_be_black():
    config, index = annulus_lattice(lambda i, j: -1)
    spec = ArmSpec(j=1, r=1, R=3, sector=Sector.QUARTER)
    assert len(crossing_clusters(config, index, spec).clusters) == 1
    assert not arm_event(config, index, spec)


def test_raster_oracle_matches_on_lattice():
    config, index = annulus_lattice(quadrants)
    for j in (2, 4, 5):
        spec = ArmSpec(j=j, r=1, R=3)
        exact = crossing_clusters(config, index, spec)
        raster = raster_arm_clusters(config, spec, resolution=0.05)
        assert raster.holds == exact.holds
        assert [c for _, c in raster.clusters] == [c for _, c in exact.clusters]


def test_hat_event_without_trials_is_the_arm_event():
    config, index = annulus_lattice(halves)
    spec = ArmSpec(j=3, r=1, R=3)
    stream = np.random.default_rng(0)
    assert hat_arm_event(config, index, spec, 0, stream) == arm_event(config, index, spec)
    with pytest.raises(ValueError):
        hat_arm_event(config, index, spec, -1, stream)


def test_hat_event_is_implied_by_the_arm_event(seed):
    spec = ArmSpec(j=1, r=1, R=3)
    window = Window.around(rectangle(-3, -3, 3, 3), padding=2)
    for config, index in seeded_samples(seed, window, 4):
        if arm_event(config, index, spec):
            assert hat_arm_event(config, index, spec, 2, np.random.default_rng(1))


def test_interface_endpoints():
    report = ArmReport(
        holds=True,
        interface_count=4,
        clusters=((0, Color.BLACK), (1, Color.WHITE), (2, Color.BLACK), (3, Color.WHITE)),
        positions=(0.0, 1.0, 2.0, 3.0),
        alternation_count=4,
    )
    ends = interface_endpoints(report)
    assert ends.positions == (0.0, 1.0, 2.0, 3.0)
    assert ends.min_separation == pytest.approx(1.0)
    linear = ArmReport(
        holds=True,
        interface_count=1,
        clusters=((0, Color.WHITE), (1, Color.BLACK)),
        positions=(0.5, 2.0),
        alternation_count=1,
        cyclic=False,
    )
    assert interface_endpoints(linear).positions == (2.0,)
    assert interface_endpoints(linear).min_separation is None


def test_dense_event():
    points = np.array([(i + 0.5, j + 0.5) for i in range(4) for j in range(4)])
    env = Environment.explicit(points, Window(x_min=0, x_max=4, y_min=0, y_max=4, padding=0))
    box = rectangle(0, 0, 4, 4)
    # farthest location is a cell corner at distance sqrt(1/2); diameter 4 sqrt(2)
    assert dense_event(env, box, 0.2)
    assert not dense_event(env, box, 0.1)
    assert dense_event(env, rectangle(0, 0, 2, 2), 0.5)
    with pytest.raises(ValueError):
        dense_event(env, box, 1.5)


def test_dense_event_without_points():
    env = Environment.explicit([[3.5, 3.5]], Window(x_min=0, x_max=4, y_min=0, y_max=4, padding=0))
    assert not dense_event(env, rectangle(0, 0, 2, 2), 0.5)


def test_wedge_angles():
    spec = ArmSpec(j=1, r=1, R=3, sector=Sector.CUSTOM, wedge=(0, 90))
    assert spec.region().wedge == pytest.approx((0.0, math.pi / 2))


def six_sectors(i, j):
    # alternating 60 degree sectors, black first from angle 0
    angle = math.degrees(math.atan2(j + 0.5, i + 0.5)) % 360
    return 1 if int(angle // 60) % 2 == 0 else -1


@pytest.mark.parametrize("j, expected", [(4, True), (5, True), (6, True), (7, False)])
def test_six_sectors(j, expected):
    config, index = lattice(24, 24, lambda i, k: six_sectors(i - 12, k - 12), x0=-12, y0=-12)
    spec = ArmSpec(j=j, r=2, R=12)
    report = crossing_clusters(config, index, spec)
    assert len(report.clusters) == 6
    assert report.black_clusters == 3
    assert report.holds == expected
    assert raster_arm_clusters(config, spec, resolution=0.1).holds == expected


def test_arm_events_are_nested(seed):
    window = Window.around(rectangle(-4, -4, 4, 4), padding=2)
    for config, index in seeded_samples(seed, window, 6):
        holds = {j: arm_event(config, index, ArmSpec(j=j, r=1, R=4)) for j in range(1, 7)}
        for j in range(1, 5):
            assert holds[j] or not holds[j + 2]


def test_exact_clusters_agree_with_raster(seed):
    window = Window.around(rectangle(-3, -3, 3, 3), padding=2)
    disagreements = 0
    for config, index in seeded_samples(seed, window, 6):
        for j in (1, 2, 3, 4):
            spec = ArmSpec(j=j, r=1, R=3)
            exact = crossing_clusters(config, index, spec)
            raster = raster_arm_clusters(config, spec, resolution=0.02)
            if (exact.holds, exact.alternation_count) != (raster.holds, raster.alternation_count):
                disagreements += 1
    assert disagreements <= 1


def test_hat_event_clears_a_central_blocker():
    # black ring outside the square of radius 5, one white point at the origin whose cell
    # covers the whole inner side of A(2,8)
    ring = [
        (x + 0.5, y + 0.5)
        for x in range(-8, 8)
        for y in range(-8, 8)
        if max(abs(x + 0.5), abs(y + 0.5)) > 5
    ]
    env = Environment.explicit(
        np.array([(0.0, 0.0)] + ring), Window(x_min=-8, x_max=8, y_min=-8, y_max=8, padding=0)
    )
    config = Configuration.explicit(env, [-1] + [1] * len(ring))
    index = build_index(env)
    spec = ArmSpec(j=1, r=2, R=8)
    assert not arm_event(config, index, spec)
    assert not raster_arm_clusters(config, spec, resolution=0.05).holds
    assert hat_arm_event(config, index, spec, 50, np.random.default_rng(7))
