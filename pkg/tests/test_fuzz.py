import dataclasses
import random

import pytest

from guidebook.engine import run_scenario
from guidebook.errors import InvariantViolation
from guidebook.fuzz import (
    FuzzProfile,
    InvariantChecker,
    check_run,
    fuzz_catalog,
    minimize_scenario,
    random_scenario,
)
from guidebook.scenario import ScenarioEvent, StopPersonal, Tap


def test_fuzz_catalog_is_valid():
    catalog = fuzz_catalog()
    assert catalog.rooms and catalog.walls and catalog.clips
    assert all(c.duration_ms > 0 for c in catalog.clips)


def test_generated_scenarios_are_well_formed():
    catalog = fuzz_catalog()
    for i in range(50):
        scenario = random_scenario(random.Random(i), catalog)
        assert scenario.end_ms >= max((e.at_ms for e in scenario.events), default=0)
        assert all(e.at_ms % 10 == 0 for e in scenario.events)
        assert 0 <= scenario.network.loss_probability <= 0.3
        assert scenario.network.delay_max_ms <= 200


def test_checked_runs_hold_invariants():
    catalog = fuzz_catalog()
    for i in range(300):
        scenario = random_scenario(random.Random(40_000 + i), catalog)
        check_run(scenario, catalog)  # raises on violation


def test_checker_flags_a_buggy_render(two_clip_catalog):
    # sanity: the checker is not vacuous; feed it a corrupted render
    from guidebook.audio import Playing, Source, initial_state, PlaybackRecord
    scenario = random_scenario(random.Random(1), fuzz_catalog())
    checker = InvariantChecker(scenario, two_clip_catalog)
    state = dataclasses.replace(
        initial_state("A", "B", two_clip_catalog),
        own=PlaybackRecord("c1", 0, 1))
    devices = {"A": state, "B": initial_state("B", "A", two_clip_catalog)}

    class LyingScenario:
        mode = "eavesdrop"
        network = scenario.network
        protocol = scenario.protocol

    checker.scenario = LyingScenario()
    # own active at 5000 but render_for_mode will report it correctly, so
    # violate via a stale-seq regression instead
    checker._last_send_seq["A"] = 99
    with pytest.raises(InvariantViolation):
        checker(5000, devices, {})


def test_minimizer_drops_irrelevant_events():
    catalog = fuzz_catalog()
    wall = catalog.walls[0]
    inside = wall.targets[0].polygon[0]
    scenario = random_scenario(random.Random(3), catalog)
    tap = ScenarioEvent(0, "A", Tap(wall.wall_id, inside[0] + 5, inside[1] + 5))
    stop = ScenarioEvent(200, "A", StopPersonal())
    noise = [ScenarioEvent(t, "B", StopPersonal()) for t in (10, 20, 30)]
    scenario = dataclasses.replace(
        scenario, events=tuple(sorted([tap, stop] + noise, key=lambda e: e.at_ms)))

    def still_fails(candidate):
        # pretend the bug needs the tap and the stop together
        kinds = [type(e.action).__name__ for e in candidate.events]
        return "Tap" in kinds and "StopPersonal" in kinds and \
            any(e.device == "A" and isinstance(e.action, StopPersonal)
                for e in candidate.events)

    minimized = minimize_scenario(scenario, still_fails)
    assert len(minimized.events) == 2
    assert still_fails(minimized)


def test_profile_bounds_are_respected():
    catalog = fuzz_catalog()
    profile = FuzzProfile(max_loss=0.05, max_delay_ms=50, mode="openair")
    for i in range(20):
        scenario = random_scenario(random.Random(i), catalog, profile)
        assert scenario.network.loss_probability <= 0.05
        assert scenario.network.delay_max_ms <= 50
        assert scenario.mode == "openair"
        run_scenario(scenario, catalog=catalog)
