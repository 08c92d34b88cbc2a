import dataclasses
import json

import pytest

from guidebook.audio import SILENCE, Level, Playing, Source
from guidebook.engine import Timeline, compute_stats, run_scenario
from guidebook.errors import InvalidScenario
from guidebook.protocol import ProtocolConfig
from guidebook.scenario import (
    Scenario,
    ScenarioEvent,
    SetLevel,
    StopPersonal,
    SwitchWall,
    Tap,
    load_scenario,
    scenario_to_dict,
)
from guidebook.simnet import NetworkConfig


def make_scenario(events, end_ms, network=None, protocol=None, mode="eavesdrop"):
    return Scenario(
        catalog_ref="",
        network=network or NetworkConfig(),
        protocol=protocol or ProtocolConfig(),
        mode=mode,
        events=tuple(events),
        end_ms=end_ms,
    )


TAP_T1 = Tap("w1", 100, 100)   # clip c1, 10 s
TAP_T2 = Tap("w1", 400, 100)   # clip c2, 27 s
TAP_MISS = Tap("w1", 250, 400)


def segments(timeline, device):
    return [(t0, t1, s) for t0, t1, s in timeline.segments(device)]


# ---------------------------------------------------------------------------
# the canonical two-tap run

def test_canonical_two_tap_timeline(two_clip_catalog):
    scenario = make_scenario(
        [ScenarioEvent(0, "A", TAP_T1), ScenarioEvent(2000, "B", TAP_T2)],
        end_ms=32000)
    timeline = run_scenario(scenario, catalog=two_clip_catalog)
    assert timeline.devices["A"] == [
        (0, SILENCE),
        (0, Playing("c1", 0, 1.0, Source.PERSONAL, False)),
        (10000, Playing("c2", 8000, 0.5, Source.EAVESDROPPED, True)),
        (29000, SILENCE),
    ]
    assert timeline.devices["B"] == [
        (0, SILENCE),
        (0, Playing("c1", 0, 0.5, Source.EAVESDROPPED, True)),
        (2000, Playing("c2", 0, 1.0, Source.PERSONAL, False)),
        (29000, SILENCE),
    ]


def test_empty_scenario_is_silence_throughout(two_clip_catalog):
    timeline = run_scenario(make_scenario([], 5000), catalog=two_clip_catalog)
    assert timeline.devices["A"] == [(0, SILENCE)]
    assert timeline.devices["B"] == [(0, SILENCE)]
    assert timeline.sent == [] or all(
        m.payload.idle for _, m in timeline.sent)  # idle announces only


def test_determinism_byte_identical_timelines(two_clip_catalog):
    scenario = make_scenario(
        [ScenarioEvent(0, "A", TAP_T1), ScenarioEvent(700, "B", TAP_T2),
         ScenarioEvent(1500, "A", SetLevel(Level.LOUD)),
         ScenarioEvent(4000, "B", StopPersonal())],
        end_ms=15000,
        network=NetworkConfig(loss_probability=0.3, delay_min_ms=10,
                              delay_max_ms=200, duplicate_probability=0.2, seed=42))
    first = run_scenario(scenario, catalog=two_clip_catalog)
    second = run_scenario(scenario, catalog=two_clip_catalog)
    assert first.to_bytes() == second.to_bytes()
    assert first.jsonl_lines() == second.jsonl_lines()


def test_level_changes_apply_at_next_render(two_clip_catalog):
    scenario = make_scenario(
        [ScenarioEvent(0, "B", TAP_T2),
         ScenarioEvent(3000, "A", SetLevel(Level.LOUD)),
         ScenarioEvent(6000, "A", SetLevel(Level.OFF))],
        end_ms=9000)
    timeline = run_scenario(scenario, catalog=two_clip_catalog)
    spans = segments(timeline, "A")
    gains = [(t0, s.gain) for t0, _, s in spans if isinstance(s, Playing)]
    assert gains == [(0, 0.5), (3000, 1.0)]
    assert spans[-1][2] == SILENCE and spans[-1][0] == 6000


def test_stop_produces_stop_message_and_peer_silence(two_clip_catalog):
    scenario = make_scenario(
        [ScenarioEvent(0, "A", TAP_T1), ScenarioEvent(4000, "A", StopPersonal())],
        end_ms=6000)
    timeline = run_scenario(scenario, catalog=two_clip_catalog)
    assert segments(timeline, "A")[-1][2] == SILENCE
    kinds = [type(m.payload).__name__ for _, m in timeline.sent]
    assert "Stop" in kinds
    # B heard the clip until the stop arrived
    b_spans = segments(timeline, "B")
    assert any(isinstance(s, Playing) and s.clip_id == "c1" for _, _, s in b_spans)
    assert b_spans[-1][2] == SILENCE and b_spans[-1][0] == 4000


def test_stop_when_idle_is_noop(two_clip_catalog):
    scenario = make_scenario([ScenarioEvent(100, "A", StopPersonal())], 2000)
    timeline = run_scenario(scenario, catalog=two_clip_catalog)
    assert timeline.devices["A"] == [(0, SILENCE)]


def test_miss_changes_nothing_audible(two_clip_catalog):
    scenario = make_scenario([ScenarioEvent(100, "A", TAP_MISS)], 3000)
    timeline = run_scenario(scenario, catalog=two_clip_catalog)
    assert timeline.devices["A"] == [(0, SILENCE)]
    assert all(not isinstance(m.payload, type(None)) for _, m in timeline.sent)


def test_switch_wall_does_not_stop_playback(two_clip_catalog, two_clip_doc):
    doc = dict(two_clip_doc)
    doc["walls"] = doc["walls"] + [{
        "wall_id": "w2", "room_id": "r1", "image_ref": "x", "width_px": 10,
        "height_px": 10, "targets": []}]
    doc["rooms"] = [{"room_id": "r1", "name": "Room One", "walls": ["w1", "w2"]}]
    from guidebook.catalog import catalog_from_document
    catalog = catalog_from_document(doc)
    scenario = make_scenario(
        [ScenarioEvent(0, "A", TAP_T1), ScenarioEvent(1000, "A", SwitchWall("w2"))],
        end_ms=5000)
    timeline = run_scenario(scenario, catalog=catalog)
    playing = [s for _, _, s in segments(timeline, "A") if isinstance(s, Playing)]
    assert playing and playing[0].clip_id == "c1"
    assert segments(timeline, "A")[0][1] == 5000  # uninterrupted to end


def test_tie_break_event_before_timer(two_clip_catalog):
    # a tap that lands exactly on the announce grid: the announce snapshot
    # must already carry the fresh clip at position 0
    scenario = make_scenario([ScenarioEvent(1000, "A", TAP_T1)], 3000,
                             protocol=ProtocolConfig(announce_interval_ms=1000))
    timeline = run_scenario(scenario, catalog=two_clip_catalog)
    announces = [m for _, m in timeline.sent
                 if m.sender == "A" and type(m.payload).__name__ == "Announce"
                 and m.sent_at_ms == 1000]
    assert len(announces) == 1
    assert announces[0].payload.clip_id == "c1"
    assert announces[0].payload.position_ms == 0
    # and the Start consumed the earlier seq
    start = next(m for _, m in timeline.sent
                 if type(m.payload).__name__ == "Start")
    assert start.seq < announces[0].seq


def test_delivery_processed_before_same_time_event(two_clip_catalog):
    # B's Start (sent 0, delay 2000) arrives exactly when A taps; A's tap wins
    # the earphone but the peer model must already hold B's clip
    scenario = make_scenario(
        [ScenarioEvent(0, "B", TAP_T2), ScenarioEvent(2000, "A", TAP_T1)],
        end_ms=14000,
        network=NetworkConfig(delay_min_ms=2000, delay_max_ms=2000))
    timeline = run_scenario(scenario, catalog=two_clip_catalog)
    spans = segments(timeline, "A")
    eavesdropped = [(t0, s) for t0, _, s in spans
                    if isinstance(s, Playing) and s.source is Source.EAVESDROPPED]
    assert eavesdropped
    t0, state = eavesdropped[0]
    assert t0 == 12000 and state.clip_id == "c2"
    assert state.position_ms == 12000 - 2000  # estimated start = receive - 0


def test_timeline_starts_silent_and_consecutive_points_differ(two_clip_catalog):
    scenario = make_scenario(
        [ScenarioEvent(0, "A", TAP_T1), ScenarioEvent(500, "A", TAP_T1),
         ScenarioEvent(2000, "B", TAP_T2), ScenarioEvent(2500, "A", StopPersonal())],
        end_ms=31000)
    timeline = run_scenario(scenario, catalog=two_clip_catalog)
    for device in ("A", "B"):
        points = timeline.devices[device]
        assert points[0] == (0, SILENCE)
        for (t0, s0), (t1, s1) in zip(points, points[1:]):
            assert t1 >= t0
            assert (t1, s1) != (t0, s0)
            if t1 == t0:
                assert s1 != s0


def test_unknown_wall_in_event_rejected(two_clip_catalog):
    scenario = make_scenario([ScenarioEvent(0, "A", Tap("w9", 1, 1))], 1000)
    with pytest.raises(InvalidScenario):
        run_scenario(scenario, catalog=two_clip_catalog)


def test_scenario_round_trip_through_json(two_clip_catalog):
    scenario = make_scenario(
        [ScenarioEvent(0, "A", TAP_T1),
         ScenarioEvent(10, "B", SetLevel(Level.OFF)),
         ScenarioEvent(10, "B", SwitchWall("w1")),
         ScenarioEvent(50, "B", StopPersonal())],
        end_ms=1000,
        network=NetworkConfig(loss_probability=0.1, seed=9))
    reloaded = load_scenario(json.dumps(scenario_to_dict(scenario)))
    assert reloaded == dataclasses.replace(scenario, catalog_ref="")
    assert run_scenario(reloaded, catalog=two_clip_catalog).to_bytes() == \
        run_scenario(scenario, catalog=two_clip_catalog).to_bytes()


# ---------------------------------------------------------------------------
# open-air mode

def test_openair_hears_companion_full_gain_no_reverb(two_clip_catalog):
    scenario = make_scenario(
        [ScenarioEvent(0, "A", TAP_T1), ScenarioEvent(2000, "B", TAP_T2),
         ScenarioEvent(3000, "A", SetLevel(Level.OFF))],  # levels are ignored
        end_ms=32000, mode="openair")
    timeline = run_scenario(scenario, catalog=two_clip_catalog)
    assert timeline.sent == []  # peer channel disabled
    a_spans = segments(timeline, "A")
    eaves = [s for _, _, s in a_spans
             if isinstance(s, Playing) and s.source is Source.EAVESDROPPED]
    assert eaves and all(s.gain == 1.0 and s.reverb is False for s in eaves)
    assert eaves[0].clip_id == "c2"
    # positions mirror the companion's actual playback exactly
    join = next((t0, s) for t0, _, s in a_spans
                if isinstance(s, Playing) and s.source is Source.EAVESDROPPED)
    assert join[0] == 10000 and join[1].position_ms == 8000


def test_openair_stop_is_heard_by_both_instantly(two_clip_catalog):
    scenario = make_scenario(
        [ScenarioEvent(0, "B", TAP_T2), ScenarioEvent(5000, "B", StopPersonal())],
        end_ms=8000, mode="openair")
    timeline = run_scenario(scenario, catalog=two_clip_catalog)
    assert segments(timeline, "A")[-1] == (5000, 8000, SILENCE)
    assert segments(timeline, "B")[-1] == (5000, 8000, SILENCE)


# ---------------------------------------------------------------------------
# sharing stats

def test_stats_both_quiet_full_session(two_clip_catalog):
    scenario = make_scenario([ScenarioEvent(0, "A", TAP_T1)], 10000)
    timeline = run_scenario(scenario, catalog=two_clip_catalog)
    stats = compute_stats(timeline, scenario)
    assert stats.mutual_eavesdrop_fraction == 1.0


def test_stats_one_device_off_throughout(two_clip_catalog):
    scenario = make_scenario([ScenarioEvent(0, "B", SetLevel(Level.OFF))], 10000)
    timeline = run_scenario(scenario, catalog=two_clip_catalog)
    assert compute_stats(timeline, scenario).mutual_eavesdrop_fraction == 0.0


def test_stats_half_session_off(two_clip_catalog):
    scenario = make_scenario(
        [ScenarioEvent(0, "A", SetLevel(Level.OFF)),
         ScenarioEvent(5000, "A", SetLevel(Level.QUIET))],
        end_ms=10000)
    timeline = run_scenario(scenario, catalog=two_clip_catalog)
    assert compute_stats(timeline, scenario).mutual_eavesdrop_fraction == 0.5


def test_stats_simultaneous_and_eavesdrop_listening(two_clip_catalog):
    scenario = make_scenario(
        [ScenarioEvent(0, "A", TAP_T1), ScenarioEvent(2000, "B", TAP_T2)],
        end_ms=32000)
    timeline = run_scenario(scenario, catalog=two_clip_catalog)
    stats = compute_stats(timeline, scenario)
    # c1 shared on [0,2000); c2 shared on [10000,29000)
    assert stats.simultaneous_listening_ms == 2000 + 19000
    assert stats.eavesdrop_listen_ms == {"A": 19000, "B": 2000}
    assert 0 <= stats.mutual_eavesdrop_fraction <= 1.0


def test_simultaneous_listening_positive_when_clip_outlives_delay(two_clip_catalog):
    scenario = make_scenario(
        [ScenarioEvent(0, "A", TAP_T1)], 12000,
        network=NetworkConfig(delay_min_ms=100, delay_max_ms=100))
    timeline = run_scenario(scenario, catalog=two_clip_catalog)
    assert compute_stats(timeline, scenario).simultaneous_listening_ms > 0
