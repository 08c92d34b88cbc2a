"""Paired electronic-guidebook engine with eavesdropped audio sharing.

Two devices hold identical content; playing a clip shares it as a side
effect, the companion can listen in at a chosen volume, personal clips
always preempt, and clips are never mixed. The package provides the
deterministic protocol engine, a simulated lossy network, a scripted
scenario harness with a brute-force oracle, and a live WebSocket session
server for interactive use.
"""

from .audio import (
    SILENCE,
    AudibleState,
    DeviceState,
    Level,
    PlaybackRecord,
    Playing,
    Silence,
    Source,
    gain_for,
    initial_state,
    render,
    set_level,
    start_personal,
    stop_personal,
)
from .catalog import (
    Catalog,
    Clip,
    Hit,
    Miss,
    Room,
    TapOutcome,
    Target,
    Wall,
    hit_test,
    load_catalog,
    load_catalog_file,
    point_in_polygon,
    resolve_tap,
)
from .engine import SharingStats, Timeline, compute_stats, run_scenario
from .errors import (
    GuidebookError,
    InvalidScenario,
    InvariantViolation,
    NotPlaying,
    OutOfBounds,
    ParseError,
    UnknownClip,
    UnknownWall,
    ValidationError,
    WrongSender,
)
from .messages import Announce, ControlMessage, Start, Stop
from .oracle import oracle_run, timelines_agree
from .protocol import (
    DivergenceReport,
    ProtocolConfig,
    due_announce,
    on_receive,
    peer_divergence,
)
from .scenario import (
    Scenario,
    ScenarioEvent,
    SetLevel,
    StopPersonal,
    SwitchWall,
    Tap,
    load_scenario,
    load_scenario_file,
)
from .simnet import DeliveryEvent, NetworkConfig, SimNet

__version__ = "0.1.0"
