import pytest

from flowsteer import protocol as proto
from flowsteer import replay
from flowsteer import scenario as sc
from flowsteer.steering import LifecycleState

from test_scenario import micro_scene


SPEC = micro_scene()
DT = SPEC.params().dt


# -------------------------------------------------------------------- parsing

def test_parse_control_and_params():
    acts = replay.parse_script(
        "at 0 start\n"
        "at 10 pause\n"
        "at 10 param tau 0.9\n"
        "at 10 resume\n", SPEC)
    assert [a.step for a in acts] == [0, 10, 10, 10]
    assert acts[0].message == proto.Control(proto.V_START)
    assert acts[2].message == proto.SetParam(proto.P_TAU, 0.9)


def test_parse_relative_seconds():
    acts = replay.parse_script("at 100 pause\nat +1.0 resume\n", SPEC)
    assert acts[1].step == 100 + round(1.0 / DT)


def test_parse_merges_same_step_edits_into_one_batch():
    acts = replay.parse_script(
        "at 5 edit 1 2 3 wall\n"
        "at 5 edit 1 2 4 wall\n"
        "at 6 edit 1 2 5 fill\n", SPEC)
    assert len(acts) == 2
    assert acts[0].message == proto.EditCells(((1, 2, 3, proto.A_SET_WALL),
                                               (1, 2, 4, proto.A_SET_WALL)))
    assert acts[1].message == proto.EditCells(((1, 2, 5, proto.A_FILL_WATER),))


def test_parse_skips_comments_and_blanks():
    acts = replay.parse_script(
        "# header\n\nat 0 start  # inline comment\n", SPEC)
    assert len(acts) == 1


@pytest.mark.parametrize("text,fragment", [
    ("at x start", "bad step"),
    ("at 10 pause\nat 5 resume", "backwards"),
    ("at 0 edit 1 2 wall", "expected `edit"),
    ("at 0 edit 1 2 3 melt", "unknown edit action"),
    ("at 0 edit 99 2 3 wall", "outside the 12x12x16 scene"),
    ("at 0 param warp 1", "unknown parameter"),
    ("at 0 param tau fast", "bad value"),
    ("at 0 start now", "takes no argument"),
    ("at 0 dance", "unknown action"),
    ("go 0 start", "expected `at"),
])
def test_parse_errors_carry_line_numbers(text, fragment):
    with pytest.raises(replay.ScriptError, match=fragment) as info:
        replay.parse_script(text, SPEC)
    bad_line = text.splitlines().index(text.splitlines()[-1]) + 1
    assert info.value.line_no == bad_line
    assert "line %d" % bad_line in str(info.value)


# -------------------------------------------------------------------- running

def test_empty_script_logs_only_the_scene_load():
    result = replay.run_replay(SPEC, [], total_steps=50)
    assert [r.event for r in result.records] == ["scene_loaded"]
    assert result.timestep == 0
    assert result.final_state is LifecycleState.IDLE
    assert result.metrics is None and "success" in result.incomplete


def test_start_runs_to_the_step_budget():
    result = replay.run_replay(
        SPEC, replay.parse_script("at 0 start\n", SPEC), total_steps=40)
    assert result.timestep == 40
    assert result.final_state is LifecycleState.RUNNING
    assert [r.event for r in result.records][:2] == ["scene_loaded",
                                                     "control"]


def test_pause_freezes_time_and_later_actions_fire_at_the_boundary():
    script = "at 0 start\nat 10 pause\nat 500 resume\nat 12 stop\n"
    with pytest.raises(replay.ScriptError):
        replay.parse_script(script, SPEC)  # 12 < 500: backwards
    script = "at 0 start\nat 10 pause\nat 500 resume\n"
    result = replay.run_replay(SPEC, replay.parse_script(script, SPEC),
                               total_steps=20)
    controls = [(r.timestep, r.details) for r in result.records
                if r.event == "control"]
    # the resume cannot wait for step 500: time is frozen at 10
    assert controls == [(0, "start"), (10, "pause"), (10, "resume")]
    assert result.timestep == 20


def test_actions_beyond_the_budget_do_not_block_termination():
    script = "at 0 start\nat 900 pause\n"
    result = replay.run_replay(SPEC, replay.parse_script(script, SPEC),
                               total_steps=30)
    assert result.timestep == 30


def test_script_building_optimal_wall_reaches_success():
    lines = ["at 0 edit %d %d %d wall" % (x, y, z)
             for x in (7, 8) for y in range(1, 11) for z in (1, 2)]
    lines.append("at 0 start")
    result = replay.run_replay(SPEC,
                               replay.parse_script("\n".join(lines), SPEC),
                               total_steps=2000)
    assert result.metrics is not None
    assert result.metrics.failures == 0
    assert result.metrics.tct > 0
    assert result.final_state is LifecycleState.FINISHED
    events = [r.event for r in result.records]
    assert "success" in events and "overflow" not in events


def test_restart_mode_rejects_mid_run_edits():
    script = "at 0 start\nat 5 edit 5 5 10 fill\n"
    result = replay.run_replay(SPEC, replay.parse_script(script, SPEC),
                               total_steps=20, mode="restart")
    assert any(f.code == proto.ERR_MODE_VIOLATION for f in result.faults)
    assert "edit" not in [r.event for r in result.records]


def test_identical_scripts_are_byte_identical(tmp_path):
    script = ("at 0 start\n"
              "at 6 edit 5 5 8 fill\n"
              "at 6 edit 5 6 8 fill\n"
              "at 14 pause\n"
              "at 14 resume\n")
    actions = replay.parse_script(script, SPEC)

    def run(sub):
        out = tmp_path / sub
        res = replay.run_replay(SPEC, actions, total_steps=60, cadence=5,
                                out_dir=out)
        log_bytes = (out / "events.log").read_bytes()
        snaps = sorted((out / "snapshots").iterdir())
        blob = b"".join(p.read_bytes() for p in snaps)
        return res.snapshot_digest, log_bytes, blob, len(snaps)

    first, second = run("a"), run("b")
    assert first == second
    assert first[3] == second[3] > 0


def test_snapshot_dumps_are_decodable_wire_frames(tmp_path):
    actions = replay.parse_script("at 0 start\n", SPEC)
    result = replay.run_replay(SPEC, actions, total_steps=10, cadence=5,
                               out_dir=tmp_path)
    assert result.snapshots_written >= 2
    frames = sorted((tmp_path / "snapshots").iterdir())
    items, rest = proto.decode((frames[-1]).read_bytes())
    assert rest == b"" and len(items) == 1
    snap = items[0]
    assert isinstance(snap, proto.Snapshot)
    nx, ny, nz = SPEC.dims
    assert len(snap.cells) == nx * ny * nz
    assert snap.timestep == 10


def test_strip_clock_projection():
    recs = [sc.LogRecord(1.5, 10, "edit", "3 cells"),
            sc.LogRecord(2.5, 20, "overflow", "")]
    assert replay.strip_clock(recs) == [(10, "edit", "3 cells"),
                                        (20, "overflow", "")]
