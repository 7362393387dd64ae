"""Streaming session, threshold tagging, and wire protocol tests."""

import json
import socket
import threading

import numpy as np
import pytest

from poseaffect.dataset import EmotionContext, IntensityLabel, LabeledSequence
from poseaffect.descriptor import extract_descriptor
from poseaffect.errors import ConfigError, StreamProtocolError
from poseaffect.kinematics import RigidTransform, Rotation, matrix_to_quaternion
from poseaffect.model import init_params, predict_many
from poseaffect.skeletons import CANONICAL, KINECT25_PROFILE
from poseaffect.streaming import (
    BehaviorTag,
    FrameMessage,
    StreamSession,
    classify_level,
    format_estimate,
    format_tag,
    handle_line,
    parse_frame_line,
    serve_tcp,
)
from tests.conftest import random_rotation_matrix

VOCAB = ("joy", "surprise", "sadness")
J = CANONICAL.joint_count


def make_params(seed=0):
    return init_params(J, len(VOCAB), hidden1=6, hidden2=8, rng=seed)


def quat_frames(rng, n, joint_count=J):
    """Random local rotations as (n, joint_count, 7) quaternion+offset rows."""
    frames = np.zeros((n, joint_count, 7))
    for t in range(n):
        for j in range(joint_count):
            frames[t, j, :4] = matrix_to_quaternion(random_rotation_matrix(rng))
            frames[t, j, 4:] = rng.normal(size=3)
    return frames


def feed(session, frames, t0=0.0, dt=33.0, emotions=None):
    """Push frames through a session; returns [(t_ms, value, tag), ...]."""
    outputs = []
    for i, joints in enumerate(frames):
        emotion = emotions.get(i) if emotions else None
        result = session.process(FrameMessage(t_ms=t0 + i * dt, joints=joints, emotion=emotion))
        if result is not None:
            outputs.append((t0 + i * dt, result[0], result[1]))
    return outputs


# ------------------------------------------------------------------ session


def test_no_output_before_window_fills(rng):
    session = StreamSession(make_params(), VOCAB, CANONICAL, window=10, hop=2)
    outputs = feed(session, quat_frames(rng, 9))
    assert outputs == []


def test_whole_sequence_stream_matches_batch(rng):
    n = 12
    frames = quat_frames(rng, n)
    params = make_params(seed=3)

    session = StreamSession(params, VOCAB, CANONICAL, window=n, hop=1)
    outputs = feed(session, frames)
    assert len(outputs) == 1

    locals_seq = [
        [
            RigidTransform(Rotation.from_quaternion(frames[t, j, :4]), frames[t, j, 4:])
            for j in range(J)
        ]
        for t in range(n)
    ]
    seq = extract_descriptor(locals_seq, CANONICAL, sample_rate=30.0)
    item = LabeledSequence(
        seq, EmotionContext.from_name(VOCAB, VOCAB[0]), IntensityLabel(0.5), "x"
    )
    batch_value = float(predict_many(params, [item])[0])
    assert abs(outputs[0][1] - batch_value) <= 1e-12


def test_hop_cadence(rng):
    session = StreamSession(make_params(), VOCAB, CANONICAL, window=4, hop=2)
    outputs = feed(session, quat_frames(rng, 10))
    # estimates fire at frames 4, 6, 8, 10
    assert [t for t, _, _ in outputs] == [33.0 * i for i in (3, 5, 7, 9)]


def test_constant_input_is_stationary(rng):
    frame = quat_frames(rng, 1)[0]
    session = StreamSession(make_params(), VOCAB, CANONICAL, window=5, hop=1)
    outputs = feed(session, [frame] * 12)
    values = {v for _, v, _ in outputs}
    assert len(outputs) == 8
    assert len(values) == 1


def test_emotion_switch_changes_estimate(rng):
    frame = quat_frames(rng, 1)[0]
    session = StreamSession(make_params(), VOCAB, CANONICAL, window=4, hop=1)
    outputs = feed(session, [frame] * 10, emotions={6: "sadness"})
    before = outputs[0]
    after = outputs[-1]
    assert before[2].emotion == "joy"  # default context: first vocabulary entry
    assert after[2].emotion == "sadness"
    assert before[1] != after[1]


def test_timestamps_must_not_go_backwards(rng):
    frames = quat_frames(rng, 3)
    session = StreamSession(make_params(), VOCAB, CANONICAL, window=10, hop=1)
    session.process(FrameMessage(t_ms=100.0, joints=frames[0]))
    session.process(FrameMessage(t_ms=100.0, joints=frames[1]))  # equal is fine
    with pytest.raises(StreamProtocolError, match="backwards"):
        session.process(FrameMessage(t_ms=99.0, joints=frames[2]))


def test_bad_quaternion_rejected(rng):
    frame = quat_frames(rng, 1)[0].copy()
    frame[3, :4] = [0.5, 0.0, 0.0, 0.0]  # far off unit norm
    session = StreamSession(make_params(), VOCAB, CANONICAL, window=4, hop=1)
    with pytest.raises(StreamProtocolError, match="t_ms=0.0"):
        session.process(FrameMessage(t_ms=0.0, joints=frame))


def test_wrong_joint_count_rejected(rng):
    session = StreamSession(make_params(), VOCAB, CANONICAL, window=4, hop=1)
    with pytest.raises(StreamProtocolError, match="expected 14 joints"):
        session.process(FrameMessage(t_ms=0.0, joints=np.zeros((13, 7))))


def test_unknown_emotion_rejected(rng):
    frame = quat_frames(rng, 1)[0]
    session = StreamSession(make_params(), VOCAB, CANONICAL, window=4, hop=1)
    with pytest.raises(StreamProtocolError, match="unknown emotion"):
        session.process(FrameMessage(t_ms=0.0, joints=frame, emotion="bliss"))


def test_session_validation():
    params = make_params()
    with pytest.raises(ConfigError):
        StreamSession(params, VOCAB, CANONICAL, window=0)
    with pytest.raises(ConfigError):
        StreamSession(params, VOCAB, CANONICAL, hop=0)
    with pytest.raises(ConfigError):
        StreamSession(params, VOCAB, CANONICAL, threshold=1.0)
    with pytest.raises(ConfigError):
        StreamSession(params, ("joy",), CANONICAL)  # vocabulary size mismatch


def test_profile_reduction_matches_manual(rng):
    from poseaffect.skeletons import reduce_to_canonical

    n = 6
    src_j = KINECT25_PROFILE.topology.joint_count
    frames = quat_frames(rng, n, joint_count=src_j)
    params = make_params(seed=5)

    session = StreamSession(
        params, VOCAB, CANONICAL, profile=KINECT25_PROFILE, window=n, hop=1
    )
    outputs = feed(session, frames)
    assert len(outputs) == 1

    locals_seq = [
        reduce_to_canonical(
            KINECT25_PROFILE,
            [
                RigidTransform(Rotation.from_quaternion(frames[t, j, :4]), frames[t, j, 4:])
                for j in range(src_j)
            ],
        )
        for t in range(n)
    ]
    seq = extract_descriptor(locals_seq, CANONICAL, sample_rate=30.0)
    item = LabeledSequence(
        seq, EmotionContext.from_name(VOCAB, VOCAB[0]), IntensityLabel(0.5), "x"
    )
    assert abs(outputs[0][1] - float(predict_many(params, [item])[0])) <= 1e-12


# ------------------------------------------------------------------- levels


def test_classify_level_threshold_boundary():
    weak = classify_level(0.4999, 0.5, "joy")
    assert (weak.level, weak.action_class) == ("weak", "speech")
    strong = classify_level(0.5, 0.5, "joy")  # boundary is inclusive on strong
    assert (strong.level, strong.action_class) == ("strong", "gesture")


def test_classify_level_sweep_flips_once():
    values = np.linspace(0.0, 1.0, 101)
    levels = [classify_level(float(v), 0.37, "joy").level for v in values]
    flips = sum(a != b for a, b in zip(levels, levels[1:]))
    assert flips == 1
    assert levels[0] == "weak" and levels[-1] == "strong"


def test_classify_level_rejects_bad_threshold():
    with pytest.raises(ConfigError):
        classify_level(0.5, 0.0, "joy")
    with pytest.raises(ConfigError):
        classify_level(0.5, 1.0, "joy")


def test_behavior_tag_pairing_enforced():
    with pytest.raises(ConfigError):
        BehaviorTag("joy", "weak", "gesture")
    with pytest.raises(ConfigError):
        BehaviorTag("joy", "loud", "speech")


# ------------------------------------------------------------ wire protocol


def frame_line(t_ms, joints, emotion=None):
    obj = {"v": 1, "type": "frame", "t_ms": t_ms, "joints": np.asarray(joints).tolist()}
    if emotion is not None:
        obj["emotion"] = emotion
    return json.dumps(obj)


def test_parse_frame_line_round_trip(rng):
    joints = quat_frames(rng, 1)[0]
    msg = parse_frame_line(frame_line(12.5, joints, emotion="joy"))
    assert msg.t_ms == 12.5
    assert msg.emotion == "joy"
    assert np.array_equal(msg.joints, joints)  # JSON round-trips doubles exactly


def test_parse_frame_line_errors():
    with pytest.raises(StreamProtocolError, match="invalid JSON"):
        parse_frame_line("{nope")
    with pytest.raises(StreamProtocolError, match="JSON object"):
        parse_frame_line("[1,2]")
    with pytest.raises(StreamProtocolError, match="version"):
        parse_frame_line('{"v":2,"type":"frame","t_ms":0,"joints":[]}')
    with pytest.raises(StreamProtocolError, match="type"):
        parse_frame_line('{"v":1,"type":"estimate","t_ms":0,"joints":[]}')
    with pytest.raises(StreamProtocolError, match="missing field"):
        parse_frame_line('{"v":1,"type":"frame","t_ms":0}')
    with pytest.raises(StreamProtocolError, match="numeric"):
        parse_frame_line('{"v":1,"type":"frame","t_ms":0,"joints":[["a"]]}')
    with pytest.raises(StreamProtocolError, match="emotion"):
        parse_frame_line('{"v":1,"type":"frame","t_ms":0,"joints":[],"emotion":3}')


def test_output_line_formats():
    est = json.loads(format_estimate(100.0, 0.625))
    assert est == {"v": 1, "type": "estimate", "t_ms": 100.0, "value": 0.625}
    tag = json.loads(format_tag(100.0, BehaviorTag("joy", "strong", "gesture")))
    assert tag == {
        "v": 1,
        "type": "tag",
        "t_ms": 100.0,
        "emotion": "joy",
        "level": "strong",
        "action": "gesture",
    }


def test_handle_line_blank_and_estimates(rng):
    params = make_params()
    session = StreamSession(params, VOCAB, CANONICAL, window=2, hop=1)
    frames = quat_frames(rng, 2)
    assert handle_line(session, "\n") == []
    assert handle_line(session, frame_line(0.0, frames[0])) == []
    out = handle_line(session, frame_line(33.0, frames[1]))
    assert len(out) == 2
    assert json.loads(out[0])["type"] == "estimate"
    assert json.loads(out[1])["type"] == "tag"


# ---------------------------------------------------------------------- tcp


def test_tcp_server_round_trip(rng):
    params = make_params(seed=7)
    frames = quat_frames(rng, 3)

    def session_factory():
        return StreamSession(params, VOCAB, CANONICAL, window=3, hop=1)

    server = serve_tcp(session_factory, "127.0.0.1", 0)
    port = server.server_address[1]
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        with socket.create_connection(("127.0.0.1", port), timeout=5) as conn:
            f = conn.makefile("rw", encoding="utf-8", newline="\n")
            for i, joints in enumerate(frames):
                f.write(frame_line(i * 33.0, joints) + "\n")
            f.flush()
            conn.shutdown(socket.SHUT_WR)
            lines = [json.loads(line) for line in f if line.strip()]

        reference = feed(session_factory(), frames)
        assert len(lines) == 2
        assert lines[0]["type"] == "estimate"
        assert lines[0]["value"] == reference[0][1]
        assert lines[1]["type"] == "tag"
        assert lines[1]["level"] == reference[0][2].level
    finally:
        server.shutdown()
        server.server_close()


def test_tcp_server_reports_protocol_error(rng):
    def session_factory():
        return StreamSession(make_params(), VOCAB, CANONICAL, window=3, hop=1)

    server = serve_tcp(session_factory, "127.0.0.1", 0)
    port = server.server_address[1]
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        with socket.create_connection(("127.0.0.1", port), timeout=5) as conn:
            f = conn.makefile("rw", encoding="utf-8", newline="\n")
            f.write('{"v":1,"type":"frame","t_ms":0}\n')
            f.flush()
            reply = json.loads(f.readline())
            assert reply["type"] == "error"
            assert "missing field" in reply["message"]
            assert f.readline() == ""  # connection closed after the error
    finally:
        server.shutdown()
        server.server_close()
