import math

import numpy as np
import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mobicatch import rewards as R


def ctx(**kw):
    base = dict(obj_pos=np.zeros(3), obj_vel=np.zeros(3), ee_pos=np.zeros(3),
                palm_z=np.array([0.0, 0.0, -1.0]), d_prev=0.0, action=np.zeros(6))
    base.update(kw)
    return R.RewardContext(**base)


def test_r_pos_examples():
    p = np.zeros(3)
    assert R.r_pos(ctx(d_prev=0.5, ee_pos=np.array([0.3, 0, 0]), obj_pos=p)) == pytest.approx(0.2)
    assert R.r_pos(ctx(d_prev=0.3, ee_pos=np.array([0.3, 0, 0]), obj_pos=p)) == pytest.approx(0.0)
    assert R.r_pos(ctx(d_prev=0.3, ee_pos=np.array([0.5, 0, 0]), obj_pos=p)) == pytest.approx(-0.2)


def test_r_pre_examples():
    assert R.r_pre(ctx()) == 1.0
    d = math.sqrt(0.02)
    assert R.r_pre(ctx(d_prev=d, ee_pos=np.array([1.0, 0, 0]))) == pytest.approx(math.exp(-1), rel=1e-12)
    far = R.r_pre(ctx(d_prev=1.0, ee_pos=np.array([2.0, 0, 0])))
    assert 0 < far == pytest.approx(1.9287498479639178e-22, rel=1e-9)


def test_r_pre_uses_updated_running_minimum():
    c = ctx(d_prev=1.0, ee_pos=np.array([0.1, 0, 0]))
    assert R.r_pre(c) == pytest.approx(math.exp(-50 * 0.01))


def test_r_orient_examples():
    down = np.array([0.0, 0.0, -1.0])
    assert R.r_orient(ctx(obj_vel=np.array([0, 0, -2.0]), palm_z=down)) == 1.0
    assert R.r_orient(ctx(obj_vel=np.array([1.0, 0, 0]), palm_z=down)) == 0.0
    assert R.r_orient(ctx(obj_vel=np.array([0, 0, 0.5]), palm_z=down)) == -0.5


def test_binary_and_time_terms():
    assert R.r_touch(ctx(touch=True)) == 1.0 and R.r_touch(ctx(touch=False)) == 0.0
    assert R.r_stab(ctx(grasp_dt=0.04)) == pytest.approx(0.04)
    assert R.r_stab(ctx()) == 0.0
    assert sum(R.r_stab(ctx(grasp_dt=0.04)) for _ in range(10)) == pytest.approx(0.4)


def test_r_ctrl_examples():
    assert R.r_ctrl(ctx()) == 0.0
    assert R.r_ctrl(ctx(action=np.array([0, 1.0, 0, 0, 0, 0]))) == 1.0
    a = np.zeros(18)
    a[:2] = [0.3, 0.4]
    assert R.r_ctrl(ctx(action=a)) == pytest.approx(0.25)


def test_r_cstr_is_binary():
    assert R.r_cstr(ctx()) == 0.0
    assert R.r_cstr(ctx(limit_violation=True)) == -1.0
    flags = np.ones(6, dtype=bool)
    assert R.r_cstr(ctx(limit_violation=flags.any())) == -1.0


def test_total_reward_all_zero_context():
    w = R.RewardWeights()
    c = ctx(d_prev=0.0)
    for stage in R.STAGE_TERMS:
        total, parts = R.total_reward(c, w, stage)
        assert total == pytest.approx(w.pre * math.exp(-50 * 0.0))
        assert set(parts) == set(R.TERMS)


def test_zero_weights_give_zero():
    zero = R.RewardWeights(0, 0, 0, 0, 0, 0, 0)
    c = ctx(d_prev=0.4, ee_pos=np.array([0.1, 0.2, 0]), touch=True, grasp_dt=0.04,
            limit_violation=True, action=np.ones(6))
    assert R.total_reward(c, zero, "tracking")[0] == 0.0
    assert R.total_reward(c, zero, "catching")[0] == 0.0


def test_total_matches_manual_dot_product():
    w = R.RewardWeights(pos=2.0, pre=3.0, orient=0.7, touch=4.0, stab=9.0, ctrl=0.5, cstr=1.5)
    c = ctx(d_prev=0.5, ee_pos=np.array([0.3, 0, 0]), obj_vel=np.array([0, 0, -0.25]), touch=True,
            grasp_dt=0.04, limit_violation=True, action=np.array([0.3, 0.4, 0, 0, 0, 0]))
    pos, pre, orient, ctrl = 0.2, math.exp(-50 * 0.09), 0.25, 0.25
    expected_track = 2.0 * pos + 3.0 * pre + 0.7 * orient + 4.0 * 1 - 0.5 * ctrl + 1.5 * -1
    expected_catch = 2.0 * pos + 3.0 * pre + 0.7 * orient + 9.0 * 0.04 - 0.5 * ctrl + 1.5 * -1
    assert R.total_reward(c, w, "tracking")[0] == pytest.approx(expected_track, rel=1e-12)
    assert R.total_reward(c, w, "catching")[0] == pytest.approx(expected_catch, rel=1e-12)


def test_unknown_stage_rejected():
    with pytest.raises(ValueError):
        R.total_reward(ctx(), R.RewardWeights(), "juggling")


def test_negative_weight_rejected():
    with pytest.raises(ValueError):
        R.RewardWeights(ctrl=-0.01)


def test_stage_weights_round_trip(tmp_path):
    sw = R.StageWeights(tracking=R.RewardWeights(pos=3.0), catching=R.RewardWeights(stab=7.0))
    path = tmp_path / "w.yaml"
    path.write_text(yaml.safe_dump(sw.to_dict()))
    assert R.load_weights(path) == sw
    with pytest.raises(ValueError):
        R.StageWeights.from_dict({"dancing": {}})


vec3 = arrays(np.float64, 3, elements=st.floats(-1.5, 1.5))


@settings(max_examples=200, deadline=None)
@given(p=vec3, v=vec3, e=vec3, u=vec3.filter(lambda x: np.linalg.norm(x) > 1e-3),
       d_prev=st.floats(0, 3), a=arrays(np.float64, 18, elements=st.floats(-1, 1)),
       touch=st.booleans(), held=st.booleans(), viol=st.booleans())
def test_bounds_gating_and_breakdown(p, v, e, u, d_prev, a, touch, held, viol):
    u = u / np.linalg.norm(u)
    c = R.RewardContext(p, v, e, u, d_prev, a, touch, 0.04 if held else 0.0, viol)
    w = R.RewardWeights()
    for stage in ("tracking", "catching"):
        total, parts = R.total_reward(c, w, stage)
        assert 0.0 < parts["pre"] <= 1.0
        assert -1.0 <= parts["orient"] <= 1.0
        assert parts["touch"] in (0.0, 1.0)
        assert parts["cstr"] in (-1.0, 0.0)
        assert parts["ctrl"] >= 0.0 and parts["stab"] >= 0.0
        vec = np.array([parts[t] for t in R.TERMS])
        assert total == vec @ R.signed_weights(w, stage)
    # Stage gating: touch never reaches catching totals, stab never reaches tracking totals.
    assert R.signed_weights(w, "catching")[R.TERMS.index("touch")] == 0.0
    assert R.signed_weights(w, "tracking")[R.TERMS.index("stab")] == 0.0
    only_touch = R.RewardWeights(0, 0, 0, 5.0, 0, 0, 0)
    only_stab = R.RewardWeights(0, 0, 0, 0, 20.0, 0, 0)
    assert R.total_reward(c, only_touch, "catching")[0] == 0.0
    assert R.total_reward(c, only_stab, "tracking")[0] == 0.0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.0, 3.0), min_size=1, max_size=40))
def test_positive_position_rewards_telescope(distances):
    d_prev = distances[0]
    d_initial = d_prev
    total_pos = 0.0
    for dist in distances[1:]:
        c = ctx(d_prev=d_prev, ee_pos=np.array([dist, 0.0, 0.0]))
        total_pos += max(R.r_pos(c), 0.0)
        d_prev = float(c.d_current())
    assert total_pos <= d_initial - d_prev + 1e-9


def test_batched_context():
    n = 5
    c = R.RewardContext(np.zeros((n, 3)), np.zeros((n, 3)), np.ones((n, 3)), np.tile([0, 0, 1.0], (n, 1)),
                        np.full(n, 2.0), np.zeros((n, 18)), np.array([1, 0, 1, 0, 0], bool), 0.0,
                        np.zeros(n, bool))
    total, parts = R.total_reward(c, R.RewardWeights(), "tracking")
    assert total.shape == (n,)
    assert parts["touch"].tolist() == [1, 0, 1, 0, 0]
