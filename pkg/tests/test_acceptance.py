"""Acceptance criteria.

Criterion 1 runs the unit suite in a subprocess and times it.  Criteria
2-5 read ``results/acceptance.json`` written by ``python -m
mobicatch.experiments --out results``, check it was produced with the
current defaults, re-evaluate every stored checkpoint to confirm the
recorded numbers, and then apply the thresholds.  Each test prints one
PASS/FAIL line.
"""

import json
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from mobicatch.experiments import RESULTS_FILE, Protocol, evaluate_checkpoint, summarize
from mobicatch.ppo import load_checkpoint

ROOT = Path(__file__).resolve().parents[1]
RESULTS = ROOT / "results" / RESULTS_FILE
UNIT_BUDGET_S = 300.0
TRACK_TOUCH_MIN = 70.0
TRACK_STEPS_MAX = 5_000_000
ORDERING_MARGIN = 20.0
ROLL_SLACK = 2.0
HELD_OUT_DROP_MAX = 15.0


def report(capsys, criterion: int, ok: bool, detail: str):
    with capsys.disabled():
        print(f"\n[criterion {criterion}] {'PASS' if ok else 'FAIL'}: {detail}")


def test_criterion_1_unit_suite_under_five_minutes(capsys):
    cmd = [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", str(ROOT / "tests"),
           "--ignore", str(ROOT / "tests" / "test_acceptance.py")]
    t0 = time.perf_counter()
    proc = subprocess.run(cmd, cwd=ROOT, capture_output=True, text=True)
    elapsed = time.perf_counter() - t0
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-500:]
    ok = proc.returncode == 0 and elapsed < UNIT_BUDGET_S
    report(capsys, 1, ok, f"unit suite exit {proc.returncode} in {elapsed:.1f} s (limit {UNIT_BUDGET_S:.0f} s); {tail}")
    assert proc.returncode == 0, proc.stdout[-4000:]
    assert elapsed < UNIT_BUDGET_S


@pytest.fixture(scope="module")
def results():
    assert RESULTS.exists(), f"missing {RESULTS}; run `python -m mobicatch.experiments --out results`"
    data = json.loads(RESULTS.read_text())
    protocol = Protocol(seeds=tuple(data["protocol"]["seeds"]), track_steps=data["protocol"]["track_steps"],
                        catch_steps=data["protocol"]["catch_steps"],
                        eval_episodes=data["protocol"]["eval_episodes"])
    assert data["protocol"] == protocol.to_dict(), "results were produced with different defaults"
    assert data["protocol_digest"] == protocol.digest()
    assert len(protocol.seeds) == 3
    return data


@pytest.fixture(scope="module")
def verified(results):
    """Recompute every stored number from its checkpoint; they must agree exactly."""
    n = results["protocol"]["eval_episodes"]
    for key, run in results["runs"].items():
        ckpt = load_checkpoint(RESULTS.parent / run["checkpoint"])
        assert ckpt.digest() == run["digest"], key
        assert ckpt.step == run["steps"], key
        again = evaluate_checkpoint(ckpt, run["seed"], n)
        assert again == run["eval"], key
        if "eval_held_out" in run:
            assert evaluate_checkpoint(ckpt, run["seed"], n, held_out=True) == run["eval_held_out"], key
    return summarize(results)


def seeds_of(results, method):
    return [results["runs"][f"{method}_s{s}"] for s in results["protocol"]["seeds"]]


def test_criterion_2_tracking_touch(results, verified, capsys):
    runs = seeds_of(results, "track")
    touch = [r["eval"]["touch"] for r in runs]
    steps = max(r["steps"] for r in runs)
    mean = float(np.mean(touch))
    ok = mean >= TRACK_TOUCH_MIN and steps <= TRACK_STEPS_MAX
    per_seed = ", ".join(f"{t:.1f}" for t in touch)
    report(capsys, 2, ok, f"tracking touch {mean:.1f}% (seeds {per_seed}) after {steps} steps; "
                          f"need >= {TRACK_TOUCH_MIN:.0f}% within {TRACK_STEPS_MAX} steps")
    assert steps <= TRACK_STEPS_MAX
    assert mean >= TRACK_TOUCH_MIN


def test_criterion_3_two_stage_beats_one_stage(results, verified, capsys):
    for s in results["protocol"]["seeds"]:
        two = results["runs"][f"track_s{s}"]["steps"] + results["runs"][f"two-stage_s{s}"]["steps"]
        assert two == results["runs"][f"one-stage_s{s}"]["steps"], "budgets differ"
    two, one = verified["two-stage"]["catch_mean"], verified["one-stage"]["catch_mean"]
    ok = two - one >= ORDERING_MARGIN
    report(capsys, 3, ok, f"two-stage catch {two:.1f}% vs one-stage {one:.1f}% "
                          f"(gap {two - one:.1f}, need >= {ORDERING_MARGIN:.0f})")
    assert two - one >= ORDERING_MARGIN


def test_criterion_4_roll_not_worse(results, verified, capsys):
    roll, no_roll = verified["two-stage"]["catch_mean"], verified["no-roll"]["catch_mean"]
    ok = roll >= no_roll - ROLL_SLACK
    report(capsys, 4, ok, f"with roll {roll:.1f}% vs no roll {no_roll:.1f}% (need >= no roll - {ROLL_SLACK:.0f})")
    assert roll >= no_roll - ROLL_SLACK


def test_criterion_5_held_out_objects(results, verified, capsys):
    seen, unseen = verified["two-stage"]["catch_mean"], verified["two-stage"]["held_out_catch_mean"]
    ok = seen - unseen <= HELD_OUT_DROP_MAX
    report(capsys, 5, ok, f"held-out catch {unseen:.1f}% vs in-distribution {seen:.1f}% "
                          f"(drop {seen - unseen:.1f}, limit {HELD_OUT_DROP_MAX:.0f})")
    assert seen - unseen <= HELD_OUT_DROP_MAX
