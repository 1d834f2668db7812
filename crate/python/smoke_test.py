"""Smoke test for the help_planner extension module.

Build and install first:

    pip install --no-build-isolation ./crates/py
"""

import json
from pathlib import Path

import help_planner as hp

FIXTURE = Path(__file__).resolve().parent.parent / "crates" / "core" / "fixtures" / "smoke"


def check_plans():
    gt = hp.Plan(
        "1. move_to('pillow', 'floor')\n2. pick_up('pillow', 'floor')\n"
        "3. move_to('pillow', 'couch')\n4. put('pillow', 'couch')\n5. done()"
    )
    assert len(gt) == 4 and gt.terminated
    assert gt.actions[1] == ("pick_up", ["pillow", "floor"])
    assert hp.Plan(gt.to_text()) == gt

    pred = hp.Plan(
        "move_to('pillow', 'floor')\npick_up('pillow', 'floor')\n"
        "move_to('pillow', 'table')\nput('pillow', 'table')\ndone()"
    )
    s = hp.score(pred, gt)
    assert s["em_p"] == 0.0 and s["em_a"] == 1.0
    assert s["lcss_p"] == s["lcsa_p"] == 0.5
    assert hp.score(gt, gt)["em_p"] == 1.0


def check_grounding():
    chosen, score, accepted = hp.ground_term("coffee table", ["table", "sofa", "coffee_table"])
    assert chosen == "coffee_table" and accepted and score > 0.5
    assert hp.ground_term("couch", ["sofa", "couch"]) == ("couch", 1.0, True)
    chosen, _, accepted = hp.ground_term("xyzzy", ["table", "sofa"])
    assert chosen == "xyzzy" and not accepted


def check_world():
    tasks = hp.generate_suite("smoke", seed=42)
    assert len(tasks) == 20
    again = hp.generate_suite("smoke", seed=42)
    assert [t.to_json() for t in tasks] == [t.to_json() for t in again]
    solved = 0
    for task in tasks:
        if task.gt_plan is None:
            continue
        world = hp.World(task)
        before = world.state_hash()
        ok, steps, failure = world.execute(task.gt_plan)
        assert ok, (task.id, failure)
        assert steps == len(task.gt_plan)
        assert world.state_hash() != before or steps == 0
        solved += world.goal_satisfied(task)
    assert solved > 0
    return tasks


def check_planner(tasks):
    planner = hp.Planner.from_config(FIXTURE / "config.toml")
    task = tasks[0]
    trace = json.loads(planner.run(task))
    plan = hp.Plan(trace["final_plan"])
    assert plan == task.gt_plan, (plan, task.gt_plan)
    script = json.loads(hp.golden_script(tasks))
    assert script["rules"]


def main():
    check_plans()
    check_grounding()
    tasks = check_world()
    check_planner(tasks)
    print("help_planner smoke test passed")


if __name__ == "__main__":
    main()
