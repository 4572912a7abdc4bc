import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from metrocrew.model import (CrewMember, Instance, Line, Params, TrainTask, desk_config,  # noqa: E402
                             instance_from_dict, task_penalty)


def small_instance(tasks=(), crew=None, n_days=1, horizon=(0, 600), params=None, lines=None, transfers=()):
    """One or two lines on a short horizon; tasks given as (line, dep_depot, dep, arr[, day])."""
    params = params or Params(c_r=0.25)
    lines = lines or (Line("L1", ("A", "B"), 40, 30, (0, 560)),)
    other = {l.id: l.depots for l in lines}
    ks = []
    for i, t in enumerate(tasks):
        line, o, dep, arr = t[:4]
        day = t[4] if len(t) > 4 else 0
        a, b = other[line]
        ks.append(TrainTask(i, line, o, dep, b if o == a else a, arr, task_penalty(dep, arr, params), day))
    if crew is None:
        crew = [CrewMember(0, frozenset(l.id for l in lines), frozenset(lines[0].depots))]
    inst = Instance(n_days, horizon, tuple(lines), tuple(transfers), tuple(ks), tuple(crew), params)
    inst.validate()
    return inst


@pytest.fixture(scope="session")
def desk0():
    return instance_from_dict(desk_config(0))


@pytest.fixture(scope="session")
def desk0_plan(desk0):
    from metrocrew.planner import plan
    return plan(desk0)
