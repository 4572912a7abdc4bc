import json
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metrocrew.model import (Instance, InstanceError, Line, Params, enumerate_duty_frames, generate_crew,
                             generate_tasks, generate_timetable, instance_from_dict, instance_to_dict,
                             load_instance, perturb_timetable, save_instance, shanghai_like_config)


def test_generate_tasks_counts_and_penalties():
    line = Line("L1", ("A", "B"), 50, 10, (0, 30))
    ks = generate_tasks(line, 0, Params())
    assert len(ks) == 8
    assert sorted({k.dep_time for k in ks}) == [0, 10, 20, 30]
    assert all(k.penalty == 200 for k in ks)
    assert {(k.dep_depot, k.arr_depot) for k in ks} == {("A", "B"), ("B", "A")}


def test_generate_tasks_single_departure_window():
    ks = generate_tasks(Line("L1", ("A", "B"), 50, 10, (40, 40)), 0, Params())
    assert len(ks) == 2


def test_generate_tasks_empty_window():
    assert generate_tasks(Line("L1", ("A", "B"), 50, 10, (40, 39)), 0, Params()) == []


def test_perturbation_bounds_and_determinism():
    ks = generate_tasks(Line("L1", ("A", "B"), 50, 10, (100, 300)), 0, Params())
    a = perturb_timetable(ks, 3)
    assert a == perturb_timetable(ks, 3)
    for k0, k1 in zip(ks, a):
        assert abs(k1.dep_time - k0.dep_time) <= 1 and abs(k1.arr_time - k0.arr_time) <= 1
        assert (k1.line, k1.dep_depot, k1.arr_depot, k1.day) == (k0.line, k0.dep_depot, k0.arr_depot, k0.day)
        assert k1.penalty == 4 * (k1.arr_time - k1.dep_time)
    assert perturb_timetable(ks, None) == ks


def test_generate_crew_mix():
    inst = instance_from_dict({"days": 1, "lines": [{"id": f"L{i}", "run": 40, "headway": 30} for i in range(3)]})
    crew = generate_crew(10, inst, 7)
    assert sum(len(r.qualification) == 2 for r in crew) == 4
    assert sum(len(r.qualification) == 1 for r in crew) == 6
    assert crew == generate_crew(10, inst, 7)
    for r in crew:
        ok = {d for l in r.qualification for d in inst.line(l).depots}
        assert r.preferred_depots <= ok and len(r.preferred_depots) == 2


def test_generate_crew_single_line():
    inst = instance_from_dict({"days": 1, "lines": [{"id": "L1", "run": 40, "headway": 30}]})
    (r,) = generate_crew(1, inst, 0)
    assert r.qualification == {"L1"} and r.preferred_depots <= {"L1a", "L1b"}


def test_duty_frames():
    fr = enumerate_duty_frames(Params(), (0, 1140))
    assert [f.start for f in fr] == [0, 120, 240, 360, 480, 600]
    assert len(enumerate_duty_frames(Params(), (0, 540))) == 1
    assert len(enumerate_duty_frames(Params(h=700), (0, 1140))) == 1
    assert enumerate_duty_frames(Params(), (0, 500)) == []


def test_load_minimal(tmp_path):
    p = tmp_path / "i.json"
    p.write_text(json.dumps({"days": 1, "lines": [{"id": "L1", "depots": ["A", "B"], "run": 40, "headway": 60,
                                                   "window": [0, 600]}], "crew": {"n_r": 2}}))
    inst = load_instance(p)
    assert inst.n_days == 1 and inst.lines[0].depots == ("A", "B")
    assert len(inst.tasks) == 22 and len(inst.crew) == 2


def test_load_rejects_bad_task(tmp_path):
    p = tmp_path / "i.json"
    p.write_text(json.dumps({"days": 1, "lines": [{"id": "L1", "depots": ["A", "B"], "run": 40, "headway": 60}],
                             "tasks": [{"id": 5, "line": "L1", "dep_depot": "A", "dep_time": 100,
                                        "arr_depot": "B", "arr_time": 100}]}))
    with pytest.raises(InstanceError, match="id 5"):
        load_instance(p)


def test_load_rejects_malformed(tmp_path):
    p = tmp_path / "i.json"
    p.write_text("{not json")
    with pytest.raises(InstanceError, match="parse error"):
        load_instance(p)


@pytest.mark.parametrize("bad", [dict(t_min=600), dict(t_mb=400), dict(t_rt=-1), dict(h=0)])
def test_params_invariants(bad):
    with pytest.raises(InstanceError):
        Params(**bad).check()


def test_shanghai_like_volume():
    inst = instance_from_dict(shanghai_like_config())
    assert 3400 <= len(inst.tasks) <= 4200
    assert inst.n_days == 3 and len(inst.crew) == 680


def test_save_load_roundtrip(tmp_path):
    inst = instance_from_dict({"days": 2, "lines": [{"id": "L1", "run": 40, "headway": 90}],
                               "crew": {"n_r": 3, "seed": 1}, "perturb": {"seed": 2}})
    save_instance(inst, tmp_path / "x.json")
    back = load_instance(tmp_path / "x.json")
    assert back == inst
    assert instance_to_dict(back) == instance_to_dict(inst)


@settings(max_examples=60, deadline=None)
@given(run=st.integers(1, 120), head=st.integers(1, 90), s=st.integers(0, 500), w=st.integers(0, 600),
       days=st.integers(1, 3))
def test_regeneration_is_inverse_of_config(run, head, s, w, days):
    doc = {"days": days, "lines": [{"id": "L1", "run": run, "headway": head, "window": [s, s + w]}]}
    e = min(s + w, 1140 - run)
    if e < s:
        return
    doc["lines"][0]["window"] = [s, e]
    inst = instance_from_dict(doc)
    again = instance_from_dict(instance_to_dict(inst) | {"tasks": None})
    assert again.tasks == inst.tasks == tuple(generate_timetable(inst))
    assert all(k.penalty == 4 * k.duration for k in inst.tasks)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_perturbation_property(seed):
    ks = generate_tasks(Line("L1", ("A", "B"), 30, 17, (0, 1100)), 0, Params())
    for k0, k1 in zip(ks, perturb_timetable(ks, seed)):
        assert k1.dep_time < k1.arr_time
        assert abs(k1.dep_time - k0.dep_time) <= 1 and abs(k1.arr_time - k0.arr_time) <= 1
        assert replace(k1, dep_time=k0.dep_time, arr_time=k0.arr_time, penalty=k0.penalty) == k0


def test_instance_invariants():
    inst = instance_from_dict({"days": 1, "lines": [{"id": "L1", "run": 40, "headway": 60}], "crew": {"n_r": 1}})
    with pytest.raises(InstanceError):
        Instance(1, (0, 1140), inst.lines, (), inst.tasks, (replace(inst.crew[0], qualification=frozenset({"X"})),),
                 inst.params).validate()
    with pytest.raises(InstanceError):
        Instance(1, (0, 1140), inst.lines, (), (replace(inst.tasks[0], day=3),), (), inst.params).validate()
