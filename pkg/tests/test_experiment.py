import csv
from dataclasses import replace

import numpy as np
import pytest

from tmonline.errors import ConfigurationError
from tmonline.experiment import (ExperimentError, hyperparam_search, preset, run_experiment,
                                 run_ordering, write_search_table)
from tmonline.manager import Event


def test_presets():
    assert preset("baseline").schedule.online_iterations == 0
    nc = preset("new_class")
    assert nc.schedule.filter_class == 0 and nc.initial_classes == (1, 2)
    assert [e.action for e in nc.schedule.events] == ["enable_class", "disable_class_filter"]
    f = preset("faults", online_learning=False)
    assert f.schedule.online_learning is False
    assert f.schedule.events[0].value == "even:0.2:stuck_at_0"
    with pytest.raises(ConfigurationError):
        preset("transfer")


def test_single_ordering_equals_its_history():
    spec = replace(preset("limited_data"), orderings=1)
    res = run_experiment(spec)
    h = run_ordering(spec, 0)
    assert len(res.histories) == 1 and res.histories[0].same_as(h)
    for name in ("offline", "validation", "online"):
        np.testing.assert_array_equal(res.curve(name), h.accuracy(name))


def test_partial_rerun_matches_full_sweep():
    spec = replace(preset("faults"), orderings=12)
    res = run_experiment(spec)
    assert run_ordering(spec, 9).same_as(res.histories[9])
    assert res.histories[9].ordering == (0, 2, 3, 4, 1)


def test_workers_do_not_change_results():
    spec = replace(preset("new_class"), orderings=6)
    a = run_experiment(spec)
    b = run_experiment(replace(spec, workers=2))
    assert all(x.same_as(y) for x, y in zip(a.histories, b.histories))


def test_mean_is_order_independent():
    res = run_experiment(replace(preset("limited_data"), orderings=10))
    rev = replace(res, histories=res.histories[::-1])
    for name in ("offline", "validation", "online"):
        np.testing.assert_allclose(res.curve(name), rev.curve(name), rtol=0, atol=1e-12)


def test_written_curves_equal_mean_of_raw_rows(tmp_path):
    spec = replace(preset("limited_data"), orderings=8, out_dir=str(tmp_path))
    run_experiment(spec)
    raw = {}
    with open(tmp_path / "runs.csv") as fh:
        for row in csv.DictReader(fh):
            raw.setdefault((int(row["checkpoint"]), row["set"]), []).append(
                1 - int(row["errors"]) / int(row["total"]))
    with open(tmp_path / "curves.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 17 * 3
    for row in rows:
        vals = raw[(int(row["checkpoint"]), row["set"])]
        assert int(row["runs"]) == len(vals) == 8
        assert abs(float(row["mean_accuracy"]) - np.mean(vals)) < 1e-6
    assert len(list((tmp_path / "orderings").glob("*.csv"))) == 8
    assert (tmp_path / "experiment.json").exists()


def test_rerun_is_byte_identical(tmp_path):
    for d in ("a", "b"):
        run_experiment(replace(preset("faults"), orderings=4, out_dir=str(tmp_path / d)))
    for name in ("curves.csv", "runs.csv",
                 "orderings/ordering_0003.csv", "orderings/ordering_0003.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_bad_ordering_wrapped_with_context():
    spec = replace(preset("limited_data"), orderings=1)
    spec.schedule.events = [Event(3, "set_active_clauses", 40)]
    with pytest.raises(ExperimentError, match="ordering 0"):
        run_experiment(spec)


def test_orderings_limit_validated():
    with pytest.raises(ConfigurationError):
        run_experiment(replace(preset("baseline"), orderings=121))


def test_search_single_point_and_determinism(tmp_path):
    spec = replace(preset("baseline"), orderings=4)
    rows = hyperparam_search(spec, [1.375], [15], [16])
    assert len(rows) == 1 and rows[0][:4] == [1, 16, 15, 1.375]
    twin = hyperparam_search(spec, [1.375, 1.375], [15], [16])
    assert twin[0][4:] == twin[1][4:] == rows[0][4:]
    write_search_table(rows, tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == \
        "rank,clauses,T,s,mean_offline,mean_validation,mean_online"


def test_search_ranking_order():
    spec = replace(preset("baseline"), orderings=6)
    rows = hyperparam_search(spec, [1.375, 4.0], [5, 15], [8, 16])
    vals = [r[5] for r in rows]
    assert vals == sorted(vals, reverse=True)
    assert [r[0] for r in rows] == list(range(1, 9))
    with pytest.raises(ConfigurationError):
        hyperparam_search(spec, [], [15], [16])


@pytest.mark.slow
def test_default_point_in_top_quartile_of_grid():
    """Grid of 3 values per axis bracketing the default 16 clauses, T=15, s=1.375."""
    spec = preset("baseline")
    rows = hyperparam_search(spec, [1.375, 2.0, 4.0], [5, 15, 25], [8, 16, 32])
    rank = next(r[0] for r in rows if r[1:4] == [16, 15, 1.375])
    assert rank <= len(rows) / 4, f"default point ranked {rank} of {len(rows)}"
