import csv
import json
import math

import numpy as np
import pytest

from delmu.cli import main
from delmu.model import dump_topology

from helpers import chain3


@pytest.fixture
def instance_file(tmp_path):
    path = tmp_path / "inst.json"
    lo = np.full((4, 3), 10.0)
    hi = np.full((4, 3), 300.0)
    path.write_text(json.dumps({"min_rate": lo.tolist(), "max_demand": hi.tolist()}))
    return path


def last_line(capsys):
    return capsys.readouterr().out.strip().splitlines()[-1]


def test_capacity(capsys):
    assert main(["capacity", "--gains", "4", "1", "--pmax", "1", "--noise", "1"]) == 0
    assert float(last_line(capsys)) == pytest.approx(math.log2(4.5) + math.log2(1.125))


def test_solve_greedy(instance_file, capsys):
    main(["solve", "--solver", "greedy", "--topology", "2", "--instance", str(instance_file)])
    r = np.array([float(x) for x in last_line(capsys).split(",")])
    assert r.shape == (12,)
    assert np.all((r >= 10) & (r <= 300))


def test_solve_gs_with_seed(instance_file, capsys):
    args = ["--seed", "3", "solve", "--solver", "gs", "--topology", "1",
            "--instance", str(instance_file), "--starts", "2"]
    main(args)
    a = last_line(capsys)
    main(args)
    assert last_line(capsys) == a


def test_solve_brute_on_topology_file(tmp_path, capsys):
    topo = tmp_path / "t.json"
    topo.write_text(dump_topology(chain3()))
    inst = tmp_path / "i.json"
    inst.write_text(json.dumps({"min_rate": [[0], [0]], "max_demand": [[100], [100]]}))
    params = tmp_path / "p.json"
    params.write_text(json.dumps([{"kind": "linear", "alpha": 1.0, "beta": 0.0},
                                  {"kind": "linear", "alpha": 2.0, "beta": 0.0}]))
    main(["--params", str(params), "solve", "--solver", "brute", "--topology-file", str(topo),
          "--instance", str(inst), "--grid", "10"])
    # link (1,2) at 120 Mbps binds; the steeper slice takes its full demand
    assert [float(x) for x in last_line(capsys).split(",")] == [20.0, 100.0]


def test_delmu_needs_model(instance_file):
    with pytest.raises(SystemExit):
        main(["solve", "--solver", "delmu", "--topology", "1", "--instance", str(instance_file)])


def test_pipeline(tmp_path, capsys):
    data = tmp_path / "d.csv"
    model = tmp_path / "m.bin"
    out = tmp_path / "reports"
    main(["gen-data", "--topology", "3", "--count", "10", "--seed", "1", "--out", str(data),
          "--starts", "2"])
    assert "10 rows" in last_line(capsys)
    main(["train", "--data", str(data), "--model-out", str(model), "--epochs", "3"])
    assert model.exists()
    main(["--out", str(out), "eval", "--data", str(data), "--model", str(model)])
    text = capsys.readouterr().out
    assert "delmu" in text and "feasible 100%" in text
    with open(out / "utility_dist.csv") as fh:
        assert [r["solver"] for r in csv.DictReader(fh)] == ["gs", "greedy", "delmu"]
    main(["--out", str(out), "replay", "--model", str(model)])
    with open(out / "replay.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 4


def test_train_shared_model(tmp_path, capsys):
    files = []
    for k in (1, 4):
        files.append(str(tmp_path / f"t{k}.csv"))
        main(["gen-data", "--topology", str(k), "--count", "5", "--out", files[-1], "--starts", "2"])
    main(["train", "--data", *files, "--model-out", str(tmp_path / "m.bin"), "--epochs", "2"])
    assert "trained on 8 rows" in last_line(capsys)


def test_missing_subcommand():
    with pytest.raises(SystemExit):
        main([])


def test_topology_range():
    with pytest.raises(SystemExit):
        main(["gen-data", "--topology", "5", "--count", "1", "--out", "x.csv"])

