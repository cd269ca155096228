import json

import pytest

from fcnet.cli import main
from fcnet.netfile import dumps_net, load_net
from fcnet.net import validate

from conftest import NETS_DIR, non_fc_net, non_live_fcn

NET_A = str(NETS_DIR / "net_a.json")
NET_B = str(NETS_DIR / "net_b.json")


def run(capsys, *args):
    code = main([*args, "--json"])
    out = capsys.readouterr().out
    report = json.loads(out)
    assert (code == 0) == (report["status"] == "ok")
    return code, report


def write(tmp_path, name, net, **kw):
    path = tmp_path / name
    path.write_text(dumps_net(net, **kw))
    return str(path)


def test_classify(capsys, tmp_path):
    code, r = run(capsys, "classify", NET_A)
    assert code == 0 and r["t_net"] and r["live"] is True and r["bounded"] == 1
    code, r = run(capsys, "classify", NET_B)
    assert r["fcn"] and r["s_net"] and r["live"] and r["commoner_live"]
    bad = tmp_path / "bad.json"
    bad.write_text('{"places": []')
    code, r = run(capsys, "classify", str(bad))
    assert code == 2


def test_blocking(capsys, tmp_path):
    code, r = run(capsys, "blocking", NET_B, "c", "--oracle")
    assert code == 0 and r["blocking_marking"] == {"p1": 1} and r["witness"] == ["a"] and r["oracle"]["agree"]
    code, r = run(capsys, "blocking", NET_B, "a", "--cluster")
    assert code == 0 and r["enabled"] == ["a", "b"]
    code, r = run(capsys, "blocking", NET_B, "a")
    assert code == 1
    code, r = run(capsys, "blocking", write(tmp_path, "nl.json", non_live_fcn()), "b")
    assert code == 1 and r["hypothesis"] == "live"
    code, r = run(capsys, "blocking", NET_B, "zz")
    assert code == 2


def test_simulate(capsys, tmp_path):
    code, r = run(capsys, "simulate", NET_A, "--horizon", "30")
    assert code == 0 and r["rates"] == {"t1": 1 / 3, "t2": 1 / 3}
    csvs = []
    for k in range(2):
        path = tmp_path / f"{k}.csv"
        run(capsys, "simulate", NET_B, "--seed", "3", "--events", "500", "--csv", str(path))
        csvs.append(path.read_bytes())
    assert csvs[0] == csvs[1]
    code, r = run(capsys, "simulate", NET_B, "--seed", "1", "--horizon", "10000")
    assert abs(r["rates"]["a"] / r["rates"]["b"] - 3 / 7) / (3 / 7) < 0.03
    code, r = run(capsys, "simulate", NET_B, "--firings", "c:10")
    assert code == 0 and r["completed"]["c"] == 10
    no_timing = write(tmp_path, "nt.json", load_net(NET_B).net, routing=load_net(NET_B).routing)
    assert run(capsys, "simulate", no_timing, "--horizon", "5")[0] == 2
    assert run(capsys, "simulate", NET_A)[0] == 2


def test_throughput(capsys, tmp_path):
    code, r = run(capsys, "throughput", "--matrix", str(NETS_DIR / "example_matrix.csv"))
    assert code == 0
    assert [round(v, 4) for v in r["x"].values()] == [0.0351, 0.0526, 0.2105, 0.2105, 0.4912]
    code, r = run(capsys, "throughput", NET_B)
    assert r["x"] == pytest.approx({"a": 0.15, "b": 0.35, "c": 0.15, "d": 0.35})
    reducible = tmp_path / "red.csv"
    reducible.write_text("a,b\n1,0\n0.5,0.5\n")
    assert run(capsys, "throughput", "--matrix", str(reducible))[0] == 1
    code, r = run(capsys, "throughput", "--grid")
    assert code == 0 and r["parametric"]["ok"]
    code, r = run(capsys, "throughput", NET_B, "--validate-sim", "--horizon", "20000")
    assert code == 0 and r["max_rel_err"] < 0.03


def test_expand(capsys, tmp_path):
    out = tmp_path / "fc.json"
    code, r = run(capsys, "expand", NET_B, "--free-choice", "-o", str(out))
    assert code == 0 and r["fcn"]
    nf = load_net(out)
    assert nf.generated and validate(nf.net.places, nf.net.transitions, nf.net.arcs, nf.net.initial) == []
    out = tmp_path / "open.json"
    code, r = run(capsys, "expand", NET_A, "--open", "t1", "-o", str(out))
    assert code == 0
    net = load_net(out).net
    assert [t for t in net.enabled_transitions() if not t.startswith("__exp_I")] == []
    code, r = run(capsys, "expand", write(tmp_path, "nfc.json", non_fc_net()), "--efcn")
    assert code == 2


def test_tau(capsys):
    code, r = run(capsys, "tau", NET_B, "c", "--replications", "200", "--seed", "2")
    assert code == 0 and r["capouts"] == 0 and r["target"] == {"p1": 1}


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as e:
        main(["nonsense"])
    assert e.value.code == 2
    capsys.readouterr()


def test_human_output(capsys):
    assert main(["classify", NET_A]) == 0
    out = capsys.readouterr().out
    assert "t_net: True" in out


def test_cap_flag(capsys):
    code, r = run(capsys, "blocking", NET_B, "c", "--oracle", "--cap", "1")
    assert code == 2
