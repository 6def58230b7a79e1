import json

import pytest

from pbbmoea import export
from pbbmoea.cli import main
from pbbmoea.problems import builtin

DETERMINISTIC = ("archive.csv", "boxes.json", "lower_bounds.json", "history.jsonl")


def run(*argv):
    return main([str(a) for a in argv])


def test_solve_writes_five_files(tmp_path, capsys):
    out = tmp_path / "r1"
    assert run("solve", "--problem", "t51", "--algo", "pbb-moead", "--seed", 7, "--max-iters", 4, "--out", out) == 0
    assert sorted(p.name for p in out.iterdir()) == sorted(export.OUTPUT_FILES)
    assert "pbb-moead on t51" in capsys.readouterr().out
    man = json.loads((out / "manifest.json").read_text())
    assert man["config"]["seed"] == 7 and man["algo"] == "pbb-moead"
    assert {"started", "finished", "wall_ms", "threads", "outputs"} <= set(man["run"])


def test_output_schemas(tmp_path):
    out = tmp_path / "r"
    assert run("solve", "--problem", "t52", "--max-iters", 3, "--out", out) == 0
    assert (out / "archive.csv").read_text().splitlines()[0] == "f1,f2,x1,x2,x3,box_id"
    first = json.loads((out / "history.jsonl").read_text().splitlines()[0])
    assert list(first) == sorted(
        ["k", "bnv", "archive_size", "gap", "repair", "elites_upper", "elites_lower", "improved", "discarded"]
    )
    boxes = json.loads((out / "boxes.json").read_text())
    assert set(boxes) == {"k", "bnv", "boxes"} and boxes["bnv"] == len(boxes["boxes"])
    assert set(boxes["boxes"][0]) == {"id", "lo", "hi", "flag"}
    lbs = json.loads((out / "lower_bounds.json").read_text())
    assert set(lbs["lower_bounds"][0]) == {"box_id", "improved", "points"}


def test_unknown_problem_exit_2(tmp_path, capsys):
    assert run("solve", "--problem", "nope", "--out", tmp_path) == 2
    err = capsys.readouterr().err
    assert "t51" in err and "zdt2" in err


@pytest.mark.parametrize(
    "argv",
    [
        ("solve", "--problem", "t51", "--eps", "0.5"),
        ("solve", "--problem", "t51", "--threads", "0"),
        ("solve", "--problem", "t51", "--n", "5"),
        ("solve", "--problem", "t51", "--max-iters", "2", "--repair-period", "3"),
        ("solve", "--problem", "t51", "--algo", "bogus"),
        ("solve",),
    ],
)
def test_bad_configuration_exit_2(argv, tmp_path):
    assert run(*argv, "--out", tmp_path) == 2


def test_problem_file_and_ini(tmp_path):
    pf = tmp_path / "p.txt"
    pf.write_text(builtin("linear").to_text())
    ini = tmp_path / "c.ini"
    ini.write_text("[minimoea]\nvariant = nsga2\npopulation = 8\nseed = 3\n")
    out = tmp_path / "r"
    assert run("solve", "--problem-file", pf, "--config", ini, "--max-iters", 3, "--out", out) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["minimoea"]["population"] == 8 and man["config"]["seed"] == 3
    bad = tmp_path / "bad.txt"
    bad.write_text("[problem]\nname = x\nn = 1\n[objective 1]\nexpr = (+ x1\n")
    assert run("solve", "--problem-file", bad, "--out", tmp_path / "b") == 2
    ini.write_text("[minimoea]\ncolour = red\n")
    assert run("solve", "--problem", "t51", "--config", ini, "--out", tmp_path / "c") == 2


def test_manifest_replay_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("solve", "--problem", "t52", "--seed", 3, "--max-iters", 5, "--out", a) == 0
    assert run("solve", "--manifest", a / "manifest.json", "--threads", 3, "--out", b) == 0
    for name in DETERMINISTIC:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    ma, mb = (json.loads((d / "manifest.json").read_text()) for d in (a, b))
    ma.pop("run"), mb.pop("run")
    assert ma == mb


def test_manifest_digest_mismatch(tmp_path):
    a = tmp_path / "a"
    assert run("solve", "--problem", "t51", "--max-iters", 2, "--out", a) == 0
    man = json.loads((a / "manifest.json").read_text())
    man["problem"]["digest"] = "0" * 64
    (a / "manifest.json").write_text(json.dumps(man))
    assert run("solve", "--manifest", a / "manifest.json", "--out", tmp_path / "b") == 2


def test_basic_bb_zdt2_bnv_nondecreasing(tmp_path):
    out = tmp_path / "z"
    assert run("solve", "--problem", "zdt2", "--n", 10, "--algo", "basic-bb", "--max-iters", 12, "--out", out) == 0
    bnv = [json.loads(line)["bnv"] for line in (out / "history.jsonl").read_text().splitlines()]
    assert len(bnv) == 12
    assert all(b >= a for a, b in zip(bnv, bnv[1:]))


def test_compare(tmp_path, capsys):
    out = tmp_path / "cmp"
    assert run("compare", "--problem", "t52", "--algos", "pbb-moead", "basic-bb", "--max-iters", 9, "--out", out) == 0
    bnv = (out / "bnv_curves.csv").read_text().splitlines()
    assert bnv[0] == "k,algo,bnv" and len(bnv) == 1 + 18
    assert (out / "gap_curves.csv").read_text().splitlines()[0] == "k,algo,gap"
    final = {row.split(",")[1]: int(row.split(",")[2]) for row in bnv[1:] if row.startswith("9,")}
    assert final["pbb-moead"] <= final["basic-bb"]
    assert (out / "pbb-moead" / "archive.csv").exists()
    table = capsys.readouterr().out
    assert "feasible" in table and "basic-bb" in table


def test_compare_needs_two_algos(tmp_path):
    assert run("compare", "--problem", "t52", "--algos", "basic-bb", "--out", tmp_path) == 2


def test_list_problems(capsys):
    assert run("list-problems") == 0
    text = capsys.readouterr().out
    for name in ("t51", "t52", "zdt2", "t54", "t55", "t56"):
        assert name in text
    assert run("list-problems", "--json") == 0
    rows = json.loads(capsys.readouterr().out)
    t56 = next(r for r in rows if r["name"] == "t56")
    assert (t56["n"], t56["m"], t56["constraints"]) == (2, 2, 2)


def test_curves_csv_golden():
    text = export.curves_csv([(1, "basic-bb", 2), (2, "basic-bb", 4)], "bnv")
    assert text == "k,algo,bnv\n1,basic-bb,2\n2,basic-bb,4\n"
    assert export.curves_csv([(1, "x", float("inf"))], "gap") == "k,algo,gap\n1,x,\n"
