import csv
import io

import pytest

from fewstate import experiment as ex
from fewstate.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, main
from fewstate.generators import read_stream


def run_cli(capsys, *argv):
    rc = main(list(argv))
    out, err = capsys.readouterr()
    return rc, out, err


def test_run_writes_csv(capsys):
    rc, out, _ = run_cli(capsys, "run", "--algo", "mg", "--stream", "zipf:n=64,m=512",
                         "--trials", "2")
    assert rc == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 2
    assert list(rows[0]) == list(ex.COLUMNS)
    assert rows[0]["wall_ms"] == ""


def test_config_file_and_overrides(tmp_path, capsys):
    conf = tmp_path / "c.conf"
    conf.write_text("algo=ss\nstream=zipf:n=64,m=256\ntrials=3\n")
    out_path = tmp_path / "o.csv"
    rc, _, _ = run_cli(capsys, "run", "--config", str(conf), "--set", "trials=2",
                       "--out", str(out_path))
    assert rc == EXIT_OK
    rows = list(csv.DictReader(out_path.open()))
    assert len(rows) == 2 and rows[0]["algo"] == "ss"
    # flags beat --set
    rc, out, _ = run_cli(capsys, "run", "--config", str(conf), "--set", "algo=cm", "--algo", "mg")
    assert {r["algo"] for r in csv.DictReader(io.StringIO(out))} == {"mg"}


@pytest.mark.parametrize("argv", [
    ["run", "--set", "bogus=1"],
    ["run", "--set", "trials"],
    ["run", "--eps", "2"],
    ["run", "--stream", "martian:n=3"],
    ["run", "--algo", "nonsense"],
    ["sweep", "--vary", "n", "--values", "1,2"],
])
def test_config_errors_exit_2(capsys, argv):
    try:
        rc = main(argv)
    except SystemExit as exc:  # argparse usage errors
        rc = exc.code
    assert rc == EXIT_CONFIG


def test_io_errors_exit_3(tmp_path, capsys):
    rc, _, err = run_cli(capsys, "run", "--config", str(tmp_path / "nope.conf"))
    assert rc == EXIT_IO and "I/O" in err
    bad = tmp_path / "bad.txt"
    bad.write_text("n=4 m=3\n1\n")
    rc, _, _ = run_cli(capsys, "run", "--stream", str(bad))
    assert rc == EXIT_IO


def test_gen_then_run_file(tmp_path, capsys):
    path = tmp_path / "s.txt"
    assert main(["gen", "--stream", "zipf:n=32,m=200", "--out", str(path)]) == EXIT_OK
    assert len(read_stream(path)) == 200
    rc, out, _ = run_cli(capsys, "run", "--algo", "mg", "--stream", str(path))
    assert rc == EXIT_OK and ",200," in out


def test_sweep_and_compare(tmp_path, capsys):
    trials = tmp_path / "t.csv"
    rc, out, _ = run_cli(capsys, "sweep", "--algo", "mg", "--stream", "permutation:n=8",
                         "--vary", "n", "--values", "128,256,512,1024",
                         "--trials-out", str(trials))
    assert rc == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["value"] for r in rows] == ["128", "256", "512", "1024"]
    assert abs(float(rows[0]["slope"]) - 1) < 0.01
    assert len(list(csv.DictReader(trials.open()))) == 4
    rc, out, _ = run_cli(capsys, "compare", "--algos", "mg,ss", "--stream", "zipf:n=32,m=128")
    assert rc == EXIT_OK
    assert [r["algo"] for r in csv.DictReader(io.StringIO(out))] == ["mg", "ss"]
