import filecmp
import os
import subprocess
import sys

import pytest

from metriclab.config import ConfigError, load_config, parse_derivation, substream
from metriclab.harness import main, run
from metriclab.metrics import clear_engines

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIGS = os.path.join(ROOT, "configs")

Z2_TEXT = """[experiment]
group = Z^2
seed = 5
radii = 2, 4, 6
elements = e1; e1 e2
delta_threshold = 2
witness_radius = 6
witness_n = 4

[metric std]
generators = standard

[metric diag]
generators = standard + d: e1 e2
"""


def write(tmp_path, text, name="exp.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


@pytest.fixture(autouse=True)
def fresh_engines():
    clear_engines()
    yield
    clear_engines()


def test_shipped_configs_load():
    names = sorted(os.listdir(CONFIGS))
    assert names
    for name in names:
        cfg = load_config(os.path.join(CONFIGS, name))
        assert cfg.pairs


def test_implicit_pair_from_first_two_metrics(tmp_path):
    cfg = load_config(write(tmp_path, Z2_TEXT))
    assert [(p.id, p.first, p.second) for p in cfg.pairs] == [("std-diag", "std", "diag")]


def test_non_increasing_radii_exit_two(tmp_path, capsys):
    path = write(tmp_path, Z2_TEXT.replace("radii = 2, 4, 6", "radii = 2, 6, 4"))
    assert run("compare", path, str(tmp_path / "out")) == 2
    err = capsys.readouterr().err
    assert "line 4" in err and "radii" in err


def test_missing_seed_exit_two(tmp_path, capsys):
    path = write(tmp_path, Z2_TEXT.replace("seed = 5\n", ""))
    assert run("ball", path, str(tmp_path / "out")) == 2
    assert "seed" in capsys.readouterr().err


def test_unknown_pair_metric_reports_line(tmp_path):
    path = write(tmp_path, Z2_TEXT + "\n[pair p]\nmetrics = std, nope\n")
    with pytest.raises(ConfigError) as info:
        load_config(path)
    assert str(info.value).startswith("line 17: [pair p] metrics")


@pytest.mark.parametrize("text", ["word", "additive(2)", "concave"])
def test_derivations_parse(text):
    assert parse_derivation(text) is not None


def test_bad_derivation_rejected(tmp_path):
    path = write(tmp_path, Z2_TEXT.replace("generators = standard\n\n[metric diag]",
                                           "generators = standard\nderivation = cubic\n\n[metric diag]"))
    assert run("ball", path, str(tmp_path / "out")) == 2


def test_substreams_are_named_and_reproducible():
    assert substream(1, "x").random() == substream(1, "x").random()
    assert substream(1, "x").random() != substream(1, "y").random()
    assert substream(1, "x").random() != substream(2, "x").random()


def test_witness_on_additive_config(tmp_path):
    out = tmp_path / "out"
    assert run("witness", os.path.join(CONFIGS, "f2_additive.ini"), str(out), quiet=True) == 0
    text = (out / "witness-f2add.txt").read_text()
    assert "verdict: NO_LARGE_DELTA" in text


def test_all_analysis_subcommands_write_outputs(tmp_path):
    path = write(tmp_path, Z2_TEXT)
    out = tmp_path / "out"
    for sub in ("ball", "spectrum", "compare", "hyperbolicity", "witness"):
        assert run(sub, path, str(out), quiet=True) == 0
    got = set(os.listdir(out))
    pid = load_config(path).pairs[0].id
    assert {"balls.csv", "delta-hat.csv", f"spectrum-{pid}.csv", f"delta-{pid}.csv",
            f"lemmas-{pid}.txt", f"fellow-{pid}.csv", f"witness-{pid}.txt"} <= got


def test_relhyp_subcommand(tmp_path):
    out = tmp_path / "out"
    assert run("relhyp", os.path.join(CONFIGS, "z2_free_z.ini"), str(out), quiet=True) == 0
    assert "relhyp-std-projection.csv" in os.listdir(out)


def test_relhyp_without_peripherals_is_a_config_error(tmp_path):
    assert run("relhyp", write(tmp_path, Z2_TEXT.replace("Z^2\n", "F(2)\n", 1)
                               .replace("e1; e1 e2", "a").replace("d: e1 e2", "c: a b")),
               str(tmp_path / "out"), quiet=True) == 2


def test_two_runs_are_byte_identical(tmp_path):
    path = write(tmp_path, Z2_TEXT)
    subs = ("ball", "compare", "hyperbolicity", "witness")

    def go(name, cache):
        clear_engines()
        out = tmp_path / name
        for sub in subs:
            assert run(sub, path, str(out), str(tmp_path / cache), quiet=True) == 0
        return str(out)

    first, second = go("run0", "cache0"), go("run1", "cache1")
    names = sorted(os.listdir(first))
    same, diff, err = filecmp.cmpfiles(first, second, names, shallow=False)
    assert not diff and not err and len(same) == len(names)
    # a warm cache changes only the audit reports
    warm = go("run2", "cache0")
    results = [n for n in names if not n.startswith("audit")]
    same, diff, err = filecmp.cmpfiles(first, warm, results, shallow=False)
    assert not diff and not err
    assert any(n.startswith("audit") for n in os.listdir(warm))


def test_corrupted_cache_exit_two(tmp_path):
    path = write(tmp_path, Z2_TEXT)
    cache = tmp_path / "cache"
    assert run("ball", path, str(tmp_path / "a"), str(cache), quiet=True) == 0
    for name in os.listdir(cache):
        f = cache / name
        rows = f.read_text().splitlines(keepends=True)
        # add 7 to every recorded distance so the audit must notice
        body = []
        for ln in rows:
            parts = ln.rstrip("\n").split("\t")
            if len(parts) == 3:
                parts[1] = f"{int(parts[1].split('/')[0]) + 7}/1"
                ln = "\t".join(parts) + "\n"
            body.append(ln)
        f.write_text("".join(body))
    clear_engines()
    assert run("ball", path, str(tmp_path / "b"), str(cache), quiet=True) == 2


def test_unknown_subcommand_exits_two(capsys):
    with pytest.raises(SystemExit) as info:
        main(["frobnicate", "--config", "x.ini"])
    assert info.value.code == 2


def test_missing_config_file_exit_two(tmp_path):
    assert run("ball", str(tmp_path / "absent.ini"), str(tmp_path / "out")) == 2


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "metriclab", "spectrum", "--config",
                           os.path.join(CONFIGS, "z_two_three.ini"), "--out", str(tmp_path), "-q"],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "spectrum-z23.csv").exists()
