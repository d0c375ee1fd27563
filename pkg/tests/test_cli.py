from __future__ import annotations

import io
import subprocess
import sys

import pytest

from basketio import bench, cli, container


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture(scope="module")
def corpus_file(tmp_path_factory):
    path = str(tmp_path_factory.mktemp("cli") / "raw.rcf")
    code, out, err = run("gen", "--kind", "tsmall", "--count", "300", "--seed", "3", "--out", path)
    assert code == 0, err
    return path


def test_codecs_lists_five():
    code, out, err = run("codecs")
    assert code == 0 and err == ""
    names = [line.split("\t")[1] for line in out.splitlines()]
    assert len(names) >= 5
    assert {"identity", "deflate", "lzma", "lz4", "lz4hc"} <= set(names)


def test_gen_output_and_determinism(tmp_file):
    a, b = tmp_file("a.rcf"), tmp_file("b.rcf")
    for p in (a, b):
        code, out, _ = run("gen", "--kind", "tfloat", "--count", "1000", "--seed", "1", "--out", p)
        assert code == 0
        assert out == "tfloat\t1000\t24000\n"
    assert open(a, "rb").read() == open(b, "rb").read()


def test_gen_all_needs_size(tmp_file):
    code, _, err = run("gen", "--kind", "all", "--out", tmp_file("x.rcf"))
    assert code == 1 and err.startswith("E_USAGE:")


def test_read_range_error(corpus_file):
    code, out, err = run("read", "--file", corpus_file, "--branch", "tsmall", "--index", "1000000000")
    assert code == 1
    assert out == ""
    assert err.startswith("E_RANGE:") and len(err.splitlines()) == 1


def test_read_index_and_stride(corpus_file):
    code, out, _ = run("read", "--file", corpus_file, "--branch", "tsmall", "--index", "5")
    assert code == 0
    idx, hexed = out.strip().split("\t")
    with container.open_reader(corpus_file) as r:
        assert bytes.fromhex(hexed) == r.read_event("tsmall", 5)
    code, out, _ = run("read", "--file", corpus_file, "--branch", "tsmall", "--stride", "100",
                       "--format", "len")
    assert out == "0\t4000\n100\t4000\n200\t4000\n"


def test_write_and_read_back(corpus_file, tmp_file):
    out_path = tmp_file("rac.rcf")
    code, out, err = run("write", "--in", corpus_file, "--out", out_path, "--codec", "deflate",
                         "--level", "6", "--rac", "--basket-size", "16k")
    assert code == 0, err
    name, events, baskets, raw, comp, ratio = out.strip().split("\t")
    assert (name, int(events), int(raw)) == ("tsmall", 300, 1_200_000)
    assert float(ratio) > 3
    with container.open_reader(out_path) as a, container.open_reader(corpus_file) as b:
        assert list(a.scan("tsmall", 37)) == list(b.scan("tsmall", 37))


def test_pack_unpack_identity(corpus_file, tmp_file):
    packed, back = tmp_file("p.bpk"), tmp_file("back.rcf")
    code, out, _ = run("pack", "--in", corpus_file, "--out", packed, "--block-size", "64k",
                       "--codec", "lz4")
    assert code == 0
    code, out, _ = run("unpack", "--in", packed, "--out", back)
    assert code == 0
    assert open(back, "rb").read() == open(corpus_file, "rb").read()
    code, _, err = run("unpack", "--in", packed, "--out", back, "--block-size", "4k")
    assert code == 1 and err.startswith("E_USAGE:")


def test_exit_codes(tmp_file):
    code, _, err = run("read", "--file", tmp_file("missing.rcf"), "--branch", "a", "--index", "0")
    assert code == 2 and err.startswith("E_IO:")
    bad = tmp_file("bad.rcf", b"NOPE" + bytes(40))
    code, _, err = run("read", "--file", bad, "--branch", "a", "--index", "0")
    assert code == 3 and err.startswith("E_CORRUPT:")
    code, _, err = run("pack", "--in", bad, "--out", tmp_file("o"), "--block-size", "5000")
    assert code == 1 and err.startswith("E_USAGE:")
    code, _, err = run("pack", "--in", bad, "--out", tmp_file("o"), "--codec", "zstd")
    assert code == 1


@pytest.mark.parametrize("argv", [["--bogus"], ["codecs", "--bogus"], ["read", "--file", "x"],
                                  ["bench", "nope"], []])
def test_usage_errors(argv):
    code, out, err = run(*argv)
    assert code == 1 and out == "" and err.startswith("E_USAGE:")


@pytest.mark.parametrize("sub", ["codecs", "gen", "write", "read", "pack", "unpack", "bench"])
def test_every_subcommand_has_help(sub, capsys):
    code = cli.run([sub, "--help"])
    assert code == 0
    assert "usage:" in capsys.readouterr().out


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "basketio", "codecs"], capture_output=True, text=True)
    assert res.returncode == 0 and "deflate" in res.stdout


def test_bench_codecs_ratio_columns_deterministic():
    argv = ["bench", "codecs", "--corpus-mib", "12", "--seed", "2", "--reps", "1",
            "--codecs", "identity,deflate-1,lz4"]
    runs = [bench.parse_csv(run(*argv)[1]) for _ in range(2)]
    key = lambda rep: [(r.codec, r.workload, r.compressed_size, r.ratio) for r in rep.rows]
    assert key(runs[0]) == key(runs[1])
    assert runs[0].one(codec="identity", workload="compress").ratio == 1.0


def test_bench_rac_tlarge_neutral():
    code, out, err = run("bench", "rac", "--corpus-mib", "24", "--seed", "7", "--format", "csv")
    assert code == 0, err
    rep = bench.parse_csv(out)
    assert rep.meta["seed"] == "7"
    plain = rep.one(config_id="rac/tlarge/plain", workload="size").ratio
    rac = rep.one(config_id="rac/tlarge/rac", workload="size").ratio
    assert abs(plain - rac) / plain <= 0.01
