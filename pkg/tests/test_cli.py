import json

import pytest

from jrepack.cli import main, read_config, settings_from_args, build_parser
from jrepack.datasets import progressive_sample
from jrepack import ConfigError


@pytest.fixture
def photo(tmp_path, medium_jpeg):
    p = tmp_path / "photo.jpg"
    p.write_bytes(medium_jpeg)
    return p


def test_compress_then_decompress_verify(photo, tmp_path, capsys):
    out = tmp_path / "photo.jrpk"
    assert main(["compress", str(photo), "-o", str(out)]) == 0
    err = capsys.readouterr().err
    assert f"original {photo.stat().st_size} bytes" in err
    assert "gain " in err and "%" in err
    gain = err.split("gain ")[1].split("%")[0]
    assert len(gain.split(".")[1]) == 2
    back = tmp_path / "back.jpg"
    assert main(["decompress", str(out), "-o", str(back), "--verify", str(photo)]) == 0
    assert back.read_bytes() == photo.read_bytes()


def test_default_output_names(photo):
    assert main(["compress", str(photo)]) == 0
    packed = photo.with_name("photo.jpg.jrpk")
    assert packed.exists()
    original = photo.read_bytes()
    photo.unlink()
    assert main(["decompress", str(packed)]) == 0
    assert photo.read_bytes() == original


def test_verify_mismatch_exit_4(photo, tmp_path, small_jpegs):
    out = tmp_path / "p.jrpk"
    main(["compress", str(photo), "-o", str(out)])
    other = tmp_path / "other.jpg"
    other.write_bytes(small_jpegs["grey"])
    assert main(["decompress", str(out), "-o", str(tmp_path / "x.jpg"), "--verify", str(other)]) == 4


def test_corrupt_container_exit_3(photo, tmp_path):
    out = tmp_path / "p.jrpk"
    main(["compress", str(photo), "-o", str(out)])
    out.write_bytes(out.read_bytes()[:200])
    assert main(["decompress", str(out), "-o", str(tmp_path / "x.jpg")]) == 3


def test_progressive_exit_2(tmp_path, capsys):
    p = tmp_path / "prog.jpg"
    p.write_bytes(progressive_sample())
    assert main(["compress", str(p)]) == 2
    assert "unsupported JPEG" in capsys.readouterr().err


def test_missing_input_exit_2(tmp_path):
    assert main(["compress", str(tmp_path / "nope.jpg")]) == 2
    assert main(["decompress", str(tmp_path / "nope.jrpk")]) == 2
    assert main(["analyze", str(tmp_path / "nope.jpg"), "--report", "corr"]) == 2


def test_force_flags_are_exclusive(photo):
    with pytest.raises(SystemExit) as e:
        main(["compress", str(photo), "--force-msac", "--force-rlrg"])
    assert e.value.code == 2


def test_bad_parameters_exit_2(photo, capsys):
    assert main(["compress", str(photo), "--alpha", "1.5"]) == 2
    assert main(["compress", str(photo), "--A", "0.2"]) == 2  # B = 0.6 > A
    assert main(["compress", str(photo), "--threshold", "2"]) == 2


def test_config_file(tmp_path, photo):
    cfg = tmp_path / "settings.cfg"
    cfg.write_text("# tuned\nalpha = 0.3\nsort = off\nforce-msac = yes\nthreshold=0.5\n")
    got = read_config(cfg)
    assert got == {"alpha": 0.3, "sort": False, "force_msac": True, "threshold": 0.5}
    args = build_parser().parse_args(["compress", str(photo), "--config", str(cfg), "--alpha", "0.2"])
    s = settings_from_args(args)
    assert s["params"].alpha == 0.2  # command line wins
    assert s["coder"] == "msac" and s["sort"] is False and s["threshold"] == 0.5


@pytest.mark.parametrize("text", ["alpha 0.3\n", "colour = red\n", "sort = maybe\n", "alpha = x\n"])
def test_bad_config(tmp_path, text):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(text)
    with pytest.raises(ConfigError):
        read_config(cfg)


def test_analyze_corr(photo, tmp_path):
    out = tmp_path / "corr.csv"
    assert main(["analyze", str(photo), "--report", "corr", "--boot", "3", "-o", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 2016 + 1


@pytest.mark.parametrize("report", ["std", "zeros", "overlay"])
def test_analyze_reports(photo, tmp_path, report):
    out = tmp_path / f"{report}.csv"
    assert main(["analyze", str(photo), "--report", report, "-o", str(out)]) == 0
    assert out.read_text().count("\n") > 10


def test_analyze_several_inputs(photo, tmp_path, small_jpegs):
    other = tmp_path / "grey.jpg"
    other.write_bytes(small_jpegs["grey"])
    outdir = tmp_path / "reports"
    assert main(["analyze", str(photo), str(other), "--report", "std", "-o", str(outdir)]) == 0
    assert sorted(p.name for p in outdir.iterdir()) == ["grey.std.csv", "photo.std.csv"]


def test_analyze_process(tmp_path):
    out = tmp_path / "proc.csv"
    argv = ["analyze", "--report", "process", "--alpha", "0.5", "--trials", "10000", "-o", str(out)]
    assert main(argv) == 0
    first = out.read_text()
    assert first.splitlines()[0].startswith("k,emp_mean")
    assert main(argv) == 0
    assert out.read_text() == first


def test_bench(tmp_path, medium_jpeg, small_jpegs, capsys):
    d = tmp_path / "set"
    d.mkdir()
    (d / "b.jpg").write_bytes(medium_jpeg)
    (d / "a.jpg").write_bytes(small_jpegs["rgb-420"])
    (d / "c.jpg").write_bytes(progressive_sample())
    (d / "notes.txt").write_text("ignored")
    js = tmp_path / "bench.json"
    assert main(["bench", str(d), "--json", str(js)]) == 0
    table = capsys.readouterr().out
    rows = table.splitlines()
    assert rows[0].split()[:2] == ["image", "name"]
    assert [r.split()[0] for r in rows[1:]] == ["a", "b", "c", "average"]
    assert "ERROR" in rows[3]
    doc = json.loads(js.read_text())
    assert [f["name"] for f in doc["files"]] == ["a.jpg", "b.jpg", "c.jpg"]
    assert doc["files"][2]["error"].startswith("UnsupportedJpeg")
    assert all(f["roundtrip"] for f in doc["files"][:2])
    first = js.read_text()
    assert main(["bench", str(d), "--json", str(js)]) == 0
    assert js.read_text() == first


def test_bench_empty_dir(tmp_path):
    assert main(["bench", str(tmp_path)]) == 2


def test_tables_dump(tmp_path):
    out = tmp_path / "tables.bin"
    assert main(["tables", "--check", "-o", str(out)]) == 0
    assert out.read_bytes()[:4] == b"JRPT"
