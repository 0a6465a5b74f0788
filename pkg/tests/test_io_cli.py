import json
import struct

import numpy as np
import pytest
from scipy.cluster.vq import kmeans2

from rangeagg.cli import main, run_record
from rangeagg.core import GlobalConfig
from rangeagg.datasets import generate, make_workload
from rangeagg.io import (DataError, ManifestError, build_bundle, load_dataset, load_index, parse_record, save_dataset,
                         save_index, write_workload)


@pytest.mark.parametrize("name", ["pts.txt", "pts.bin"])
def test_dataset_round_trip(tmp_path, name):
    x = np.random.default_rng(0).standard_normal((20, 3))
    save_dataset(tmp_path / name, x)
    assert np.array_equal(load_dataset(tmp_path / name).coords, x)


def test_binary_layout(tmp_path):
    x = np.arange(6.0).reshape(2, 3)
    save_dataset(tmp_path / "a.bin", x)
    raw = (tmp_path / "a.bin").read_bytes()
    assert struct.unpack("<ii", raw[:8]) == (2, 3) and len(raw) == 8 + 48
    (tmp_path / "b.bin").write_bytes(raw[:-8])
    with pytest.raises(DataError):
        load_dataset(tmp_path / "b.bin")


def test_generate_examples():
    a = generate(100, 4, "uniform-cube", 7)
    assert a.shape == (100, 4) and np.array_equal(a, generate(100, 4, "uniform-cube", 7))
    with pytest.raises(ValueError):
        generate(0, 4)
    x = generate(300, 4, "gaussian-clusters", 1, k=3, sigma=0.3)
    cent, lab = kmeans2(x, 3, seed=0, minit="++")
    spread = np.mean(np.linalg.norm(x - cent[lab], axis=1))
    gaps = [np.linalg.norm(cent[i] - cent[j]) for i in range(3) for j in range(i)]
    assert np.bincount(lab, minlength=3).min() > 0 and min(gaps) > 3 * spread
    r = np.linalg.norm(generate(10, 3, "planted-shells", 0), axis=1)
    assert np.allclose(np.sort(np.unique(r.round(9))), [1.0, 1.4])


def test_parse_record():
    rec = parse_record('{"kind": "aifp", "center": [0, 1], "radius": 2, "q": [1, 1], "seed": 4}', 2)
    assert rec.kind == "aifp" and rec.seed == 4 and parse_record(rec.to_json(), 2).radius == 2.0
    for bad in ('nope', '[1]', '{"kind": "x"}', '{"kind": "aifp", "center": [0], "radius": 1, "q": [0]}',
                '{"kind": "ameb", "center": [0, 0], "radius": -1}', '{"kind": "aifp", "center": [0, 0], "radius": 1}'):
        with pytest.raises(DataError):
            parse_record(bad, 2)


@pytest.fixture(scope="module")
def bundle():
    x = generate(150, 3, "gaussian-clusters", 2)
    return build_bundle(x, GlobalConfig(seed=5))


def test_manifest_round_trip(tmp_path, bundle):
    path = tmp_path / "idx.bin"
    save_index(path, bundle)
    loaded = load_index(path)
    assert loaded.points.fingerprint() == bundle.points.fingerprint()
    recs = make_workload(bundle.points, 12, 3, ("aifp", "ameb", "bd"))
    for i, r in enumerate(recs):
        a, b = run_record(bundle, r, i), run_record(loaded, r, i)
        assert a.probes == b.probes and a.to_json()["answer"] == b.to_json()["answer"]
    save_index(tmp_path / "again.bin", loaded)
    assert (tmp_path / "again.bin").read_bytes() == path.read_bytes()


def test_manifest_corruption_and_version(tmp_path, bundle):
    path = tmp_path / "idx.bin"
    save_index(path, bundle)
    raw = bytearray(path.read_bytes())
    raw[-5] ^= 0xFF
    (tmp_path / "bad.bin").write_bytes(bytes(raw))
    with pytest.raises(ManifestError, match="checksum"):
        load_index(tmp_path / "bad.bin")
    raw = bytearray(path.read_bytes())
    raw[8:12] = struct.pack("<I", 99)
    (tmp_path / "new.bin").write_bytes(bytes(raw))
    with pytest.raises(ManifestError, match="newer"):
        load_index(tmp_path / "new.bin")
    (tmp_path / "junk.bin").write_bytes(b"hello")
    with pytest.raises(ManifestError):
        load_index(tmp_path / "junk.bin")


def test_same_seed_same_manifest(tmp_path):
    x = generate(80, 2, "uniform-cube", 1)
    save_index(tmp_path / "a", build_bundle(x, GlobalConfig(seed=9)))
    save_index(tmp_path / "b", build_bundle(x, GlobalConfig(seed=9)))
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_pipeline(tmp_path, capsys):
    data, wl, idx = tmp_path / "d.txt", tmp_path / "w.jsonl", tmp_path / "i.bin"
    assert run_cli(capsys, "gen", "--n", 120, "--d", 3, "--distribution", "gaussian-clusters", "--seed", 1,
                   "--out", data)[0] == 0
    assert run_cli(capsys, "workload", data, "--count", 9, "--kinds", "aifp,ameb,bd", "--out", wl)[0] == 0
    code, out, _ = run_cli(capsys, "build", data, "--out", idx, "--seed", 3)
    assert code == 0 and json.loads(out)["n"] == 120
    with open(wl, "a") as fh:
        fh.write('{"kind": "aifp"}\n')
        fh.write('{"kind": "ameb", "center": [500, 500, 500], "radius": 1.0, "seed": 1}\n')
    code, out, _ = run_cli(capsys, "query", idx, wl)
    lines = [json.loads(l) for l in out.splitlines()]
    assert code == 0 and len(lines) == 11
    assert "error" in lines[9] and lines[10]["answer"] is None
    code, again, _ = run_cli(capsys, "query", idx, wl, "--threads", 3)
    strip = lambda rows: [{k: v for k, v in r.items() if k != "seconds"} for r in rows]
    assert strip(lines) == strip([json.loads(l) for l in again.splitlines()])
    code, out, _ = run_cli(capsys, "validate", idx, data, wl)
    rep = json.loads(out)
    assert code == 0 and rep["records"] == 10 and 0 <= rep["success_ci95"][0] <= rep["success_rate"]
    code, out, _ = run_cli(capsys, "validate", idx, data, wl, "--trials", 0)
    assert code == 0 and json.loads(out)["records"] == 0


def test_cli_errors(tmp_path, capsys):
    data, idx = tmp_path / "d.txt", tmp_path / "i.bin"
    assert run_cli(capsys, "gen", "--n", 0, "--d", 3, "--out", data)[0] == 1
    assert run_cli(capsys, "frobnicate")[0] == 1
    assert run_cli(capsys, "build", tmp_path / "missing.txt", "--out", idx)[0] == 2
    run_cli(capsys, "gen", "--n", 50, "--d", 2, "--out", data)
    code, _, err = run_cli(capsys, "build", data, "--out", idx, "--profile", "theory")
    assert code == 3 and "c=" in err
    run_cli(capsys, "build", data, "--out", idx)
    other = tmp_path / "o.txt"
    run_cli(capsys, "gen", "--n", 50, "--d", 2, "--seed", 1, "--out", other)
    wl = tmp_path / "w.jsonl"
    write_workload(wl, [])
    code, _, err = run_cli(capsys, "validate", idx, other, wl)
    assert code == 2 and "fingerprint" in err
    raw = bytearray(idx.read_bytes())
    raw[60] ^= 1
    idx.write_bytes(bytes(raw))
    code, _, err = run_cli(capsys, "query", idx, wl)
    assert code == 2 and "checksum" in err
