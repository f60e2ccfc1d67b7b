import json
import os

import pytest

from heightcount import __version__
from heightcount.cli import (
    ConfigError,
    ExperimentConfig,
    InvariantViolation,
    ResultCache,
    ResultRecord,
    canonical_params,
    main,
    params_digest,
    run,
)


def make_config(tmp_path, subcommand, params, grid=(), **kw):
    return ExperimentConfig(
        subcommand=subcommand,
        parameters=dict(params),
        grid=list(grid),
        cache_path=str(tmp_path / "cache.jsonl"),
        **kw,
    )


# --------------------------------------------------------------------------
# digests and cache mechanics


def test_canonical_params_sorts_and_stringifies():
    from fractions import Fraction

    s = canonical_params("count", {"b": Fraction(1, 3), "a": [1, 2]})
    assert s.index('"a"') < s.index('"b"')
    assert "1/3" in s


def test_digest_ignores_param_order():
    d1 = params_digest("count", {"x": "1", "y": "2"})
    d2 = params_digest("count", {"y": "2", "x": "1"})
    assert d1 == d2
    assert d1 != params_digest("count", {"x": "1", "y": "3"})


def test_cache_insert_and_lookup(tmp_path):
    cache = ResultCache(str(tmp_path / "c.jsonl"), __version__)
    rec = ResultRecord("abc", {"v": 1}, "2026-01-01T00:00:00", __version__)
    cache.append(rec)
    got = cache.lookup("abc")
    assert got is not None and got.payload == {"v": 1}
    assert cache.lookup("missing") is None
    from heightcount.cli import cache_lookup

    assert cache_lookup(str(tmp_path / "c.jsonl"), "abc").payload == {"v": 1}
    assert cache_lookup(str(tmp_path / "c.jsonl"), "missing") is None


def test_cache_version_policy(tmp_path):
    path = str(tmp_path / "c.jsonl")
    stale = ResultRecord("abc", {"v": 1}, "2026-01-01T00:00:00", "0.0.0-old")
    ResultCache(path, "0.0.0-old").append(stale)
    assert ResultCache(path, __version__).lookup("abc") is None
    assert ResultCache(path, __version__, allow_stale=True).lookup("abc") is not None


def test_cache_skips_malformed_lines(tmp_path, capsys):
    path = str(tmp_path / "c.jsonl")
    with open(path, "w") as fh:
        fh.write("this is not json\n")
        fh.write('{"missing": "keys"}\n')
    cache = ResultCache(path, __version__)
    rec = ResultRecord("abc", {"v": 1}, "2026-01-01T00:00:00", __version__)
    cache.append(rec)
    assert cache.lookup("abc").payload == {"v": 1}
    assert cache.skipped_lines == 2
    assert "malformed cache line" in capsys.readouterr().err


# --------------------------------------------------------------------------
# run(): subcommands, caching, determinism


def test_invariants_payload(tmp_path):
    cfg = make_config(tmp_path, "invariants", {"type": "A3", "weight": "adjoint"})
    (rec,) = run(cfg)
    assert rec.payload["a"] == "5/1"
    assert rec.payload["b"] == 1
    assert rec.payload["delta_iota"] == [2]
    assert rec.payload["u"] == [3, 4, 3]
    assert rec.payload["saturated"] is True


def test_invariants_explicit_weight(tmp_path):
    cfg = make_config(tmp_path, "invariants", {"type": "A2", "weight": "1,1"})
    (rec,) = run(cfg)
    assert rec.payload["a"] == "3/1"


def test_count_is_cached_and_byte_identical(tmp_path):
    params = {"target": "pgl2-adjoint", "primes": "2"}
    cfg = make_config(tmp_path, "count", params, grid=[16, 64])
    first = run(cfg)
    second = run(make_config(tmp_path, "count", params, grid=[16, 64]))
    assert [r.line() for r in first] == [r.line() for r in second]
    # and the totals agree with a direct enumeration
    from heightcount.enumeration import count_pgl2_adjoint

    spec16, _ = count_pgl2_adjoint(16)
    assert first[0].payload["total"] == spec16.total


def test_count_payload_independent_of_threads(tmp_path):
    params = {"target": "pgl2-adjoint", "primes": "2,3"}
    os.makedirs(tmp_path / "a")
    os.makedirs(tmp_path / "b")
    r1 = run(make_config(tmp_path / "a", "count", params, grid=[64], threads=1))
    r2 = run(make_config(tmp_path / "b", "count", params, grid=[64], threads=2))
    assert r1[0].payload == r2[0].payload


def test_count_product_target(tmp_path):
    cfg = make_config(tmp_path, "count", {"target": "product-pgl2:1,2"}, grid=[64])
    (rec,) = run(cfg)
    from heightcount.enumeration import convolve_counts, count_pgl2_adjoint

    s, _ = count_pgl2_adjoint(64)
    assert rec.payload["total"] == convolve_counts(s, s, 1, 2, 64)


def test_count_projective_target(tmp_path):
    cfg = make_config(tmp_path, "count", {"target": "projective:1"}, grid=[10, 20])
    recs = run(cfg)
    assert [r.payload["total"] for r in recs] == [
        sum(c for h, c in __import__("heightcount").count_projective(1, t).counts.items())
        for t in (10, 20)
    ]


def test_cache_audit_detects_tampering(tmp_path):
    params = {"target": "pgl2-adjoint"}
    cfg = make_config(tmp_path, "count", params, grid=[16])
    (rec,) = run(cfg)
    # corrupt the cached record
    path = cfg.cache_path
    with open(path) as fh:
        obj = json.loads(fh.read())
    obj["payload"]["total"] += 1
    with open(path, "w") as fh:
        fh.write(json.dumps(obj) + "\n")
    audited = make_config(tmp_path, "count", params, grid=[16], audit_rate=1)
    with pytest.raises(InvariantViolation):
        run(audited)


def test_zeta_subcommand(tmp_path):
    cfg = make_config(tmp_path, "zeta", {"primes": "2,3", "at": "2"})
    (rec,) = run(cfg)
    f2 = rec.payload["factors"][0]
    assert f2["p"] == 2
    assert f2["value_at"]["2"] == "5/2"
    assert "1 - 2 t" in f2["rational_function"]


def test_fit_subcommand(tmp_path):
    cfg = make_config(
        tmp_path,
        "fit",
        {"target": "pgl2-adjoint", "count_grid": "16,32,64,128,256,512", "a": "2", "b": "1"},
    )
    (rec,) = run(cfg)
    assert 1.5 < rec.payload["a_hat"] < 2.5
    assert rec.payload["c_hat"] > 0


def test_mixing_probe_subcommand(tmp_path):
    cfg = make_config(
        tmp_path, "mixing-probe", {"prime": "2", "max_exponent": "6", "m": "4", "eps": "0.1"}
    )
    (rec,) = run(cfg)
    assert rec.payload["lower_sandwich_violations"] == 0
    assert rec.payload["c_eps"] >= 1.0


def test_equidist_subcommand(tmp_path):
    cfg = make_config(tmp_path, "equidist", {"primes": "2"}, grid=[256])
    (rec,) = run(cfg)
    freq = rec.payload["frequencies"]["2"]
    assert "0" in freq
    assert abs(freq["0"]["empirical"] - freq["0"]["model"]) < 0.2
    total = sum(v["empirical"] for v in freq.values())
    assert total == pytest.approx(1.0, abs=1e-9)


def test_run_rejects_bad_grid(tmp_path):
    with pytest.raises(ConfigError):
        make_config(tmp_path, "count", {"target": "pgl2-adjoint"}, grid=[64, 32])


def test_run_rejects_unknown_target(tmp_path):
    cfg = make_config(tmp_path, "count", {"target": "nonsense"}, grid=[16])
    with pytest.raises(ConfigError):
        run(cfg)


# --------------------------------------------------------------------------
# entry point / exit codes


def test_main_ok_and_json_output(tmp_path, capsys):
    code = main(
        [
            "--cache",
            str(tmp_path / "c.jsonl"),
            "--json",
            "invariants",
            "--type",
            "A3",
        ]
    )
    assert code == 0
    out = capsys.readouterr().out.strip()
    obj = json.loads(out)
    assert obj["payload"]["a"] == "5/1"


def test_main_table_output(tmp_path, capsys):
    code = main(["--cache", str(tmp_path / "c.jsonl"), "invariants", "--type", "A1xA1"])
    assert code == 0
    out = capsys.readouterr().out
    assert "a: 2/1" in out and "b: 2" in out


def test_main_invalid_config_exit_2(tmp_path, capsys):
    code = main(
        ["--cache", str(tmp_path / "c.jsonl"), "count", "--target", "bogus", "--grid", "16"]
    )
    assert code == 2


def test_main_bad_flag_exit_2():
    assert main(["count"]) == 2  # missing required --target/--grid


def test_main_resource_guard_exit_3(tmp_path):
    code = main(
        [
            "--cache",
            str(tmp_path / "c.jsonl"),
            "count",
            "--target",
            "projective:4",
            "--grid",
            "100000",
        ]
    )
    assert code == 3


def test_main_csv_output(tmp_path):
    csv_path = tmp_path / "spectrum.csv"
    code = main(
        [
            "--cache",
            str(tmp_path / "c.jsonl"),
            "--csv",
            str(csv_path),
            "count",
            "--target",
            "projective:1",
            "--grid",
            "12",
        ]
    )
    assert code == 0
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0] == "height,count"
    assert lines[1] == "1,4"


def test_main_config_file(tmp_path, capsys):
    cfg_file = tmp_path / "rs.cfg"
    cfg_file.write_text("cartan=[[2,-1],[-1,2]]\nfactors=[[1,2]]\ngalois=[[1],[2]]\n")
    code = main(
        [
            "--cache",
            str(tmp_path / "c.jsonl"),
            "--json",
            "--config",
            str(cfg_file),
            "invariants",
            "--weight",
            "1,1",
        ]
    )
    assert code == 0
    obj = json.loads(capsys.readouterr().out.strip())
    assert obj["payload"]["a"] == "3/1"
