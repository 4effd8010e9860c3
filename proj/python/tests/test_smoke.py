import math

import pytest

import _snipex


def test_taxonomy_shape():
    codes = _snipex.taxonomy()
    assert len(codes) == 58
    names = {c["name"] for c in codes}
    assert {"Success", "SyntaxError", "Timeout", "SpawnError"} <= names
    assert _snipex.taxonomy_version == "1.0"


def test_prepare_source():
    assert _snipex.prepare_source("x = 1 &lt; 2\r\n") == "x = 1 < 2\n"
    assert _snipex.prepare_source("    a = 1\n    b = 2") == "a = 1\nb = 2"


def test_classify_basics():
    assert _snipex.classify(0) == "Success"
    assert _snipex.classify(1, stderr_tail="NameError: name 'x'") == "NameError"
    assert _snipex.classify(1) == "ExitCodeException"
    assert _snipex.classify(None, timed_out=True) == "Timeout"
    assert _snipex.classify(None, spawn_error="enoent") == "SpawnError"


def test_extract_missing_module():
    line = "ModuleNotFoundError: No module named 'requests.api'"
    assert _snipex.extract_missing_module(line) == "requests"
    assert _snipex.extract_missing_module("ValueError: nope") is None


def test_run_source_roundtrip():
    out = _snipex.run_source("print(40 + 2)", ["python3", "{file}"], 10.0)
    assert out["status"] == "Success"
    assert out["stdout"].strip() == b"42"


def test_rates_arithmetic():
    r = _snipex.rates(55960, 13633, 5729, 194462)
    assert round(r["overall_rate"], 2) == 27.92
    assert round(r["both_rate"], 2) == 20.74
    assert round(r["first_not_second"], 2) == 19.59
    assert round(r["second_not_first"], 2) == 9.29


def test_ranksum_exact_case():
    p = _snipex.ranksum([1.0, 2.0, 3.0], [4.0, 5.0, 6.0])
    assert math.isclose(p, 0.1, abs_tol=1e-12)


def test_bootstrap_deterministic():
    a = [i % 3 == 0 for i in range(200)]
    b = [i % 2 == 0 for i in range(200)]
    r1 = _snipex.bootstrap_diff(a, b, iterations=2000, seed=9)
    r2 = _snipex.bootstrap_diff(a, b, iterations=2000, seed=9)
    assert r1 == r2
    assert r1["ci_low"] <= r1["mean_diff"] <= r1["ci_high"]


def test_top_imports():
    texts = ["import os, sys", "import os", "from os.path import join"]
    top = _snipex.top_imports(texts, 2)
    assert top[0] == ("os", 3)
    assert top[1] == ("sys", 1)
