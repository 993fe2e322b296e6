"""Smoke tests for the _ivl extension module."""

import os

import pytest

import _ivl


PERSON = """
class Person {
  String name;
  Person(String name) { this.name = name; }
  read method Bool invariant() { return !this.name.isEmpty(); }
  mut method Void setName(String name) { this.name := name; }
}
main {
  mut Person bob = new Person("bob");
  bob.setName("bobby");
  true;
}
"""


def test_check_accepts_person():
    res = _ivl.check(PERSON)
    assert res["ok"], res["diagnostics"]


def test_check_rejects_catch_broken():
    src = PERSON.replace(
        'bob.setName("bobby");',
        'try { bob.setName(""); } catch { }',
    )
    res = _ivl.check(src)
    assert not res["ok"]
    assert any(d["rule"] == "ses-mut-capture" for d in res["diagnostics"])


def test_run_counts_ctor_and_update():
    res = _ivl.run(PERSON, mode="paper")
    assert res["outcome"] == "value"
    assert res["total"] == 2
    assert res["per_site"] == {"ctor": 1, "field_update": 1}


def test_run_visible_state_modes():
    d = _ivl.run(PERSON, mode="d")
    eiffel = _ivl.run(PERSON, mode="eiffel")
    assert d["total"] == 3  # ctor + setName entry/exit
    assert eiffel["total"] == 3


def test_invariant_failure_is_an_error():
    src = PERSON.replace('setName("bobby")', 'setName("")')
    res = _ivl.run(src)
    assert res["outcome"] == "error"


def test_oracle_scan_clean():
    res = _ivl.oracle_scan(PERSON)
    assert res["violations"] == []


def test_family_counts():
    path = os.path.join(os.environ["IVL_CORPUS_DIR"], "family.ivl")
    res = _ivl.run_file(path, mode="paper")
    assert res["total"] == 4000
    res = _ivl.run_file(path, mode="d")
    assert res["total"] == 7995


def test_fuzz_deterministic():
    a = _ivl.fuzz(seed=7, n=3, budget=8)
    b = _ivl.fuzz(seed=7, n=3, budget=8)
    assert a == b
    assert len(a) == 3


def test_pretty_roundtrip():
    canon = _ivl.pretty(PERSON)
    assert _ivl.pretty(canon) == canon
