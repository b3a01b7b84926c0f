"""End-to-end adversarial scenarios at n=4: each scripted behavior must
produce classified failures, a correct elimination within the failure
budget, and no honest casualties (the engine raises on those)."""

import pytest

from conftest import attack_scenario
from slidenet.engine import run_scenario


def failures_before_elimination(report):
    """Failed transmissions between the first failure and each
    elimination, inclusive."""
    fail_ts = [t["T"] for t in report["transmissions"]
               if t["result"] in ("f2", "f3", "f4")]
    spans = []
    for e in report["eliminations"]:
        spans.append(len([T for T in fail_ts if T <= e["T"]]))
    return spans


class TestSingleAttacker:
    @pytest.mark.parametrize("behavior,expected_kinds", [
        ("deleter", {"F3-flow"}),
        ("liar", {"F3-flow"}),
        ("duplicator", {"F4-duplication", "F2-potential"}),
        ("replacer", {"F4-duplication"}),
        ("report-forger", {"pairwise-inconsistency", "malformed-report"}),
    ])
    def test_attacker_eliminated(self, behavior, expected_kinds):
        sc = attack_scenario(4, {2: behavior}, messages=1)
        report, eng = run_scenario(sc)
        results = [t["result"] for t in report["transmissions"]]
        assert len(report["delivered"]) == 1, results
        # every failed transmission carries exactly one recognized reason
        for t in report["transmissions"]:
            assert t["result"] in ("ok", "f2", "f3", "f4", "eliminated")
        elim = report["eliminations"]
        assert [e["node"] for e in elim] == [2]
        assert elim[0]["kind"] in expected_kinds
        assert all(span <= 4 for span in failures_before_elimination(report))

    def test_recovery_after_elimination(self):
        sc = attack_scenario(4, {2: "deleter"}, messages=2,
                             max_transmissions=12)
        report, eng = run_scenario(sc)
        assert [d["message"] for d in report["delivered"]] == [1, 2]
        results = [t["result"] for t in report["transmissions"]]
        assert results.count("ok") >= 2


@pytest.fixture(scope="module")
def ghost_outcome():
    sc = attack_scenario(5, {2: "deleter", 3: "ghost"}, messages=1,
                         checks="light", max_transmissions=14)
    return run_scenario(sc)


class TestGhost:
    def test_ghost_neutralized_not_eliminated(self, ghost_outcome):
        report, eng = ghost_outcome
        assert len(report["delivered"]) == 1
        # the deleter is identified; the ghost is only ever blacklisted
        assert [e["node"] for e in report["eliminations"]] == [2]
        blacklisted = set()
        for t in report["transmissions"]:
            blacklisted.update(t.get("blacklist_before", []))
        assert 3 in blacklisted
        assert 3 not in eng.auth[0].en

    def test_failed_transmissions_classified(self, ghost_outcome):
        report, _ = ghost_outcome
        for t in report["transmissions"]:
            if t["result"] not in ("ok", "eliminated"):
                assert t["result"] in ("f2", "f3", "f4")


class TestAdversarialTrace:
    def test_trace_audit_passes_for_honest_nodes(self, tmp_path):
        import json
        from slidenet.cli import main
        sc = attack_scenario(4, {2: "deleter"}, messages=1, checks="light")
        sc.trace = True
        path = tmp_path / "attack.json"
        path.write_text(json.dumps(sc.to_dict()))
        out = tmp_path / "out"
        assert main(["run", str(path), "--out", str(out), "--trace"]) == 0
        assert main(["audit", str(out / "trace.jsonl")]) == 0
