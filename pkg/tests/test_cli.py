import json
from pathlib import Path

import pytest

from relbisim.cli import main

DATA = Path(__file__).resolve().parent.parent / "demos" / "data"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_oracle_on_finite_systems(capsys):
    code, out, _ = run(capsys, "oracle", "--systems", DATA / "lockstep.json", "--quad", "s1,s2,h1,h2")
    assert code == 0 and "true" in out
    code, out, _ = run(capsys, "oracle", "--systems", DATA / "lockstep.json", "--quad", "s1,s1,h1,h2")
    assert code == 1 and "diverges_at: 0" in out


def test_oracle_on_isa_quads(capsys):
    args = ["oracle", "--program", DATA / "swap.s", "--model", "ooo-seq", "--scheduler", DATA / "swap.sched",
            "--m1", "0,1,2,0", "--m2", "0,1,2,0", "--a1", "0,1", "--a2", "0,1"]
    assert run(capsys, *args)[0] == 0


def test_prove_lockstep_script(capsys, tmp_path):
    code, out, _ = run(capsys, "prove", DATA / "lockstep.proof", "--systems", DATA / "lockstep.json",
                       "--quad", "s1,s2,h1,h2")
    assert code == 0 and "accepted" in out
    bad = tmp_path / "bad.proof"
    bad.write_text("(hstep (cycle))")
    code, out, _ = run(capsys, "prove", bad, "--systems", DATA / "lockstep.json", "--quad", "s1,s2,h1,h2")
    assert code == 1 and "rejected" in out


def test_prove_invariant_script_on_isa_quad(capsys, tmp_path):
    out_json = tmp_path / "v.json"
    code, out, _ = run(capsys, "prove", DATA / "single_load_am.proof", "--program", DATA / "single_load.s",
                       "--predictor", "always-next", "--window", "2", "--mem-size", "4",
                       "--m1", "0,1,2,0", "--a1", "0,1", "--m2", "2,2,2,2", "--a2", "0,1",
                       "--json", out_json)
    assert code == 0, out
    assert json.loads(out_json.read_text())["accepted"] is True


def test_closure_commands(capsys, tmp_path):
    assert run(capsys, "closure", "--program", DATA / "gadget.s", "--predictor", "always-next",
               "--window", "1")[0] == 0
    rel = tmp_path / "r.rel"
    rel.write_text("# one quad\ns1 s2 h1 h2\n")
    code, out, _ = run(capsys, "closure", "--systems", DATA / "lockstep.json", "--invariant", rel)
    assert code == 0 and "accepted" in out
    rel.write_text("s1 s1 h1 h2\n")
    assert run(capsys, "closure", "--systems", DATA / "lockstep.json", "--invariant", rel)[0] == 1


def test_casestudy_single_program(capsys, tmp_path):
    out_json = tmp_path / "cs.json"
    code, out, _ = run(capsys, "casestudy", "--program", DATA / "swap.s", "--model", "ooo-seq",
                       "--json", out_json)
    assert code == 0 and "PASS" in out
    assert json.loads(out_json.read_text())["schema"] == "relbisim-report/1"


def test_gallery_and_fuzz(capsys):
    code, out, _ = run(capsys, "gallery")
    assert code == 0 and out.count("=> PASS") == 4
    assert run(capsys, "fuzz", "--trials", "20")[0] == 0
    assert run(capsys, "fuzz", "--trials", "100", "--mutated")[0] == 1


@pytest.mark.parametrize("argv", [
    ["oracle", "--systems", DATA / "lockstep.json"],
    ["oracle", "--systems", DATA / "lockstep.json", "--quad", "s1,s2,h1,nope"],
    ["oracle", "--program", DATA / "swap.s", "--m1", "0,1", "--a1", "0,1", "--m2", "0,1", "--a2", "0,1"],
    ["closure", "--program", DATA / "swap.s", "--model", "ooo-seq", "--scheduler", DATA / "gadget.s"],
    ["closure", "--program", DATA / "gadget.s", "--model", "ooo-seq", "--scheduler", DATA / "swap.sched"],
    ["casestudy", "--program", DATA / "swap.s", "--window", "0"],
    ["fuzz", "--trials", "0"],
    ["prove", DATA / "missing.proof", "--systems", DATA / "lockstep.json", "--quad", "s1,s2,h1,h2"],
    ["oracle", "--program", DATA / "lockstep.json", "--m1", "0,0,0,0", "--a1", "0,0", "--m2", "0,0,0,0", "--a2", "0,0"],
])
def test_usage_errors_exit_two(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and "relbisim:" in err


def test_module_entry_point():
    import subprocess, sys
    r = subprocess.run([sys.executable, "-m", "relbisim", "gallery", "lockstep-incomplete"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "PASS" in r.stdout
