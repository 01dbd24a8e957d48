from pathlib import Path

import pytest

from beswork.cli import load_basis, main

SAMPLES = Path(__file__).resolve().parent.parent / "samples"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_derive_aristotle(capsys):
    code, out, _ = run(capsys, "derive", "--base", SAMPLES / "aristotle.base", "--goal", "M(s)")
    assert code == 0 and out.startswith("DERIVABLE") and "H(s) => M(s)" in out


def test_derive_negative(capsys):
    code, out, _ = run(capsys, "derive", "--base", SAMPLES / "aristotle.base", "--goal", "M(t)")
    assert code == 1 and out.startswith("NOT DERIVABLE")


def test_check_proof_dne_under_I(capsys):
    code, out, _ = run(capsys, "check-proof", "--system", "I", SAMPLES / "dne.hproof")
    assert code == 1 and "not available in system I" in out
    code, out, _ = run(capsys, "check-proof", SAMPLES / "dne.hproof")
    assert code == 0 and out.startswith("ACCEPT")


def test_roundtrip_identity(capsys):
    code, out, _ = run(capsys, "roundtrip", "--variant", "K", "--goal", "p -> p")
    assert code == 0
    for section in ("FLATMAP", "BASE", "DERIVATION", "EXTRACTED-PROOF", "VERDICT"):
        assert f"== {section} ==" in out
    assert "PASS" in out


def test_roundtrip_from_proof(capsys):
    code, out, _ = run(capsys, "roundtrip", "--proof", SAMPLES / "identity.hproof")
    assert code == 0 and "route: simulate" in out


def test_roundtrip_dne_intuitionistic(capsys):
    code, out, _ = run(capsys, "roundtrip", "--variant", "J", "--goal", "~~p -> p")
    assert code == 1 and "search exhausted" in out


def test_simulate_and_extract(capsys):
    code, out, _ = run(capsys, "simulate", SAMPLES / "dne.hproof")
    assert code == 0 and "[DNE]" in out
    code, out, _ = run(capsys, "extract", "--proof", SAMPLES / "dne.hproof")
    assert code == 0 and out.startswith("system C")
    code, out, _ = run(capsys, "extract", "--variant", "J", "--goal", "p & q -> p",
                       "--context", "")
    assert code in (0, 1)


def test_support(capsys):
    code, out, _ = run(capsys, "support", "--basis", SAMPLES / "small.basis", "--goal", "p -> q")
    assert code == 1 and out.startswith("NOT SUPPORTED")
    code, out, _ = run(capsys, "support", "--basis", SAMPLES / "small.basis",
                       "--goal", "q", "--context", "p")
    assert code == 1
    code, out, _ = run(capsys, "support", "--basis", SAMPLES / "small.basis",
                       "--goal", "p -> q -> p")
    assert code == 0


def test_basis_file(tmp_path):
    (tmp_path / "a.base").write_text("p => q\n")
    f = tmp_path / "b.basis"
    f.write_text("base a.base\nzero-complete over p, q\n")
    b = load_basis(str(f))
    assert len(b) == 4 and b.is_zero_complete()
    f.write_text("pool => p\npool => q\npowerset-of-pool\n")
    assert len(load_basis(str(f))) == 4


def test_parse(capsys):
    code, out, _ = run(capsys, "parse", "--formula", "~P(c)")
    assert code == 0 and out.strip() == "~P(c)"


@pytest.mark.parametrize("argv", [
    ["parse", "--formula", "p ->"],
    ["check-proof", "missing.hproof"],
    ["props", "--atoms", "9"],
    ["derive", "--base"],
    ["nonsense"],
])
def test_input_errors(capsys, argv):
    code, _, _ = run(capsys, *argv)
    assert code == 2


def test_props_is_deterministic(capsys, tmp_path):
    a = run(capsys, "props", "--seed", "7", "--samples", "2")
    b = run(capsys, "props", "--seed", "7", "--samples", "2", "--figures", tmp_path)
    assert a[1] == b[1].split("wrote")[0] and a[1].startswith("seed 7")
    assert sorted(p.name for p in tmp_path.iterdir()) == ["base_sizes.png", "clauses.png",
                                                        "monotonicity.png"]
