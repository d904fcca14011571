import random
from fractions import Fraction

import pytest

from conicbundles.arith import BinaryForm
from conicbundles.bundle import BundleSurface, smoothness_check
from conicbundles.conic import TernaryQuadraticForm as TQF, sigma_p_oracle

from conftest import csv_body, run_cli
from surfaces import DATA, diagonal_surface

FERMAT = str(DATA / "fermat_residual.surf")
DP4 = str(DATA / "dp4.surf")


def manifest(text):
    return {line[2:].split(":", 1)[0]: line.split(":", 1)[1].strip()
            for line in text.splitlines() if line.startswith("# ") and ":" in line}


def write_surface(tmp_path, S, name="s.surf"):
    path = tmp_path / name
    path.write_text(S.to_text())
    return str(path)


# analyze

def test_analyze_fermat():
    rc, text, _ = run_cli("analyze", FERMAT)
    assert rc == 0
    lines = text.splitlines()
    assert "deg_delta: 5" in lines
    assert "smooth: true" in lines
    assert "complexity: 2" in lines
    assert "rho: 4" in lines
    assert "K2: 3" in lines
    fibres = [line for line in lines if line.startswith("fibre ")]
    assert len(fibres) == 4
    assert sum("split true" in f for f in fibres) == 2


def test_analyze_dp4():
    rc, text, _ = run_cli("analyze", DP4)
    assert rc == 0
    assert "complexity: 0" in text.splitlines()
    assert "minus_K: M" in text.splitlines()


def test_analyze_malformed_coefficient_count(tmp_path, capsys):
    bad = tmp_path / "bad.surf"
    bad.write_text(open(FERMAT).read().replace("f 2 2 : 1 0 0 1", "f 2 2 : 1 0 1"))
    rc, text, _ = run_cli("analyze", str(bad))
    assert rc == 2
    err = capsys.readouterr().err
    assert "needs 4" in err and "got 3" in err


def test_analyze_missing_file(capsys):
    rc, _, _ = run_cli("analyze", "/nonexistent/x.surf")
    assert rc == 2
    assert "cannot read" in capsys.readouterr().err


def test_analyze_non_squarefree_halts(tmp_path):
    # Delta = s * s * t up to a constant
    S = diagonal_surface((0, 0, 0), 1, [1, 0], [1, 0], [0, 1])
    rc, text, _ = run_cli("analyze", write_surface(tmp_path, S))
    assert rc == 0
    assert "smooth: false" in text
    assert "complexity" not in text


# count

def test_count_workers_byte_identical():
    args = ("count", DP4, "--B", "100", "1000", "--steps", "256", "--pmax", "20")
    rc1, t1, _ = run_cli(*args, "--workers", "1")
    rc2, t2, _ = run_cli(*args, "--workers", "2")
    assert rc1 == rc2 == 0
    assert csv_body(t1) == csv_body(t2)
    body = csv_body(t1)
    assert body[0] == "B,N,D,S,ref_N,ref_D,ratio_N,ratio_D"
    Ns = [int(r.split(",")[1]) for r in body[1:]]
    assert Ns == sorted(Ns) and Ns[0] > 0
    m = manifest(t1)
    for key in ("command", "input_sha256", "parameters", "versions", "wall_time_s",
                "workers", "primality"):
        assert key in m
    assert m["workers"] == "1"


def test_count_rejects_singular_surface(tmp_path):
    S = diagonal_surface((0, 0, 0), 1, [1, 0], [1, 0], [0, 1])
    rc, _, _ = run_cli("count", write_surface(tmp_path, S), "--B", "100")
    assert rc == 2


# densities

def test_densities_closed_matches_oracle():
    form = "3 2 -5 1 4 -2"
    rc, text, _ = run_cli("densities", form, "--p", "2", "3", "5", "7", "11")
    assert rc == 0
    body = csv_body(text)
    assert body[0] == "p,v_p,rank_mod_p,chi,closed,oracle,depth"
    Q = TQF.parse(form)
    for row in body[1:]:
        p, v, rank, chi, closed, oracle, depth = row.split(",")
        assert Fraction(oracle) == sigma_p_oracle(Q, int(p), int(depth))
        if p == "2":
            assert closed == "-" and rank == "-"
        else:
            assert Fraction(closed) == Fraction(oracle)


def test_densities_definite_form_still_reported():
    rc, text, _ = run_cli("densities", "1 0 1 0 0 1", "--p", "3", "5")
    assert rc == 0
    assert len(csv_body(text)) == 3


def test_densities_rejects_composite(capsys):
    rc, _, _ = run_cli("densities", "1 0 1 0 0 -1", "--p", "9")
    assert rc == 2
    assert "not a prime" in capsys.readouterr().err


def test_densities_bad_form():
    rc, _, _ = run_cli("densities", "1 0 1", "--p", "3")
    assert rc == 2


# detector

def test_detector_fermat():
    rc, text, _ = run_cli("detector", FERMAT, "--B", "64", "256", "--base", "1", "-3")
    assert rc == 0
    lines = text.splitlines()
    adm = next(i for i, line in enumerate(lines) if "admissible" in line)
    head = lines.index("B,points,D,ref_D,ratio_D")
    assert adm < head
    assert "not admissible" not in lines[adm]
    Ds = [Fraction(r.split(",")[2]) for r in lines[head + 1:]]
    assert len(Ds) == 2 and Ds[0] <= Ds[1]
    assert manifest(text)["parameters"].count("w=36") == 1


# dp

def test_dp_model():
    rc, text, _ = run_cli("dp", "model", "--degree", "3")
    assert rc == 0 and text.strip() == "(0,0,1) (1,2) M"


def test_dp_check(tmp_path):
    rc, text, _ = run_cli("dp", "check", "--degree", "4", DP4)
    assert rc == 0 and "verdict: yes" in text
    rng = random.Random(11)
    for _ in range(200):
        forms = [BinaryForm(2, tuple(rng.randint(-3, 3) for _ in range(3))) for _ in range(6)]
        forms[5] = BinaryForm.zero(2)
        S = BundleSurface((0, 0, 0), 2, tuple(forms))
        if smoothness_check(S):
            break
    else:
        pytest.fail("no smooth sample found")
    rc, text, _ = run_cli("dp", "check", "--degree", "2", write_surface(tmp_path, S))
    assert rc == 0 and "verdict: no" in text


def test_dp_check_needs_file():
    assert run_cli("dp", "check", "--degree", "4")[0] == 2


def test_dp_classify_degree5(classify_runs):
    rc, text, _ = classify_runs(5)
    assert rc == 0
    body = csv_body(text)
    assert body[0] == "class_id,order,invariant_rank,has_cb,min_complexity"
    assert body[-1] == "summary,19,11,4,11"
    assert manifest(text)["parameters"].endswith("consistency=pass")


def test_dp_classify_resource_guard(capsys):
    rc, _, _ = run_cli("dp", "classify", "--degree", "3")
    assert rc == 3
    assert "deep" in capsys.readouterr().err


def test_dp_classify_unsupported_degree():
    assert run_cli("dp", "classify", "--degree", "6")[0] == 2


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        run_cli("count")
    assert exc.value.code == 2
