from __future__ import annotations

import csv

import numpy as np
import pytest

from minvariance.cli import EXIT_INFEASIBLE, EXIT_INPUT, EXIT_OK, EXIT_VERIFY_FAILED, main
from minvariance.core import information_loss
from minvariance.dynamic import PublicationSequence
from minvariance.files import (
    IngestError,
    ingest,
    read_assignment,
    read_publications,
    read_report,
    write_dataset,
    write_publications,
)
from minvariance.synth import adult_like
from test_dynamic import TABLE1, TABLE2, TABLE3


def write(path, text):
    path.write_text(text)
    return path


@pytest.fixture
def table3_file(tmp_path):
    return write(tmp_path / "t3.csv", "Id,AGE,S.V.\n1,18,HIV\n2,20,FLU\n3,19,ACNE\n4,21,COUCH\n")


def test_ingest_table_rows(table3_file):
    ds = ingest(table3_file, ["AGE"], "S.V.", id_column="Id")
    assert (ds.p, ds.d) == (4, 1)
    assert ds.color_names == ("HIV", "FLU", "ACNE", "COUCH")
    assert ds.ids == ("1", "2", "3", "4")


def test_ingest_errors(tmp_path, table3_file):
    with pytest.raises(IngestError, match="no data rows"):
        ingest(write(tmp_path / "h.csv", "AGE,S\n"), ["AGE"], "S")
    with pytest.raises(IngestError, match="empty file"):
        ingest(write(tmp_path / "e.csv", ""), ["AGE"], "S")
    with pytest.raises(IngestError, match="missing column 'WEIGHT'"):
        ingest(table3_file, ["WEIGHT"], "S.V.")
    bad = write(tmp_path / "b.csv", "AGE,S\n18,HIV\nold,FLU\n")
    with pytest.raises(IngestError, match=r"line 3, column 'AGE'"):
        ingest(bad, ["AGE"], "S")


def test_ingest_categorical_and_standardize(tmp_path):
    f = write(tmp_path / "c.csv", "sex,age,occ\nF,30,a\nM,40,b\nF,50,a\n")
    ds = ingest(f, ["sex", "age"], "occ", categorical=["sex"])
    np.testing.assert_array_equal(ds.X[:, 0], [0, 1, 0])
    assert ds.ids == ("1", "2", "3")
    z = ingest(f, ["sex", "age"], "occ", categorical=["sex"], standardize=True)
    np.testing.assert_allclose(z.X.mean(axis=0), 0.0, atol=1e-12)


def test_ingest_adult_like_schema(tmp_path):
    write_dataset(adult_like(3000, seed=0), tmp_path / "adult.csv", sensitive="occupation")
    ds = ingest(tmp_path / "adult.csv", ["age", "sex", "education-num"], "occupation", id_column="id")
    assert ds.d == 3
    assert len(ds.color_names) == 13


def test_synth_is_byte_identical(tmp_path):
    assert main(["synth", str(tmp_path / "a.csv"), "-p", "30", "-d", "3", "--colors", "4", "--seed", "7"]) == EXIT_OK
    assert main(["synth", str(tmp_path / "b.csv"), "-p", "30", "-d", "3", "--colors", "4", "--seed", "7"]) == EXIT_OK
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_anonymize_evaluate_round_trip(tmp_path, capsys):
    data = tmp_path / "d.csv"
    main(["synth", str(data), "-p", "40", "-d", "2", "--colors", "5", "--seed", "1"])
    args = ["--qi", "x1,x2", "--sensitive", "sensitive", "--id-column", "id"]
    code = main(
        ["anonymize", str(data), *args, "-m", "2", "-s", "2",
         "--assignment", str(tmp_path / "a.csv"), "--report", str(tmp_path / "r.csv")]
    )
    assert code == EXIT_OK
    rows = read_report(tmp_path / "r.csv")
    assert [r.stage for r in rows] == ["heuristic", "pre_swap", "colgen", "final_swap"]
    assert all(a.il >= b.il - 1e-9 for a, b in zip(rows, rows[1:]))
    with open(tmp_path / "r.csv") as fh:
        il_text = [r["il"] for r in csv.DictReader(fh)]
    assert all(len(t.split(".")[1]) == 2 for t in il_text)

    ds = ingest(data, ["x1", "x2"], "sensitive", id_column="id")
    K = read_assignment(tmp_path / "a.csv", ds)
    assert information_loss(K, ds) == pytest.approx(rows[-1].il, abs=1e-6)
    capsys.readouterr()
    assert main(["evaluate", str(data), *args, str(tmp_path / "a.csv")]) == EXIT_OK
    out = capsys.readouterr().out
    assert float(out.split("IL ")[1]) == pytest.approx(rows[-1].il, abs=1e-6)


def test_evaluate_extremes(tmp_path, table3_file, capsys):
    args = ["--qi", "AGE", "--sensitive", "S.V.", "--id-column", "Id"]
    single = write(tmp_path / "s.csv", "id,cluster\n1,a\n2,b\n3,c\n4,d\n")
    whole = write(tmp_path / "w.csv", "id,cluster\n1,a\n2,a\n3,a\n4,a\n")
    main(["evaluate", str(table3_file), *args, str(single)])
    assert float(capsys.readouterr().out.split("IL ")[1]) == 0.0
    main(["evaluate", str(table3_file), *args, str(whole)])
    assert float(capsys.readouterr().out.split("IL ")[1]) == pytest.approx(100.0)
    mismatch = write(tmp_path / "x.csv", "id,cluster\n1,a\n2,a\n3,a\n9,a\n")
    assert main(["evaluate", str(table3_file), *args, str(mismatch)]) == EXIT_INPUT


def test_anonymize_exit_codes(tmp_path):
    data = tmp_path / "one.csv"
    main(["synth", str(data), "-p", "10", "--colors", "1"])
    base = ["anonymize", str(data), "--qi", "x1,x2", "--sensitive", "sensitive"]
    assert main(base + ["-m", "2"]) == EXIT_INFEASIBLE
    assert main(base + ["-m", "1"]) == EXIT_INPUT
    assert main(["anonymize", str(tmp_path / "missing.csv"), "--qi", "x1", "--sensitive", "s", "-m", "2"]) == EXIT_INPUT


def test_oracle_command(tmp_path, capsys):
    f = write(tmp_path / "o.csv", "x,s\n0,a\n1,b\n10,a\n11,b\n")
    assert main(["oracle", str(f), "--qi", "x", "--sensitive", "s", "-m", "2"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "optimal SSE 1.0" in out and "1 2" in out and "3 4" in out
    assert main(["oracle", str(f), "--qi", "x", "--sensitive", "s", "-m", "2", "--cap", "3"]) == EXIT_INPUT


def test_publication_round_trip(tmp_path):
    seq = PublicationSequence([TABLE1, TABLE3])
    write_publications(seq, tmp_path / "seq.csv")
    back = read_publications([tmp_path / "seq.csv"])
    assert [[(Q.tuple_ids, Q.sensitive) for Q in p.classes] for p in back.publications] == [
        [(Q.tuple_ids, Q.sensitive) for Q in p.classes] for p in seq.publications
    ]


def test_publication_parse_errors(tmp_path):
    bad = write(tmp_path / "p.csv", "publication,class,tuple,sensitive,counterfeit\n1,1,1,HIV,yes\n")
    with pytest.raises(IngestError, match="line 2"):
        read_publications([bad])
    short = write(tmp_path / "q.csv", "publication,class,tuple,sensitive,counterfeit\n1,1,1,HIV\n")
    with pytest.raises(IngestError, match="line 2"):
        read_publications([short])


def test_verify_command(tmp_path, capsys):
    write_publications(PublicationSequence([TABLE1]), tmp_path / "t1.csv")
    write_publications(PublicationSequence([TABLE2]), tmp_path / "t2.csv", start=2)
    write_publications(PublicationSequence([TABLE3]), tmp_path / "t3.csv", start=2)
    assert main(["verify", str(tmp_path / "t1.csv"), str(tmp_path / "t3.csv"), "-m", "2"]) == EXIT_OK
    capsys.readouterr()
    assert main(["verify", str(tmp_path / "t1.csv"), str(tmp_path / "t2.csv"), "-m", "2"]) == EXIT_VERIFY_FAILED
    assert "tuple 1: signature {FLU, HIV}" in capsys.readouterr().out
    assert main(["verify", str(tmp_path / "t1.csv"), "-m", "2"]) == EXIT_OK


def test_republish_command(tmp_path, table3_file, capsys):
    write_publications(PublicationSequence([TABLE1]), tmp_path / "t1.csv")
    out = tmp_path / "t2.csv"
    code = main(
        ["republish", str(table3_file), "--qi", "AGE", "--sensitive", "S.V.", "--id-column", "Id",
         "--history", str(tmp_path / "t1.csv"), "-m", "2", "-o", str(out)]
    )
    assert code == EXIT_OK
    assert main(["verify", str(tmp_path / "t1.csv"), str(out), "-m", "2"]) == EXIT_OK
