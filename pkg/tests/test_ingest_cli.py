import json
from importlib import resources

import numpy as np
import pytest

from multideseq import CountMatrix, ParseError, ValidationError
from multideseq.cli import main, parse_dispersion
from multideseq.ingest import (
    format_float,
    load_conditions,
    load_counts,
    load_dispersion_table,
    read_results,
    summarize_totals,
    write_table,
)

FIXTURE = resources.files("multideseq") / "data" / "totcount_fixture.tsv"


def write(path, text):
    path.write_text(text)
    return path


@pytest.fixture
def small_inputs(tmp_path):
    rng = np.random.default_rng(0)
    samples = [f"{c}{r}" for c in "ABC" for r in range(2)]
    lines = ["gene\t" + "\t".join(samples)]
    for i in range(25):
        base = rng.uniform(1, 60)
        row = rng.poisson(base * np.where((np.arange(6) >= 4) & (i < 5), 3.0, 1.0))
        lines.append(f"g{i}\t" + "\t".join(str(int(x)) for x in row))
    lines.append("zero\t" + "\t".join("0" for _ in samples))
    counts = write(tmp_path / "counts.tsv", "\n".join(lines) + "\n")
    conds = write(tmp_path / "conds.tsv", "".join(f"{s}\t{s[0]}\n" for s in samples))
    return counts, conds


# loaders


def test_load_counts_tsv_and_csv(tmp_path):
    a = load_counts(write(tmp_path / "c.tsv", "id\ts1\ts2\ng1\t1\t2\ng2\t0\t5\n"))
    b = load_counts(write(tmp_path / "c.csv", "id,s1,s2\ng1,1,2\ng2,0,5\n"))
    assert a.genes == b.genes == ("g1", "g2")
    assert a.samples == ("s1", "s2")
    np.testing.assert_array_equal(a.counts, b.counts)


@pytest.mark.parametrize("cell,word", [("x", "non-numeric"), ("1.5", "fractional"), ("-2", "negative")])
def test_load_counts_bad_cell_names_gene_and_sample(tmp_path, cell, word):
    with pytest.raises(ParseError, match=rf"{word}.*'g2'.*'s2'"):
        load_counts(write(tmp_path / "c.tsv", f"id\ts1\ts2\ng1\t1\t2\ng2\t0\t{cell}\n"))


def test_load_counts_integral_float_accepted(tmp_path):
    cm = load_counts(write(tmp_path / "c.tsv", "id\ts1\ts2\ng1\t1.0\t2e1\n"))
    assert cm.counts.tolist() == [[1, 20]]


def test_load_counts_empty_and_header_only(tmp_path):
    with pytest.raises(ParseError):
        load_counts(write(tmp_path / "e.tsv", ""))
    cm = load_counts(write(tmp_path / "h.tsv", "id\ts1\ts2\n"))
    assert cm.n_genes == 0 and cm.samples == ("s1", "s2")


def test_load_counts_duplicates_and_ragged(tmp_path):
    with pytest.raises(ValidationError):
        load_counts(write(tmp_path / "d.tsv", "id\ts1\ts2\ng1\t1\t2\ng1\t3\t4\n"))
    with pytest.raises(ParseError):
        load_counts(write(tmp_path / "r.tsv", "id\ts1\ts2\ng1\t1\n"))


def test_load_conditions(tmp_path):
    assert load_conditions(write(tmp_path / "c.tsv", "a\tX\nb\tY\n")) == {"a": "X", "b": "Y"}
    with pytest.raises(ValidationError):
        load_conditions(write(tmp_path / "d.tsv", "a\tX\na\tY\n"))


def test_load_dispersion_table(tmp_path):
    q, nu = load_dispersion_table(write(tmp_path / "d.tsv", "0\t0\n10\t5\n"))
    assert q == (0.0, 10.0) and nu == (0.0, 5.0)
    assert parse_dispersion(f"table:{tmp_path / 'd.tsv'}")(4.0) == pytest.approx(2.0)


def test_parse_dispersion_specs():
    assert parse_dispersion("poisson")(5.0) == 0.0
    assert parse_dispersion("constant_cv2:0.2")(10.0) == pytest.approx(20.0)
    assert parse_dispersion("power:0.5,1.5")(4.0) == pytest.approx(4.0)
    for bad in ("power:1", "gamma:1", "constant_cv2:x"):
        with pytest.raises(ValidationError):
            parse_dispersion(bad)


# summary


def test_summary_single_gene():
    assert summarize_totals(np.array([42])).as_tuple() == (42,) * 6


def test_summary_hand_computed():
    # type-7: h = (n - 1) p; n = 5 -> h = 1, 2, 3
    s = summarize_totals(np.array([10, 0, 7, 3, 100]))
    assert s.as_tuple() == (0, 3, 7, 24, 10, 100)
    s = summarize_totals(np.array([1, 2, 3, 4]))
    assert (s.q1, s.median, s.q3) == (1.75, 2.5, 3.25)


def test_summary_fixture():
    cm = load_counts(FIXTURE)
    assert cm.n_genes == 1758
    assert summarize_totals(cm).as_tuple() == (0, 17920, 53530, 193700, 161700, 23550000)


def test_summary_rejects_empty():
    with pytest.raises(ValidationError):
        summarize_totals(CountMatrix((), ("a",), np.zeros((0, 1), dtype=int)))


# results round trip


def test_format_float_round_trip():
    rng = np.random.default_rng(1)
    for x in np.concatenate([rng.uniform(size=200), 10.0 ** rng.uniform(-300, 0, size=200)]):
        assert float(format_float(x)) == x
    assert format_float(float("nan")) == "" and format_float(None) == ""


def test_results_round_trip(tmp_path, small_inputs):
    counts, conds = small_inputs
    out = tmp_path / "res.tsv"
    assert main(["test", "--counts", str(counts), "--conditions", str(conds), "--out", str(out),
                 "--cap", "300"]) == 0
    rows = read_results(out)
    assert len(rows) == 26
    again = tmp_path / "again.tsv"
    cols = out.read_text().splitlines()[0].split("\t")
    from multideseq.pipeline import _format_row

    write_table(again, cols, [_format_row(r) for r in rows])
    assert again.read_text() == out.read_text()


# CLI


def test_cli_test_outputs(tmp_path, small_inputs, capsys):
    counts, conds = small_inputs
    out = tmp_path / "res.tsv"
    assert main(["test", "--counts", str(counts), "--conditions", str(conds), "--out", str(out),
                 "--cap", "300"]) == 0
    err = capsys.readouterr().err
    assert "resolved config" in err and '"cap": 300' in err
    rows = {r["gene"]: r for r in read_results(out)}
    assert rows["zero"]["p_raw"] == 1.0 and not rows["zero"]["significant"]
    assert {r["method"] for r in rows.values()} == {"exact", "monte_carlo"}
    manifest = json.loads((tmp_path / "res.tsv.manifest.json").read_text())
    assert manifest["cap"] == 300 and manifest["n_genes"] == 26
    assert manifest["n_exact"] + manifest["n_monte_carlo"] == 26


def test_cli_pairwise(tmp_path, small_inputs):
    counts, conds = small_inputs
    out = tmp_path / "pw.tsv"
    assert main(["pairwise", "--counts", str(counts), "--conditions", str(conds), "--out", str(out)]) == 0
    header = out.read_text().splitlines()[0].split("\t")
    assert "p_adj[A vs C]" in header and "min_p_adj" in header


def test_cli_config_file(tmp_path, small_inputs):
    counts, conds = small_inputs
    cfg = write(tmp_path / "cfg.json", json.dumps({"counts_path": str(counts), "conditions_path": str(conds),
                                                   "output_path": str(tmp_path / "o.tsv"), "seed": 9}))
    assert main(["--config", str(cfg), "test"]) == 0
    assert json.loads((tmp_path / "o.tsv.manifest.json").read_text())["seed"] == 9


def test_cli_summary(capsys):
    assert main(["summary", "--counts", str(FIXTURE)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[-1].split("\t") == ["0", "17920", "53530", "193700", "161700", "23550000"]


def test_cli_bench(tmp_path, capsys):
    out = tmp_path / "b.csv"
    assert main(["bench", "--totals", "50", "100", "--methods", "exact", "mc_1000",
                 "--repetitions", "1", "--out", str(out)]) == 0
    assert "log-log slope" in capsys.readouterr().out
    assert out.read_text().startswith("total_count,m,method,rep,wall_time_s,ops_estimate")


def test_cli_simulate(tmp_path, capsys):
    out = tmp_path / "sim.csv"
    assert main(["simulate", "--n-genes", "40", "--n-de-genes", "5", "--n-replicates", "1",
                 "--mc-samples", "200", "--cap", "5000", "--out", str(out)]) == 0
    assert "true_difference" in capsys.readouterr().out
    assert out.read_text().startswith("replicate,seed")


def test_cli_simulate_defaults():
    from multideseq.cli import build_parser

    args = build_parser().parse_args(["simulate"])
    assert args.mc_samples == 5000 and args.cap == 200_000
    args = build_parser().parse_args(["test"])
    assert args.mc_samples == 1000


@pytest.mark.parametrize("argv", [
    [],
    ["nonsense"],
    ["test", "--counts", "/nonexistent.tsv", "--conditions", "/nonexistent.tsv"],
    ["test", "--dispersion", "gamma:1"],
    ["summary", "--counts", "/nonexistent.tsv"],
])
def test_cli_config_errors_exit_1(argv):
    assert main(argv) == 1


def test_cli_parse_error_exit_1(tmp_path):
    bad = write(tmp_path / "bad.tsv", "id\ts1\ng1\tx\n")
    assert main(["summary", "--counts", str(bad)]) == 1


def test_cli_runtime_error_exit_2(small_inputs, monkeypatch):
    import multideseq.pipeline as pipeline

    def boom(cfg):
        raise RuntimeError("worker crashed")

    monkeypatch.setattr(pipeline, "run_pipeline", boom)
    counts, conds = small_inputs
    assert main(["test", "--counts", str(counts), "--conditions", str(conds)]) == 2


def test_cli_unwritable_output_exit_1(tmp_path, small_inputs):
    counts, conds = small_inputs
    assert main(["test", "--counts", str(counts), "--conditions", str(conds), "--out",
                 str(tmp_path / "missing_dir" / "x.tsv")]) == 1
