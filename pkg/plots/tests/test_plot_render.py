import math

import pytest

from spotplots import (
    ContractError,
    FigureSpec,
    build_series,
    critical_threshold,
    is_loose,
    load_rows,
    make_figure,
    render,
)
from spotplots.cli import main


def test_load_rows(toy_csv):
    rows = load_rows(toy_csv)
    assert len(rows) == 18
    assert {r.policy for r in rows} == {"greedy", "ross-greedy"}


def test_missing_column_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("trace_id,policy,K\nt0,greedy,2.0\n")
    with pytest.raises(ContractError):
        load_rows(path)


def test_empty_file_rejected(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("# spotsched-results v1: x\n")
    with pytest.raises(ContractError):
        load_rows(path)


def test_regime_classification_is_per_row(toy_csv):
    rows = load_rows(toy_csv)
    for r in rows:
        assert is_loose(r) == (r.D >= critical_threshold(r.K) * r.L)
    # the D = 170 column splits by K: loose for K in {2, 4}, tight for K = 9
    split = {r.K: is_loose(r) for r in rows if r.D == 170}
    assert split == {2.0: True, 4.0: True, 9.0: False}


def test_series_values_match_csv_exactly(toy_csv):
    rows = load_rows(toy_csv)
    spec = FigureSpec(str(toy_csv), "savings_vs_deadline")
    series = build_series(rows, spec)
    assert set(series) == {"greedy", "ross-greedy"}
    by_key = {(r.policy, r.L / r.D, r.K): r.cost_savings_pct for r in rows}
    for policy, points in series.items():
        # three K values share each x; the series carries their mean
        for x, y in points:
            expected = [v for (p, xx, _), v in by_key.items()
                        if p == policy and xx == pytest.approx(x)]
            assert y == pytest.approx(sum(expected) / len(expected))
    # single-K filter: points must equal the raw CSV values, no averaging
    spec_k = FigureSpec(str(toy_csv), "overhead_vs_K", regime="loose")
    series_k = build_series(rows, spec_k)
    loose = [r for r in rows if is_loose(r)]
    for policy, points in series_k.items():
        for x, y in points:
            raw = [r.overhead_to_opt_pct for r in loose
                   if r.policy == policy and r.K == x]
            assert y == pytest.approx(sum(raw) / len(raw))


def test_figure_lines_carry_exact_values(toy_csv):
    spec = FigureSpec(str(toy_csv), "overhead_vs_K", regime="tight")
    fig, series = make_figure(spec)
    axes = fig.axes[0]
    assert len(axes.lines) == len(series) == 2
    for line, (policy, points) in zip(axes.lines, sorted(series.items())):
        data = line.get_xydata().tolist()
        assert data == [[x, y] for x, y in points]


def test_render_writes_image(toy_csv, tmp_path):
    out = tmp_path / "fig.png"
    spec = FigureSpec(str(toy_csv), "savings_vs_deadline", out_path=str(out))
    assert render(spec) == str(out)
    payload = out.read_bytes()
    assert payload[:8] == b"\x89PNG\r\n\x1a\n"
    assert len(payload) > 1000


def test_render_deterministic_shape(toy_csv, tmp_path):
    spec = FigureSpec(str(toy_csv), "overhead_vs_K", out_path=str(tmp_path / "a.png"))
    fig1, series1 = make_figure(spec)
    fig2, series2 = make_figure(spec)
    assert fig1.get_size_inches().tolist() == fig2.get_size_inches().tolist()
    assert series1 == series2
    assert [len(l.get_xdata()) for l in fig1.axes[0].lines] == \
           [len(l.get_xdata()) for l in fig2.axes[0].lines]


def test_empty_filter_is_an_error(toy_csv, tmp_path):
    rows = load_rows(toy_csv)
    spec = FigureSpec(str(toy_csv), "savings_vs_deadline", policies=("nope",))
    with pytest.raises(ContractError):
        build_series(rows, spec)


def test_all_loose_csv_with_tight_filter_errors(tmp_path):
    from toydata import HEADER, COLUMNS
    path = tmp_path / "loose.csv"
    path.write_text(HEADER + "\n" + COLUMNS + "\n"
                    + "t0,greedy,4.0,100,200,200.0,0.0,100,50.0,100.0,10,1\n")
    spec = FigureSpec(str(path), "overhead_vs_K", regime="tight",
                      out_path=str(tmp_path / "x.png"))
    with pytest.raises(ContractError):
        render(spec)


def test_cli_render_and_error_paths(toy_csv, tmp_path, capsys):
    out = tmp_path / "cli.png"
    rc = main(["render", "--csv", str(toy_csv), "--kind", "savings_vs_deadline",
               "--regime", "all", "--out", str(out)])
    assert rc == 0 and out.exists()
    rc = main(["render", "--csv", str(toy_csv), "--kind", "overhead_vs_K",
               "--regime", "tight", "--policy", "nope", "--out", str(tmp_path / "y.png")])
    assert rc == 1
    assert "error" in capsys.readouterr().err
