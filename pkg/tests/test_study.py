import csv

import numpy as np
import pytest

from pglo.bench.study import Variant, macro_study, paired_wins

TEMPLATE = {"problem": "motivating", "n0": 10, "r": 2, "n_max": 4, "K": 2, "m": 6, "T": 120}


@pytest.fixture(scope="module")
def study(tmp_path_factory):
    out = tmp_path_factory.mktemp("study")
    res = macro_study(TEMPLATE, [0, 1, 2], ["pglo:q=1", "multpps_lhs:q=1"], out_dir=out)
    return res, out


class TestVariant:
    def test_parse_string(self):
        v = Variant.parse("pglo:q=4,alloc_fraction=0.5")
        assert v.overrides == {"algorithm": "pglo", "q": 4, "alloc_fraction": 0.5}

    def test_parse_dict(self):
        v = Variant.parse({"algorithm": "multpps_lhs", "q": 2})
        assert v.name == "multpps_lhs:q=2"


class TestStudy:
    def test_shapes(self, study):
        res, _ = study
        assert len(res.summary) == 2 and len(res.runs) == 6

    def test_outputs(self, study):
        _, out = study
        for name in ("study_summary.csv", "convergence_quantiles.csv", "runs.csv", "convergence.png"):
            assert (out / name).exists()
        assert len(list((out / "traces").glob("*.csv"))) == 6
        with (out / "study_summary.csv").open() as fh:
            assert len(list(csv.DictReader(fh))) == 2

    def test_censoring(self, study):
        res, _ = study
        for r in res.runs:
            assert r.censored == (not r.reached)
            if r.censored:
                assert r.evals_to_success == TEMPLATE["T"]

    def test_summary_matches_records(self, study):
        res, _ = study
        for row in res.summary:
            rs = res.rows_for(row["variant"])
            assert row["success_rate"] == pytest.approx(np.mean([r.success for r in rs]))
            assert row["median_evals_to_success"] == pytest.approx(np.median([r.evals_to_success for r in rs]))
            assert row["speedup_evals"] == pytest.approx(1.0)

    def test_quantiles_ordered(self, study):
        res, _ = study
        for row in res.quantiles:
            vals = [row[k] for k in ("q10", "q25", "q50", "q75", "q90")]
            if not np.isnan(vals[0]):
                assert vals == sorted(vals)

    def test_duplicate_variant_rows_identical(self):
        res = macro_study(TEMPLATE, [0, 1], ["pglo:q=1", {"name": "again", "algorithm": "pglo", "q": 1}])
        a, b = res.summary
        for key in ("success_rate", "mean_evals_to_success", "mean_final_true_f", "mean_modeled_ms_to_success"):
            assert a[key] == b[key]

    def test_pure_function_of_inputs(self, study):
        res, _ = study
        again = macro_study(TEMPLATE, [0, 1, 2], ["pglo:q=1", "multpps_lhs:q=1"])
        for x, y in zip(res.summary, again.summary):
            x, y = dict(x), dict(y)
            for k in ("mean_wall_seconds", "speedup_wall"):
                x.pop(k), y.pop(k)
            assert x == y

    def test_mismatched_budget(self):
        with pytest.raises(ValueError):
            macro_study(TEMPLATE, [0], ["pglo:q=1", "pglo:T=140"])

    def test_paired_wins(self, study):
        res, _ = study
        w = paired_wins(res, "pglo:q=1", "multpps_lhs:q=1")
        a = {r.seed: r.evals_to_success for r in res.rows_for("pglo:q=1")}
        b = {r.seed: r.evals_to_success for r in res.rows_for("multpps_lhs:q=1")}
        assert w == pytest.approx(np.mean([a[s] < b[s] for s in a]))
