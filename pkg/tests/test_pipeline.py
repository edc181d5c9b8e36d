"""End-to-end pipeline behaviour on the bundled fixture data."""
from __future__ import annotations

import csv
import json
from importlib import resources
from pathlib import Path

import jsonschema
import pytest

from lockqual.ahp import DEFAULT_HIERARCHY
from lockqual.catalog import CatalogItem, DEFAULT_CATALOG, VariableCatalog
from lockqual.efa import FactorAssignment
from lockqual.pipeline import (
    GateThresholds,
    PipelineConfig,
    render_summary,
    run_pipeline,
    _cfa_from_structural,
    _label_factors,
    _synthesize_models,
)
from lockqual.sem import MeasurementModel

DATA = Path(__file__).resolve().parent.parent / "data"
SURVEY = str(DATA / "fixture_survey.csv")
JUDGMENTS = str(DATA / "fixture_judgments.csv")


@pytest.fixture(scope="module")
def full_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("bundle")
    cfg = PipelineConfig(survey_path=SURVEY, out_dir=str(out), judgments_path=JUDGMENTS)
    return run_pipeline(cfg)


def test_gate_thresholds_reject_out_of_domain_values():
    with pytest.raises(ValueError):
        GateThresholds(alpha=1.5)
    with pytest.raises(ValueError):
        GateThresholds(rmsea=-0.01)
    with pytest.raises(ValueError):
        GateThresholds(cmin_df=0.0)
    # the defaults themselves must be legal
    GateThresholds()


def test_every_section_populated_on_fixture(full_run):
    b = full_run.bundle
    for key in (
        "screening",
        "descriptives",
        "adequacy",
        "split",
        "efa",
        "cfa",
        "sem",
        "scoring",
        "entropy",
        "delay",
        "ahp",
        "bias",
        "probit",
        "gates",
        "meta",
    ):
        assert b[key] is not None, key
    assert full_run.gate_failures == ()
    assert b["warnings"] == []


def test_split_defaults_to_sixty_percent(full_run):
    sp = full_run.bundle["split"]
    assert sp["n_train"] == round(0.6 * full_run.bundle["screening"]["n_valid"])
    assert sp["n_train"] + sp["n_holdout"] == full_run.bundle["screening"]["n_valid"]


def test_factor_structure_matches_hierarchy_leaves(full_run):
    efa = full_run.bundle["efa"]
    labels = set(efa["assignment"]["factor_labels"].values())
    assert labels == set(DEFAULT_HIERARCHY.leaves)
    dropped = {row["item"] for row in efa["assignment"]["dropped"]}
    assert dropped == {4, 27, 28}
    retained = sorted(i for items in efa["assignment"]["factor_items"].values() for i in items)
    assert len(retained) == 29
    assert set(retained).isdisjoint(dropped)


def test_fit_sections_converged_and_gated(full_run):
    b = full_run.bundle
    assert b["cfa"]["converged"] and b["sem"]["converged"]
    assert b["cfa"]["fit_indices"]["cmin_df"] < 3.0
    assert b["sem"]["fit_indices"]["rmsea"] < 0.08
    validity = b["cfa"]["validity"]
    for name in validity["factors"]:
        assert validity["composite_reliability"][name] >= 0.7
        assert validity["ave"][name] >= 0.5
    names = [g["name"] for g in b["gates"]]
    assert "cronbach_alpha" in names and "kmo" in names and "bartlett_p" in names
    assert any(n.startswith("cfa_") for n in names)
    assert any(n.startswith("sem_") for n in names)
    assert "ahp_criteria_cr" in names
    assert all(g["passed"] for g in b["gates"])


def test_scoring_runs_on_the_holdout(full_run):
    b = full_run.bundle
    assert b["scoring"]["n_scored"] == b["split"]["n_holdout"]
    assert 0.0 < b["scoring"]["mean_error"] < 1.0
    assert 0.0 <= b["scoring"]["share_within_10pct"] <= 1.0
    weights = b["sem"]["score_weights"]["latent_weights"]
    assert set(weights) == set(DEFAULT_HIERARCHY.leaves)
    assert all(w > 0 for w in weights.values())


def test_entropy_and_delay_sections(full_run):
    ent = full_run.bundle["entropy"]
    assert set(ent["per_latent"]) == set(DEFAULT_HIERARCHY.leaves)
    for val in ent["per_item"].values():
        assert 0.0 <= val <= 1.0
    assert list(ent["ranking"])
    assert set(ent["bookends"]) == {"0", "33"}
    delay = full_run.bundle["delay"]
    assert [b_["label"] for b_ in delay["bands"]] == [
        "[0,2]",
        "(2,4]",
        "(4,8]",
        "(8,16]",
        ">16",
    ]
    assert sum(b_["n"] for b_ in delay["bands"]) == delay["n_with_delay"]
    # the time factor's items never enter the alternative reading
    time_items = full_run.bundle["efa"]["assignment"]["factor_items"]["time_convenience"]
    assert set(delay["alt_items"]).isdisjoint(time_items)


def test_supplier_side_and_bias(full_run):
    ahp = full_run.bundle["ahp"]
    assert ahp["n_respondents"] == 49
    assert ahp["n_included"] == 49
    assert ahp["n_inconsistent"] == 8
    gw = ahp["global_weights"]
    assert set(gw) == set(DEFAULT_HIERARCHY.leaves)
    assert abs(sum(gw.values()) - 1.0) < 1e-9
    bias = full_run.bundle["bias"]
    assert -1.0 <= bias["spearman"] <= 1.0
    assert {r["factor"] for r in bias["rows"]} == set(DEFAULT_HIERARCHY.leaves)
    for r in bias["rows"]:
        assert 1 <= r["ow_rank"] <= 6 and 1 <= r["sw_rank"] <= 6


def test_output_files_match_bundle_and_schema(full_run):
    paths = full_run.out_paths
    assert set(paths) == {"report", "summary", "scores", "questionnaire"}
    with open(paths["report"], "r", encoding="utf-8") as fh:
        on_disk = json.load(fh)
    assert on_disk == json.loads(json.dumps(full_run.bundle))
    schema = json.loads(
        resources.files("lockqual").joinpath("schemas/report.schema.json").read_text("utf-8")
    )
    jsonschema.validate(on_disk, schema)
    summary = Path(paths["summary"]).read_text("utf-8")
    assert summary == render_summary(full_run.bundle)
    assert "## Gates" in summary
    with open(paths["scores"], newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) - 1 == full_run.bundle["scoring"]["n_scored"]
    with open(paths["questionnaire"], newline="", encoding="utf-8") as fh:
        qrows = list(csv.reader(fh))
    assert len(qrows) - 1 == len(full_run.bundle["probit"]["survivors"])


def test_two_runs_agree_byte_for_byte(tmp_path):
    outs = []
    for sub in ("a", "b"):
        cfg = PipelineConfig(
            survey_path=SURVEY, out_dir=str(tmp_path / sub), judgments_path=JUDGMENTS
        )
        outs.append(run_pipeline(cfg).out_paths)
    docs = []
    for paths in outs:
        doc = json.loads(Path(paths["report"]).read_text("utf-8"))
        doc["meta"].pop("generated_at")
        docs.append(json.dumps(doc, sort_keys=True))
    assert docs[0] == docs[1]
    for key in ("summary", "scores", "questionnaire"):
        assert Path(outs[0][key]).read_bytes() == Path(outs[1][key]).read_bytes()


def test_run_without_judgments_skips_supplier_sections(tmp_path):
    cfg = PipelineConfig(survey_path=SURVEY, out_dir=str(tmp_path / "o"))
    res = run_pipeline(cfg)
    assert res.bundle["ahp"] is None
    assert res.bundle["bias"] is None
    assert any("supplier-side" in w for w in res.bundle["warnings"])
    assert not any(g["name"] == "ahp_criteria_cr" for g in res.bundle["gates"])
    # the customer side is unaffected
    assert res.bundle["scoring"] is not None
    assert res.gate_failures == ()


def test_constant_post_trip_rating_degrades_gracefully(tmp_path):
    rows = list(csv.reader(open(SURVEY, newline="", encoding="utf-8")))
    i33 = rows[0].index("q33")
    for r in rows[1:]:
        r[i33] = "4"
    path = tmp_path / "const.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh).writerows(rows)
    res = run_pipeline(PipelineConfig(survey_path=str(path), out_dir=str(tmp_path / "o")))
    # the singular structural fit is reported, not raised
    assert res.bundle["sem"] is None
    assert res.bundle["scoring"] is None
    assert any("structural fit failed" in w for w in res.bundle["warnings"])
    # a constant item spreads its mass evenly over respondents
    assert res.bundle["entropy"]["bookends"]["33"] == pytest.approx(1.0, abs=1e-12)
    assert res.bundle["cfa"] is not None


def test_too_few_respondents_is_an_error(tmp_path):
    rows = list(csv.reader(open(SURVEY, newline="", encoding="utf-8")))[:6]
    path = tmp_path / "tiny.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh).writerows(rows)
    with pytest.raises(ValueError, match="too few"):
        run_pipeline(PipelineConfig(survey_path=str(path), out_dir=str(tmp_path / "o")))


def test_user_model_without_paths_is_fit_as_measurement_only(tmp_path):
    model = MeasurementModel(
        ("safe_security", "comfortable_conditions"),
        {"safe_security": (1, 2, 3), "comfortable_conditions": (22, 23, 24)},
        (),
        (("safe_security", "comfortable_conditions"),),
    )
    mpath = tmp_path / "model.json"
    mpath.write_text(model.to_json() + "\n", encoding="utf-8")
    res = run_pipeline(
        PipelineConfig(survey_path=SURVEY, out_dir=str(tmp_path / "o"), model_path=str(mpath))
    )
    assert res.bundle["cfa"] is not None
    assert res.bundle["cfa"]["fit_indices"]["df"] == 8
    assert res.bundle["sem"] is None
    assert res.bundle["scoring"] is None


def _toy_catalog(hints):
    items = tuple(
        CatalogItem(index=i + 1, abbreviation=f"it{i + 1}", kind="satisfaction", latent_hint=h)
        for i, h in enumerate(hints)
    )
    return VariableCatalog(items)


def _assignment(factor_items):
    retained = tuple(sorted(i for items in factor_items.values() for i in items))
    factor_of = {i: j for j, items in factor_items.items() for i in items}
    return FactorAssignment(
        retained_items=retained,
        dropped_items=(),
        factor_of=factor_of,
        factor_items={j: tuple(items) for j, items in factor_items.items()},
        per_factor_alpha={},
        warnings=(),
    )


def test_factor_labels_use_majority_hint():
    cat = _toy_catalog(["a", "a", "b", "b", "b", "c"])
    labels = _label_factors(_assignment({0: (3, 4, 5, 1), 1: (2, 6)}), cat)
    assert labels[0] == "b"
    # ties go to the hint seen first among the factor's items
    assert labels[1] == "a"


def test_factor_labels_deduplicate_repeats():
    cat = _toy_catalog(["a", "a", "a", "a"])
    labels = _label_factors(_assignment({0: (1, 2), 1: (3, 4)}), cat)
    assert labels[0] == "a"
    assert labels[1] == "a_2"


def test_model_synthesis_drops_thin_factors():
    warnings: list[str] = []
    cfa, structural = _synthesize_models(
        _assignment({0: (1, 2, 3), 1: (4,), 2: (5, 6)}),
        {0: "x", 1: "y", 2: "z"},
        warnings,
    )
    assert any("'y'" in w for w in warnings)
    assert cfa.latents == ("x", "z")
    assert cfa.structural_paths == ()
    assert structural.latents == ("x", "z", "service_quality")
    assert structural.indicators["service_quality"] == (0, 33)
    assert set(structural.structural_paths) == {("x", "service_quality"), ("z", "service_quality")}


def test_model_synthesis_needs_two_usable_factors():
    warnings: list[str] = []
    cfa, structural = _synthesize_models(
        _assignment({0: (1, 2), 1: (3,)}), {0: "x", 1: "y"}, warnings
    )
    assert cfa is None and structural is None
    assert any("fewer than 2 usable factors" in w for w in warnings)


def test_measurement_part_of_a_structural_model():
    full = MeasurementModel(
        ("a", "b", "q"),
        {"a": (1, 2), "b": (3, 4), "q": (0, 33)},
        (("a", "q"), ("b", "q")),
        (("a", "b"),),
    )
    cfa = _cfa_from_structural(full)
    assert cfa.latents == ("a", "b")
    assert cfa.structural_paths == ()
    assert cfa.latent_covariances == (("a", "b"),)
    lone = MeasurementModel(("a", "q"), {"a": (1, 2, 3), "q": (0, 33)}, (("a", "q"),), ())
    assert _cfa_from_structural(lone) is None


def test_summary_is_rendered_from_the_bundle_alone(full_run):
    text = render_summary(full_run.bundle)
    for heading in (
        "## Reliability and sampling adequacy",
        "## Factor structure",
        "## Measurement model",
        "## Structural model",
        "## Holdout score validation",
        "## Response variability",
        "## Delay bands",
        "## Supplier-side weights",
        "## Weight comparison",
        "## Questionnaire reduction",
        "## Gates",
    ):
        assert heading in text
    assert render_summary(full_run.bundle) == text


def test_default_catalog_shape():
    assert len(DEFAULT_CATALOG) == 32
    assert DEFAULT_CATALOG.indices == tuple(range(1, 33))
