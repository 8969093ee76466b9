import csv
import io
import json
import os

import numpy as np
import pytest

from bed.cli import main
from bed.datasets import OOD_LABEL, read_normalized, write_normalized
from bed.harness import (ALL_DETECTORS, BI_ENCODER_DETECTORS,
                         BI_ENCODER_EXTRACTOR, CSV_COLUMNS,
                         ConfigurationError, DIRECT_DETECTORS,
                         ExperimentConfig, FROZEN_EXTRACTORS, NO_EXTRACTOR,
                         ResultRow, load_split_embeddings, resolve_dataset,
                         rows_to_csv, rows_to_markdown, run_cell, run_grid,
                         validate_config, write_rows)
from bed.embstore import EmbeddingManifest, store_basename, write_embeddings
from bed.synth import SYNTH_EXTRACTOR, SyntheticSpec, generate


@pytest.fixture(scope="module")
def synth_bench():
    spec = SyntheticSpec(n_classes=3, per_class=60, dim=12, separation=10.0,
                         seed=7, ood_count=60)
    dataset, embeddings = generate(spec)
    return dataset, {SYNTH_EXTRACTOR: embeddings}


def config_for(detector, extractor=SYNTH_EXTRACTOR, **kw):
    return ExperimentConfig(dataset="synthetic", extractor=extractor,
                            detector=detector, **kw)


# ---------------------------------------------------------------------------
# pairing rules

def test_bi_encoder_detectors_reject_frozen_extractors():
    for extractor in FROZEN_EXTRACTORS:
        with pytest.raises(ConfigurationError):
            validate_config(config_for("BiEncoderMaha", extractor=extractor))


def test_bi_encoder_detectors_accept_bi_encoder_extractor():
    validate_config(config_for("BiEncoderMaha",
                               extractor=BI_ENCODER_EXTRACTOR))


def test_baselines_reject_bi_encoder_extractor():
    for detector in ("MSP", "DOC", "KNN", "TrustScores", "LOF", "ADB"):
        with pytest.raises(ConfigurationError):
            validate_config(config_for(detector,
                                       extractor=BI_ENCODER_EXTRACTOR))


def test_other_extractors_unconstrained():
    # e.g. the synthetic extractor pairs with everything except RAKE
    for detector in ALL_DETECTORS:
        if detector in ("RAKE", "BinaryMSP"):
            continue
        validate_config(config_for(detector))
    validate_config(config_for("BinaryMSP", is_ood_label_in_train=True))


def test_rake_requires_no_extractor():
    validate_config(config_for("RAKE", extractor=NO_EXTRACTOR))
    validate_config(config_for("RAKE", extractor="none"))
    with pytest.raises(ConfigurationError):
        validate_config(config_for("RAKE"))


def test_binary_msp_requires_ood_in_train():
    with pytest.raises(ConfigurationError):
        validate_config(config_for("BinaryMSP", is_ood_label_in_train=False))


def test_likelihood_ratio_rejected_with_reason():
    with pytest.raises(ConfigurationError, match="LikelihoodRatio"):
        validate_config(config_for("LikelihoodRatio"))


def test_unknown_detector_rejected():
    with pytest.raises(ConfigurationError, match="unknown detector"):
        validate_config(config_for("Oracle9000"))


# ---------------------------------------------------------------------------
# cell execution

def test_scoring_cell_fills_all_metrics(synth_bench):
    dataset, embeddings = synth_bench
    row = run_cell(config_for("BiEncoderCosine"), dataset,
                   embeddings[SYNTH_EXTRACTOR])
    assert row.error == ""
    assert row.detector == "BiEncoderCosine"
    assert row.feature_extractor == SYNTH_EXTRACTOR
    for name in ("f1", "mcc", "fpr_at_95", "fpr_at_90", "aupr", "auroc"):
        assert getattr(row, name) is not None
    assert row.wall_time_seconds > 0


def test_direct_cells_blank_score_metrics(synth_bench):
    dataset, embeddings = synth_bench
    for detector in DIRECT_DETECTORS:
        extractor = NO_EXTRACTOR if detector == "RAKE" else SYNTH_EXTRACTOR
        emb = None if detector == "RAKE" else embeddings[SYNTH_EXTRACTOR]
        row = run_cell(config_for(detector, extractor=extractor),
                       dataset, emb)
        assert row.error == ""
        assert row.f1 is not None and row.mcc is not None
        assert row.fpr_at_95 is None and row.fpr_at_90 is None
        assert row.aupr is None and row.auroc is None


def test_cells_are_deterministic(synth_bench):
    dataset, embeddings = synth_bench
    config = config_for("MSP", seed=3)
    r1 = run_cell(config, dataset, embeddings[SYNTH_EXTRACTOR])
    r2 = run_cell(config, dataset, embeddings[SYNTH_EXTRACTOR])
    assert (r1.f1, r1.mcc, r1.auroc, r1.aupr) == (r2.f1, r2.mcc, r2.auroc,
                                                  r2.aupr)


def test_embedding_row_count_mismatch_rejected(synth_bench):
    from bed.numerics import EmbeddingMatrix
    dataset, embeddings = synth_bench
    bad = dict(embeddings[SYNTH_EXTRACTOR])
    bad["test"] = EmbeddingMatrix(bad["test"].data[:-1])
    with pytest.raises(ConfigurationError, match="rows"):
        run_cell(config_for("BiEncoderCosine"), dataset, bad)


def test_run_grid_isolates_failures(synth_bench):
    dataset, embeddings = synth_bench
    configs = [
        config_for("BiEncoderEuclidean"),
        config_for("BiEncoderMaha", extractor="use"),  # invalid pairing
        config_for("KNN"),
    ]
    rows = run_grid(configs, dataset, embeddings)
    assert len(rows) == 3
    by_detector = {r.detector: r for r in rows}
    assert by_detector["BiEncoderEuclidean"].error == ""
    assert by_detector["KNN"].error == ""
    failed = by_detector["BiEncoderMaha"]
    assert failed.error != ""
    assert failed.f1 is None


def test_run_grid_missing_extractor_becomes_error_row(synth_bench):
    dataset, embeddings = synth_bench
    rows = run_grid([config_for("LOF", extractor="bert")], dataset,
                    embeddings)
    assert len(rows) == 1
    assert "bert" in rows[0].error


def test_run_grid_sorts_by_extractor_then_detector(synth_bench):
    dataset, embeddings = synth_bench
    configs = [
        config_for("RAKE", extractor=NO_EXTRACTOR),
        config_for("MSP"),
        config_for("BiEncoderCosine"),
    ]
    rows = run_grid(configs, dataset, embeddings)
    keys = [(r.feature_extractor, r.detector) for r in rows]
    assert keys == sorted(keys)


def test_ood_in_train_flag_changes_classifier_rows(synth_bench):
    dataset, embeddings = synth_bench
    base = run_cell(config_for("MSP"), dataset, embeddings[SYNTH_EXTRACTOR])
    flagged = run_cell(config_for("MSP", is_ood_label_in_train=True),
                       dataset, embeddings[SYNTH_EXTRACTOR])
    # with OOD as an extra class the MSP head scores P(oos); the rows differ
    assert base.auroc != flagged.auroc or base.f1 != flagged.f1


# ---------------------------------------------------------------------------
# tables

def fake_rows():
    done = ResultRow(feature_extractor="synthetic", detector="BiEncoderMaha",
                     use_best_ckpt=False, is_ood_label_in_train=False,
                     f1=0.98765432, mcc=0.9123, fpr_at_95=0.05,
                     fpr_at_90=0.0125, aupr=0.999, auroc=1.0, seed=0,
                     wall_time_seconds=0.25)
    direct = ResultRow(feature_extractor="-", detector="RAKE",
                       use_best_ckpt=False, is_ood_label_in_train=False,
                       f1=0.5, mcc=0.25, fpr_at_95=None, fpr_at_90=None,
                       aupr=None, auroc=None, seed=0, wall_time_seconds=0.01)
    failed = ResultRow(feature_extractor="use", detector="LOF",
                       use_best_ckpt=False, is_ood_label_in_train=False,
                       f1=None, mcc=None, fpr_at_95=None, fpr_at_90=None,
                       aupr=None, auroc=None, seed=0, wall_time_seconds=0.0,
                       error="no embeddings loaded for extractor 'use'")
    return [done, direct, failed]


def test_csv_shape_and_blanks():
    text = rows_to_csv(fake_rows())
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == list(CSV_COLUMNS)
    assert len(rows) == 4
    header_index = {c: i for i, c in enumerate(CSV_COLUMNS)}
    # full-precision repr round-trips the float exactly
    assert float(rows[1][header_index["f1"]]) == 0.98765432
    # blanks for direct and error rows
    assert rows[2][header_index["auroc"]] == ""
    assert rows[3][header_index["f1"]] == ""
    assert "use" in rows[3][header_index["error"]]


def test_csv_empty_grid_is_header_only():
    text = rows_to_csv([])
    assert text == ",".join(CSV_COLUMNS) + "\n"


def test_markdown_format():
    text = rows_to_markdown(fake_rows())
    lines = text.splitlines()
    assert lines[0].startswith("↑ higher is better")
    assert lines[2].startswith("| Feature Extractor |")
    body = lines[4:]
    assert len(body) == 3
    # three decimal places in markdown
    assert "| 0.988 |" in body[0]
    # direct rows leave ranking-metric cells blank
    assert "|  |" in body[1]


def test_write_rows_infers_nothing_validates_format(tmp_path):
    with pytest.raises(ValueError):
        write_rows([], tmp_path / "out.txt", fmt="tsv")
    write_rows(fake_rows(), tmp_path / "out.csv", fmt="csv")
    assert (tmp_path / "out.csv").read_text("utf-8").startswith(
        "feature_extractor,")
    write_rows(fake_rows(), tmp_path / "out.md", fmt="md")
    assert "| RAKE |" in (tmp_path / "out.md").read_text("utf-8")


# ---------------------------------------------------------------------------
# artifact resolution

def test_resolve_normalized_dataset(tmp_path, synth_bench):
    dataset, _ = synth_bench
    write_normalized(dataset, tmp_path / "synthetic.tsv")
    loaded = resolve_dataset("synthetic", tmp_path)
    assert loaded == dataset


def test_resolve_unknown_name_reports_path(tmp_path):
    with pytest.raises(Exception, match="missing.tsv|No such file"):
        resolve_dataset("missing", tmp_path)


def test_load_split_embeddings_round_trip(tmp_path, synth_bench):
    dataset, embeddings = synth_bench
    for split in ("train", "val", "test"):
        matrix = embeddings[SYNTH_EXTRACTOR][split]
        manifest = EmbeddingManifest(
            extractor=SYNTH_EXTRACTOR, dataset="synthetic", split=split,
            dim=matrix.dim, count=matrix.n_rows)
        write_embeddings(manifest, matrix, tmp_path / store_basename(
            SYNTH_EXTRACTOR, "synthetic", split))
    loaded = load_split_embeddings(tmp_path, SYNTH_EXTRACTOR, dataset)
    for split in ("train", "val", "test"):
        np.testing.assert_array_equal(
            loaded[split].data,
            embeddings[SYNTH_EXTRACTOR][split].data.astype(
                np.float32).astype(np.float64))


def test_load_split_embeddings_missing_pair(tmp_path, synth_bench):
    dataset, _ = synth_bench
    with pytest.raises(Exception, match="manifest"):
        load_split_embeddings(tmp_path, SYNTH_EXTRACTOR, dataset)


def test_load_split_embeddings_wrong_extractor_name(tmp_path, synth_bench):
    dataset, embeddings = synth_bench
    matrix = embeddings[SYNTH_EXTRACTOR]["train"]
    # manifest says "use" but file name claims synthetic
    manifest = EmbeddingManifest(extractor="use", dataset="synthetic",
                                 split="train", dim=matrix.dim,
                                 count=matrix.n_rows)
    write_embeddings(manifest, matrix, tmp_path / store_basename(
        SYNTH_EXTRACTOR, "synthetic", "train"))
    with pytest.raises(Exception, match="manifest names"):
        load_split_embeddings(tmp_path, SYNTH_EXTRACTOR, dataset)


# ---------------------------------------------------------------------------
# CLI end-to-end

def test_cli_synth_bench_eval_pipeline(tmp_path, capsys):
    work = str(tmp_path)
    spec = {"n_classes": 3, "per_class": 40, "dim": 8, "separation": 10.0,
            "seed": 7, "ood_count": 40}
    spec_path = os.path.join(work, "spec.json")
    with open(spec_path, "w", encoding="utf-8") as fh:
        json.dump(spec, fh)

    assert main(["synth", "--out-dir", work, "--spec", spec_path]) == 0
    capsys.readouterr()
    assert os.path.exists(os.path.join(work, "synthetic.tsv"))
    for split in ("train", "val", "test"):
        base = store_basename(SYNTH_EXTRACTOR, "synthetic", split)
        assert os.path.exists(os.path.join(work, base + ".emb"))
        assert os.path.exists(os.path.join(work, base + ".manifest"))

    out_csv = os.path.join(work, "rows.csv")
    code = main(["bench", "--dataset", "synthetic", "--data-dir", work,
                 "--emb-dir", work, "--extractor", SYNTH_EXTRACTOR,
                 "--detector", "BiEncoderMaha", "--out", out_csv])
    assert code == 0
    capsys.readouterr()
    with open(out_csv, encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    assert rows[0]["detector"] == "BiEncoderMaha"
    assert rows[0]["error"] == ""
    assert float(rows[0]["auroc"]) > 0.9

    # eval-scores on hand-made score files
    scores_path = os.path.join(work, "scores.txt")
    labels_path = os.path.join(work, "labels.txt")
    with open(scores_path, "w", encoding="utf-8") as fh:
        fh.write("0.9\n0.8\n0.2\n0.1\n")
    with open(labels_path, "w", encoding="utf-8") as fh:
        fh.write("oos\noos\nid\nid\n")
    assert main(["eval-scores", "--scores", scores_path,
                 "--labels", labels_path]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["auroc"] == 1.0
    assert payload["f1"] == 1.0


def test_cli_bench_grid_and_markdown(tmp_path, capsys):
    work = str(tmp_path)
    assert main(["synth", "--out-dir", work]) == 0
    capsys.readouterr()
    grid = {"cells": [
        {"extractor": SYNTH_EXTRACTOR, "detector": "BiEncoderCosine"},
        {"extractor": SYNTH_EXTRACTOR, "detector": "KNN"},
        {"extractor": NO_EXTRACTOR, "detector": "RAKE"},
    ]}
    grid_path = os.path.join(work, "grid.json")
    with open(grid_path, "w", encoding="utf-8") as fh:
        json.dump(grid, fh)
    out_md = os.path.join(work, "rows.md")
    code = main(["bench", "--dataset", "synthetic", "--data-dir", work,
                 "--emb-dir", work, "--grid", grid_path, "--out", out_md])
    assert code == 0
    capsys.readouterr()
    text = open(out_md, encoding="utf-8").read()
    assert "| RAKE |" in text and "| KNN |" in text
    assert text.count("\n|") >= 5


def test_cli_bench_accepts_bare_list_grid(tmp_path, capsys):
    work = str(tmp_path)
    assert main(["synth", "--out-dir", work]) == 0
    capsys.readouterr()
    grid_path = os.path.join(work, "grid.json")
    with open(grid_path, "w", encoding="utf-8") as fh:
        json.dump([{"extractor": SYNTH_EXTRACTOR,
                    "detector": "BiEncoderMaha"}], fh)
    code = main(["bench", "--dataset", "synthetic", "--data-dir", work,
                 "--emb-dir", work, "--grid", grid_path])
    assert code == 0
    row = capsys.readouterr().out.splitlines()[1]
    assert row.startswith("synthetic,BiEncoderMaha,")


@pytest.mark.parametrize("doc", ['"cells"', '{"cells": 3}', '["loose"]'])
def test_cli_bench_rejects_malformed_grid_cleanly(tmp_path, capsys, doc):
    work = str(tmp_path)
    assert main(["synth", "--out-dir", work]) == 0
    capsys.readouterr()
    grid_path = os.path.join(work, "grid.json")
    with open(grid_path, "w", encoding="utf-8") as fh:
        fh.write(doc)
    code = main(["bench", "--dataset", "synthetic", "--data-dir", work,
                 "--emb-dir", work, "--grid", grid_path])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_cli_bench_exit_code_on_error_rows(tmp_path, capsys):
    work = str(tmp_path)
    assert main(["synth", "--out-dir", work]) == 0
    capsys.readouterr()
    out_csv = os.path.join(work, "rows.csv")
    # frozen extractor has no embeddings on disk: the cell fails, exit 1
    code = main(["bench", "--dataset", "synthetic", "--data-dir", work,
                 "--emb-dir", work, "--extractor", "use",
                 "--detector", "LOF", "--out", out_csv])
    assert code == 1
    err = capsys.readouterr().err
    assert "use" in err


def test_cli_eval_scores_with_explicit_validation(tmp_path, capsys):
    work = str(tmp_path)
    paths = {}
    content = {
        "test_scores": "0.4\n0.6\n",
        "test_labels": "1\n0\n",
        "val_scores": "1.0\n0.0\n",
        "val_labels": "1\n0\n",
    }
    for name, text in content.items():
        paths[name] = os.path.join(work, name + ".txt")
        with open(paths[name], "w", encoding="utf-8") as fh:
            fh.write(text)
    assert main(["eval-scores", "--scores", paths["test_scores"],
                 "--labels", paths["test_labels"],
                 "--val-scores", paths["val_scores"],
                 "--val-labels", paths["val_labels"]]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["threshold"] == pytest.approx(0.5)
    assert payload["f1"] == 0.0   # the calibrated threshold misses row 0
    assert payload["auroc"] == 0.0


def test_cli_missing_dataset_is_reported_not_raised(capsys):
    code = main(["bench", "--dataset", "nope", "--data-dir", "/nonexistent",
                 "--emb-dir", "/nonexistent", "--extractor", "synthetic",
                 "--detector", "KNN", "--out", "/tmp/x.csv"])
    assert code == 2
    assert "error:" in capsys.readouterr().err
