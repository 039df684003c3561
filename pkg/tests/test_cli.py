from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from conftest import small_phantom_spec, write_series
from mrdensity.analytics import cohort_summary, read_cohort_csv
from mrdensity.cli import main, parse_laterality
from mrdensity.errors import InputError
from mrdensity.quantify import dice, hausdorff
from mrdensity.volume_io import (
    BinaryMask3D,
    Volume3D,
    load_dicom_series,
    load_mask,
    load_portable_volume,
    save_mask,
    save_portable_volume,
)

SMALL = ["--patch-size", "12", "--steps", "4,4,3"]


def _rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


@pytest.fixture
def phantom_dir(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps(small_phantom_spec(noise_sigma=0.0).to_dict()))
    out = tmp_path / "ph"
    assert main(["phantom", "--spec", str(spec), "--out", str(out)]) == 0
    return out


# ---------------------------------------------------------------- phantom / ingest


def test_phantom_default_writes_three_files(tmp_path, capsys):
    assert main(["phantom", "--out", str(tmp_path)]) == 0
    for name in ("volume", "breast_truth", "dense_truth"):
        assert (tmp_path / f"{name}.json").exists() and (tmp_path / f"{name}.raw").exists()
    breast, dense = load_mask(tmp_path / "breast_truth.json"), load_mask(tmp_path / "dense_truth.json")
    assert not np.any(dense.voxels & ~breast.voxels)
    assert "analytic" in capsys.readouterr().out


def test_phantom_seed_repeatable(tmp_path):
    for d in ("a", "b"):
        assert main(["phantom", "--seed", "5", "--out", str(tmp_path / d)]) == 0
    for name in ("volume.raw", "breast_truth.raw", "dense_truth.raw", "volume.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_phantom_invalid_spec(tmp_path, capsys):
    spec = small_phantom_spec().to_dict()
    spec["dense"]["center"] = [16.0, 0.0, 12.0]  # below the chest wall, outside the breast
    (tmp_path / "s.json").write_text(json.dumps(spec))
    assert main(["phantom", "--spec", str(tmp_path / "s.json"), "--out", str(tmp_path / "o")]) == 2
    assert "error" in capsys.readouterr().err


def test_ingest_dicom_and_portable(tmp_path, capsys):
    rng = np.random.default_rng(0)
    pix = [rng.integers(0, 100, size=(3, 4)).astype(np.int16) for _ in range(3)]
    write_series(tmp_path / "dcm", pix, [10.0, 0.0, 5.0])
    assert main(["ingest", str(tmp_path / "dcm"), "--out", str(tmp_path / "v.json")]) == 0
    assert "dims 4x3x3" in capsys.readouterr().out
    ref, _ = load_dicom_series(tmp_path / "dcm")
    np.testing.assert_array_equal(load_portable_volume(tmp_path / "v.json").voxels, ref.voxels)
    # portable pass-through is idempotent
    assert main(["ingest", str(tmp_path / "v.json"), "--out", str(tmp_path / "w.json")]) == 0
    assert (tmp_path / "v.raw").read_bytes() == (tmp_path / "w.raw").read_bytes()


def test_ingest_missing_path(tmp_path, capsys):
    missing = tmp_path / "nowhere"
    assert main(["ingest", str(missing), "--out", str(tmp_path / "v.json")]) == 2
    assert str(missing) in capsys.readouterr().err


def test_ingest_bad_dicom_names_tag(tmp_path, capsys):
    write_series(tmp_path / "dcm", [np.zeros((2, 2))] * 2, [0.0, 0.0])
    assert main(["ingest", str(tmp_path / "dcm"), "--out", str(tmp_path / "v.json")]) == 2
    assert "(0020,0032)" in capsys.readouterr().err


# ---------------------------------------------------------------- segment / evaluate


def test_segment_oracle_reproduces_truth(phantom_dir, tmp_path):
    out = tmp_path / "seg"
    rc = main([
        "segment", str(phantom_dir / "volume.json"), "--out", str(out), *SMALL,
        "--breast", f"oracle:{phantom_dir / 'breast_truth.json'}",
        "--dense", f"oracle:{phantom_dir / 'dense_truth.json'}",
    ])
    assert rc == 0
    assert (out / "breast_mask.raw").read_bytes() == (phantom_dir / "breast_truth.raw").read_bytes()
    assert (out / "dense_mask.raw").read_bytes() == (phantom_dir / "dense_truth.raw").read_bytes()
    run = json.loads((out / "run.json").read_text())
    assert run["breast_backend"]["kind"] == "oracle" and run["config"]["threshold"] == 0.5
    assert run["patches"] == 4 * 4 * 3


def test_segment_fcm_zero_noise_and_evaluate(phantom_dir, tmp_path, capsys):
    out = tmp_path / "seg"
    assert main(["segment", str(phantom_dir / "volume.json"), "--out", str(out), *SMALL]) == 0
    pred, truth = load_mask(out / "dense_mask.json"), load_mask(phantom_dir / "dense_truth.json")
    assert dice(pred, truth) == 1.0
    capsys.readouterr()
    assert main(["evaluate", str(out / "dense_mask.json"), str(phantom_dir / "dense_truth.json")]) == 0
    assert capsys.readouterr().out.strip() == "DSC 100.00  HD 0.00"


def test_evaluate_matches_library(tmp_path, capsys):
    rng = np.random.default_rng(2)
    a, b = BinaryMask3D(rng.random((9, 9, 9)) < 0.2), BinaryMask3D(rng.random((9, 9, 9)) < 0.2)
    save_mask(a, tmp_path / "a.json")
    save_mask(b, tmp_path / "b.json")
    assert main(["evaluate", str(tmp_path / "a.json"), str(tmp_path / "b.json")]) == 0
    expected = f"DSC {100 * dice(a, b):.2f}  HD {hausdorff(a, b):.2f}"
    assert capsys.readouterr().out.strip() == expected


def test_evaluate_empty_truth(tmp_path):
    save_mask(BinaryMask3D(np.ones((3, 3, 3), bool)), tmp_path / "a.json")
    save_mask(BinaryMask3D(np.zeros((3, 3, 3), bool)), tmp_path / "b.json")
    assert main(["evaluate", str(tmp_path / "a.json"), str(tmp_path / "b.json")]) == 2


def test_segment_invalid_threshold(phantom_dir, tmp_path, capsys):
    rc = main(["segment", str(phantom_dir / "volume.json"), "--out", str(tmp_path / "s"), "--threshold", "1.5"])
    assert rc == 2
    assert "threshold" in capsys.readouterr().err


def test_segment_config_file_and_unknown_key(phantom_dir, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"patch_size": 12, "steps": [4, 4, 3], "threshold": 0.5}))
    assert main(["segment", str(phantom_dir / "volume.json"), "--config", str(cfg), "--out", str(tmp_path / "s")]) == 0
    cfg.write_text(json.dumps({"patchsize": 12}))
    assert main(["segment", str(phantom_dir / "volume.json"), "--config", str(cfg), "--out", str(tmp_path / "t")]) == 2


def test_segment_backend_failure_exit_3(phantom_dir, tmp_path):
    probs = np.full((32, 32, 24), 1.5, dtype=np.float32)
    save_portable_volume(Volume3D(probs), tmp_path / "p.json")
    rc = main([
        "segment", str(phantom_dir / "volume.json"), "--out", str(tmp_path / "s"), *SMALL,
        "--breast", f"import:{tmp_path / 'p.json'}",
    ])
    assert rc == 3


# ---------------------------------------------------------------- quantify


def _count_masks(tmp_path):
    breast = np.zeros((10, 5, 5), bool)
    breast[:5] = True  # 125 voxels, all at x < 5: patient right
    dense = np.zeros_like(breast)
    dense.reshape(-1)[np.flatnonzero(breast.reshape(-1))[:13]] = True
    save_mask(BinaryMask3D(breast), tmp_path / "b.json")
    save_mask(BinaryMask3D(dense), tmp_path / "d.json")


def test_quantify_density_csv(tmp_path):
    _count_masks(tmp_path)
    rc = main(["quantify", "--dense", str(tmp_path / "d.json"), "--breast", str(tmp_path / "b.json"),
               "--subject-id", "p1", "--out", str(tmp_path / "q.csv"), "--profile", str(tmp_path / "p.csv")])
    assert rc == 0
    rows = _rows(tmp_path / "q.csv")
    assert rows == [["subject_id", "side", "density", "dense_voxels", "breast_voxels"],
                    ["p1", "whole", "0.104000", "13", "125"]]
    prof = _rows(tmp_path / "p.csv")
    assert prof[0] == ["slice_index", "dense_voxels", "breast_voxels", "density"]
    assert len(prof) == 1 + 5
    assert sum(int(r[1]) for r in prof[1:]) == 13


def test_quantify_profile_na(tmp_path):
    breast = np.zeros((4, 4, 5), bool)
    breast[:, :, 1:3] = True
    save_mask(BinaryMask3D(breast), tmp_path / "b.json")
    save_mask(BinaryMask3D(np.zeros_like(breast)), tmp_path / "d.json")
    assert main(["quantify", "--dense", str(tmp_path / "d.json"), "--breast", str(tmp_path / "b.json"),
                 "--out", str(tmp_path / "q.csv"), "--profile", str(tmp_path / "p.csv")]) == 0
    assert [r[3] for r in _rows(tmp_path / "p.csv")[1:]] == ["NA", "0.000000", "0.000000", "NA", "NA"]


def test_quantify_laterality(tmp_path, capsys):
    _count_masks(tmp_path)
    base = ["quantify", "--dense", str(tmp_path / "d.json"), "--breast", str(tmp_path / "b.json")]
    assert main([*base, "--laterality", "left"]) == 2
    assert "empty" in capsys.readouterr().err
    assert main([*base, "--laterality", "right"]) == 0
    assert "right,0.104000" in capsys.readouterr().out
    # tumor on the left: quantify the contralateral right breast
    assert main([*base, "--laterality", "contralateral", "--tumor-side", "left"]) == 0
    assert "right,0.104000" in capsys.readouterr().out
    assert main([*base, "--laterality", "contralateral:right"]) == 2


def test_quantify_dims_mismatch(tmp_path):
    save_mask(BinaryMask3D(np.ones((3, 3, 3), bool)), tmp_path / "a.json")
    save_mask(BinaryMask3D(np.ones((3, 3, 4), bool)), tmp_path / "b.json")
    assert main(["quantify", "--dense", str(tmp_path / "a.json"), "--breast", str(tmp_path / "b.json")]) == 2


def test_parse_laterality_rules():
    assert parse_laterality("whole") == "whole"
    assert parse_laterality("contralateral:left") == "right"
    assert parse_laterality("contralateral", "right") == "left"
    for bad in ("middle", "contralateral", "contralateral:up"):
        with pytest.raises(InputError):
            parse_laterality(bad)
    with pytest.raises(InputError):
        parse_laterality("left", "right")


# ---------------------------------------------------------------- cohort / correlate


COHORT = [
    ("a", "ISPY2", 25, 0.30, "extremely_dense"),
    ("b", "ISPY2", 27, 0.20, "heterogeneously_dense"),
    ("c", "DBC-MRI", 45, 0.08, "scattered"),
    ("d", "DBC-MRI", 52, 0.05, "scattered"),
    ("e", "internal", 71, 0.01, "fatty"),
    ("f", "internal", 19, 0.12, ""),
]


def _write_cohort(path, rows=COHORT):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subject_id", "dataset", "age", "density", "mammo_category"])
        w.writerows(rows)


def test_cohort_tables(tmp_path):
    _write_cohort(tmp_path / "c.csv")
    assert main(["cohort", str(tmp_path / "c.csv"), "--out", str(tmp_path / "o")]) == 0
    summary = _rows(tmp_path / "o" / "summary.csv")
    expected = cohort_summary(read_cohort_csv(tmp_path / "c.csv"), include_all=True)
    assert [r[0] for r in summary[1:]] == [g.group for g in expected]
    for row, g in zip(summary[1:], expected):
        assert int(row[1]) == g.n and float(row[2]) == round(g.mean, 6) and float(row[3]) == round(g.std, 6)
    hist = _rows(tmp_path / "o" / "histogram.csv")
    assert len(hist) == 1 + 50 and sum(int(r[2]) for r in hist[1:]) == 6
    ages = _rows(tmp_path / "o" / "age_bins.csv")
    assert [r[0] for r in ages[1:]] == ["20-29", "40-49", "50-59", "70-79"]


def test_cohort_errors(tmp_path, capsys):
    (tmp_path / "empty.csv").write_text("")
    assert main(["cohort", str(tmp_path / "empty.csv"), "--out", str(tmp_path / "o")]) == 2
    _write_cohort(tmp_path / "bad.csv", COHORT[:2] + [("z", "ISPY2", 40, 1.2, "")])
    assert main(["cohort", str(tmp_path / "bad.csv"), "--out", str(tmp_path / "o")]) == 2
    assert "line 4" in capsys.readouterr().err


def test_correlate(tmp_path, capsys):
    rng = np.random.default_rng(0)
    rows = []
    centers = {"fatty": 0.01, "scattered": 0.06, "heterogeneously_dense": 0.16, "extremely_dense": 0.35}
    for token, c in centers.items():
        for i in range(8):
            rows.append((f"{token}{i}", "synthetic", 50, round(c + rng.uniform(-0.009, 0.009), 6), token))
    _write_cohort(tmp_path / "c.csv", rows)
    assert main(["correlate", str(tmp_path / "c.csv"), "--out", str(tmp_path / "o"), "--classify"]) == 0
    out = capsys.readouterr().out
    corr = _rows(tmp_path / "o" / "correlation.csv")
    assert corr[1][0] == "spearman" and float(corr[1][1]) > 0.9
    assert corr[2][0] == "kendall"
    table = _rows(tmp_path / "o" / "category_density.csv")
    assert [r[0] for r in table[1:]] == ["fatty", "scattered", "heterogeneously_dense", "extremely_dense"]
    assert "test_accuracy: 1.000000" in out


def test_correlate_errors(tmp_path):
    _write_cohort(tmp_path / "two.csv", COHORT[:2])
    assert main(["correlate", str(tmp_path / "two.csv")]) == 2
    same = [(f"s{i}", "ISPY2", 40, 0.1 * i, "scattered") for i in range(5)]
    _write_cohort(tmp_path / "same.csv", same)
    assert main(["correlate", str(tmp_path / "same.csv")]) == 2


def test_cohort_manifest_batch(tmp_path, phantom_dir):
    (tmp_path / "r1.txt").write_text("Heterogeneously dense breasts.")
    (tmp_path / "r2.txt").write_text("No comment on composition.")
    manifest = tmp_path / "manifest.csv"
    with open(manifest, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subject_id", "input", "kind", "age", "report", "dataset"])
        w.writerow(["p1", str(phantom_dir / "volume.json"), "portable", "44", "r1.txt", "synthetic"])
        w.writerow(["p2", str(phantom_dir / "volume.json"), "portable", "63", "r2.txt", ""])
    assert main(["cohort", str(manifest), "--out", str(tmp_path / "o"), *SMALL]) == 0
    records = read_cohort_csv(tmp_path / "o" / "cohort.csv")
    assert [r.subject_id for r in records] == ["p1", "p2"]
    assert records[0].mammo_category.token == "heterogeneously_dense" and records[1].mammo_category is None
    assert records[1].dataset_tag == "internal"
    assert _rows(tmp_path / "o" / "report_exceptions.csv")[1][0] == "p2"
    truth = load_mask(phantom_dir / "dense_truth.json").count() / load_mask(phantom_dir / "breast_truth.json").count()
    assert records[0].density == pytest.approx(truth, abs=5e-7)


def test_manifest_missing_path(tmp_path, capsys):
    manifest = tmp_path / "m.csv"
    manifest.write_text("subject_id,input,kind,age,report,dataset\np1,nothere.json,portable,40,,\n")
    assert main(["cohort", str(manifest), "--out", str(tmp_path / "o")]) == 2
    assert "nothere.json" in capsys.readouterr().err


# ---------------------------------------------------------------- parse-reports


def test_parse_reports(tmp_path):
    d = tmp_path / "reports"
    d.mkdir()
    (d / "a.txt").write_text("The breast tissue is EXTREMELY DENSE.")
    (d / "b.txt").write_text("Heterogeneously dense.")
    (d / "c.txt").write_text("There are scattered fibroglandular densities.")
    (d / "d.txt").write_text("The breasts are almost entirely fatty.")
    (d / "e.txt").write_text("Findings discussed.")
    assert main(["parse-reports", str(d), "--out", str(tmp_path / "cats.csv")]) == 0
    assert _rows(tmp_path / "cats.csv") == [
        ["subject_id", "category"],
        ["a", "extremely_dense"],
        ["b", "heterogeneously_dense"],
        ["c", "scattered"],
        ["d", "fatty"],
    ]
    exc = _rows(tmp_path / "cats_exceptions.csv")
    assert [r[0] for r in exc[1:]] == ["e"]


def test_parse_reports_unreadable(tmp_path):
    d = tmp_path / "reports"
    d.mkdir()
    (d / "a.txt").write_bytes(b"\xff\xfe\x00bad")
    assert main(["parse-reports", str(d), "--out", str(tmp_path / "c.csv")]) == 2
    assert main(["parse-reports", str(tmp_path / "none"), "--out", str(tmp_path / "c.csv")]) == 2


def test_bad_steps_argument(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["segment", "v.json", "--steps", "8,8"])
    assert exc.value.code == 2


def test_module_entry_point(tmp_path):
    import subprocess
    import sys

    proc = subprocess.run([sys.executable, "-m", "mrdensity", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "mrdensity" in proc.stdout
