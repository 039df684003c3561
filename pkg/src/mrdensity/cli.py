"""``mrdensity`` command line.

Exit codes: 0 success, 2 input or configuration error, 3 backend or
computation failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Sequence

from mrdensity import __version__
from mrdensity.analytics.classifier import fit_threshold_classifier
from mrdensity.analytics.cohort import (
    CohortRecord,
    age_group_stats,
    cohort_summary,
    distribution_summary,
    histogram,
    read_cohort_csv,
    write_cohort_csv,
)
from mrdensity.analytics.correlation import auc_binary, kendall_tau, spearman
from mrdensity.analytics.reports import DensityCategory, parse_corpus, parse_density_category, read_corpus
from mrdensity.errors import ComputationError, InputError
from mrdensity.quantify.density import DensityRecord, SliceProfile, compute_density, slice_density_profile
from mrdensity.quantify.metrics import SegMetrics, dice, hausdorff
from mrdensity.segmentation.backends import BackendSpec
from mrdensity.segmentation.patches import DEFAULT_PATCH_SIZE, DEFAULT_STEPS
from mrdensity.segmentation.pipeline import DEFAULT_THRESHOLD, segment_volume, split_laterality
from mrdensity.volume_io.dicom import load_dicom_series
from mrdensity.volume_io.phantom import analytic_dense_fraction, generate_phantom
from mrdensity.volume_io.portable import load_mask, load_portable_volume, read_header, save_mask, save_portable_volume
from mrdensity.volume_io.types import BinaryMask3D, PhantomSpec, Volume3D

logger = logging.getLogger("mrdensity")

EXIT_OK, EXIT_INPUT, EXIT_COMPUTE = 0, 2, 3
SIDES = ("left", "right")
MANIFEST_HEADER = ("subject_id", "input", "kind", "age", "report", "dataset")
INPUT_KINDS = ("dicom_dir", "portable")
DENSITY_HEADER = ("subject_id", "side", "density", "dense_voxels", "breast_voxels")


# ---------------------------------------------------------------- config


@dataclass(frozen=True)
class RunConfig:
    """Pipeline settings; the defaults are the 96-voxel patch, 8/8/3 steps, threshold 0.5."""

    patch_size: int = DEFAULT_PATCH_SIZE
    steps: tuple[int, int, int] = DEFAULT_STEPS
    threshold: float = DEFAULT_THRESHOLD
    breast: str = "fcm"
    dense: str = "fcm"
    laterality: str = "whole"
    output_dir: str | None = None

    def validate(self) -> RunConfig:
        if not isinstance(self.patch_size, int) or self.patch_size < 1:
            raise InputError(f"config: patch_size must be a positive integer, got {self.patch_size!r}")
        if len(self.steps) != 3 or any(not isinstance(s, int) or s < 1 for s in self.steps):
            raise InputError(f"config: steps must be three positive integers, got {self.steps!r}")
        if not 0.0 < self.threshold < 1.0:
            raise InputError(f"config: threshold must lie in (0, 1), got {self.threshold}")
        BackendSpec.parse(self.breast)
        BackendSpec.parse(self.dense)
        parse_laterality(self.laterality)
        return self

    @classmethod
    def from_dict(cls, d: dict) -> RunConfig:
        known = {"patch_size", "steps", "threshold", "breast", "dense", "laterality", "output_dir"}
        unknown = sorted(set(d) - known)
        if unknown:
            raise InputError(f"config: unknown keys {unknown}")
        kw = dict(d)
        try:
            if "steps" in kw:
                kw["steps"] = tuple(int(s) for s in kw["steps"])
            if "patch_size" in kw:
                kw["patch_size"] = int(kw["patch_size"])
            if "threshold" in kw:
                kw["threshold"] = float(kw["threshold"])
        except (TypeError, ValueError) as exc:
            raise InputError(f"config: {exc}") from exc
        return cls(**kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["steps"] = list(self.steps)
        return d


def load_config(path: str | None, args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if path:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InputError(f"config {path}: malformed JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise InputError(f"config {path}: expected a JSON object")
        cfg = RunConfig.from_dict(data)
    overrides = {}
    for key in ("patch_size", "threshold", "breast", "dense", "laterality"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "steps", None) is not None:
        overrides["steps"] = args.steps
    return replace(cfg, **overrides).validate()


def _steps_arg(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    try:
        steps = tuple(int(p) for p in parts)
    except ValueError:
        steps = ()
    if len(steps) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma-separated integers, got {text!r}")
    return steps  # type: ignore[return-value]


def parse_laterality(text: str, tumor_side: str | None = None) -> str:
    """Resolve a laterality option to the side to quantify: whole, left or right."""
    if text in ("whole", "left", "right"):
        if tumor_side is not None:
            raise InputError("--tumor-side only applies to --laterality contralateral")
        return text
    kind, _, side = text.partition(":")
    if kind != "contralateral":
        raise InputError(f"laterality must be whole|left|right|contralateral:<side>, got {text!r}")
    side = side or tumor_side or ""
    if tumor_side is not None and side != tumor_side:
        raise InputError(f"conflicting tumor sides {side!r} and {tumor_side!r}")
    if side not in SIDES:
        raise InputError(f"contralateral selection needs the tumor side (left or right), got {side!r}")
    return "right" if side == "left" else "left"


def select_side(dense: BinaryMask3D, breast: BinaryMask3D, side: str) -> tuple[BinaryMask3D, BinaryMask3D]:
    if side == "whole":
        return dense, breast
    pick = 0 if side == "left" else 1
    return split_laterality(dense)[pick], split_laterality(breast)[pick]


# ---------------------------------------------------------------- output helpers


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_density_csv(records: Sequence[DensityRecord], path: str | Path | None) -> None:
    fh = sys.stdout if path is None else open(path, "w", newline="", encoding="utf-8")
    try:
        w = _writer(fh)
        w.writerow(DENSITY_HEADER)
        for r in records:
            w.writerow([r.subject_id, r.side, f"{r.density:.6f}", r.dense_voxels, r.breast_voxels])
    finally:
        if path is not None:
            fh.close()


def write_profile_csv(profile: SliceProfile, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(("slice_index", "dense_voxels", "breast_voxels", "density"))
        for s in profile.per_slice:
            w.writerow([s.index, s.dense_voxels, s.breast_voxels, "NA" if s.empty else f"{s.density:.6f}"])


def _fmt(x: float) -> str:
    return "NA" if x != x else f"{x:.6f}"


def _write_rows(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _distribution_rows(summaries) -> list[list]:
    return [[s.bin, s.n, _fmt(s.mean), _fmt(s.std), _fmt(s.q1), _fmt(s.median), _fmt(s.q3)] for s in summaries]


# ---------------------------------------------------------------- commands


def load_volume(path: str | Path, kind: str = "auto") -> Volume3D:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"input not found: {path}")
    if kind == "auto":
        kind = "dicom_dir" if path.is_dir() else "portable"
    if kind in ("dicom", "dicom_dir"):
        volume, _ = load_dicom_series(path)
        return volume
    return load_portable_volume(path)


def cmd_ingest(args: argparse.Namespace) -> int:
    volume = load_volume(args.input, args.format)
    save_portable_volume(volume, args.out)
    dims = "x".join(str(n) for n in volume.dims)
    spacing = ", ".join(f"{s:g}" for s in volume.spacing)
    print(f"dims {dims}  spacing_mm ({spacing})  orientation {volume.orientation}  -> {args.out}")
    return EXIT_OK


def run_segmentation(volume: Volume3D, cfg: RunConfig):
    return segment_volume(
        volume,
        BackendSpec.parse(cfg.breast),
        BackendSpec.parse(cfg.dense),
        threshold=cfg.threshold,
        patch_size=cfg.patch_size,
        steps=cfg.steps,
    )


def cmd_segment(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args)
    out = Path(args.out or cfg.output_dir or ".")
    volume = load_volume(args.volume)
    seg = run_segmentation(volume, cfg)
    out.mkdir(parents=True, exist_ok=True)
    save_mask(seg.breast, out / "breast_mask.json", volume.spacing)
    save_mask(seg.dense, out / "dense_mask.json", volume.spacing)
    run = {
        "version": __version__,
        "input": str(args.volume),
        "dims": list(volume.dims),
        "config": cfg.to_dict(),
        "breast_backend": BackendSpec.parse(cfg.breast).describe(),
        "dense_backend": BackendSpec.parse(cfg.dense).describe(),
        "patches": len(seg.plan),
        "breast_voxels": seg.breast.count(),
        "dense_voxels": seg.dense.count(),
    }
    (out / "run.json").write_text(json.dumps(run, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"breast {seg.breast.count()} voxels, dense {seg.dense.count()} voxels, {len(seg.plan)} patches -> {out}")
    return EXIT_OK


def cmd_quantify(args: argparse.Namespace) -> int:
    side = parse_laterality(args.laterality, args.tumor_side)
    dense = load_mask(args.dense)
    breast = load_mask(args.breast)
    if dense.dims != breast.dims:
        raise InputError(f"mask dims differ: dense {dense.dims} vs breast {breast.dims}")
    d, b = select_side(dense, breast, side)
    subject = args.subject_id or Path(args.dense).parent.name
    record = compute_density(d, b, subject_id=subject, side=side)
    if args.profile:
        write_profile_csv(slice_density_profile(d, b, axis=args.axis), args.profile)
    write_density_csv([record], args.out)
    return EXIT_OK


def _read_manifest(path: Path) -> list[dict]:
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = tuple(h.strip() for h in next(reader, ()))
        if header != MANIFEST_HEADER:
            raise InputError(f"{path}: line 1: expected header {','.join(MANIFEST_HEADER)}")
        rows, seen = [], set()
        for row in reader:
            if not any(c.strip() for c in row):
                continue
            where = f"{path}: line {reader.line_num}"
            if len(row) != len(MANIFEST_HEADER):
                raise InputError(f"{where}: expected {len(MANIFEST_HEADER)} fields, got {len(row)}")
            entry = dict(zip(MANIFEST_HEADER, (c.strip() for c in row)))
            if entry["subject_id"] in seen:
                raise InputError(f"{where}: duplicate subject_id {entry['subject_id']!r}")
            seen.add(entry["subject_id"])
            if entry["kind"] not in INPUT_KINDS:
                raise InputError(f"{where}: kind must be one of {INPUT_KINDS}, got {entry['kind']!r}")
            try:
                entry["age"] = float(entry["age"])
            except ValueError:
                raise InputError(f"{where}: age {entry['age']!r} is not a number") from None
            for key in ("input", "report"):
                if entry[key]:
                    p = Path(entry[key])
                    p = p if p.is_absolute() else path.parent / p
                    if not p.exists():
                        raise InputError(f"{where}: {key} path not found: {p}")
                    entry[key] = p
            entry["dataset"] = entry["dataset"] or "internal"
            rows.append(entry)
    if not rows:
        raise InputError(f"{path}: manifest has no subjects")
    return rows


def _run_manifest(path: Path, cfg: RunConfig, out: Path) -> list[CohortRecord]:
    """Segment and quantify every manifest subject, in manifest order."""
    side = parse_laterality(cfg.laterality)
    records, exceptions = [], []
    for entry in _read_manifest(path):
        sid = entry["subject_id"]
        volume = load_volume(entry["input"], entry["kind"])
        seg = run_segmentation(volume, cfg)
        d, b = select_side(seg.dense, seg.breast, side)
        density = compute_density(d, b, subject_id=sid, side=side)
        category = None
        if entry["report"]:
            try:
                category = parse_density_category(Path(entry["report"]).read_text(encoding="utf-8"))
            except InputError as exc:
                exceptions.append((sid, str(exc)))
                logger.warning("%s: report not categorized: %s", sid, exc)
        records.append(CohortRecord(sid, entry["dataset"], entry["age"], density.density, category))
        logger.info("%s: density %.6f", sid, density.density)
    write_cohort_csv(records, out / "cohort.csv")
    _write_rows(out / "report_exceptions.csv", ("subject_id", "reason"), exceptions)
    return records


def cmd_cohort(args: argparse.Namespace) -> int:
    src = Path(args.input)
    if not src.exists():
        raise FileNotFoundError(f"input not found: {src}")
    with src.open(encoding="utf-8") as fh:
        first = fh.readline().strip()
    out = Path(args.out)
    if tuple(h.strip() for h in first.split(",")) == MANIFEST_HEADER:
        cfg = load_config(args.config, args)
        out.mkdir(parents=True, exist_ok=True)
        records = _run_manifest(src, cfg, out)
    else:
        records = read_cohort_csv(src)
        out.mkdir(parents=True, exist_ok=True)

    summary = cohort_summary(records, ddof=args.ddof, include_all=True)
    _write_rows(
        out / "summary.csv",
        ("dataset", "n", "mean", "std"),
        [[g.group, g.n, _fmt(g.mean), _fmt(g.std)] for g in summary],
    )
    edges, counts = histogram([r.density for r in records], args.bin_width)
    _write_rows(
        out / "histogram.csv",
        ("bin_lo", "bin_hi", "count"),
        [[_fmt(edges[i]), _fmt(edges[i + 1]), int(counts[i])] for i in range(counts.size)],
    )
    bins, excluded = age_group_stats(records, ddof=args.ddof)
    if excluded:
        logger.warning("%d record(s) outside the 20-89 age range excluded from age bins", excluded)
    _write_rows(out / "age_bins.csv", ("age_bin", "n", "mean", "std", "q1", "median", "q3"), _distribution_rows(bins))
    for g in summary:
        print(f"{g.group}: n={g.n} density {g.mean:.3f} +/- {g.std:.3f}")
    return EXIT_OK


def cmd_correlate(args: argparse.Namespace) -> int:
    records = read_cohort_csv(args.cohort)
    paired = [r for r in records if r.mammo_category is not None]
    if len(paired) < 3:
        raise InputError(f"correlation needs >= 3 records with a category, got {len(paired)}")
    density = [r.density for r in paired]
    rank = [int(r.mammo_category) for r in paired]
    results = [spearman(density, rank), kendall_tau(density, rank)]

    table = []
    for cat in DensityCategory:
        values = [r.density for r in paired if r.mammo_category == cat]
        if values:
            table.append(distribution_summary(cat.token, values, ddof=args.ddof))

    extra = []
    if args.classify:
        clf, accuracy = fit_threshold_classifier(paired, args.split_ratio, args.seed)
        dense_label = [int(c >= DensityCategory.HETEROGENEOUSLY_DENSE) for c in rank]
        auc = auc_binary(density, dense_label)
        extra = [
            ("thresholds", " ".join(f"{t:.6f}" for t in clf.thresholds)),
            ("test_accuracy", f"{accuracy:.6f}"),
            ("auc_dense_vs_nondense", f"{auc:.6f}"),
        ]

    for res in results:
        print(f"{res.method}: coefficient {res.coefficient:.6f}  p {res.p_value:.6g}  n {res.n}")
    for key, value in extra:
        print(f"{key}: {value}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_rows(
            out / "correlation.csv",
            ("method", "coefficient", "p_value", "n"),
            [[r.method, f"{r.coefficient:.6f}", f"{r.p_value:.6g}", r.n] for r in results],
        )
        _write_rows(
            out / "category_density.csv",
            ("category", "n", "mean", "std", "q1", "median", "q3"),
            _distribution_rows(table),
        )
        if extra:
            _write_rows(out / "classifier.csv", ("quantity", "value"), extra)
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    pred, truth = load_mask(args.pred), load_mask(args.truth)
    spacing = read_header(args.truth)["spacing_mm"] if args.use_spacing else None
    metrics = SegMetrics(dice(pred, truth), hausdorff(pred, truth, spacing))
    print(metrics.table_row())
    return EXIT_OK


def cmd_parse_reports(args: argparse.Namespace) -> int:
    corpus = Path(args.corpus)
    if not corpus.exists():
        raise FileNotFoundError(f"corpus not found: {corpus}")
    try:
        parsed = parse_corpus(read_corpus(corpus))
    except UnicodeDecodeError as exc:
        raise InputError(f"{corpus}: unreadable report text ({exc})") from exc
    out = Path(args.out)
    exceptions = Path(args.exceptions) if args.exceptions else out.with_name(out.stem + "_exceptions.csv")
    _write_rows(out, ("subject_id", "category"), [[p.subject_id, p.category.token] for p in parsed if p.category])
    _write_rows(exceptions, ("subject_id", "reason"), [[p.subject_id, p.reason] for p in parsed if not p.category])
    n_bad = sum(p.category is None for p in parsed)
    print(f"{len(parsed) - n_bad} categorized, {n_bad} exception(s) -> {exceptions}")
    return EXIT_OK


def cmd_phantom(args: argparse.Namespace) -> int:
    spec = PhantomSpec()
    if args.spec:
        try:
            data = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InputError(f"phantom spec {args.spec}: malformed JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise InputError(f"phantom spec {args.spec}: expected a JSON object")
        spec = PhantomSpec.from_dict(data)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    volume, breast, dense = generate_phantom(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_portable_volume(volume, out / "volume.json")
    save_mask(breast, out / "breast_truth.json", spec.spacing)
    save_mask(dense, out / "dense_truth.json", spec.spacing)
    voxelized = compute_density(dense, breast).density
    print(f"dense fraction: analytic {analytic_dense_fraction(spec):.6f}  voxelized {voxelized:.6f}")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _add_pipeline_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--threshold", type=float, help="binarization threshold in (0, 1)")
    p.add_argument("--patch-size", dest="patch_size", type=int)
    p.add_argument("--steps", type=_steps_arg, help="steps per axis, e.g. 8,8,3")
    p.add_argument("--breast", help="breast backend: fcm[:k=v,...] | oracle:<mask> | import:<probs>")
    p.add_argument("--dense", help="dense backend: fcm[:k=v,...] | oracle:<mask> | import:<probs>")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mrdensity", description="Breast MRI density toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="DICOM series or portable volume -> portable volume")
    p.add_argument("input")
    p.add_argument("--format", choices=("auto", "dicom", "portable"), default="auto")
    p.add_argument("--out", required=True, help="output header path (.json)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("segment", help="two-stage breast and dense segmentation")
    p.add_argument("volume", help="portable volume header or DICOM directory")
    p.add_argument("--out", help="output directory")
    _add_pipeline_options(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("quantify", help="density ratio from a dense/breast mask pair")
    p.add_argument("--dense", required=True)
    p.add_argument("--breast", required=True)
    p.add_argument("--laterality", default="whole", help="whole|left|right|contralateral[:<tumor side>]")
    p.add_argument("--tumor-side", dest="tumor_side", choices=SIDES)
    p.add_argument("--subject-id", dest="subject_id")
    p.add_argument("--axis", type=int, choices=(0, 1, 2), default=2)
    p.add_argument("--profile", help="write the per-slice profile CSV here")
    p.add_argument("--out", help="density CSV (default stdout)")
    p.set_defaults(func=cmd_quantify)

    p = sub.add_parser("cohort", help="summaries from a cohort CSV or a subject manifest")
    p.add_argument("input")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--bin-width", dest="bin_width", type=float, default=0.02)
    p.add_argument("--ddof", type=int, choices=(0, 1), default=0)
    _add_pipeline_options(p)
    p.add_argument("--laterality", help="manifest mode: whole|left|right|contralateral:<tumor side>")
    p.set_defaults(func=cmd_cohort)

    p = sub.add_parser("correlate", help="rank correlation of density with report category")
    p.add_argument("cohort")
    p.add_argument("--out", help="output directory for CSV tables")
    p.add_argument("--ddof", type=int, choices=(0, 1), default=0)
    p.add_argument("--classify", action="store_true", help="also fit the threshold classifier")
    p.add_argument("--split-ratio", dest="split_ratio", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("evaluate", help="DSC and Hausdorff distance of a predicted mask")
    p.add_argument("pred")
    p.add_argument("truth")
    p.add_argument("--use-spacing", dest="use_spacing", action="store_true", help="HD in mm instead of voxels")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("parse-reports", help="density category from report text")
    p.add_argument("corpus", help="directory of .txt reports or CSV subject_id,report_text")
    p.add_argument("--out", required=True)
    p.add_argument("--exceptions", help="default: <out>_exceptions.csv")
    p.set_defaults(func=cmd_parse_reports)

    p = sub.add_parser("phantom", help="synthetic phantom with ground-truth masks")
    p.add_argument("--spec", help="JSON phantom spec (defaults used when omitted)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_phantom)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, FileNotFoundError, IsADirectoryError, NotADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ComputationError as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
