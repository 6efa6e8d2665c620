"""Command-line entry point: ``gazesynth <subcommand> [options]``.

Failures print one line, ``gazesynth: error: <Kind>: <message>``, on stderr and
exit with status 1; malformed command lines exit with status 2 after the usage
text.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .conditioning import ReferenceEncoder, load_external_embeddings
from .data.config import RunConfig, dump_config, load_config
from .data.io import (DEFAULT_SCHEMA, list_recordings, load_recording_csv, write_recording_csv,
                      write_velocity_csv)
from .data.simulator import default_profiles, simulate_recording
from .diffusion.training import (DiffusionModel, build_windows, synthesize_recording,
                                 train_diffusion)
from .events import EventKind, idt_segment
from .gan import (GanModel, LabeledSegmentDataset, build_segment_dataset, synthesize_like,
                  synthesize_scanpath, train_gan)
from .quality import EventsConfig, MetricsConfig, QualityReport, build_report, similarity_report
from .signal import GazeRecording, velocity_pair

log = logging.getLogger("gazesynth")

SEGMENT_FILES = {EventKind.FIXATION: "fixations.npz", EventKind.SACCADE: "saccades.npz"}


class CliError(RuntimeError):
    pass


def _load_dir(directory, columns: dict[str, str] | None = None) -> list[GazeRecording]:
    paths = list_recordings(directory)
    if not paths:
        raise CliError(f"no recording CSVs in {directory}")
    return [load_recording_csv(p, columns) for p in paths]


def parse_columns(text: str | None) -> dict[str, str] | None:
    """``field=column,...`` to a schema map for recordings with foreign column names."""
    if not text:
        return None
    out = {}
    for item in text.split(","):
        field_name, sep, column = (part.strip() for part in item.partition("="))
        if not sep or not field_name or not column:
            raise CliError(f"--columns expects field=column pairs, got {item.strip()!r}")
        if field_name not in DEFAULT_SCHEMA:
            raise CliError(f"--columns: unknown field {field_name!r} "
                           f"(fields: {', '.join(DEFAULT_SCHEMA)})")
        out[field_name] = column
    return out


def _replace(cfg, **changes):
    changes = {k: v for k, v in changes.items() if v is not None}
    return dataclasses.replace(cfg, **changes) if changes else cfg


# --- subcommands --------------------------------------------------------------------------

def cmd_simulate(args, cfg: RunConfig) -> None:
    cfg = _replace(cfg, task=args.task, duration_s=args.duration_s, rate_hz=args.rate_hz,
                   n_subjects=args.subjects, sessions=args.sessions)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    settings = cfg.settings()
    for prof in default_profiles(cfg.n_subjects, cfg.seed):
        for s in range(cfg.sessions):
            rec = simulate_recording(prof, settings, session=s)
            write_recording_csv(rec, out / f"{prof.subject_id}_{cfg.task}_{s:02d}.csv")
    (out / "run_config.txt").write_text(dump_config(cfg))
    log.info("wrote %d recordings to %s", cfg.n_subjects * cfg.sessions, out)


def cmd_preprocess(args, cfg: RunConfig) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for path in list_recordings(args.input):
        rec = load_recording_csv(path)
        v, v0 = velocity_pair(rec, cfg.diffusion.intermediate_hz)
        meta = {"subject_id": rec.subject_id, "task_label": rec.task_label,
                "sample_rate_hz": rec.sample_rate_hz, "intermediate_hz": cfg.diffusion.intermediate_hz}
        write_velocity_csv(out / f"{path.stem}.vel.csv", rec.t_ms, v, v0, meta)


def cmd_segment(args, cfg: RunConfig) -> None:
    recs = _load_dir(args.input, args.columns)
    segs = []
    for rec in recs:
        segs += idt_segment(rec, cfg.dispersion_deg, cfg.min_fix_ms)
    subjects = sorted({r.subject_id for r in recs})
    smap = {s: i for i, s in enumerate(subjects)}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for kind, gcfg in ((EventKind.FIXATION, cfg.fix_gan), (EventKind.SACCADE, cfg.sac_gan)):
        ds = build_segment_dataset(segs, kind, _replace(gcfg, rate_hz=recs[0].sample_rate_hz), smap)
        ds.save(out / SEGMENT_FILES[kind])
        log.info("%s: %d segments", kind.value, len(ds))


def cmd_train_diffusion(args, cfg: RunConfig) -> None:
    dcfg = _replace(cfg.diffusion, epochs=args.epochs, seed=args.seed)
    recs = _load_dir(args.input, args.columns)
    encoder = ReferenceEncoder()
    external = load_external_embeddings(args.embeddings) if args.embeddings else None
    windows = build_windows(recs, dcfg, encoder, external)
    if not windows:
        raise CliError(f"recordings are shorter than one {dcfg.window_s} s model window")
    model = train_diffusion(windows, encoder, dcfg,
                            progress=lambda r: log.info("epoch %d L=%.5f", r["epoch"], r["L"]))
    if external:
        model.subject_embeddings.update({k: e.values for k, e in external.items()})
    model.save(args.out)


def cmd_train_gan(args, cfg: RunConfig) -> None:
    out = Path(args.out)
    for kind, gcfg in ((EventKind.FIXATION, cfg.fix_gan), (EventKind.SACCADE, cfg.sac_gan)):
        ds = LabeledSegmentDataset.load(Path(args.input) / SEGMENT_FILES[kind])
        gcfg = _replace(gcfg, epochs=args.epochs, seed=args.seed, rate_hz=ds.rate_hz)
        model = train_gan(ds, gcfg, progress=lambda r, k=kind: log.info(
            "%s epoch %d L_D=%.4f L_G=%.4f", k.value, r["epoch"], r["L_D"], r["L_G"]))
        model.save(out / kind.value)


def _gan_recording(fix: GanModel, sac: GanModel, subject: str, ref: GazeRecording | None,
                   n_fixations: int | None, rng) -> GazeRecording:
    if ref is None:
        return synthesize_scanpath(fix, sac, subject, n_fixations or 10, rng)
    return synthesize_like(fix, sac, subject, ref, rng, n_fixations)


def cmd_synthesize(args, cfg: RunConfig) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    refs = _load_dir(args.reference, args.columns) if args.reference else []
    if args.model == "diffusion":
        if not refs:
            raise CliError("diffusion synthesis needs --reference recordings to follow")
        model = DiffusionModel.load(args.model_dir)
        known = sorted(model.subject_embeddings)
    else:
        fix = GanModel.load(Path(args.model_dir) / "fixation")
        sac = GanModel.load(Path(args.model_dir) / "saccade")
        known = sorted(fix.subject_map)
    subjects = known if args.subject == "all" else [args.subject]
    for s in subjects:
        if s not in known:
            raise CliError(f"subject {s!r} is not in the model (known: {', '.join(known)})")
    rng = np.random.default_rng(args.seed)
    written = 0
    for s in subjects:
        mine = [r for r in refs if r.subject_id == s]
        if refs and not mine:
            raise CliError(f"no reference recordings for subject {s!r}")
        for k, ref in enumerate(mine or [None]):
            if args.model == "diffusion":
                rec = synthesize_recording(model, ref, model.subject_embeddings[s], rng, s)
            else:
                rec = _gan_recording(fix, sac, s, ref, args.n_fixations, rng)
            task = ref.task_label if ref is not None else "synthetic"
            write_recording_csv(rec, out / f"{s}_{task}_{k:02d}.csv")
            written += 1
    log.info("wrote %d synthetic recordings to %s", written, out)


def cmd_evaluate(args, cfg: RunConfig) -> None:
    real = _load_dir(args.real, args.columns)
    synth = _load_dir(args.synth)

    def keyed(recs):
        out = {}
        for r in recs:
            out.setdefault((r.subject_id, r.task_label), r)
        return out

    # similarity compares the first recording per (subject, task) on each side
    sim, pairs = similarity_report(list(keyed(real).values()), list(keyed(synth).values()))
    report = build_report(synth, EventsConfig(cfg.dispersion_deg, cfg.min_fix_ms, cfg.bin_ms),
                          MetricsConfig(precision_method=cfg.precision_method),
                          model_label=args.label, similarity=sim)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    (out / "report.csv").write_text(report.to_csv())
    with open(out / "similarity_pairs.csv", "w") as fh:
        fh.write("subject_id,task_label,cosine\n")
        for s, t, c in pairs:
            fh.write(f"{s},{t},{c!r}\n")


def cmd_report(args, cfg: RunConfig) -> None:
    report = QualityReport.from_dict(json.loads(Path(args.input).read_text()))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.csv").write_text(report.to_csv())
    (out / "report.svg").write_text(report.to_svg())
    lines = [f"| task | metric | {' | '.join(c for c in _cells(report))} |",
             "|---|---|" + "---|" * len(_cells(report))]
    for task in sorted(report.tables):
        for metric, cells in sorted(report.tables[task].items()):
            vals = ["-" if cells.get(c) is None else f"{cells[c]:.4f}" for c in _cells(report)]
            lines.append(f"| {task} | {metric} | {' | '.join(vals)} |")
    for task, val in sorted(report.similarity.items()):
        lines.append(f"\ncosine similarity ({task}): {val:.4f}")
    (out / "report.md").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))


def _cells(report: QualityReport) -> list[str]:
    return sorted({c for t in report.tables.values() for m in t.values() for c in m})


# --- parser -----------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    # SUPPRESS lets the global flags go before or after the subcommand without the
    # subparser defaults overwriting values given earlier
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="global seed (default: config seed)")
    common.add_argument("--config", default=argparse.SUPPRESS, help="key = value run configuration file")
    common.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS,
                        help="log progress to stderr")
    common.add_argument("--columns", default=argparse.SUPPRESS, metavar="FIELD=COL,...",
                        help="column names of input recordings, e.g. n_ms=time,x_deg=x "
                             "(applies to real data, not to gazesynth outputs)")

    p = argparse.ArgumentParser(prog="gazesynth", parents=[common],
                                description="Subject-conditioned gaze synthesis and evaluation.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    s = sub.add_parser("simulate", parents=[common], help="write a toy dataset of recordings")
    s.add_argument("--subjects", type=int)
    s.add_argument("--sessions", type=int)
    s.add_argument("--task", choices=["HSS", "RAN", "FIX"])
    s.add_argument("--duration-s", type=float)
    s.add_argument("--rate-hz", type=float)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("preprocess", parents=[common], help="velocity and identity-removed velocity CSVs")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_preprocess)

    s = sub.add_parser("segment", parents=[common], help="I-DT fixation/saccade datasets")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_segment)

    s = sub.add_parser("train-diffusion", parents=[common], help="train the conditional DDPM")
    s.add_argument("--in", dest="input", required=True, help="directory of recording CSVs")
    s.add_argument("--out", required=True)
    s.add_argument("--epochs", type=int)
    s.add_argument("--embeddings", help="CSV of externally computed subject embeddings")
    s.set_defaults(func=cmd_train_diffusion)

    s = sub.add_parser("train-gan", parents=[common], help="train the fixation and saccade GANs")
    s.add_argument("--in", dest="input", required=True, help="directory written by 'segment'")
    s.add_argument("--out", required=True)
    s.add_argument("--epochs", type=int)
    s.set_defaults(func=cmd_train_gan)

    s = sub.add_parser("synthesize", parents=[common], help="write synthetic recordings")
    s.add_argument("--model", choices=["diffusion", "gan"], required=True)
    s.add_argument("--model-dir", required=True)
    s.add_argument("--subject", required=True, help="subject id or 'all'")
    s.add_argument("--reference", help="directory of real recordings to follow")
    s.add_argument("--n-fixations", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synthesize)

    s = sub.add_parser("evaluate", parents=[common], help="quality report of synthetic vs real data")
    s.add_argument("--real", required=True)
    s.add_argument("--synth", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--label", default="model")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("report", parents=[common], help="render a report.json as tables and SVG")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    for name, default in (("seed", None), ("config", None), ("verbose", False), ("columns", None)):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
        args.seed = cfg.seed
        args.columns = parse_columns(args.columns)
        args.func(args, cfg)
    except Exception as exc:  # noqa: BLE001 - every failure becomes one diagnostic line
        msg = " ".join(str(exc).split())
        print(f"gazesynth: error: {type(exc).__name__}: {msg}", file=sys.stderr)
        if args.verbose:
            log.debug("traceback", exc_info=True)
        return 1
    return 0


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
