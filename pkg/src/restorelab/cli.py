"""Command-line entry point.

Exit status is 0 on success, 1 on a usage error and 2 when a command fails
at run time.  With ``--json`` a machine-readable summary goes to stdout.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import dsp, losses, metrics, pipeline, restore, rir, synth
from .config import ToolConfig, load_config
from .dsp import AudioBuffer
from .wavio import FORMATS, WavError, read_wav, write_wav

log = logging.getLogger("restorelab")

EXIT_USAGE = 1
EXIT_RUNTIME = 2
DEFAULT_ROOMS = 4
TASKS = ("sr", "declip", "dereverb", "gsr")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


# ---------------------------------------------------------------------------
# file helpers


def _wav_files(path: Path) -> list[Path]:
    if path.is_dir():
        files = sorted(path.glob("*.wav"))
        if not files:
            raise ValueError(f"no .wav files in {path}")
        return files
    if not path.exists():
        raise FileNotFoundError(f"{path} does not exist")
    return [path]


def load_pool(paths, rate: int = pipeline.SAMPLE_RATE) -> dict[str, AudioBuffer]:
    """Read WAV files (or directories of them) keyed by file stem, at ``rate``."""
    pool = {}
    for p in paths:
        for f in _wav_files(Path(p)):
            a = read_wav(f)
            if a.sample_rate != rate:
                a = dsp.resample(a, rate)
            key = f.name[:-4] if f.name.endswith(".wav") else f.stem
            if key in pool:
                raise ValueError(f"duplicate utterance id {key!r}")
            pool[key] = a
    return pool


def _write_jsonl(path: Path, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(json.dumps(r, sort_keys=True) + "\n")


def _read_jsonl(path: Path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if line.strip():
                try:
                    rows.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{path}:{n}: {exc}") from None
    return rows


def write_pairs(out: Path, pairs, fmt: str) -> dict:
    """Write target/degraded WAVs plus manifest and record sidecars."""
    out.mkdir(parents=True, exist_ok=True)
    manifest, records = [], []
    for p in pairs:
        t_name, d_name = f"{p.id}.target.wav", f"{p.id}.degraded.wav"
        write_wav(out / t_name, p.target, fmt)
        write_wav(out / d_name, p.degraded, fmt)
        manifest.append({"id": p.id, "target": t_name, "degraded": d_name, **p.meta})
        if p.record is not None:
            records.append({"id": p.id, **p.record.to_dict()})
    _write_jsonl(out / "manifest.jsonl", manifest)
    if records:
        _write_jsonl(out / "records.jsonl", records)
    return {"pairs": len(manifest), "out": str(out),
            "distorted": sum(1 for r in records if not r["undistorted"])}


def _noise_pool(args, cfg):
    if args.noise:
        return load_pool(args.noise)
    return synth.noise_pool(cfg.seed)


def _rir_pool(args, cfg):
    if args.rir:
        return load_pool(args.rir)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x5212]))
    return {f"room{i:03d}": rir.simulate_rir(rir.sample_room(rng)).audio
            for i in range(args.rooms)}


def _config(args) -> ToolConfig:
    cfg = load_config(args.config)
    d = cfg.to_dict()
    if getattr(args, "seed", None) is not None:
        d["seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        d["workers"] = args.workers
    return ToolConfig.from_dict(d)


# ---------------------------------------------------------------------------
# commands


def cmd_degrade(args) -> dict:
    cfg = _config(args)
    corpus = load_pool(args.corpus)
    noise = _noise_pool(args, cfg) if cfg.distortion.p5 > 0 else {}
    rirs = _rir_pool(args, cfg) if cfg.distortion.p1 > 0 else {}
    pairs = pipeline.degrade_corpus(corpus, noise, rirs, cfg.distortion, cfg.seed, cfg.workers)
    return write_pairs(Path(args.out), pairs, args.format)


def cmd_build_testset(args) -> dict:
    cfg = _config(args)
    corpus = load_pool(args.corpus)
    if args.task == "sr":
        if args.rate is None:
            raise UsageError("build-testset sr needs --rate")
        pairs = pipeline.build_sr_testset(corpus, args.rate, cfg.workers)
    elif args.task == "declip":
        if args.eta is None:
            raise UsageError("build-testset declip needs --eta")
        pairs = pipeline.build_declip_testset(corpus, args.eta, cfg.workers)
    elif args.task == "dereverb":
        pairs = pipeline.build_dereverb_testset(corpus, _rir_pool(args, cfg), cfg.seed,
                                                cfg.workers)
    else:
        pairs = pipeline.build_gsr_testset(corpus, _noise_pool(args, cfg), _rir_pool(args, cfg),
                                           cfg.distortion, cfg.seed, workers=cfg.workers)
    summary = write_pairs(Path(args.out), pairs, args.format)
    summary["task"] = args.task
    return summary


def cmd_rir_gen(args) -> dict:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    rows = []
    for i in range(args.count):
        room = rir.sample_room(rng)
        ir = rir.simulate_rir(room, sample_rate=args.sample_rate)
        name = f"rir{i:04d}.wav"
        write_wav(out / name, ir.audio, args.format)
        rows.append({"id": name[:-4], "file": name, "sample_rate": args.sample_rate,
                     "distance": room.distance, **room.to_dict()})
    _write_jsonl(out / "rooms.jsonl", rows)
    return {"count": args.count, "out": str(out)}


def cmd_evaluate(args) -> dict:
    cfg = _config(args)
    manifest = Path(args.pairs)
    base = manifest.parent
    rows = _read_jsonl(manifest)

    def triples():
        for r in rows:
            est_key = "estimate" if "estimate" in r else "degraded"
            if "id" not in r or "target" not in r or est_key not in r:
                raise ValueError(f"manifest row lacks id/target/estimate: {r}")
            yield r["id"], read_wav(base / r["target"]), read_wav(base / r[est_key])

    report = metrics.evaluate(triples(), cfg.metrics)
    out = Path(args.out)
    if out.suffix.lower() == ".csv":
        out.write_text(report.to_csv(), encoding="utf-8")
    else:
        out.write_text(report.to_json() + "\n", encoding="utf-8")
    return {"out": str(out), "count": len(report.rows), "aggregate": report.aggregate,
            "failed": report.to_dict()["failed"]}


def cmd_losses(args) -> dict:
    cfg = _config(args)
    a, b = read_wav(args.a), read_wav(args.b)
    if a.sample_rate != b.sample_rate:
        raise ValueError(f"sample rates differ: {a.sample_rate} vs {b.sample_rate}")
    return losses.all_losses(a, b, cfg.multires, cfg.weights, a.sample_rate)


def cmd_restore_oracle(args) -> dict:
    cfg = _config(args)
    rc = cfg.restore
    if args.iterations is not None:
        d = rc.to_dict()
        d["gl_iterations"] = args.iterations
        rc = restore.RestoreConfig(**d)
    degraded, target = read_wav(args.degraded), read_wav(args.target)
    if degraded.sample_rate != target.sample_rate:
        degraded = dsp.resample(degraded, target.sample_rate)
    if len(degraded) != len(target):
        raise ValueError(f"length mismatch: {len(degraded)} vs {len(target)} samples")
    y = restore.restore_oracle(degraded, target, rc)
    write_wav(args.out, y, args.format)
    return {"out": str(args.out), "samples": len(y), "sample_rate": y.sample_rate}


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON tool configuration file")
    common.add_argument("--json", action="store_true", help="print a JSON summary on stdout")
    common.add_argument("-v", "--verbose", action="store_true")

    wav = _Parser(add_help=False)
    wav.add_argument("--format", choices=FORMATS, default="float32",
                     help="WAV sample format for written audio (default float32)")

    pools = _Parser(add_help=False)
    pools.add_argument("--noise", nargs="+", help="noise WAV files or directories")
    pools.add_argument("--rir", nargs="+", help="impulse response WAV files or directories")
    pools.add_argument("--rooms", type=int, default=DEFAULT_ROOMS,
                       help="rooms to simulate when --rir is not given")
    pools.add_argument("--seed", type=int, help="master seed (overrides the config)")
    pools.add_argument("--workers", type=int, help="worker threads (overrides the config)")

    parser = _Parser(prog="restorelab", description="Speech restoration data and evaluation tools")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("degrade", parents=[common, wav, pools],
                       help="apply random distortion chains to a clean corpus")
    p.add_argument("--speech", "--corpus", dest="corpus", nargs="+", required=True,
                   help="clean speech WAV files or directories")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("build-testset", parents=[common, wav, pools],
                       help="build a fixed evaluation set")
    p.add_argument("task", choices=TASKS)
    p.add_argument("--speech", "--corpus", dest="corpus", nargs="+", required=True,
                   help="clean speech WAV files or directories")
    p.add_argument("--out", required=True)
    p.add_argument("--rate", type=int, help="target sample rate for the sr task")
    p.add_argument("--eta", type=float, help="clipping threshold for the declip task")
    p.set_defaults(func=cmd_build_testset)

    p = sub.add_parser("rir-gen", parents=[common, wav], help="simulate random room responses")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sample-rate", type=int, default=pipeline.SAMPLE_RATE)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rir_gen)

    p = sub.add_parser("evaluate", parents=[common], help="score pairs listed in a manifest")
    p.add_argument("--pairs", required=True, help="JSON-lines manifest")
    p.add_argument("--out", required=True, help="report path (.json or .csv)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("losses", parents=[common], help="loss components between two files")
    p.add_argument("--a", required=True, help="estimate")
    p.add_argument("--b", required=True, help="reference")
    p.set_defaults(func=cmd_losses)

    p = sub.add_parser("restore-oracle", parents=[common, wav],
                       help="oracle-mask restoration of a degraded file")
    p.add_argument("--degraded", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--iterations", type=int, help="Griffin-Lim iterations")
    p.set_defaults(func=cmd_restore_oracle)
    return parser


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        for name in ("count", "rooms", "workers"):
            v = getattr(args, name, None)
            if v is not None and v < 1:
                parser.error(f"--{name} must be >= 1")
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        result = args.func(args)
    except UsageError as exc:
        print(f"restorelab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, TypeError, OSError, WavError) as exc:
        print(f"restorelab: {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if args.json:
        print(json.dumps(result, sort_keys=True, default=float))
    return 0


def main() -> None:
    try:
        code = run_cli()
    except SystemExit as exc:
        code = int(exc.code or 0)
    sys.exit(code)


if __name__ == "__main__":
    main()
