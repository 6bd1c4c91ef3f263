"""``vispflow`` command line.

Exit codes: 0 ok, 2 usage, 3 data/format, 4 numeric (training diverged),
5 unlayoutable. Failures print one JSON object on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import (
    KEYS, RunConfig, RunConfigError, env_threads, format_value, keys_for, write_snapshot,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC, EXIT_UNLAYOUTABLE = 0, 2, 3, 4, 5

# config groups each command reads
COMMAND_GROUPS = {
    "render": ("run", "render"),
    "dataset": ("run", "dataset", "render"),
    "qc": ("run", "qc"),
    "train": ("run", "dataset", "model", "sample", "train"),
    "sample": ("run", "sample"),
    "eval": ("run", "eval"),
}


class UsageError(Exception):
    pass


def _epilog(command):
    lines = ["config keys (key = value in --config; defaults shown):"]
    for k in keys_for(COMMAND_GROUPS[command]):
        lines.append(f"  {k.name} = {format_value(k.default)}    {k.help}")
    return "\n".join(lines)


def _common(p, command):
    p.add_argument("--config", help="key = value run config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    p.add_argument("--seed", type=int, help="override the seed key")
    p.add_argument("--out-dir", help="override the out_dir key")
    p.add_argument("--threads", type=int, help="BLAS and worker threads (fallback: VISPFLOW_THREADS)")
    p.set_defaults(command=command)


def _leaf(sub, command, action, text):
    p = sub.add_parser(action, help=text, epilog=_epilog(command), formatter_class=argparse.RawDescriptionHelpFormatter)
    _common(p, command)
    return p


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.RawDescriptionHelpFormatter
    parser = argparse.ArgumentParser(prog="vispflow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render a text/marker spec onto a canvas", epilog=_epilog("render"),
                       formatter_class=fmt)
    _common(p, "render")
    p.add_argument("spec", help="JSON spec: {width, height, background | base, text, markers, seed}")
    p.add_argument("out", help="output PPM path")

    p = sub.add_parser("dataset", help="build, split or summarize shards", epilog=_epilog("dataset"),
                       formatter_class=fmt)
    dsub = p.add_subparsers(dest="action", required=True)
    b = _leaf(dsub, "dataset", "build", "write a shard from a JSONL manifest or the toy generator")
    b.add_argument("--manifest", help="JSONL of {input, target, category, instruction, root_id, annotations}")
    b.add_argument("--toy", type=int, metavar="N", help="generate N toy pairs (default: toy_pairs key)")
    b.add_argument("--out", required=True, help="shard path")
    s = _leaf(dsub, "dataset", "split", "root-level train/bench split with similarity dedup")
    s.add_argument("--data", help="comma-separated shards (default: data key)")
    s.add_argument("--tau", type=float, help="override tau_split")
    s.add_argument("--out", required=True, help="manifest JSON path")
    st = _leaf(dsub, "dataset", "stats", "record counts per category")
    st.add_argument("--data", help="comma-separated shards (default: data key)")

    p = sub.add_parser("qc", help="quality-control filters over JSON lines", epilog=_epilog("qc"),
                       formatter_class=fmt)
    qsub = p.add_subparsers(dest="action", required=True)
    q = _leaf(qsub, "qc", "cer", 'lines {"source", "hypothesis"} -> cer, pass')
    q.add_argument("--input", default="-", help="JSONL file or - for stdin")
    q = _leaf(qsub, "qc", "dedup", 'lines {"id", "image" | "embedding"} -> retained lines')
    q.add_argument("--input", default="-")
    q.add_argument("--tau", type=float, help="override tau_div")
    q = _leaf(qsub, "qc", "score", 'lines {"p_yes", "p_no"} -> score, retain')
    q.add_argument("--input", default="-")

    p = sub.add_parser("train", help="train the flow model", epilog=_epilog("train"), formatter_class=fmt)
    _common(p, "train")

    p = sub.add_parser("sample", help="generate from an input canvas", epilog=_epilog("sample"),
                       formatter_class=fmt)
    _common(p, "sample")
    p.add_argument("--ckpt", required=True, help="checkpoint (model.json sidecar next to it)")
    p.add_argument("--input", required=True, help="input canvas PPM")
    p.add_argument("--steps", type=int, help="override steps")
    p.add_argument("--cfg", type=float, help="override cfg_scale")
    p.add_argument("--category", default="T2I", help="task category; edit categories enable source modulation")
    p.add_argument("--stochastic", action="store_true", help="draw the start latent with the seed "
                                                              "instead of using the posterior mean")
    p.add_argument("--out", help="output PPM (default: <out_dir>/output.ppm)")

    p = sub.add_parser("eval", help="benchmark metrics and reports", epilog=_epilog("eval"), formatter_class=fmt)
    esub = p.add_subparsers(dest="action", required=True)
    m = _leaf(esub, "eval", "metrics", "directional similarities over a pairs directory")
    m.add_argument("--pairs", required=True)
    r = _leaf(esub, "eval", "report", "pass rates per category and the total")
    r.add_argument("--scores", required=True, help="JSONL score records")
    r.add_argument("--label", default="model")
    return parser


def resolve_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    for item in args.set:
        if "=" not in item:
            raise RunConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        cfg[key.strip()] = value
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out_dir is not None:
        cfg["out_dir"] = args.out_dir
    return cfg


def _threads(args):
    n = args.threads if args.threads is not None else env_threads()
    if n is not None and n < 1:
        raise RunConfigError("--threads must be >= 1")
    return n


def _read_jsonl(path):
    fh = sys.stdin if path == "-" else open(path, encoding="utf-8")
    try:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                try:
                    yield lineno, json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{path}:{lineno}: {exc}") from exc
    finally:
        if fh is not sys.stdin:
            fh.close()


def _emit(obj):
    sys.stdout.write(json.dumps(obj, sort_keys=True) + "\n")


def cmd_render(args, cfg):
    import numpy as np

    from .render import (
        Canvas, MarkerRanges, TextConstraints, load_ppm, render_marker, render_text_instruction, spec_from_json,
    )

    spec = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    if not isinstance(spec, dict):
        raise ValueError("render spec must be a JSON object")
    # precedence: --seed, then the spec's own seed, then the config
    seed = args.seed if args.seed is not None else int(spec.get("seed", cfg["seed"]))
    cfg["seed"] = seed
    rng = np.random.default_rng(seed)
    if spec.get("base"):
        canvas = load_ppm(Path(args.spec).parent / spec["base"])
    else:
        side = cfg["canvas_side"]
        bg = tuple(spec.get("background", (255, 255, 255)))
        canvas = Canvas.blank(int(spec.get("width", side)), int(spec.get("height", side)), bg)
    record = {"seed": seed, "text": None, "markers": []}
    ranges = MarkerRanges(cfg["shaft_min"], cfg["shaft_max"], cfg["marker_width_range"])
    for obj in spec.get("markers", []):
        res = render_marker(canvas, spec_from_json(obj), rng, ranges)
        canvas = res.canvas
        record["markers"].append({**res.record, "clipped": res.clipped})
    if spec.get("text"):
        constraints = TextConstraints(cfg["s_min_range"], cfg["s_max_range"], cfg["box_frac_range"])
        canvas, placement = render_text_instruction(canvas, spec["text"], rng, constraints)
        record["text"] = placement.to_json()
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    canvas.save_ppm(out)
    write_snapshot(cfg, out.parent, "render")
    _emit(record)


def _category_counts(records):
    from . import CATEGORIES

    counts = {c: 0 for c in CATEGORIES}
    for r in records:
        counts[r.category] += 1
    return {c: n for c, n in counts.items() if n}


def _sources(args, cfg):
    if getattr(args, "data", None):
        cfg["data"] = args.data
    sources = cfg.data_sources()
    if not sources:
        raise UsageError("no shards given: pass --data or set the data key")
    return sources


def cmd_dataset(args, cfg, threads):
    from .dataset import PairRecord, load_records, make_toy_dataset, split_by_root, write_shard

    workers = threads or cfg["workers"]
    if args.action == "build":
        if args.manifest and args.toy is not None:
            raise UsageError("--manifest and --toy are exclusive")
        if args.manifest:
            from .render import load_ppm

            base = Path(args.manifest).parent
            records = []
            for lineno, obj in _read_jsonl(args.manifest):
                try:
                    records.append(PairRecord(load_ppm(base / obj["input"]), load_ppm(base / obj["target"]),
                                              obj["category"], obj.get("instruction", ""),
                                              obj.get("annotations", []), obj.get("root_id", ""),
                                              obj.get("extra", {})))
                except KeyError as exc:
                    raise ValueError(f"{args.manifest}:{lineno}: missing field {exc}") from exc
        else:
            if args.toy is not None:
                cfg["toy_pairs"] = args.toy
            records = make_toy_dataset(cfg["toy_pairs"], cfg["seed"], cfg["canvas_side"], cfg["toy_categories"])
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        n = write_shard(records, out)
        write_snapshot(cfg, out.parent, "dataset build")
        _emit({"shard": str(out), "records": n, "categories": _category_counts(records)})
    elif args.action == "split":
        from .qc import GridEmbedder

        if args.tau is not None:
            cfg["tau_split"] = args.tau
        records = load_records(_sources(args, cfg), workers=workers)
        manifest = split_by_root(records, GridEmbedder(), cfg["tau_split"], cfg["bench_fraction"], cfg["seed"])
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(manifest.to_json() + "\n", encoding="utf-8")
        write_snapshot(cfg, out.parent, "dataset split")
        _emit({"manifest": str(out), "train_roots": len(manifest.train_roots),
               "bench_roots": len(manifest.bench_roots), "dropped": manifest.dropped,
               "max_train_bench_similarity": manifest.max_train_bench_similarity})
    else:
        records = load_records(_sources(args, cfg), workers=workers)
        sizes = sorted({(r.input.width, r.input.height) for r in records})
        stats = {"records": len(records), "categories": _category_counts(records),
                 "roots": len({r.root_id for r in records}), "sizes": [list(s) for s in sizes]}
        write_snapshot(cfg, cfg["out_dir"], "dataset stats")
        _emit(stats)


def cmd_qc(args, cfg):
    from . import qc

    if args.action == "cer":
        for lineno, obj in _read_jsonl(args.input):
            value = qc.cer(obj["source"], obj["hypothesis"])
            _emit({**obj, "cer": value, "pass": value <= cfg["tau_ocr"]})
    elif args.action == "dedup":
        from .render import load_ppm

        if args.tau is not None:
            cfg["tau_div"] = args.tau
        rows, items = [], []
        base = Path(args.input).parent if args.input != "-" else Path(".")
        for lineno, obj in _read_jsonl(args.input):
            if "embedding" in obj:
                items.append(obj["embedding"])
            elif "image" in obj:
                items.append(qc.GridEmbedder()(load_ppm(base / obj["image"])))
            else:
                raise ValueError(f"line {lineno}: needs an embedding or an image path")
            rows.append(obj)
        import numpy as np

        kept = qc.diversity_filter([np.asarray(v, dtype=np.float64) for v in items], None, cfg["tau_div"])
        for i in kept:
            _emit(rows[i])
    else:
        for lineno, obj in _read_jsonl(args.input):
            s = qc.logit_score(float(obj["p_yes"]), float(obj["p_no"]))
            _emit({**obj, "score": s, "retain": s >= cfg["score_threshold"]})
    write_snapshot(cfg, cfg["out_dir"], f"qc {args.action}")


def cmd_train(args, cfg, threads):
    from .dataset import make_toy_dataset
    from .flowinone import train

    model_cfg = cfg.model_config()
    sources = cfg.data_sources()
    data = sources or make_toy_dataset(cfg["toy_pairs"], cfg["seed"], cfg["image_side"], cfg["toy_categories"])
    out = write_snapshot(cfg, cfg["out_dir"], "train")
    result = train(data, model_cfg, cfg.train_config(), seed=cfg["seed"], out_dir=out,
                   workers=threads or cfg["workers"])
    first, last = result.rows[0]["total"], result.rows[-1]["total"]
    _emit({"out_dir": str(out), "steps": len(result.rows), "first_total": first, "last_total": last,
           "checkpoints": result.checkpoints})


def cmd_sample(args, cfg):
    import numpy as np

    from .dataset.records import EDIT_CATEGORIES
    from .flowinone import load_model, sample
    from .render import load_ppm
    from . import CATEGORIES

    if args.category not in CATEGORIES:
        raise UsageError(f"unknown category {args.category!r}; expected one of {', '.join(CATEGORIES)}")
    if args.steps is not None:
        cfg["steps"] = args.steps
    if args.cfg is not None:
        cfg["cfg_scale"] = args.cfg
    params, model_cfg = load_model(args.ckpt)
    canvas = load_ppm(args.input)
    if (canvas.width, canvas.height) != (model_cfg.image_side, model_cfg.image_side):
        raise ValueError(f"input is {canvas.width}x{canvas.height}, model expects {model_cfg.image_side}^2")
    rng = np.random.default_rng(cfg["seed"]) if args.stochastic else None
    i_edit = [1 if args.category in EDIT_CATEGORIES else 0]
    (out_canvas,) = sample(params, model_cfg, [canvas], i_edit, cfg["steps"], cfg["cfg_scale"], rng)
    out = Path(args.out) if args.out else Path(cfg["out_dir"]) / "output.ppm"
    out.parent.mkdir(parents=True, exist_ok=True)
    out_canvas.save_ppm(out)
    write_snapshot(cfg, out.parent, "sample")
    _emit({"output": str(out), "steps": cfg["steps"], "cfg_scale": cfg["cfg_scale"], "i_edit": i_edit[0]})


def cmd_eval(args, cfg):
    from .eval import aggregate, load_scores, pair_metrics

    out = write_snapshot(cfg, cfg["out_dir"], f"eval {args.action}")
    if args.action == "metrics":
        if not Path(args.pairs).is_dir():
            raise FileNotFoundError(f"pairs directory {args.pairs} does not exist")
        result = pair_metrics(args.pairs)
        (out / "metrics.json").write_text(json.dumps(result, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        _emit(result)
    else:
        report = aggregate(load_scores(args.scores), cfg["allow_missing"], cfg["aggregate_mode"], args.label)
        (out / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
        sys.stdout.write(report.to_table() + "\n")


def _exit_code(exc) -> int:
    from .dataset import ShardFormatError
    from .flowinone import ConfigError, TrainingDiverged
    from .render import UnlayoutableError

    if isinstance(exc, (UsageError, RunConfigError, ConfigError)):
        return EXIT_USAGE
    if isinstance(exc, TrainingDiverged):
        return EXIT_NUMERIC
    if isinstance(exc, UnlayoutableError):
        return EXIT_UNLAYOUTABLE
    if isinstance(exc, (ShardFormatError, ValueError, KeyError, OSError)):
        return EXIT_DATA
    return None


def _fail(exc, code):
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("step", "components", "offset", "record_index"):
        if getattr(exc, attr, None) is not None:
            err[attr] = getattr(exc, attr)
    sys.stderr.write(json.dumps(err, default=str) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args)
        threads = _threads(args)
    except RunConfigError as exc:
        return _fail(exc, EXIT_USAGE)

    from threadpoolctl import threadpool_limits

    try:
        with threadpool_limits(limits=threads):
            if args.command == "render":
                cmd_render(args, cfg)
            elif args.command == "dataset":
                cmd_dataset(args, cfg, threads)
            elif args.command == "qc":
                cmd_qc(args, cfg)
            elif args.command == "train":
                cmd_train(args, cfg, threads)
            elif args.command == "sample":
                cmd_sample(args, cfg)
            else:
                cmd_eval(args, cfg)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes below
        code = _exit_code(exc)
        if code is None:
            raise
        return _fail(exc, code)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())


__all__ = ["KEYS", "build_parser", "main", "resolve_config"]
