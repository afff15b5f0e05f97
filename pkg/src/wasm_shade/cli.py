"""Command-line interface: obfuscate, compare, train, detect, evade, bench, report."""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .corpus import ROOT as CORPUS_ROOT
from .corpus import load_fixtures
from .errors import DegenerateCorpus, SemanticsViolation, WasmShadeError
from .fnv import fnv1a64
from .interp import differential_check
from .mutate import KINDS, MutationTrace, TransformationSpec, apply, default_suite, module_digest, stack
from .wasm import encode_module, parse_module, validate

EXIT_OK, EXIT_INPUT, EXIT_SEMANTICS, EXIT_DEGENERATE = 0, 1, 2, 3
REPORT_VERSION = 1
BUNDLED_MANIFEST = CORPUS_ROOT / "manifest.json"


class InputError(Exception):
    pass


# helpers ------------------------------------------------------------------------

def _digest(data: bytes) -> str:
    return f"{fnv1a64(data):016x}"


def _read_module(path):
    data = Path(path).read_bytes()
    m = parse_module(data)
    v = validate(m)
    if not v.ok:
        raise InputError(f"{path}: invalid module: {v.violations[0]}")
    return data, m


def _suite_for(data, m):
    """The bundled fixture's suite when the input is a bundled binary, else a generic sweep."""
    d = _digest(data)
    for f in load_fixtures():
        if _digest(f.data) == d:
            return [(e, tuple(a)) for e, a in f.suite]
    return default_suite(m)


def load_manifest(path):
    """Entries as (name, label, path, bytes) plus a digest of names, labels and contents."""
    path = Path(path)
    entries = json.loads(path.read_text())
    if isinstance(entries, dict):
        entries = entries.get("entries")
    if not isinstance(entries, list) or not entries:
        raise InputError(f"{path}: manifest must be a non-empty list of entries")
    out, names = [], set()
    for e in entries:
        try:
            name, label, rel = e["name"], e["label"], e["path"]
        except (KeyError, TypeError):
            raise InputError(f"{path}: every entry needs name, label and path") from None
        if label not in ("miner", "benign"):
            raise InputError(f"{path}: entry {name!r} has label {label!r}")
        if name in names:
            raise InputError(f"{path}: duplicate entry name {name!r}")
        names.add(name)
        data = (path.parent / rel).read_bytes()
        parse_module(data)
        out.append((name, label, rel, data))
    rows = sorted(f"{n}:{lab}:{_digest(d)}" for n, lab, _, d in out)
    return out, _digest("\n".join(rows).encode())


def _report(command, seed=None, corpus_digest=None, **body):
    return {"format": "wasm-shade-report", "version": REPORT_VERSION, "command": command,
            "tool_version": __version__, "seed": seed, "corpus_digest": corpus_digest, **body}


def _emit(obj, out):
    json.dump(obj, out, indent=2, sort_keys=True, allow_nan=False)
    out.write("\n")


def _write_text(path, text):
    Path(path).write_text(text)


def _env_seed():
    raw = os.environ.get("WASM_SHADE_SEED")
    if raw is None or raw == "":
        return 0
    try:
        return int(raw, 0)
    except ValueError:
        raise InputError(f"WASM_SHADE_SEED must be an integer, got {raw!r}") from None


def _kinds(text):
    kinds = tuple(k.strip() for k in text.split(",") if k.strip())
    bad = [k for k in kinds if k not in KINDS]
    if bad or not kinds:
        raise InputError(f"unknown transformation kind(s): {', '.join(bad) or '(none)'}")
    return kinds


def _load_model(path):
    from .detect import DetectorModel

    return DetectorModel.load(path)


# commands ---------------------------------------------------------------------

def cmd_obfuscate(a, out):
    data, m = _read_module(a.input)
    seed = a.seed
    suite = _suite_for(data, m)
    if a.kind:
        if a.kind not in KINDS:
            raise InputError(f"unknown transformation kind {a.kind!r}")
        spec = TransformationSpec(a.kind, seed)
        res, entry = apply(m, spec, 1)
        trace = MutationTrace(module_digest(m), module_digest(res), [entry])
        v = validate(res)
        if not v.ok:
            raise SemanticsViolation(1, f"invalid module: {v.violations[0]}", trace)
        r = differential_check(m, res, suite)
        if not r:
            raise SemanticsViolation(1, r.detail, trace)
        kinds = (a.kind,)
    else:
        kinds = _kinds(a.allowed) if a.allowed else KINDS
        res, trace = stack(m, a.stack, seed, kinds, a.check_every, suite)
    blob = encode_module(res)
    Path(a.output).write_bytes(blob)
    if a.trace:
        _write_text(a.trace, trace.to_jsonl())
    _emit(_report(
        "obfuscate", seed, _digest(data),
        input_digest=trace.input_digest, output_digest=trace.output_digest,
        kinds=sorted(kinds), iterations=len(trace.entries),
        applied=sum(e.applied for e in trace.entries),
        size={"before": len(data), "after": len(blob),
              "increase_pct": (len(blob) - len(data)) / len(data) * 100.0},
    ), out)


def cmd_compare(a, out):
    from .simdist import distance_report, write_csv

    da, ma = _read_module(a.orig)
    db, mb = _read_module(a.obf)
    rep = distance_report(ma, mb, a.method, a.cost, a.radius)
    if a.csv:
        buf = io.StringIO()
        write_csv([(f"{Path(a.orig).name}:{Path(a.obf).name}", rep)], buf)
        _write_text(a.csv, buf.getvalue())
    _emit(_report("compare", None, _digest(da + db), distance=rep.to_json(),
                  orig_digest=_digest(da), obf_digest=_digest(db)), out)


def cmd_train(a, out):
    from .detect import predict, train_detector
    from .metrics import ConfusionCounts, detection_scores

    entries, digest = load_manifest(a.manifest)
    corpus = [(d, lab) for _, lab, _, d in entries]
    model = train_detector(corpus, a.kind, seed=a.seed)
    model.metadata["manifest_digest"] = digest
    model.save(a.out)
    pred = [predict(model, d).label for d in (x for x, _ in corpus)]
    counts = ConfusionCounts.from_labels([lab for _, lab in corpus], pred)
    _emit(_report("train", a.seed, digest, kind=a.kind, model=str(a.out),
                  training=detection_scores(counts)), out)


def _verdicts(model, entries, jobs):
    from .detect import predict

    def one(e):
        name, label, rel, data = e
        v = predict(model, data)
        return {"name": name, "path": rel, "label": label, "predicted": v.label,
                "miner_probability": v.miner_probability, "evidence": v.evidence}

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            return list(pool.map(one, entries))
    return [one(e) for e in entries]


def cmd_detect(a, out):
    from .metrics import ConfusionCounts, detection_scores

    model = _load_model(a.model)
    if a.input:
        data = Path(a.input).read_bytes()
        parse_module(data)
        entries, digest = [(Path(a.input).name, None, str(a.input), data)], _digest(data)
    else:
        entries, digest = load_manifest(a.manifest)
    records = _verdicts(model, entries, a.jobs)
    body = {"model_kind": model.kind, "verdicts": records}
    if all(r["label"] is not None for r in records):
        counts = ConfusionCounts.from_labels([r["label"] for r in records],
                                             [r["predicted"] for r in records])
        body["scores"] = detection_scores(counts)
    if a.csv:
        buf = io.StringIO()
        buf.write("name,label,predicted,miner_probability\n")
        for r in records:
            buf.write(f"{r['name']},{r['label'] or ''},{r['predicted']},{r['miner_probability']!r}\n")
        _write_text(a.csv, buf.getvalue())
    _emit(_report("detect", None, digest, **body), out)


def cmd_evade(a, out):
    from .evade import evade_random, evade_strategic

    data, m = _read_module(a.input)
    model = _load_model(a.model)
    suite = _suite_for(data, m)
    kinds = _kinds(a.allowed) if a.allowed else KINDS
    if a.min_probability is not None:
        from .detect import predict

        p = predict(model, m).miner_probability
        if p < a.min_probability:
            raise InputError(f"initial miner probability {p:.3f} is below --min-probability")
    common = dict(max_iters=a.max_iters, seed=a.seed, allowed=kinds, stop_below=a.stop_below,
                  check_every=a.check_every, suite=suite)
    try:
        if a.strategy == "strategic":
            tr = evade_strategic(m, model, top_k=a.top_k, trials_per_kind=a.trials, **common)
        else:
            tr = evade_random(m, model, **common)
    except ValueError as e:
        raise InputError(str(e)) from None
    if a.out:
        Path(a.out).write_bytes(encode_module(tr.module))
    if a.trace:
        _write_text(a.trace, tr.mutations.to_jsonl())
    if a.csv:
        buf = io.StringIO()
        tr.write_csv(buf)
        _write_text(a.csv, buf.getvalue())
    _emit(_report("evade", a.seed, _digest(data), strategy=a.strategy, model_kind=model.kind,
                  trace=tr.to_json()), out)


def cmd_bench(a, out):
    from .metrics import bench_hash_rate

    data, m = _read_module(a.input)
    r = bench_hash_rate(m, a.export, warmup=a.warmup, duration=a.duration)
    _emit(_report("bench", None, _digest(data), export=a.export,
                  fuel_per_hash=r.fuel_per_hash, proxy_rate=r.proxy_rate,
                  wall_clock={"hashes": r.hashes, "seconds": r.seconds, "rate": r.rate}), out)


def cmd_report(a, out):
    reports = []
    for p in a.merge:
        obj = json.loads(Path(p).read_text())
        if not isinstance(obj, dict) or obj.get("format") != "wasm-shade-report":
            raise InputError(f"{p}: not a wasm-shade report")
        reports.append(obj)
    digests = {r.get("corpus_digest") for r in reports}
    if len(digests) > 1:
        raise InputError("cannot merge reports with different corpus digests: "
                         + ", ".join(sorted(str(d) for d in digests)))
    _emit(_report("report", None, digests.pop(),
                  seeds=sorted({r["seed"] for r in reports if r.get("seed") is not None}),
                  records=reports), out)


# argument parsing ---------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="wasm-shade", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    o = sub.add_parser("obfuscate", help="apply one or a stack of transformations")
    o.add_argument("--in", dest="input", required=True)
    o.add_argument("--out", dest="output", required=True)
    g = o.add_mutually_exclusive_group(required=True)
    g.add_argument("--kind")
    g.add_argument("--stack", type=int)
    o.add_argument("--seed", type=int)
    o.add_argument("--allowed", help="comma-separated transformation kinds")
    o.add_argument("--check-every", type=int, default=100)
    o.add_argument("--trace", help="write the mutation trace as JSONL")
    o.set_defaults(func=cmd_obfuscate)

    c = sub.add_parser("compare", help="DTW distance between two binaries")
    c.add_argument("--orig", required=True)
    c.add_argument("--obf", required=True)
    c.add_argument("--method", choices=("exact", "fast"), default="fast")
    c.add_argument("--radius", type=int, default=10)
    c.add_argument("--cost", choices=("mismatch", "absdiff"), default="mismatch")
    c.add_argument("--csv")
    c.set_defaults(func=cmd_compare)

    from .detect import MODEL_KINDS

    t = sub.add_parser("train", help="fit a detector on a labelled manifest")
    t.add_argument("--kind", choices=MODEL_KINDS, required=True)
    t.add_argument("--manifest", default=str(BUNDLED_MANIFEST))
    t.add_argument("--seed", type=int)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    d = sub.add_parser("detect", help="classify binaries with a trained model")
    d.add_argument("--model", required=True)
    src = d.add_mutually_exclusive_group()
    src.add_argument("--manifest", default=str(BUNDLED_MANIFEST))
    src.add_argument("--in", dest="input")
    d.add_argument("--jobs", type=int, default=1)
    d.add_argument("--csv")
    d.set_defaults(func=cmd_detect)

    e = sub.add_parser("evade", help="search for a transformation stack the model misses")
    e.add_argument("--in", dest="input", required=True)
    e.add_argument("--model", required=True)
    e.add_argument("--strategy", choices=("random", "strategic"), default="strategic")
    e.add_argument("--max-iters", type=int, default=1000)
    e.add_argument("--seed", type=int)
    e.add_argument("--allowed")
    e.add_argument("--top-k", type=int, default=2)
    e.add_argument("--trials", type=int, default=30)
    e.add_argument("--stop-below", type=float, default=0.5)
    e.add_argument("--min-probability", type=float,
                   help="only attack inputs the model already scores at least this high")
    e.add_argument("--check-every", type=int, default=100)
    e.add_argument("--out")
    e.add_argument("--trace")
    e.add_argument("--csv")
    e.set_defaults(func=cmd_evade)

    b = sub.add_parser("bench", help="wall-clock and fuel-proxy hash rate")
    b.add_argument("--in", dest="input", required=True)
    b.add_argument("--export", default="hash")
    b.add_argument("--duration", type=float, default=10.0)
    b.add_argument("--warmup", type=float, default=2.0)
    b.set_defaults(func=cmd_bench)

    r = sub.add_parser("report", help="merge reports produced on the same corpus")
    r.add_argument("--merge", nargs="+", required=True)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    try:
        if hasattr(args, "seed") and args.seed is None:
            args.seed = _env_seed()
        args.func(args, out)
    except SemanticsViolation as e:
        print(f"wasm-shade: semantic violation: {e}", file=sys.stderr)
        return EXIT_SEMANTICS
    except DegenerateCorpus as e:
        print(f"wasm-shade: degenerate training corpus: {e}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (InputError, WasmShadeError, OSError, ValueError, KeyError) as e:
        print(f"wasm-shade: {e}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
