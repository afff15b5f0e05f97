import io
import json
import subprocess
from pathlib import Path

import jsonschema
import pytest
from referencing import Registry, Resource

from wasm_shade.cli import BUNDLED_MANIFEST, main
from wasm_shade.corpus import fixture
from wasm_shade.mutate import MutationTrace
from wasm_shade.wasm import parse_module

SCHEMAS = Path(__file__).resolve().parents[1] / "schemas"


def _validator(name):
    schema = json.loads((SCHEMAS / name).read_text())
    registry = Registry().with_resource(schema["$id"], Resource.from_contents(schema))
    return jsonschema.Draft202012Validator(schema, registry=registry)


REPORT = _validator("report.v1.schema.json")
TRACE = _validator("trace.v1.schema.json")
MODEL = _validator("detector.v1.schema.json")


def run(*argv):
    out = io.StringIO()
    code = main([str(a) for a in argv], out)
    text = out.getvalue()
    report = json.loads(text) if text else None
    if report is not None:
        REPORT.validate(report)
    return code, report, text


def path(name):
    return fixture(name).path


@pytest.fixture(scope="module")
def centroid_model(tmp_path_factory):
    p = tmp_path_factory.mktemp("m") / "centroid.json"
    code, rep, _ = run("train", "--kind", "image-centroid", "--out", p, "--seed", 0)
    assert code == 0 and rep["training"]["f1"] == 1.0
    MODEL.validate(json.loads(p.read_text()))
    return p


def test_obfuscate_one_custom_section(tmp_path):
    out = tmp_path / "o.wasm"
    code, rep, _ = run("obfuscate", "--in", path("add"), "--out", out, "--stack", 1, "--seed", 7,
                       "--allowed", "add-custom-section")
    assert code == 0 and rep["applied"] == 1
    a, b = fixture("add").module, parse_module(out.read_bytes())
    assert len(b.customs) == len(a.customs) + 1 and b.replace(customs=a.customs) == a


def test_obfuscate_is_byte_identical(tmp_path):
    outs = []
    for i in range(2):
        out = tmp_path / f"o{i}.wasm"
        assert run("obfuscate", "--in", path("matrix"), "--out", out, "--stack", 40, "--seed", 3)[0] == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_obfuscate_thousand_with_trace(tmp_path):
    trace = tmp_path / "t.jsonl"
    code, rep, _ = run("obfuscate", "--in", path("xor_rotate_hash"), "--out", tmp_path / "o.wasm",
                       "--stack", 1000, "--seed", 7, "--trace", trace)
    assert code == 0 and rep["iterations"] == 1000
    lines = trace.read_text().splitlines()
    for ln in lines:
        TRACE.validate(json.loads(ln))
    assert len(MutationTrace.from_jsonl(trace.read_text()).entries) == 1000


def test_obfuscate_single_kind(tmp_path):
    code, rep, _ = run("obfuscate", "--in", path("cn_lite"), "--out", tmp_path / "o.wasm",
                       "--kind", "peephole", "--seed", 1)
    assert code == 0 and rep["kinds"] == ["peephole"]


def test_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("WASM_SHADE_SEED", "12")
    code, rep, _ = run("obfuscate", "--in", path("add"), "--out", tmp_path / "o.wasm", "--stack", 2)
    assert code == 0 and rep["seed"] == 12
    monkeypatch.setenv("WASM_SHADE_SEED", "twelve")
    assert run("obfuscate", "--in", path("add"), "--out", tmp_path / "o.wasm", "--stack", 2)[0] == 1


def test_input_errors(tmp_path):
    bad = tmp_path / "bad.wasm"
    bad.write_bytes(b"\0wat\1\0\0\0")
    assert run("obfuscate", "--in", bad, "--out", tmp_path / "o.wasm", "--stack", 1)[0] == 1
    assert run("compare", "--orig", tmp_path / "missing.wasm", "--obf", bad)[0] == 1
    assert run("obfuscate", "--in", path("add"), "--out", tmp_path / "o.wasm", "--stack", 1,
               "--allowed", "inline")[0] == 1


def test_semantic_violation_exit_code(tmp_path, monkeypatch):
    import wasm_shade.mutate as mutate
    from wasm_shade.wasm import Instr

    def corrupt(m, rng, params, nimp):
        f = m.functions[0]
        body = (Instr("i32.const", (1,)), Instr("i32.add")) + f.body
        return m.replace(functions=(f._replace(body=body),) + m.functions[1:]), {"bad": True}

    monkeypatch.setitem(mutate._APPLY, "peephole", corrupt)
    code, _, _ = run("obfuscate", "--in", path("add"), "--out", tmp_path / "o.wasm", "--stack", 3,
                     "--allowed", "peephole", "--check-every", 1)
    assert code == 2


def test_compare_self_is_zero():
    for method in ("exact", "fast"):
        code, rep, _ = run("compare", "--orig", path("sha_like"), "--obf", path("sha_like"),
                           "--method", method)
        assert code == 0 and rep["distance"]["distance"] == 0


def test_compare_csv(tmp_path):
    csv = tmp_path / "d.csv"
    code, rep, _ = run("compare", "--orig", path("add"), "--obf", path("matrix"), "--csv", csv,
                       "--cost", "absdiff", "--radius", 3)
    assert code == 0 and rep["distance"]["radius"] == 3
    assert csv.read_text().splitlines()[0].startswith("pair,")


def test_detect_bundled_manifest(centroid_model, tmp_path):
    csv = tmp_path / "v.csv"
    code, rep, _ = run("detect", "--model", centroid_model, "--jobs", 3, "--csv", csv)
    assert code == 0 and rep["scores"]["f1"] == 1.0 and len(rep["verdicts"]) == 18
    assert len(csv.read_text().splitlines()) == 19
    assert run("detect", "--model", centroid_model)[1]["verdicts"] == rep["verdicts"]


def test_detect_single_binary(centroid_model):
    code, rep, _ = run("detect", "--model", centroid_model, "--in", path("cn_lite"))
    assert code == 0 and rep["verdicts"][0]["predicted"] == "miner" and "scores" not in rep


def test_train_degenerate_corpus(tmp_path):
    manifest = tmp_path / "m.json"
    manifest.write_text(json.dumps([{"name": "a", "label": "miner", "path": str(path("cn_lite"))}]))
    assert run("train", "--kind", "feature-naive-bayes", "--manifest", manifest,
               "--out", tmp_path / "x.json")[0] == 3


def test_manifest_validation(tmp_path):
    manifest = tmp_path / "m.json"
    entry = {"name": "a", "label": "miner", "path": str(path("cn_lite"))}
    manifest.write_text(json.dumps([entry, entry]))
    assert run("train", "--kind", "cfg-rules", "--manifest", manifest, "--out", tmp_path / "x")[0] == 1
    manifest.write_text(json.dumps([dict(entry, label="grey")]))
    assert run("train", "--kind", "cfg-rules", "--manifest", manifest, "--out", tmp_path / "x")[0] == 1


def test_evade(centroid_model, tmp_path):
    csv, out = tmp_path / "e.csv", tmp_path / "e.wasm"
    code, rep, _ = run("evade", "--in", path("xor_rotate_hash"), "--model", centroid_model,
                       "--strategy", "strategic", "--max-iters", 200, "--seed", 0, "--csv", csv,
                       "--out", out, "--trials", 5)
    assert code == 0 and rep["trace"]["outcome"] == "evaded"
    assert len(csv.read_text().splitlines()) == rep["trace"]["iterations"] + 2
    parse_module(out.read_bytes())


def test_evade_preselection_filter(centroid_model):
    args = ("evade", "--in", path("blake_like"), "--model", centroid_model, "--max-iters", 5)
    assert run(*args, "--min-probability", 0.95)[0] == 1
    assert run(*args, "--min-probability", 0.85)[0] == 0


def test_evade_benign_input(centroid_model):
    assert run("evade", "--in", path("matrix"), "--model", centroid_model,
               "--strategy", "random")[0] == 1


def test_bench_reports_both_rates():
    code, rep, _ = run("bench", "--in", path("murmur_mix"), "--duration", 0.2, "--warmup", 0.05)
    assert code == 0 and rep["proxy_rate"] > 0 and rep["wall_clock"]["hashes"] > 0


def test_report_merge(tmp_path):
    a, b, c = tmp_path / "a.json", tmp_path / "b.json", tmp_path / "c.json"
    a.write_text(run("compare", "--orig", path("add"), "--obf", path("add"))[2])
    b.write_text(run("compare", "--orig", path("add"), "--obf", path("add"), "--method", "exact")[2])
    c.write_text(run("compare", "--orig", path("add"), "--obf", path("matrix"))[2])
    code, rep, _ = run("report", "--merge", a, b)
    assert code == 0 and len(rep["records"]) == 2
    assert run("report", "--merge", a, c)[0] == 1


def test_console_script():
    r = subprocess.run(["wasm-shade", "compare", "--orig", str(path("add")), "--obf", str(path("add"))],
                       capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["distance"]["distance"] == 0


def test_bundled_manifest_is_an_array():
    entries = json.loads(BUNDLED_MANIFEST.read_text())
    assert isinstance(entries, list) and {e["label"] for e in entries} == {"miner", "benign"}
