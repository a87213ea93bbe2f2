"""Runs every CLI command on a tiny generated set and validates the outputs."""
import json
import pathlib
import subprocess
import sys
import tempfile
import xml.etree.ElementTree as ET

import jsonschema

cli, schema_dir = pathlib.Path(sys.argv[1]), pathlib.Path(sys.argv[2])
schemas = {p.name.removesuffix(".schema.json"): json.loads(p.read_text()) for p in schema_dir.glob("*.schema.json")}
failures = 0


def run(*args):
    r = subprocess.run([str(cli), *map(str, args)], capture_output=True, text=True)
    if r.returncode != 0:
        sys.exit(f"{' '.join(map(str, args))} exited {r.returncode}: {r.stderr}")


def check(path, name):
    global failures
    try:
        jsonschema.validate(json.loads(path.read_text()), schemas[name])
        print(f"ok   {path.name} against {name}")
    except jsonschema.ValidationError as e:
        failures += 1
        print(f"FAIL {path.name} against {name}: {e.message} at {list(e.absolute_path)}")


with tempfile.TemporaryDirectory() as tmp:
    d = pathlib.Path(tmp)
    ds = d / "ds" / "annotations.json"
    plots = d / "plots"
    run("generate", "--out", d / "ds", "--seed", 3, "--frames", 4, "--width", 320, "--height", 180)
    run("perturb", "--dataset", ds, "--out", d / "p.json", "--sigma-b", 2, "--sigma-k", 2, "--lambda-fp", 1, "--mask-px", 1)
    run("evaluate", "--dataset", ds, "--predictions", d / "p.json", "--out", d / "eval.json", "--plots", plots)
    run("kp-eval", "--dataset", ds, "--predictions", d / "p.json", "--out", d / "kp.json", "--plots", plots)
    run("analyze", "occlusion", "--dataset", ds, "--predictions", d / "p.json", "--out", d / "occ.json", "--plots", plots)
    (d / "pts.json").write_text(json.dumps({"series": [
        {"name": "a", "points": [{"n": 125 * 2**i, "ap": 60 + 1.1 * i} for i in range(5)]},
        {"name": "b", "points": [{"n": 125 * 2**i, "ap": 50 + 1.6 * i + 0.1 * (i % 2)} for i in range(5)]}]}))
    run("analyze", "scaling", "--input", d / "pts.json", "--out", d / "scaling.json", "--plots", plots)
    run("analyze", "transfer", "--source", d / "eval.json", "--target", d / "eval.json", "--n-train", 100,
        "--out", d / "transfer.json")
    (d / "ep.json").write_text(json.dumps([{"epoch": 1, "source_ap": 50, "target_ap": 20}, {"epoch": 2, "source_ap": 60}]))
    run("analyze", "epochs", "--input", d / "ep.json", "--out", d / "epochs.json", "--plots", plots)

    for path, name in [(ds, "dataset"), (d / "ds" / "manifest.json", "manifest"), (d / "p.json", "detections"),
                       (d / "eval.json", "eval_summary"), (d / "kp.json", "keypoint_report"),
                       (d / "occ.json", "occlusion_report"), (d / "scaling.json", "scaling_report"),
                       (d / "transfer.json", "transfer_report"), (d / "epochs.json", "epochs_report")]:
        check(path, name)

    svgs = sorted(plots.glob("*.svg"))
    if len(svgs) < 7:
        failures += 1
        print(f"FAIL expected 7 plots, found {[p.name for p in svgs]}")
    for p in svgs:
        try:
            root = ET.parse(p).getroot()
            assert root.tag == "{http://www.w3.org/2000/svg}svg"
            print(f"ok   {p.name} is well-formed SVG")
        except (ET.ParseError, AssertionError) as e:
            failures += 1
            print(f"FAIL {p.name}: {e}")

sys.exit(1 if failures else 0)
