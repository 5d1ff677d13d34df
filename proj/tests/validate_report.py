"""Produces reports with the vt binary and checks them against the shipped schema."""

import csv
import json
import math
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema


def vt(binary, *args):
    subprocess.run([binary, *map(str, args)], check=True, stdout=subprocess.DEVNULL)


def check_report(schema, report_dir):
    doc = json.loads((report_dir / "report.json").read_text())
    jsonschema.validate(doc, schema, cls=jsonschema.Draft202012Validator)
    # The document must survive a serialize/parse round trip unchanged.
    assert json.loads(json.dumps(doc)) == doc

    rows = {}
    with open(report_dir / "report.csv", newline="") as f:
        reader = csv.reader(f)
        assert next(reader) == ["measure", "name", "kind", "x", "y"]
        for meter, name, _kind, x, y in reader:
            rows.setdefault((meter, name), []).append((float(x), float(y)))

    for m in doc["measures"]:
        key = (m["meter"], m["name"])
        if m["status"] != "ok":
            assert key not in rows, key
            continue
        if m["kind"] == "value":
            expected = [(0.0, m["value"])]
        else:
            expected = [tuple(p) for p in m.get("points", m.get("bins"))]
        got = rows.get(key, [])
        assert len(got) == len(expected), key
        for (gx, gy), (ex, ey) in zip(got, expected):
            assert math.isclose(gx, ex, abs_tol=1e-12) and math.isclose(gy, ey, abs_tol=1e-12), key
    return doc


def main():
    binary, schema_path = sys.argv[1], Path(sys.argv[2])
    schema = json.loads(schema_path.read_text())
    jsonschema.Draft202012Validator.check_schema(schema)

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        vt(binary, "synth", tmp / "ref.y4m", "--width", 176, "--height", 144, "--frames", 45)
        vt(binary, "encode", tmp / "ref.y4m", tmp / "rx.vtes", "--gop", 15)
        vt(binary, "decode", tmp / "rx.vtes", tmp / "rx.y4m")
        vt(binary, "analyze", "--rx-vtes", tmp / "rx.vtes", "--rx-y4m", tmp / "rx.y4m",
           "--ref-y4m", tmp / "ref.y4m", "-o", tmp / "full")
        doc = check_report(schema, tmp / "full")
        status = {(m["meter"], m["name"]): m["status"] for m in doc["measures"]}
        assert status[("vq", "psnr")] == "ok"
        assert status[("qos", "plr")] == "skipped"

        vt(binary, "analyze", "--rx-vtes", tmp / "rx.vtes", "-o", tmp / "bs_only")
        check_report(schema, tmp / "bs_only")

        broken = dict(doc, schema_version=2)
        try:
            jsonschema.validate(broken, schema, cls=jsonschema.Draft202012Validator)
        except jsonschema.ValidationError:
            pass
        else:
            raise AssertionError("schema accepted a wrong version")
    print("report schema: ok")


if __name__ == "__main__":
    main()
