"""Result files and run manifests.

A run directory holds ``archive.csv``, ``boxes.json``, ``lower_bounds.json``,
``history.jsonl`` and ``manifest.json``.  Everything except the ``run``
block of the manifest (timestamps, wall-clock times, thread count) is a
pure function of the manifest, so replaying it reproduces the other four
files byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
import math
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

OUTPUT_FILES = ("archive.csv", "boxes.json", "lower_bounds.json", "history.jsonl", "manifest.json")
MANIFEST_VERSION = 1


def _finite(x):
    return None if x is None or not math.isfinite(x) else float(x)


def boxes_payload(state) -> dict:
    return {"k": int(state.k), "bnv": int(state.bnv), "boxes": [b.to_json() for b in state.boxes.boxes()]}


def lower_bounds_payload(state) -> dict:
    sets = []
    for bid, pts, imp in zip(state.boxes.ids, state.lower_points, state.improved):
        rows = [[_finite(v) for v in p] for p in np.asarray(pts, dtype=float)]
        sets.append({"box_id": int(bid), "improved": bool(imp), "points": rows})
    return {"k": int(state.k), "lower_bounds": sets}


def history_lines(stats) -> str:
    return "".join(json.dumps(s.record(), sort_keys=True) + "\n" for s in stats)


def write_outputs(out, state, manifest: dict) -> list[Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    payloads = {
        "archive.csv": state.archive.to_csv(),
        "boxes.json": json.dumps(boxes_payload(state), indent=1) + "\n",
        "lower_bounds.json": json.dumps(lower_bounds_payload(state), indent=1) + "\n",
        "history.jsonl": history_lines(state.stats),
    }
    paths = []
    for name, text in payloads.items():
        p = out / name
        p.write_text(text, encoding="utf-8")
        paths.append(p)
    manifest = dict(manifest)
    run = dict(manifest.get("run", {}))
    run["outputs"] = {name: str(out / name) for name in OUTPUT_FILES}
    run["wall_ms"] = [round(s.wall_ms, 3) for s in state.stats]
    run.setdefault("finished", now())
    manifest["run"] = run
    p = out / "manifest.json"
    p.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    paths.append(p)
    return paths


def now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def read_manifest(path) -> dict:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if data.get("version") != MANIFEST_VERSION:
        raise ValueError(f"unsupported manifest version {data.get('version')!r}")
    for key in ("problem", "algo", "config"):
        if key not in data:
            raise ValueError(f"manifest lacks {key!r}")
    return data


def curves_csv(rows, value: str) -> str:
    """Long-format CSV ``k,algo,<value>`` from ``(k, algo, v)`` tuples."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "algo", value])
    for k, algo, v in rows:
        w.writerow([k, algo, "" if v is None or (isinstance(v, float) and not math.isfinite(v)) else repr(v) if isinstance(v, float) else v])
    return buf.getvalue()
