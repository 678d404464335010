"""JSON reports, CSV tables and run manifests."""
from __future__ import annotations

import csv
import json
import platform
from dataclasses import asdict
from importlib import metadata
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy

from .checks import CheckResult


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    return obj


def versions() -> dict[str, str]:
    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:  # pragma: no cover
        pkg = "unknown"
    return {"shearlab": pkg, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def build_manifest(config_hash: str, command: str, grids: dict, files: Sequence[str] = ()) -> dict:
    return {"config_hash": config_hash, "command": command, "grids": jsonable(grids),
            "versions": versions(), "files": sorted(files)}


def check_record(r: CheckResult) -> dict:
    d = asdict(r)
    d["pass"] = d.pop("passed")
    return jsonable(d)


def emit_report(results: Iterable[CheckResult], out_dir: str | Path, manifest: dict,
                scenario: dict | None = None) -> Path:
    """Write report.json and manifest.json; returns the report path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    checks = [check_record(r) for r in results]
    report = {"scenario": jsonable(scenario or {}), "checks": checks,
              "all_passed": all(c["pass"] for c in checks), "manifest": manifest}
    path = out / "report.json"
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def read_report(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())


def _cell(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=",", lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(x) for x in row])
    return path


def complex_columns(name: str) -> list[str]:
    return [f"{name}_re", f"{name}_im"]


def split_complex(z) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]
