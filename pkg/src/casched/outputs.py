"""CSV / JSON artifacts for a simulation result."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from .scheduler import SimResult


def fmt(x) -> str:
    """12 significant digits; infinities as ``inf`` / ``-inf``."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.12g}"


def _json_num(x):
    x = float(x)
    return fmt(x) if not math.isfinite(x) else float(fmt(x))


def _writer(path: Path):
    fh = path.open("w", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def summary(result: SimResult) -> dict:
    return {
        "policy": result.policy.value,
        "total_log_utility": _json_num(result.total_log_utility),
        "min_aggregate_rate": _json_num(result.min_rate),
        "groups": {str(k): v for k, v in result.groups.groups.items()},
        "stages": [
            {
                "carrier_id": s.carrier_id,
                "users": list(s.user_ids),
                "frames": int(len(s.trajectory)),
                "final_objective": _json_num(s.final_objective),
                "oracle_objective": _json_num(s.oracle_value),
                "oracle_gap": _json_num(s.oracle_gap),
                "kkt_residual": _json_num(s.kkt_residual),
                "oracle_kkt_residual": _json_num(s.oracle_residual),
                "max_simplex_error": _json_num(s.max_simplex_error),
            }
            for s in result.stages
        ],
        "aggregate_rate": {str(u): _json_num(r) for u, r in sorted(result.aggregate_rate.items())},
        "warnings": [{"user_id": w.user_id, "distance_m": w.distance, "message": w.message}
                     for w in result.warnings],
    }


def write_outputs(result: SimResult, out_dir) -> list[Path]:
    """Write trajectory, rate, share-matrix and summary files into ``out_dir``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    written = []
    try:
        for s in result.stages:
            path = out / f"trajectory_{s.carrier_id}.csv"
            fh, w = _writer(path)
            with fh:
                w.writerow(["frame", "n", "L_phi"])
                for t, (n, L) in enumerate(zip(s.n, s.trajectory), start=1):
                    w.writerow([t, int(n), fmt(L)])
            written.append(path)

            path = out / f"phi_{s.carrier_id}.csv"
            fh, w = _writer(path)
            with fh:
                w.writerow(["user_id"] + [f"rb_{j}" for j in range(s.phi.shape[1])])
                for uid, row in zip(s.user_ids, s.phi):
                    w.writerow([uid] + [fmt(x) for x in row])
            written.append(path)

        path = out / "rates.csv"
        fh, w = _writer(path)
        with fh:
            w.writerow(["user_id", "carrier_id", "stage_rate", "aggregate_rate"])
            for s in result.stages:
                for uid, r in zip(s.user_ids, s.stage_rate):
                    w.writerow([uid, s.carrier_id, fmt(r), fmt(result.aggregate_rate[uid])])
            for uid, r in sorted(result.aggregate_rate.items()):
                w.writerow([uid, "all", fmt(r), fmt(r)])
        written.append(path)

        path = out / "summary.json"
        path.write_text(json.dumps(summary(result), indent=2) + "\n")
        written.append(path)
    except OSError as exc:
        raise OSError(f"writing outputs to {out}: {exc}") from exc
    return written
