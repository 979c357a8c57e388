"""Side-by-side comparison of two metrics reports.

Deltas are signed so that a positive number always means the first report
(normally the RFID policy) did better than the second (the baseline).
"""

from __future__ import annotations

import csv
import io
import json

# Published comparison figures for other optimization models, reproduced
# verbatim for context.  Units differ from the simulator's (Gbps, kWh) and the
# accuracy column has no computed counterpart.
LITERATURE_HEADER = (
    "Optimization Model", "Spectrum Utilization (%)", "Latency (ms)",
    "Throughput (Gbps)", "Energy Consumption (KWh)", "Accuracy (%)",
)
LITERATURE_ROWS = (
    ("SDN-Based Model", "85", "40", "8.8", "450", "92"),
    ("DL-Based Model", "88", "38", "9.0", "420", "94"),
    ("Proposed RFID-Based Model", "90", "35", "9.2", "400", "96"),
)

METRIC_HEADER = ("policy", "spectrum_utilization_pct", "mean_latency_ms", "throughput_bps", "energy_joules")


def _rel(num, den):
    if den == 0:
        return 0.0 if num == 0 else None
    return num / den * 100.0


def deltas(a, b):
    """Improvement of report ``a`` over report ``b`` (dicts or MetricsReports)."""
    a = a if isinstance(a, dict) else a.to_dict()
    b = b if isinstance(b, dict) else b.to_dict()
    return {
        "utilization_pp": (a["spectrum_utilization"] - b["spectrum_utilization"]) * 100.0,
        "latency_pct": _rel(b["mean_latency_ms"] - a["mean_latency_ms"], b["mean_latency_ms"]),
        "throughput_pct": _rel(a["throughput_bps"] - b["throughput_bps"], b["throughput_bps"]),
        "energy_pct": _rel(b["energy_joules"] - a["energy_joules"], b["energy_joules"]),
    }


def _fmt(v, nd=2):
    return "n/a" if v is None else f"{v:.{nd}f}"


def _metric_row(r):
    return (r["policy"], f"{r['spectrum_utilization'] * 100:.2f}", f"{r['mean_latency_ms']:.3f}",
            f"{r['throughput_bps']:.1f}", f"{r['energy_joules']:.3f}")


SUMMARY_KEYS = ("policy", "spectrum_utilization", "mean_latency_ms", "throughput_bps",
                "energy_joules", "seed", "scenario_digest")


def comparison(a, b, with_literature=False):
    out = {
        "a": {k: a[k] for k in SUMMARY_KEYS},
        "b": {k: b[k] for k in SUMMARY_KEYS},
        "deltas": deltas(a, b),
        "scenario_mismatch": a["scenario_digest"] != b["scenario_digest"],
    }
    if with_literature:
        out["literature"] = [dict(zip(LITERATURE_HEADER, row)) for row in LITERATURE_ROWS]
    return out


def render(a, b, fmt="markdown", with_literature=False):
    cmp = comparison(a, b, with_literature)
    d = cmp["deltas"]
    delta_row = ("delta", f"{_fmt(d['utilization_pp'])} pp", f"{_fmt(d['latency_pct'])} %",
                 f"{_fmt(d['throughput_pct'])} %", f"{_fmt(d['energy_pct'])} %")
    rows = [_metric_row(a), _metric_row(b), delta_row]

    if fmt == "json":
        return json.dumps(cmp, sort_keys=True, indent=1) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(METRIC_HEADER)
        w.writerows(rows)
        if with_literature:
            buf.write("\n")
            w.writerow(LITERATURE_HEADER)
            w.writerows(LITERATURE_ROWS)
        return buf.getvalue()
    if fmt == "markdown":
        lines = []
        if cmp["scenario_mismatch"]:
            lines += ["> warning: the two reports come from different scenarios", ""]
        lines += _md_table(METRIC_HEADER, rows)
        if with_literature:
            lines += ["", "Literature reference values (quoted, not computed by this tool):", ""]
            lines += _md_table(LITERATURE_HEADER, LITERATURE_ROWS)
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def _md_table(header, rows):
    out = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    out += ["| " + " | ".join(row) + " |" for row in rows]
    return out
