"""Render experiment figures from the simulator's CSV exports.

Sweep CSVs carry the header `scheme,variable,value,surrogate_bits,mc_mean,
mc_se,ee,iterations,seed,flags`; convergence traces carry
`scheme,iteration,rate_bits,violation_h`. Rendering is read-only and
timestamp-free, so the same inputs produce byte-identical images.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

FIGURE_KINDS = ("rate-vs-N", "rate-vs-K0", "rate-vs-Pmax", "ee-vs-Pmax",
                "convergence")
_SWEEP_XLABEL = {
    "rate-vs-N": "number of DMA elements N",
    "rate-vs-K0": "Rician factor K0 (dB)",
    "rate-vs-Pmax": "transmit power budget (dBm)",
    "ee-vs-Pmax": "transmit power budget (dBm)",
}


class PlotError(ValueError):
    """Bad plot specification or CSV content."""


@dataclass
class PlotSpec:
    csv: list[str]
    kind: str
    out: str
    schemes: list[str] = field(default_factory=list)

    def __post_init__(self):
        if isinstance(self.csv, str):
            self.csv = [self.csv]
        if self.kind not in FIGURE_KINDS:
            raise PlotError(f"unknown figure kind {self.kind!r}; "
                            f"expected one of {FIGURE_KINDS}")
        if not self.csv:
            raise PlotError("at least one input CSV is required")


def load_spec(path: str) -> PlotSpec:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise PlotError("plot spec must be a JSON object")
    unknown = set(raw) - {"csv", "kind", "out", "schemes"}
    if unknown:
        raise PlotError(f"unknown spec keys: {sorted(unknown)}")
    try:
        return PlotSpec(csv=raw["csv"], kind=raw["kind"], out=raw["out"],
                        schemes=list(raw.get("schemes", [])))
    except KeyError as exc:
        raise PlotError(f"missing spec key: {exc.args[0]}") from exc


def read_rows(paths: list[str], required: tuple[str, ...]) -> list[dict]:
    rows = []
    for path in paths:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            for col in required:
                if col not in header:
                    raise PlotError(f"missing column {col!r} in {path}")
            rows.extend(reader)
    return rows


def _to_float(row: dict, key: str) -> float:
    try:
        return float(row[key])
    except (TypeError, ValueError):
        return math.nan


def _filter_schemes(rows: list[dict], schemes: list[str]) -> list[dict]:
    if schemes:
        rows = [r for r in rows if r["scheme"] in schemes]
    if not rows:
        raise PlotError("no rows left after the scheme filter; nothing to plot")
    return rows


def _by_scheme(rows: list[dict]) -> dict[str, list[dict]]:
    out: dict[str, list[dict]] = {}
    for row in rows:
        out.setdefault(row["scheme"], []).append(row)
    return out


def _sorted_xy(rows: list[dict], ykey: str):
    pts = sorted((( _to_float(r, "value"), _to_float(r, ykey),
                    _to_float(r, "mc_se")) for r in rows),
                 key=lambda t: t[0])
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    es = [p[2] for p in pts]
    return xs, ys, es


def _render_rate_sweep(spec: PlotSpec, ax) -> None:
    rows = _filter_schemes(
        read_rows(spec.csv, ("scheme", "value", "mc_mean", "mc_se",
                             "surrogate_bits")),
        spec.schemes)
    for scheme, group in sorted(_by_scheme(rows).items()):
        xs, ys, es = _sorted_xy(group, "mc_mean")
        ax.errorbar(xs, ys, yerr=es, marker="o", capsize=3, label=scheme)
        sx, sy, _ = _sorted_xy(group, "surrogate_bits")
        if any(not math.isnan(v) for v in sy):
            ax.plot(sx, sy, linestyle="--", alpha=0.7,
                    label=f"{scheme} (closed form)")
    ax.set_xlabel(_SWEEP_XLABEL[spec.kind])
    ax.set_ylabel("ergodic sum rate (bits/s/Hz)")
    ax.grid(True, alpha=0.3)
    ax.legend()


def _render_ee(spec: PlotSpec, ax) -> None:
    rows = _filter_schemes(read_rows(spec.csv, ("scheme", "value", "ee")),
                           spec.schemes)
    groups = sorted(_by_scheme(rows).items())
    values = sorted({_to_float(r, "value") for r in rows})
    width = 0.8 / max(1, len(groups))
    for i, (scheme, group) in enumerate(groups):
        by_val = {_to_float(r, "value"): _to_float(r, "ee") for r in group}
        xs = [values.index(v) + i * width for v in values if v in by_val]
        ys = [by_val[v] for v in values if v in by_val]
        ax.bar(xs, ys, width=width, label=scheme)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(values))])
    ax.set_xticklabels([f"{v:g}" for v in values])
    ax.set_xlabel(_SWEEP_XLABEL[spec.kind])
    ax.set_ylabel("energy efficiency (bits/s/Hz/W)")
    ax.grid(True, axis="y", alpha=0.3)
    ax.legend()


def _render_convergence(spec: PlotSpec, fig) -> None:
    rows = _filter_schemes(
        read_rows(spec.csv, ("scheme", "iteration", "rate_bits",
                             "violation_h")),
        spec.schemes)
    ax_rate, ax_h = fig.subplots(2, 1, sharex=True)
    for scheme, group in sorted(_by_scheme(rows).items()):
        pts = sorted(((_to_float(r, "iteration"), _to_float(r, "rate_bits"),
                       _to_float(r, "violation_h")) for r in group),
                     key=lambda t: t[0])
        its = [p[0] for p in pts]
        ax_rate.plot(its, [p[1] for p in pts], marker=".", label=scheme)
        hs = [p[2] for p in pts]
        if any(not math.isnan(h) for h in hs):
            ax_h.semilogy(its, hs, marker=".", label=scheme)
    ax_rate.set_ylabel("sum rate (bits/s/Hz)")
    ax_rate.grid(True, alpha=0.3)
    ax_rate.legend()
    ax_h.set_xlabel("outer iteration")
    ax_h.set_ylabel("constraint violation")
    ax_h.grid(True, alpha=0.3, which="both")


def render(spec: PlotSpec) -> str:
    """Render one figure to spec.out; returns the output path."""
    fig = plt.figure(figsize=(7, 5) if spec.kind != "convergence" else (7, 7))
    try:
        if spec.kind == "convergence":
            _render_convergence(spec, fig)
        else:
            ax = fig.subplots()
            if spec.kind == "ee-vs-Pmax":
                _render_ee(spec, ax)
            else:
                _render_rate_sweep(spec, ax)
        fig.tight_layout()
        fig.savefig(spec.out, dpi=150, metadata={"Software": "dmaplot"})
    finally:
        plt.close(fig)
    return spec.out
