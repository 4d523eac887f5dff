"""Deterministic CSV, report, and gnuplot-script writers.

All numeric CSV fields use the %.12e format with explicit "\n" line
endings so that repeated runs of the same configuration are
byte-identical.
"""

from __future__ import annotations

from pathlib import Path


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.12e}"
    if isinstance(value, int):
        return str(value)
    return str(value)


def write_csv(path, header, rows) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_value(v) for v in row) + "\n")


def write_report(path, lines) -> None:
    """Write a key-value text block; ``lines`` is an iterable of (key, value)
    pairs or pre-formatted strings."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for item in lines:
            if isinstance(item, str):
                fh.write(item + "\n")
            else:
                key, value = item
                fh.write(f"{key} = {format_value(value)}\n")


def write_gnuplot(path, csv_name: str, kind: str, title: str) -> None:
    """Emit a small gnuplot script that plots the companion CSV."""
    lines = [
        "set datafile separator \",\"",
        f"set title \"{title}\"",
        "set key left top",
    ]
    if kind == "eigen":
        lines += [
            "set xlabel \"coordinate\"",
            "set ylabel \"phi\"",
            f"plot \"{csv_name}\" using 2:3 skip 1 with lines title \"phi\"",
        ]
    elif kind == "scalar_sweep":
        lines += [
            "set logscale xy",
            "set xlabel \"|lambda1 - sigma|\"",
            "set ylabel \"|u1|\"",
            f"plot \"{csv_name}\" using (abs($2)):(abs($3)) skip 1 "
            "with linespoints title \"|u1|\"",
        ]
    elif kind == "system_sweep":
        lines += [
            "set logscale xy",
            "set xlabel \"|nu - mu|\"",
            "set ylabel \"collar ratio magnitude\"",
            f"plot \"{csv_name}\" using (abs($2)):(abs($4)) skip 1 "
            "with linespoints title \"u1 min ratio\", \\",
            f"     \"{csv_name}\" using (abs($2)):(abs($6)) skip 1 "
            "with linespoints title \"u2 min ratio\"",
        ]
    elif kind == "system":
        lines += [
            "set xlabel \"coordinate\"",
            "set ylabel \"components\"",
            f"plot \"{csv_name}\" using 2:4 skip 1 with lines title \"u1\", \\",
            f"     \"{csv_name}\" using 2:5 skip 1 with lines title \"u2\"",
        ]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
