"""Instance files and CSV output."""
import csv
import json
import os

import numpy as np

from .diagnostics import TRACE_COLUMNS
from .exceptions import IoError
from .generators import generate_instance
from .problem import ProblemInstance
from .prox import Regularizer


def instance_to_dict(problem):
    """Coupling data as nested lists plus the generator recipe.

    The oracle is not stored numerically: it is regenerated from the recipe.
    """
    if problem.generator is None:
        raise IoError("only generated instances can be saved (the oracle is rebuilt from its recipe)")
    return {
        "A": problem.A.tolist(),
        "B": [Bj.tolist() for Bj in problem.B],
        "c": problem.c.tolist(),
        "regs": [[reg.kind, reg.weight] for reg in problem.regs],
        "generator": problem.generator,
    }


def save_instance(problem, path):
    data = instance_to_dict(problem)
    try:
        with open(path, "w") as fh:
            # json writes floats with repr, so the round trip is exact
            json.dump(data, fh, indent=1)
    except OSError as exc:
        raise IoError(f"cannot write instance {path}: {exc}") from exc


def load_instance(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise IoError(f"cannot read instance {path}: {exc}") from exc
    base = generate_instance(data["generator"])
    return ProblemInstance(
        A=np.array(data["A"], dtype=float),
        B=[np.array(Bj, dtype=float) for Bj in data["B"]],
        c=np.array(data["c"], dtype=float),
        regs=[Regularizer(kind, float(w)) for kind, w in data["regs"]],
        oracle=base.oracle,
        profile=base.profile,
        generator=data["generator"],
    )


def ensure_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create output directory {path}: {exc}") from exc


def write_rows(path, header, rows):
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_trace(report, path):
    write_rows(path, TRACE_COLUMNS, (rec.row() for rec in report.trace))


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))
