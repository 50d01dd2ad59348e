"""Text file formats: data CSV, groups file, truth file and model file.

Indices are 1-based in every file and 0-based in memory.
"""

from __future__ import annotations

import csv
import json

import numpy as np

from .core import Dataset, FittedModel, GroupStructure

MODEL_SCHEMA_VERSION = 1


class FileFormatError(ValueError):
    pass


def _fmt(v) -> str:
    return repr(float(v))


def write_dataset(path, dataset: Dataset) -> None:
    names = dataset.column_names or tuple("x%d" % (j + 1) for j in range(dataset.p))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(names) + ["y"])
        for row, y in zip(dataset.x, dataset.y):
            w.writerow([_fmt(v) for v in row] + [_fmt(y)])


def _read_table(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FileFormatError("%s: empty file" % path)
    header = [h.strip() for h in rows[0]]
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise FileFormatError("%s:%d: expected %d fields, got %d"
                                  % (path, lineno, len(header), len(row)))
        try:
            data.append([float(c) for c in row])
        except ValueError as exc:
            raise FileFormatError("%s:%d: %s" % (path, lineno, exc)) from None
    if not data:
        raise FileFormatError("%s: no data rows" % path)
    return header, np.asarray(data)


def read_dataset(path) -> Dataset:
    """Read a CSV with a header row whose last column is the response ``y``."""
    header, arr = _read_table(path)
    if len(header) < 2 or header[-1] != "y":
        raise FileFormatError("%s:1: header must list covariates followed by 'y'" % path)
    try:
        return Dataset(arr[:, :-1], arr[:, -1], header[:-1])
    except ValueError as exc:
        raise FileFormatError("%s: %s" % (path, exc)) from None


def read_covariates(path) -> np.ndarray:
    """Covariate matrix of a CSV; a trailing ``y`` column is dropped if present."""
    header, arr = _read_table(path)
    if header[-1] == "y":
        arr = arr[:, :-1]
    if arr.shape[1] == 0 or not np.all(np.isfinite(arr)):
        raise FileFormatError("%s: need finite covariate columns" % path)
    return arr


def format_groups(groups: GroupStructure) -> str:
    return "".join("%s: %s\n" % (name, ",".join(str(j + 1) for j in members))
                   for name, members in groups.groups)


def write_groups(path, groups: GroupStructure) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_groups(groups))


def read_groups(path, p: int) -> GroupStructure:
    """Parse ``name: i,j,k`` lines (1-based); blank lines and ``#`` comments are skipped."""
    groups = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            name, sep, rest = line.partition(":")
            if not sep or not name.strip():
                raise FileFormatError("%s:%d: expected 'name: idx,idx,...'" % (path, lineno))
            try:
                members = [int(tok) - 1 for tok in rest.split(",") if tok.strip()]
            except ValueError:
                raise FileFormatError("%s:%d: indices must be integers" % (path, lineno)) from None
            bad = [j + 1 for j in members if not 0 <= j < p]
            if bad:
                raise FileFormatError("%s:%d: indices out of range 1..%d: %s" % (path, lineno, p, bad))
            groups.append((name.strip(), members))
    try:
        return GroupStructure(tuple(groups), p)
    except ValueError as exc:
        raise FileFormatError("%s: %s" % (path, exc)) from None


def write_truth(path, support, sigma: float) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("support: %s\n" % ",".join(str(j + 1) for j in sorted(support)))
        fh.write("sigma: %s\n" % _fmt(sigma))


def read_truth(path):
    """Return ``(support, sigma)``; sigma is None when absent."""
    support, sigma = None, None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition(":")
            key = key.strip()
            try:
                if key == "support":
                    support = frozenset(int(t) - 1 for t in value.split(",") if t.strip())
                elif key == "sigma":
                    sigma = float(value)
            except ValueError:
                raise FileFormatError("%s:%d: bad value for %r" % (path, lineno, key)) from None
    if support is None:
        raise FileFormatError("%s: missing 'support' line" % path)
    return support, sigma


def _groups_to_json(groups):
    return [{"name": name, "members": [j + 1 for j in members]} for name, members in groups.groups]


def _groups_from_json(obj, p):
    return GroupStructure(tuple((g["name"], [j - 1 for j in g["members"]]) for g in obj), p)


def _model_to_json(model: FittedModel) -> dict:
    return {
        "algorithm": model.algorithm,
        "lambda": model.lam,
        "y_mean": model.y_mean,
        "bandwidths": model.bandwidths.tolist(),
        "active_set": [j + 1 for j in sorted(model.active_set)],
        "f_hat": model.f_hat.tolist(),
        "train_x": model.train_x.T.tolist(),
        "train_y": model.train_y.tolist(),
        "groups": _groups_to_json(model.group_structure),
        "diagnostics": {
            "converged": bool(model.converged),
            "outer_iterations": int(model.n_iter),
            "objective": model.objective,
        },
    }


def _model_from_json(obj, latent=None) -> FittedModel:
    f_hat = np.asarray(obj["f_hat"], dtype=float)
    p = f_hat.shape[0]
    diag = obj.get("diagnostics", {})
    return FittedModel(
        f_hat=f_hat,
        y_mean=obj["y_mean"],
        train_x=np.asarray(obj["train_x"], dtype=float).T,
        train_y=np.asarray(obj["train_y"], dtype=float),
        bandwidths=np.asarray(obj["bandwidths"], dtype=float),
        lam=obj["lambda"],
        active_set=[j - 1 for j in obj["active_set"]],
        group_structure=_groups_from_json(obj["groups"], p),
        algorithm=obj.get("algorithm", "groupspam"),
        converged=diag.get("converged", True),
        n_iter=diag.get("outer_iterations", 0),
        objective=diag.get("objective", float("nan")),
        latent=latent,
    )


def _column_map(groups: GroupStructure):
    # same ordering as the overlap expansion
    return [(j, g) for g, members in enumerate(groups.members) for j in members]


def save_model(path, model: FittedModel) -> None:
    """Write a model file; floats are stored with enough digits to round-trip exactly.

    Overlap fits also carry their latent model and the column map from latent
    copies to (covariate, group) pairs.
    """
    doc = {"schema_version": MODEL_SCHEMA_VERSION}
    doc.update(_model_to_json(model))
    if model.latent is not None:
        doc["latent"] = _model_to_json(model.latent)
        doc["latent"]["column_map"] = [[j + 1, g + 1] for j, g in _column_map(model.group_structure)]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_model(path) -> FittedModel:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FileFormatError("%s:%d: %s" % (path, exc.lineno, exc.msg)) from None
    version = doc.get("schema_version")
    if version != MODEL_SCHEMA_VERSION:
        raise FileFormatError("%s: unsupported schema_version %r" % (path, version))
    try:
        latent = _model_from_json(doc["latent"]) if "latent" in doc else None
        model = _model_from_json(doc, latent=latent)
    except (KeyError, TypeError, ValueError) as exc:
        raise FileFormatError("%s: malformed model file: %s" % (path, exc)) from None
    if latent is not None:
        stored = [tuple(pair) for pair in doc["latent"].get("column_map", [])]
        expected = [(j + 1, g + 1) for j, g in _column_map(model.group_structure)]
        if stored != expected:
            raise FileFormatError("%s: latent column map does not match the groups" % path)
    return model
