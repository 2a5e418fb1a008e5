"""Delimited-text readers and writers: datasets, assignments, stage reports and publications."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import Clustering, Dataset, InvalidInputError, centroid
from .decomp import PipelineReport
from .dynamic import Publication, PublicationSequence, PublishedClass


class IngestError(InvalidInputError):
    """Malformed or inconsistent input file."""


def _read_rows(path: str | Path, delimiter: str) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh, delimiter=delimiter))
    except OSError as exc:
        raise IngestError(f"{path}: {exc.strerror}") from None
    rows = [r for r in rows if r and any(cell.strip() for cell in r)]
    if not rows:
        raise IngestError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    for k, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise IngestError(f"{path}, line {k}: expected {len(header)} fields, found {len(r)}")
    return header, body


def _column(header: list[str], name: str, path) -> int:
    try:
        return header.index(name)
    except ValueError:
        raise IngestError(f"{path}: missing column {name!r} (have {', '.join(header)})") from None


def ingest(
    path: str | Path,
    qis: Sequence[str],
    sensitive: str,
    *,
    id_column: str | None = None,
    categorical: Sequence[str] = (),
    standardize: bool = False,
    delimiter: str = ",",
) -> Dataset:
    """Read a header-row delimited file into a :class:`Dataset`.

    Quasi-identifiers must be numeric unless listed in ``categorical``, in
    which case their values are integer-coded in order of first appearance.
    Sensitive values are coded the same way. Ids default to the 1-based row
    number when ``id_column`` is not given.
    """
    if sensitive in qis:
        raise InvalidInputError("the sensitive column cannot also be a quasi-identifier")
    if not qis:
        raise InvalidInputError("at least one quasi-identifier is required")
    header, body = _read_rows(path, delimiter)
    if not body:
        raise IngestError(f"{path}: no data rows")
    q_idx = [_column(header, q, path) for q in qis]
    s_idx = _column(header, sensitive, path)
    id_idx = _column(header, id_column, path) if id_column else None

    X = np.empty((len(body), len(qis)))
    codes: dict[str, dict[str, int]] = {q: {} for q in categorical}
    for k, row in enumerate(body):
        for a, (q, j) in enumerate(zip(qis, q_idx)):
            cell = row[j].strip()
            if q in codes:
                X[k, a] = codes[q].setdefault(cell, len(codes[q]))
                continue
            try:
                X[k, a] = float(cell)
            except ValueError:
                raise IngestError(f"{path}, line {k + 2}, column {q!r}: non-numeric value {cell!r}") from None
    if not np.all(np.isfinite(X)):
        raise IngestError(f"{path}: quasi-identifiers must be finite")

    names: dict[str, int] = {}
    colors = np.array([names.setdefault(row[s_idx].strip(), len(names)) for row in body], dtype=np.int64)
    ids = [row[id_idx].strip() for row in body] if id_idx is not None else [str(k + 1) for k in range(len(body))]
    if len(set(ids)) != len(ids):
        raise IngestError(f"{path}: duplicate tuple ids")
    ds = Dataset(tuple(ids), X, colors, tuple(names), qi_names=tuple(qis))
    return ds.standardize() if standardize else ds


def write_dataset(ds: Dataset, path: str | Path, *, id_column: str = "id", sensitive: str = "sensitive") -> None:
    qi_names = list(ds.qi_names) or [f"x{a + 1}" for a in range(ds.d)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([id_column, *qi_names, sensitive])
        for i in range(ds.p):
            w.writerow([ds.ids[i], *(repr(float(v)) for v in ds.X[i]), ds.color_names[ds.colors[i]]])


# ---------------------------------------------------------------- assignments


def write_assignment(K: Clustering, ds: Dataset, path: str | Path) -> None:
    """One row per tuple: id, cluster id, cluster centroid coordinates, sensitive value."""
    qi_names = list(ds.qi_names) or [f"x{a + 1}" for a in range(ds.d)]
    rows = []
    for k, C in enumerate(K, start=1):
        c = centroid(C, ds)
        for i in C:
            rows.append((i, [ds.ids[i], str(k), *(repr(float(v)) for v in c), ds.color_names[ds.colors[i]]]))
    rows.sort(key=lambda r: r[0])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "cluster", *qi_names, "sensitive"])
        w.writerows(r for _, r in rows)


def read_assignment(path: str | Path, ds: Dataset) -> Clustering:
    """Clusters (as row indices of ``ds``) from an assignment file; ids must match ``ds`` exactly."""
    header, body = _read_rows(path, ",")
    id_idx = _column(header, "id", path)
    cl_idx = _column(header, "cluster", path)
    row_of = {t: i for i, t in enumerate(ds.ids)}
    groups: dict[str, list[int]] = {}
    seen: set[str] = set()
    for k, row in enumerate(body, start=2):
        t = row[id_idx].strip()
        if t not in row_of:
            raise IngestError(f"{path}, line {k}: tuple id {t!r} is not in the dataset")
        if t in seen:
            raise IngestError(f"{path}, line {k}: tuple id {t!r} assigned twice")
        seen.add(t)
        groups.setdefault(row[cl_idx].strip(), []).append(row_of[t])
    missing = set(ds.ids) - seen
    if missing:
        raise IngestError(f"{path}: {len(missing)} dataset tuples have no cluster")
    return [tuple(sorted(v)) for v in groups.values()]


# ---------------------------------------------------------------- stage reports


def write_report(report: PipelineReport, path: str | Path) -> None:
    """Stage, wall-clock seconds, IL to two decimals and at full precision."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["stage", "wall_time", "il", "il_exact", "sse"])
        for rec in report.stages:
            w.writerow([rec.stage, f"{rec.wall_time:.3f}", f"{rec.il:.2f}", repr(rec.il), repr(rec.sse)])


@dataclass(frozen=True)
class ReportRow:
    stage: str
    wall_time: float
    il: float


def read_report(path: str | Path) -> list[ReportRow]:
    header, body = _read_rows(path, ",")
    s, t, il = (_column(header, c, path) for c in ("stage", "wall_time", "il_exact"))
    return [ReportRow(r[s], float(r[t]), float(r[il])) for r in body]


# ---------------------------------------------------------------- publications

PUBLICATION_HEADER = ["publication", "class", "tuple", "sensitive", "counterfeit"]


def write_publications(seq: PublicationSequence, path: str | Path, *, start: int = 1) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PUBLICATION_HEADER)
        for n, pub in enumerate(seq.publications, start=start):
            for Q in pub.classes:
                for t, v, f in zip(Q.tuple_ids, Q.sensitive, Q.counterfeit):
                    w.writerow([n, Q.class_id, t, v, int(f)])


def read_publications(paths: Sequence[str | Path]) -> PublicationSequence:
    """Publications from one or more files, ordered by publication index (files are concatenated)."""
    members: dict[int, dict[str, list[tuple[str, str, bool]]]] = {}
    for path in paths:
        header, body = _read_rows(path, ",")
        if header != PUBLICATION_HEADER:
            raise IngestError(f"{path}, line 1: expected header {','.join(PUBLICATION_HEADER)}")
        for k, row in enumerate(body, start=2):
            pub, cls, t, v, flag = (cell.strip() for cell in row)
            try:
                n = int(pub)
            except ValueError:
                raise IngestError(f"{path}, line {k}: publication index {pub!r} is not an integer") from None
            if flag not in ("0", "1"):
                raise IngestError(f"{path}, line {k}: counterfeit flag must be 0 or 1, found {flag!r}")
            members.setdefault(n, {}).setdefault(cls, []).append((t, v, flag == "1"))
    pubs = []
    for n in sorted(members):
        classes = [
            PublishedClass(cls, tuple(t for t, _, _ in rows), tuple(v for _, v, _ in rows), tuple(f for _, _, f in rows))
            for cls, rows in members[n].items()
        ]
        try:
            pubs.append(Publication(classes))
        except InvalidInputError as exc:
            raise IngestError(f"publication {n}: {exc}") from None
    return PublicationSequence(pubs)
