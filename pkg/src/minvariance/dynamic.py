"""Continuous publication: classification, bucket balancing, republication and sequence verifiers.

Tuples are identified by string ids that stay stable across dataset versions.
A publication is a list of classes; the signature of a class is the set of
sensitive values it contains. Counterfeit rows are fabricated to balance a
bucket and are flagged as such; they count toward class size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import Dataset, InfeasibleError, InvalidInputError
from .decomp import PipelineParams, PipelineReport, run_pipeline
from .heuristic import Bucket, partition_bucket


class ConsistencyError(InvalidInputError):
    """The current dataset contradicts the publication history."""


def _id_key(tuple_id: str):
    return (0, int(tuple_id), "") if tuple_id.isdigit() else (1, 0, tuple_id)


def format_signature(values: Iterable[str]) -> str:
    return "{" + ", ".join(sorted(values)) + "}"


@dataclass(frozen=True)
class PublishedClass:
    class_id: str
    tuple_ids: tuple[str, ...]
    sensitive: tuple[str, ...]
    counterfeit: tuple[bool, ...] = ()
    centroid: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "class_id", str(self.class_id))
        object.__setattr__(self, "tuple_ids", tuple(str(t) for t in self.tuple_ids))
        object.__setattr__(self, "sensitive", tuple(str(v) for v in self.sensitive))
        flags = tuple(bool(f) for f in self.counterfeit) or (False,) * len(self.tuple_ids)
        object.__setattr__(self, "counterfeit", flags)
        if not len(self.tuple_ids) == len(self.sensitive) == len(self.counterfeit):
            raise InvalidInputError(f"class {self.class_id}: member fields differ in length")

    @property
    def signature(self) -> frozenset[str]:
        return frozenset(self.sensitive)

    def __len__(self) -> int:
        return len(self.tuple_ids)


@dataclass
class Publication:
    classes: list[PublishedClass] = field(default_factory=list)

    def __post_init__(self):
        self._class_of: dict[str, PublishedClass] = {}
        for Q in self.classes:
            for t in Q.tuple_ids:
                if t in self._class_of:
                    raise InvalidInputError(f"tuple {t} appears in more than one class")
                self._class_of[t] = Q

    def __contains__(self, tuple_id: str) -> bool:
        return tuple_id in self._class_of

    def class_of(self, tuple_id: str) -> PublishedClass:
        return self._class_of[tuple_id]

    @property
    def tuple_ids(self) -> list[str]:
        return sorted(self._class_of, key=_id_key)

    @property
    def n_counterfeits(self) -> int:
        return sum(sum(Q.counterfeit) for Q in self.classes)

    def value_of(self, tuple_id: str) -> str:
        Q = self._class_of[tuple_id]
        return Q.sensitive[Q.tuple_ids.index(tuple_id)]


@dataclass
class PublicationSequence:
    publications: list[Publication] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.publications)

    def append(self, pub: Publication) -> PublicationSequence:
        return PublicationSequence(self.publications + [pub])

    def tuple_ids(self) -> list[str]:
        ids = {t for pub in self.publications for t in pub.tuple_ids}
        return sorted(ids, key=_id_key)

    def lifespans(self, tuple_id: str) -> list[tuple[int, int]]:
        """Maximal runs of consecutive publications (1-based) that contain ``tuple_id``."""
        spans: list[tuple[int, int]] = []
        for i, pub in enumerate(self.publications, start=1):
            if tuple_id not in pub:
                continue
            if spans and spans[-1][1] == i - 1:
                spans[-1] = (spans[-1][0], i)
            else:
                spans.append((i, i))
        return spans

    def signature(self, tuple_id: str, i: int) -> frozenset[str]:
        """Signature of the class holding ``tuple_id`` in publication ``i`` (1-based)."""
        return self.publications[i - 1].class_of(tuple_id).signature

    def most_recent_class(self, tuple_id: str) -> PublishedClass | None:
        for pub in reversed(self.publications):
            if tuple_id in pub:
                return pub.class_of(tuple_id)
        return None


# ---------------------------------------------------------------- verification


@dataclass(frozen=True)
class Violation:
    publication: int
    message: str
    tuple_id: str | None = None
    class_id: str | None = None


@dataclass(frozen=True)
class VerificationReport:
    check: str
    m: int
    status: tuple[str, ...]
    violations: tuple[Violation, ...]

    @property
    def passed(self) -> bool:
        return not self.violations

    @property
    def offending_tuples(self) -> list[str]:
        return sorted({v.tuple_id for v in self.violations if v.tuple_id is not None}, key=_id_key)

    def format(self) -> str:
        lines = [f"{self.check} (m={self.m}): {'PASS' if self.passed else 'FAIL'}"]
        lines += list(self.status)
        lines += [v.message for v in self.violations]
        return "\n".join(lines) + "\n"


def _unique_violations(pub: Publication, m: int, index: int) -> list[Violation]:
    out = []
    for Q in pub.classes:
        if len(Q) < m:
            out.append(
                Violation(index, f"publication {index} class {Q.class_id}: {len(Q)} tuples, fewer than {m}", class_id=Q.class_id)
            )
        seen: set[str] = set()
        for v in Q.sensitive:
            if v in seen:
                out.append(
                    Violation(index, f"publication {index} class {Q.class_id}: repeated sensitive value {v}", class_id=Q.class_id)
                )
            seen.add(v)
    return out


def _status_line(pub: Publication, index: int, ok: bool) -> str:
    line = f"publication {index}: {'m-unique' if ok else 'not m-unique'}"
    if pub.n_counterfeits:
        line += f" ({pub.n_counterfeits} counterfeit)"
    return line


def verify_m_unique(pub: Publication, m: int, index: int = 1) -> VerificationReport:
    """Every class holds at least ``m`` tuples with pairwise distinct sensitive values."""
    violations = _unique_violations(pub, m, index)
    return VerificationReport("m-uniqueness", m, (_status_line(pub, index, not violations),), tuple(violations))


def _invariance_parts(seq: PublicationSequence, m: int) -> tuple[list[str], list[Violation]]:
    status: list[str] = []
    violations: list[Violation] = []
    for i, pub in enumerate(seq.publications, start=1):
        bad = _unique_violations(pub, m, i)
        status.append(_status_line(pub, i, not bad))
        violations += bad
    for t in seq.tuple_ids():
        for x, y in seq.lifespans(t):
            for i in range(x, y):
                before, after = seq.signature(t, i), seq.signature(t, i + 1)
                if before != after:
                    violations.append(
                        Violation(
                            i + 1,
                            f"tuple {t}: signature {format_signature(before)} in publication {i}"
                            f" but {format_signature(after)} in publication {i + 1}",
                            tuple_id=t,
                        )
                    )
                    break
    return status, violations


def verify_m_invariance(seq: PublicationSequence, m: int) -> VerificationReport:
    """Every publication is m-unique and each tuple keeps its signature within a lifespan."""
    status, violations = _invariance_parts(seq, m)
    return VerificationReport("m-invariance", m, tuple(status), tuple(violations))


def verify_tau_safety(seq: PublicationSequence, m: int) -> VerificationReport:
    """m-invariance plus equal signatures across every deletion/reinsertion gap.

    Tuples with three or more lifespans are checked on each consecutive pair.
    """
    status, violations = _invariance_parts(seq, m)
    for t in seq.tuple_ids():
        spans = seq.lifespans(t)
        for (x, y), (z, w) in zip(spans, spans[1:]):
            before, after = seq.signature(t, y), seq.signature(t, z)
            if before != after:
                violations.append(
                    Violation(
                        z,
                        f"tuple {t}: signature {format_signature(before)} at the end of lifespan [{x}, {y}]"
                        f" but {format_signature(after)} at the start of lifespan [{z}, {w}]",
                        tuple_id=t,
                    )
                )
    return VerificationReport("tau-safety", m, tuple(status), tuple(violations))


# ---------------------------------------------------------------- republication


def history_values(history: PublicationSequence) -> list[str]:
    """Sensitive values seen in ``history``, in order of first appearance."""
    seen: dict[str, None] = {}
    for pub in history.publications:
        for Q in pub.classes:
            for v in Q.sensitive:
                seen.setdefault(v, None)
    return list(seen)


def classify(
    current: Dataset,
    history: PublicationSequence,
    claimed_old: Iterable[str] | None = None,
) -> tuple[list[int], dict[frozenset[int], Bucket]]:
    """Split ``current`` into never-published rows and buckets of previously published ones.

    Old rows are keyed by the signature (as color codes of ``current``) of their
    most recent class. ``current``'s color dictionary must contain every value
    of those signatures; see :meth:`Dataset.with_color_names`.
    """
    claimed = set(str(t) for t in claimed_old or ())
    new: list[int] = []
    old: dict[frozenset[int], Bucket] = {}
    for i, t in enumerate(current.ids):
        Q = history.most_recent_class(t)
        if Q is None:
            if t in claimed:
                raise ConsistencyError(f"tuple {t} claims a history but appears in no publication")
            new.append(i)
            continue
        value = current.color_names[current.colors[i]]
        if value not in Q.signature:
            raise ConsistencyError(
                f"tuple {t}: sensitive value {value} is not in its published signature {format_signature(Q.signature)}"
            )
        try:
            key = frozenset(current.color_code(v) for v in Q.signature)
        except InvalidInputError as exc:
            raise ConsistencyError(f"tuple {t}: {exc}; extend the color dictionary with the history values") from None
        bucket = old.setdefault(key, Bucket(key))
        bucket.rows[int(current.colors[i])].append(i)
    return new, old


def bucket_centroid(b: Bucket, ds: Dataset) -> np.ndarray:
    members = [i for i in b.points() if i >= 0]
    return ds.X[members].mean(axis=0)


def balance_bucket(b: Bucket, ds: Dataset, pool: Sequence[int]) -> tuple[Bucket, list[int], list[int]]:
    """Fill every color of ``b`` up to its largest row count.

    New rows from ``pool`` with a missing color are consumed nearest to the
    bucket centroid first; remaining deficits become counterfeits. Returns the
    balanced bucket, the consumed rows and the counterfeit colors. Counterfeit
    slots in the bucket hold negative placeholders ``-1, -2, ...``.
    """
    target = b.n_rows
    center = bucket_centroid(b, ds)
    rows = {c: list(v) for c, v in b.rows.items()}
    available = [int(i) for i in pool]
    consumed: list[int] = []
    counterfeits: list[int] = []
    for c in sorted(rows):
        deficit = target - len(rows[c])
        if deficit <= 0:
            continue
        cand = [i for i in available if ds.colors[i] == c]
        dist = np.einsum("ij,ij->i", ds.X[cand] - center, ds.X[cand] - center) if cand else np.zeros(0)
        for k in np.argsort(dist, kind="stable")[:deficit]:
            rows[c].append(cand[k])
            consumed.append(cand[k])
        for _ in range(target - len(rows[c])):
            counterfeits.append(c)
            rows[c].append(-len(counterfeits))
        taken = set(consumed)
        available = [i for i in available if i not in taken]
    return Bucket(b.signature, rows), consumed, counterfeits


def _padding(colors: np.ndarray, n_colors: int, m: int) -> list[int]:
    """Fewest counterfeit colors making ``colors`` a feasible instance (least frequent colors first)."""
    counts = np.bincount(colors, minlength=n_colors).astype(int)
    pad: list[int] = []
    while int(counts.max()) * m > int(counts.sum()) or counts.sum() < m:
        order = np.argsort(counts, kind="stable")
        c = int(order[0])
        if counts[c] == counts.max() and np.count_nonzero(counts) >= n_colors:
            raise InfeasibleError("not enough distinct sensitive values to pad the new tuples")
        counts[c] += 1
        pad.append(c)
    return pad


@dataclass
class RepublishResult:
    publication: Publication
    counterfeits: int
    report: PipelineReport | None


def republish(
    history: PublicationSequence,
    current: Dataset,
    m: int,
    s: int = 1,
    params: PipelineParams = PipelineParams(),
) -> RepublishResult:
    """Next publication of ``current`` that keeps ``history`` m-invariant.

    Old tuples are regrouped by their previous signature, topped up with new
    tuples or counterfeits and split into one-per-color classes. The remaining
    new tuples go through the optimizing pipeline; if they cannot form a
    feasible instance, counterfeits of the rarest values are added.
    """
    if m < 2:
        raise InvalidInputError("m must be at least 2")
    index = len(history) + 1
    ds = current.with_color_names(history_values(history))
    new, old = classify(ds, history)

    pool = list(new)
    balanced: list[tuple[Bucket, np.ndarray]] = []
    fake_colors: list[int] = []
    fake_X: list[np.ndarray] = []
    for key in sorted(old, key=lambda k: sorted(ds.color_names[c] for c in k)):
        b, consumed, fakes = balance_bucket(old[key], ds, pool)
        taken = set(consumed)
        pool = [i for i in pool if i not in taken]
        center = bucket_centroid(old[key], ds)
        # renumber placeholders to rows appended after the real data
        remap = {-(k + 1): ds.p + len(fake_colors) + k for k in range(len(fakes))}
        rows = {c: [remap.get(i, i) for i in v] for c, v in b.rows.items()}
        balanced.append((Bucket(b.signature, rows), center))
        fake_colors += fakes
        fake_X += [center] * len(fakes)

    if pool:
        pad = _padding(ds.colors[pool], len(ds.color_names), m)
        if pad:
            center = ds.X[pool].mean(axis=0)
            start = ds.p + len(fake_colors)
            pool += list(range(start, start + len(pad)))
            fake_colors += pad
            fake_X += [center] * len(pad)

    n_fake = len(fake_colors)
    aug = Dataset(
        ds.ids + tuple(f"counterfeit-{index}-{k + 1}" for k in range(n_fake)),
        np.vstack([ds.X] + [np.asarray(fake_X).reshape(n_fake, ds.d)]) if n_fake else ds.X,
        np.concatenate([ds.colors, np.asarray(fake_colors, dtype=np.int64)]),
        ds.color_names,
        ds.standardized,
        ds.qi_names,
    )

    clusters = [C for b, _ in balanced for C in partition_bucket(b, aug, m)]
    report = None
    if pool:
        sub = aug.subset(sorted(pool))
        s_eff = max(1, min(s, math.ceil(sub.p / (2 * m - 1))))
        K, report = run_pipeline(sub, m, s_eff, params)
        order = sorted(pool)
        clusters += [tuple(order[k] for k in C) for C in K]

    classes = []
    for k, C in enumerate(clusters, start=1):
        C = sorted(C, key=lambda i: int(aug.colors[i]))
        classes.append(
            PublishedClass(
                str(k),
                tuple(aug.ids[i] for i in C),
                tuple(aug.color_names[aug.colors[i]] for i in C),
                tuple(i >= ds.p for i in C),
                tuple(float(v) for v in aug.X[list(C)].mean(axis=0)),
            )
        )
    return RepublishResult(Publication(classes), n_fake, report)
