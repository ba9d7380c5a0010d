"""Item-bank loading, validation, serialization and synthetic generation.

Two on-disk formats carry the same flat field set:

  csv    header `item_id,model,a,b,c,thresholds,group`; thresholds are
         semicolon-separated; inapplicable cells stay empty.
  json   object with bank metadata (name, model, version) plus an `items`
         array; items may additionally carry display `text` and category
         `labels`.

Banks are immutable after load. The parameter arrays used by the selection
hot path are built once per bank and cached.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

from .errors import BankFormatError
from .irt import DICHOTOMOUS_MODELS, MODELS, ItemParameters, validate_item

CSV_HEADER = ["item_id", "model", "a", "b", "c", "thresholds", "group"]
THIN_INFORMATION_FLOOR = 5.0


@dataclass(frozen=True)
class Violation:
    """One validation finding; `severity` is 'error' or 'warning'."""

    rule: str
    message: str
    item_id: str | None = None
    severity: str = "error"


@dataclass
class _DichotomousArrays:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray


@dataclass
class _GradedArrays:
    a: np.ndarray
    boundaries: np.ndarray  # rows padded with +inf: [t_1 .. t_{m-1}, inf...]


@dataclass
class ItemBank:
    """An ordered, immutable pool of calibrated items sharing one model."""

    items: list[ItemParameters]
    name: str = ""
    model: str = ""
    version: str = "1"
    groups: dict[str, list[str]] = field(default_factory=dict, compare=False)
    _index: dict[str, int] = field(default_factory=dict, repr=False, compare=False)
    _arrays: object = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.model and self.items:
            self.model = self.items[0].model
        self._index = {item.item_id: pos for pos, item in enumerate(self.items)}
        groups: dict[str, list[str]] = {}
        for item in self.items:
            if item.group:
                groups.setdefault(item.group, []).append(item.item_id)
        self.groups = groups

    def __len__(self) -> int:
        return len(self.items)

    @property
    def ids(self) -> list[str]:
        return [item.item_id for item in self.items]

    def __contains__(self, item_id: str) -> bool:
        return item_id in self._index

    def get(self, item_id: str) -> ItemParameters:
        return self.items[self._index[item_id]]

    def index_of(self, item_id: str) -> int:
        return self._index[item_id]

    def _build_arrays(self):
        if self.model == "GRM":
            width = max(len(item.thresholds) for item in self.items)
            boundaries = np.full((len(self.items), width), np.inf)
            for row, item in enumerate(self.items):
                boundaries[row, : len(item.thresholds)] = item.thresholds
            return _GradedArrays(np.array([i.a for i in self.items]), boundaries)
        return _DichotomousArrays(
            np.array([i.a for i in self.items]),
            np.array([i.b for i in self.items]),
            np.array([i.c for i in self.items]),
        )

    def information_at(self, theta: float) -> np.ndarray:
        """Fisher information of every item at theta, as one vector."""
        if self._arrays is None:
            self._arrays = self._build_arrays()
        arr = self._arrays
        if isinstance(arr, _GradedArrays):
            star = np.ones((len(self.items), arr.boundaries.shape[1] + 2))
            star[:, -1] = 0.0
            star[:, 1:-1] = expit(arr.a[:, None] * (theta - arr.boundaries))
            slope = star * (1.0 - star)
            probs = star[:, :-1] - star[:, 1:]
            num = (slope[:, :-1] - slope[:, 1:]) ** 2
            terms = np.divide(num, probs, out=np.zeros_like(num), where=probs > 0)
            return arr.a * arr.a * terms.sum(axis=1)
        pstar = expit(arr.a * (theta - arr.b))
        p = arr.c + (1.0 - arr.c) * pstar
        return arr.a * arr.a * pstar * pstar * (1.0 - p) / p


def validate_bank(bank: ItemBank) -> list[Violation]:
    """Check every bank invariant; violations come back as data, not raises."""
    violations: list[Violation] = []
    if not bank.items:
        violations.append(Violation("empty-bank", "bank contains no items"))
        return violations
    seen: set[str] = set()
    for item in bank.items:
        if item.item_id in seen:
            violations.append(
                Violation("duplicate-id", f"item_id {item.item_id!r} appears more than once", item.item_id)
            )
        seen.add(item.item_id)
        for problem in validate_item(item):
            violations.append(Violation("item-parameters", problem, item.item_id))
        if bank.model and item.model != bank.model:
            violations.append(
                Violation(
                    "model-mismatch",
                    f"item {item.item_id!r} is {item.model}, bank declares {bank.model}",
                    item.item_id,
                )
            )
    for label, ids in bank.groups.items():
        for item_id in ids:
            if item_id not in bank:
                violations.append(Violation("unknown-group-member", f"group {label!r} lists unknown item {item_id!r}"))
    if not any(v.severity == "error" for v in violations):
        grid = np.arange(-3.0, 3.0 + 1e-9, 0.25)
        floor = min(float(bank.information_at(t).sum()) for t in grid)
        if floor < THIN_INFORMATION_FLOOR:
            violations.append(
                Violation(
                    "thin-coverage",
                    f"bank information drops to {floor:.2f} (< {THIN_INFORMATION_FLOOR}) inside [-3, 3]",
                    severity="warning",
                )
            )
    return violations


def _parse_float(text: str, line: int, column: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise BankFormatError(f"line {line}: column {column!r}: not a number: {text!r}") from None


def _item_from_row(row: dict[str, str], line: int) -> ItemParameters:
    model = row.get("model", "").strip()
    if model not in MODELS:
        raise BankFormatError(f"line {line}: unknown model {row.get('model')!r}")
    item_id = row.get("item_id", "").strip()
    if not item_id:
        raise BankFormatError(f"line {line}: missing item_id")
    a = _parse_float(row["a"], line, "a") if row.get("a", "").strip() else 1.0
    kwargs: dict = {"item_id": item_id, "model": model, "a": a}
    if model in DICHOTOMOUS_MODELS:
        kwargs["b"] = _parse_float(row["b"], line, "b") if row.get("b", "").strip() else 0.0
        if row.get("c", "").strip():
            kwargs["c"] = _parse_float(row["c"], line, "c")
    else:
        raw = row.get("thresholds", "").strip()
        if raw:
            kwargs["thresholds"] = tuple(
                _parse_float(part, line, "thresholds") for part in raw.split(";")
            )
    group = row.get("group", "").strip()
    if group:
        kwargs["group"] = group
    return ItemParameters(**kwargs)


def _raise_on_errors(bank: ItemBank) -> ItemBank:
    errors = [v for v in validate_bank(bank) if v.severity == "error"]
    if errors:
        detail = "; ".join(
            f"{v.item_id or 'bank'}: {v.message}" for v in errors[:10]
        )
        raise BankFormatError(f"bank failed validation: {detail}")
    return bank


def load_bank(source, format: str = "csv", name: str = "") -> ItemBank:
    """Parse and validate a bank from csv or json content.

    `source` may be text, bytes, a readable file object, or a Path. Raises
    BankFormatError with a line reference on parse problems and with the
    violated rule on validation failures.
    """
    if isinstance(source, Path):
        source = source.read_text()
    elif isinstance(source, bytes):
        source = source.decode("utf-8")
    elif hasattr(source, "read"):
        source = source.read()
        if isinstance(source, bytes):
            source = source.decode("utf-8")
    if format == "csv":
        reader = csv.DictReader(io.StringIO(source))
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != CSV_HEADER:
            raise BankFormatError(
                f"csv header must be {','.join(CSV_HEADER)!r}, got {reader.fieldnames}"
            )
        items = [_item_from_row(row, line) for line, row in enumerate(reader, start=2)]
        return _raise_on_errors(ItemBank(items, name=name))
    if format == "json":
        try:
            doc = json.loads(source)
        except json.JSONDecodeError as exc:
            raise BankFormatError(f"invalid json: {exc}") from None
        items = []
        for pos, entry in enumerate(doc.get("items", [])):
            try:
                items.append(
                    ItemParameters(
                        item_id=str(entry["item_id"]),
                        model=entry["model"],
                        a=float(entry.get("a", 1.0)),
                        b=float(entry.get("b", 0.0)),
                        c=float(entry.get("c", 0.0)),
                        thresholds=tuple(entry.get("thresholds", ())),
                        group=entry.get("group"),
                        text=entry.get("text", ""),
                        labels=tuple(entry.get("labels", ())),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise BankFormatError(f"items[{pos}]: {exc}") from None
        return _raise_on_errors(
            ItemBank(
                items,
                name=doc.get("name", name),
                model=doc.get("model", ""),
                version=str(doc.get("version", "1")),
            )
        )
    raise ValueError(f"unknown bank format {format!r}")


def load_bank_file(path: str | Path) -> ItemBank:
    path = Path(path)
    format = "json" if path.suffix.lower() == ".json" else "csv"
    return load_bank(path.read_text(), format=format, name=path.stem)


def serialize_bank(bank: ItemBank, format: str = "csv") -> str:
    """Render a bank so that load_bank round-trips it exactly."""
    if format == "csv":
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for item in bank.items:
            if item.model == "GRM":
                b_cell, thr_cell = "", ";".join(repr(t) for t in item.thresholds)
            else:
                b_cell, thr_cell = repr(item.b), ""
            c_cell = repr(item.c) if item.model == "3PL" else ""
            writer.writerow(
                [item.item_id, item.model, repr(item.a), b_cell, c_cell, thr_cell, item.group or ""]
            )
        return out.getvalue()
    if format == "json":
        entries = []
        for item in bank.items:
            entry: dict = {"item_id": item.item_id, "model": item.model, "a": item.a}
            if item.model == "GRM":
                entry["thresholds"] = list(item.thresholds)
            else:
                entry["b"] = item.b
            if item.model == "3PL":
                entry["c"] = item.c
            if item.group:
                entry["group"] = item.group
            if item.text:
                entry["text"] = item.text
            if item.labels:
                entry["labels"] = list(item.labels)
            entries.append(entry)
        return json.dumps(
            {"name": bank.name, "model": bank.model, "version": bank.version, "items": entries},
            indent=2,
        )
    raise ValueError(f"unknown bank format {format!r}")


def _truncated(draw, lo: float, hi: float, rng: np.random.Generator, size: int) -> np.ndarray:
    """Rejection-sample `size` values of `draw(rng, n)` into [lo, hi]."""
    values = np.empty(0)
    while values.size < size:
        batch = draw(rng, max(size * 2, 16))
        values = np.concatenate([values, batch[(batch >= lo) & (batch <= hi)]])
    return values[:size]


def generate_bank(
    model: str,
    n_items: int,
    seed: int,
    *,
    n_categories: int = 5,
    a_log_mean: float = 0.0,
    a_log_sd: float = 0.25,
    a_range: tuple[float, float] = (0.5, 2.5),
    b_sd: float = 1.0,
    b_range: tuple[float, float] = (-3.0, 3.0),
    c_range: tuple[float, float] = (0.05, 0.25),
    group_labels: Sequence[str] | None = None,
    name: str = "generated",
) -> ItemBank:
    """Draw a synthetic bank from truncated calibration-like distributions.

    Defaults: a ~ LogNormal(a_log_mean, a_log_sd) truncated to a_range,
    b ~ N(0, b_sd) truncated to b_range, c ~ Uniform(*c_range) for 3PL.
    GRM thresholds sit at a N(0,1) location plus equally spaced offsets
    spanning [-1, 1], which guarantees strict ordering. Deterministic for a
    given seed, and always validation-clean by construction.
    """
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}")
    if n_items < 1:
        raise ValueError("n_items must be >= 1")
    if model == "GRM" and n_categories < 2:
        raise ValueError("GRM needs at least 2 categories")
    rng = np.random.default_rng(seed)
    width = len(str(n_items))
    if model == "1PL":
        a_values = np.ones(n_items)
    else:
        a_values = _truncated(
            lambda r, n: np.exp(r.normal(a_log_mean, a_log_sd, n)), *a_range, rng=rng, size=n_items
        )
    if model == "GRM":
        locations = rng.normal(0.0, 1.0, n_items)
        offsets = np.linspace(-1.0, 1.0, n_categories - 1) if n_categories > 2 else np.zeros(1)
    else:
        b_values = _truncated(lambda r, n: r.normal(0.0, b_sd, n), *b_range, rng=rng, size=n_items)
    c_values = rng.uniform(*c_range, n_items) if model == "3PL" else np.zeros(n_items)
    items = []
    for pos in range(n_items):
        kwargs: dict = {
            "item_id": f"{name}-{pos + 1:0{width}d}",
            "model": model,
            "a": float(a_values[pos]),
        }
        if model == "GRM":
            kwargs["thresholds"] = tuple(float(locations[pos] + o) for o in offsets)
        else:
            kwargs["b"] = float(b_values[pos])
            if model == "3PL":
                kwargs["c"] = float(c_values[pos])
        if group_labels:
            kwargs["group"] = group_labels[pos % len(group_labels)]
        items.append(ItemParameters(**kwargs))
    return ItemBank(items, name=name, model=model)
