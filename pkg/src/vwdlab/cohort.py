"""Cohort data model: flow series, manifests, and their on-disk formats.

Manifest (UTF-8 JSON)::

    {"patients": [{"id": "p01", "label": "ards", "flow_file": "flow/p01.txt",
                   "sample_rate_hz": 50}, ...]}

Flow file: one decimal flow value (L/min) per LF-terminated line, no header.
Relative ``flow_file`` paths resolve against the manifest's directory.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import DuplicatePatient, EmptySeries, MissingFlowFile, ParseError

SAMPLE_RATE_HZ = 50


class Label(str, Enum):
    ARDS = "ards"
    NON_ARDS = "non_ards"

    @property
    def y(self) -> int:
        """Binary target: 1 for ARDS, 0 otherwise."""
        return 1 if self is Label.ARDS else 0

    @classmethod
    def from_y(cls, y: int) -> "Label":
        return cls.ARDS if int(y) == 1 else cls.NON_ARDS


@dataclass(frozen=True)
class FlowSeries:
    patient_id: str
    label: Label
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE_HZ

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate != SAMPLE_RATE_HZ:
            raise ValueError(f"sample_rate must be {SAMPLE_RATE_HZ}, got {self.sample_rate}")
        if samples.ndim != 1 or samples.size < 1:
            raise EmptySeries(f"patient {self.patient_id!r}: flow series is empty")
        if not np.all(np.isfinite(samples)):
            raise ValueError(f"patient {self.patient_id!r}: non-finite flow sample")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "label", Label(self.label))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate

    def with_samples(self, samples) -> "FlowSeries":
        return FlowSeries(self.patient_id, self.label, samples, self.sample_rate)


@dataclass(frozen=True)
class ManifestEntry:
    patient_id: str
    label: Label
    flow_file: Path
    sample_rate_hz: int = SAMPLE_RATE_HZ


@dataclass(frozen=True)
class CohortManifest:
    entries: tuple[ManifestEntry, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def by_label(self, label: Label) -> list[ManifestEntry]:
        return [e for e in self.entries if e.label is Label(label)]


def _entry_from_json(raw, index: int, base: Path, path: Path, check_files: bool) -> ManifestEntry:
    if not isinstance(raw, dict):
        raise ParseError(f"patients[{index}] is not an object", path=path)
    for key in ("id", "label", "flow_file"):
        if not isinstance(raw.get(key), str):
            raise ParseError(f"patients[{index}].{key} must be a string", path=path)
    try:
        label = Label(raw["label"])
    except ValueError:
        raise ParseError(
            f"patients[{index}].label must be 'ards' or 'non_ards', got {raw['label']!r}", path=path
        ) from None
    rate = raw.get("sample_rate_hz", SAMPLE_RATE_HZ)
    if not isinstance(rate, int) or isinstance(rate, bool) or rate != SAMPLE_RATE_HZ:
        raise ParseError(f"patients[{index}].sample_rate_hz must be {SAMPLE_RATE_HZ}", path=path)
    flow = Path(raw["flow_file"])
    if not flow.is_absolute():
        flow = base / flow
    if check_files and not flow.is_file():
        raise MissingFlowFile(f"flow file for {raw['id']!r} not found: {flow}")
    return ManifestEntry(raw["id"], label, flow, rate)


def parse_manifest(text: str, base: Path, path: Path | None = None, check_files: bool = True) -> CohortManifest:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path=path, line=exc.lineno, column=exc.colno) from None
    if not isinstance(doc, dict) or not isinstance(doc.get("patients"), list):
        raise ParseError("top-level object must contain a 'patients' list", path=path)
    entries = []
    seen = set()
    for i, raw in enumerate(doc["patients"]):
        entry = _entry_from_json(raw, i, base, path, check_files)
        if entry.patient_id in seen:
            raise DuplicatePatient(f"duplicate patient id {entry.patient_id!r}")
        seen.add(entry.patient_id)
        entries.append(entry)
    return CohortManifest(tuple(entries))


def load_manifest(path) -> CohortManifest:
    path = Path(path)
    return parse_manifest(path.read_text(encoding="utf-8"), base=path.parent, path=path)


def write_manifest(manifest: CohortManifest | Iterable[ManifestEntry], path) -> Path:
    """Write entries as a manifest; flow paths are stored relative to the manifest when possible."""
    path = Path(path)
    base = path.parent.resolve()
    patients = []
    for e in manifest:
        flow = Path(e.flow_file)
        try:
            flow = flow.resolve().relative_to(base)
        except ValueError:
            pass
        patients.append(
            {"id": e.patient_id, "label": e.label.value, "flow_file": flow.as_posix(), "sample_rate_hz": e.sample_rate_hz}
        )
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({"patients": patients}, indent=2) + "\n", encoding="utf-8")
    return path


def parse_flow_text(text: str, path=None) -> np.ndarray:
    values = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        token = line.strip()
        if not token:
            continue
        try:
            v = float(token)
        except ValueError:
            raise ParseError(f"non-numeric flow record {token!r}", path=path, line=lineno) from None
        if not math.isfinite(v):
            raise ParseError(f"non-finite flow record {token!r}", path=path, line=lineno)
        values.append(v)
    return np.array(values, dtype=np.float64)


def load_flow_series(entry: ManifestEntry) -> FlowSeries:
    path = Path(entry.flow_file)
    if not path.is_file():
        raise MissingFlowFile(f"flow file not found: {path}")
    samples = parse_flow_text(path.read_text(encoding="utf-8"), path=path)
    if samples.size == 0:
        raise EmptySeries(f"{path}: flow file is empty")
    return FlowSeries(entry.patient_id, entry.label, samples, entry.sample_rate_hz)


def write_flow_series(series: FlowSeries, path) -> Path:
    # repr() is the shortest round-tripping literal, so reload is bit-exact.
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(f"{float(v)!r}\n" for v in series.samples), encoding="utf-8")
    return path


def load_cohort(manifest: CohortManifest | str | Path) -> list[FlowSeries]:
    if not isinstance(manifest, CohortManifest):
        manifest = load_manifest(manifest)
    return [load_flow_series(e) for e in manifest]
