"""Private map phase: local execution over a node's dataset.

A map function from the closed registry runs over the local records, noise is
added when the computation carries a privacy budget, and the result is
encoded to fixed point and validated against the proposal's output schema
before anything leaves the node.

The mock/real pairing lives here too: a mock dataset is derived from the real
one (subsample or gaussianized) so analyses can be iterated without touching
real records.
"""

from __future__ import annotations

import csv
import io
import math
import statistics
from dataclasses import dataclass, field
from random import Random

from .errors import EmptyDataset, InvalidEpsilon, MissingField, ParseError
from .fixedpoint import decode_raw, encode_fixed
from .proposal import MapFnSpec, OutputSchema

REAL = "real"
MOCK = "mock"


@dataclass(frozen=True)
class LocalDataset:
    """Flat records (field name -> number) plus a provenance tag."""

    records: tuple[dict, ...]
    provenance: str = REAL

    def __post_init__(self):
        if self.provenance not in (REAL, MOCK):
            raise ValueError(f"unknown provenance {self.provenance!r}")

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> list[float]:
        if not self.records:
            raise EmptyDataset("dataset has no records")
        try:
            return [r[name] for r in self.records]
        except KeyError as e:
            raise MissingField(f"field {name!r} not in dataset") from e


def load_dataset_csv(text: str, provenance: str = REAL) -> LocalDataset:
    """Read comma-separated records with a header row.

    A first column named `index` orders the records; other columns parse as
    int when possible, else float.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty dataset file") from None
    header = [h.strip() for h in header]
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"line {lineno}: expected {len(header)} columns")
        rec = {}
        for name, cell in zip(header, row):
            cell = cell.strip()
            try:
                rec[name] = int(cell)
            except ValueError:
                try:
                    rec[name] = float(cell)
                except ValueError:
                    raise ParseError(f"line {lineno}: non-numeric value {cell!r}") from None
        rows.append(rec)
    if header and header[0] == "index":
        rows.sort(key=lambda r: r["index"])
    return LocalDataset(tuple(rows), provenance)


# --- map registry ----------------------------------------------------------------

def _map_mean_of(ds: LocalDataset, spec: MapFnSpec):
    col = ds.column(str(spec.param("field")))
    return math.fsum(col) / len(col)


def _map_count(ds: LocalDataset, spec: MapFnSpec):
    if not ds.records:
        raise EmptyDataset("dataset has no records")
    return len(ds.records)


def _map_sum_of(ds: LocalDataset, spec: MapFnSpec):
    return math.fsum(ds.column(str(spec.param("field"))))


def _map_histogram_of(ds: LocalDataset, spec: MapFnSpec):
    edges = spec.param("bin_edges")
    if edges is None:
        raise MissingField("histogram_of needs bin_edges")
    col = ds.column(str(spec.param("field")))
    counts = [0] * (len(edges) - 1)
    for v in col:
        # left-closed bins; the final bin includes its upper edge
        for i in range(len(counts)):
            if edges[i] <= v < edges[i + 1] or (i == len(counts) - 1 and v == edges[-1]):
                counts[i] += 1
                break
    return counts


def _map_rolling_mean(ds: LocalDataset, spec: MapFnSpec):
    window = int(spec.param("window", 0))
    if window < 1:
        raise ValueError("window must be >= 1")
    col = ds.column(str(spec.param("field")))
    tail = col[-window:]
    return math.fsum(tail) / len(tail)


def _map_logprob_vector(ds: LocalDataset, spec: MapFnSpec):
    """Return the log-probability vector stored for one item.

    Records carry the vector in columns lp0, lp1, ... and identify the item
    in an `item` column.
    """
    item = spec.param("item")
    if item is None:
        raise MissingField("logprob_vector needs item")
    if not ds.records:
        raise EmptyDataset("dataset has no records")
    for rec in ds.records:
        if rec.get("item") == item:
            vec = []
            i = 0
            while f"lp{i}" in rec:
                vec.append(rec[f"lp{i}"])
                i += 1
            if not vec:
                raise MissingField("record has no lp0.. columns")
            return vec
    raise MissingField(f"item {item!r} not in dataset")


@dataclass(frozen=True)
class MapEntry:
    name: str
    fn: object
    # L1 sensitivity of the result given the dataset and declared value range;
    # None means the function has no meaningful noise calibration.
    sensitivity: object = None


def _sens_mean(ds, spec):
    lo, hi = _declared_range(spec)
    return (hi - lo) / len(ds.records)


def _sens_sum(ds, spec):
    lo, hi = _declared_range(spec)
    return hi - lo


def _sens_rolling(ds, spec):
    lo, hi = _declared_range(spec)
    window = min(int(spec.param("window")), len(ds.records))
    return (hi - lo) / window


def _declared_range(spec) -> tuple[float, float]:
    lo, hi = spec.param("lo"), spec.param("hi")
    if lo is None or hi is None or not lo < hi:
        raise InvalidEpsilon("noise calibration needs a declared lo < hi range")
    return float(lo), float(hi)


MAP_REGISTRY = {
    e.name: e
    for e in (
        MapEntry("mean_of", _map_mean_of, _sens_mean),
        MapEntry("count", _map_count, lambda ds, spec: 1.0),
        MapEntry("sum_of", _map_sum_of, _sens_sum),
        MapEntry("histogram_of", _map_histogram_of, lambda ds, spec: 1.0),
        MapEntry("rolling_mean", _map_rolling_mean, _sens_rolling),
        MapEntry("logprob_vector", _map_logprob_vector, None),
    )
}


def execute_map(ds: LocalDataset, spec: MapFnSpec):
    """Run a registered map function; pure in (dataset, spec)."""
    entry = MAP_REGISTRY.get(spec.name)
    if entry is None:
        raise KeyError(f"unregistered map function {spec.name!r}")
    return entry.fn(ds, spec)


def map_sensitivity(ds: LocalDataset, spec: MapFnSpec) -> float:
    entry = MAP_REGISTRY[spec.name]
    if entry.sensitivity is None:
        raise InvalidEpsilon(f"{spec.name} has no noise calibration")
    return float(entry.sensitivity(ds, spec))


def clamp(value: float, lo: float, hi: float) -> float:
    return min(max(value, lo), hi)


# --- differential privacy noise ----------------------------------------------------

def apply_laplace(value: float, sensitivity: float, epsilon: float, rng: Random) -> float:
    """Add Laplace(0, sensitivity/epsilon) noise, sampled by inverse CDF from
    the provided generator (deterministic given its seed)."""
    if not epsilon > 0 or not math.isfinite(epsilon):
        raise InvalidEpsilon(f"epsilon must be positive, got {epsilon}")
    if not sensitivity > 0:
        raise InvalidEpsilon(f"sensitivity must be positive, got {sensitivity}")
    b = sensitivity / epsilon
    u = rng.random()
    while u == 0.0:  # keep the log argument strictly positive
        u = rng.random()
    u -= 0.5
    noise = -b * math.copysign(1.0, u) * math.log(1.0 - 2.0 * abs(u))
    return value + noise


# --- map output -----------------------------------------------------------------

@dataclass(frozen=True)
class MapOutput:
    """Schema-conformant encoded result of one local map execution."""

    computation_id: bytes
    values_by_name: dict = field(default_factory=dict)

    def to_raws(self, schema: OutputSchema) -> list[int]:
        """Flatten to 64-bit ring elements in schema order (counts and
        histogram bins are fixed-point encoded integers)."""
        raws: list[int] = []
        for f in schema.fields:
            v = self.values_by_name[f.name]
            if f.kind == "fixed64":
                raws.append(v.raw)
            elif f.kind == "count":
                raws.append(encode_fixed(float(v)).raw)
            elif f.kind == "fixed64_vector":
                raws.extend(x.raw for x in v)
            else:
                raws.extend(encode_fixed(float(c)).raw for c in v)
        return raws


def decode_aggregate_raws(raws, schema: OutputSchema) -> dict:
    """Reverse of MapOutput.to_raws for an aggregated raw vector: decode each
    component back to a real, grouped by schema field."""
    out: dict = {}
    pos = 0
    for f in schema.fields:
        width = f.component_count()
        chunk = [decode_raw(r) for r in raws[pos : pos + width]]
        pos += width
        out[f.name] = chunk if width > 1 or f.kind in ("fixed64_vector", "histogram") else chunk[0]
    return out


def build_map_output(computation_id: bytes, raw_result, schema: OutputSchema) -> MapOutput:
    """Shape a raw map result (scalar or list) into the schema's fields.

    Single-field schemas take the whole result; multi-field schemas expect a
    dict keyed by field name.
    """
    if len(schema.fields) == 1 and not isinstance(raw_result, dict):
        raw_result = {schema.fields[0].name: raw_result}
    values: dict = {}
    for f in schema.fields:
        v = raw_result[f.name]
        if f.kind == "fixed64":
            values[f.name] = encode_fixed(float(v))
        elif f.kind == "count":
            values[f.name] = int(v)
        elif f.kind == "fixed64_vector":
            values[f.name] = tuple(encode_fixed(float(x)) for x in v)
        else:
            values[f.name] = tuple(int(c) for c in v)
    return MapOutput(computation_id, values)


# --- mock derivation --------------------------------------------------------------

def derive_mock(real_ds: LocalDataset, mode: str, seed: int, k: int | None = None) -> LocalDataset:
    """Build a mock dataset from a real one.

    subsample draws k records without replacement; gaussianized replaces every
    field with normal draws matching the field's mean and standard deviation,
    which yields a deliberately cleaner distribution than long-tailed real
    data.
    """
    if not real_ds.records:
        raise EmptyDataset("cannot derive a mock from an empty dataset")
    rng = Random(f"mock/{mode}/{seed}")
    if mode == "subsample":
        if k is None or not 1 <= k <= len(real_ds.records):
            raise ValueError("subsample needs 1 <= k <= record count")
        picked = rng.sample(list(real_ds.records), k)
        return LocalDataset(tuple(dict(r) for r in picked), MOCK)
    if mode == "gaussianized":
        names = list(real_ds.records[0].keys())
        moments = {}
        for name in names:
            col = [r[name] for r in real_ds.records]
            mu = math.fsum(col) / len(col)
            moments[name] = (mu, statistics.pstdev(col))
        out = []
        for _ in range(len(real_ds.records)):
            rec = {}
            for name in names:
                mu, sd = moments[name]
                rec[name] = rng.gauss(mu, sd)
            out.append(rec)
        return LocalDataset(tuple(out), MOCK)
    raise ValueError(f"unknown mock mode {mode!r}")
