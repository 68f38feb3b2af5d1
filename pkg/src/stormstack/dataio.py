"""File formats: sequence datasets, model checkpoints, and the raw
event/volume files the generator writes.

Everything is plain text with `\n` line endings; reals are rendered
with repr(), which round-trips every double exactly (at most 17
significant digits).
"""

import csv
import os

import numpy as np

from .errors import DataError, DimensionError, ParseError, UsageError, ValidationError
from .features import EventRecord, FeatureSequence, SHSRVolume
from .model import ModelConfig, expected_param_shapes
from .tensor import Tensor

CHECKPOINT_HEADER = "#stormstack-checkpoint v1"

_CONFIG_KEYS = (
    "steps", "input_channels", "conv_layers", "lstm_hidden", "attention_heads",
    "attention_dim", "classes", "conv_padding", "recurrent", "attention",
    "input_shift", "input_scale", "seed",
)


def _require_file(path):
    if not os.path.exists(path):
        raise DataError(f"{path}: file not found")


# ---------------------------------------------------------------------------
# sequence files


def write_sequences(path, samples):
    """Write FeatureSequences as CSV: sample_id,t,label,f_1..f_D.

    Rows for a sample are contiguous with t counting from 0; all
    samples must share one channel count.
    """
    widths = {s.channels for s in samples}
    if len(widths) > 1:
        raise DimensionError(f"samples disagree on channel count: {sorted(widths)}")
    channels = widths.pop() if widths else 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sample_id", "t", "label"] + [f"f_{j + 1}" for j in range(channels)])
        for s in samples:
            for t in range(s.steps):
                # float() first: repr() of a numpy scalar is not a bare number.
                writer.writerow([s.sample_id, t, s.label] + [repr(float(v)) for v in s.data[t]])


def load_sequences(path):
    """Parse a sequence file back into FeatureSequences, in file order."""
    _require_file(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:3] != ["sample_id", "t", "label"]:
            raise ParseError(f"{path}: header must start with sample_id,t,label")
        channels = len(header) - 3
        if header[3:] != [f"f_{j + 1}" for j in range(channels)]:
            raise ParseError(f"{path}: feature columns must be named f_1..f_{channels}")
        samples = []
        seen = set()
        current_id = None
        current_label = None
        rows = []

        def flush():
            if current_id is not None:
                samples.append(FeatureSequence(
                    sample_id=current_id, label=current_label, data=np.array(rows)
                ))

        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            sample_id = row[0]
            try:
                t = int(row[1])
                label = int(row[2])
                values = [float(v) for v in row[3:]]
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            if sample_id != current_id:
                if sample_id in seen:
                    raise ValidationError(f"{path}:{lineno}: rows for {sample_id} are not contiguous")
                flush()
                seen.add(sample_id)
                current_id = sample_id
                current_label = label
                rows = []
            if t != len(rows):
                raise ValidationError(f"{path}:{lineno}: expected t={len(rows)} for {sample_id}, got {t}")
            if label != current_label:
                raise ValidationError(f"{path}:{lineno}: label changed within {sample_id}")
            rows.append(values)
        flush()
    return samples


# ---------------------------------------------------------------------------
# checkpoints


def _config_items(config):
    conv = ",".join(f"{f}x{k}" for f, k in config.conv_layers)
    return {
        "steps": str(config.steps),
        "input_channels": str(config.input_channels),
        "conv_layers": conv,
        "lstm_hidden": str(config.lstm_hidden),
        "attention_heads": str(config.attention_heads),
        "attention_dim": str(config.attention_dim),
        "classes": str(config.classes),
        "conv_padding": config.conv_padding,
        "recurrent": config.recurrent,
        "attention": "true" if config.attention else "false",
        "input_shift": ",".join(repr(v) for v in config.input_shift),
        "input_scale": ",".join(repr(v) for v in config.input_scale),
        "seed": str(config.seed),
    }


def _parse_config(items, path):
    missing = [k for k in _CONFIG_KEYS if k not in items]
    if missing:
        raise ParseError(f"{path}: checkpoint config is missing {missing}")
    unknown = [k for k in items if k not in _CONFIG_KEYS]
    if unknown:
        raise ParseError(f"{path}: unknown checkpoint config keys {unknown}")
    try:
        conv = tuple(
            (int(part.split("x")[0]), int(part.split("x")[1]))
            for part in items["conv_layers"].split(",")
            if part
        )
        if items["attention"] not in ("true", "false"):
            raise ValueError(f"attention must be true or false, got {items['attention']!r}")
        return ModelConfig(
            steps=int(items["steps"]),
            input_channels=int(items["input_channels"]),
            conv_layers=conv,
            lstm_hidden=int(items["lstm_hidden"]),
            attention_heads=int(items["attention_heads"]),
            attention_dim=int(items["attention_dim"]),
            classes=int(items["classes"]),
            conv_padding=items["conv_padding"],
            recurrent=items["recurrent"],
            attention=items["attention"] == "true",
            input_shift=tuple(float(v) for v in items["input_shift"].split(",") if v),
            input_scale=tuple(float(v) for v in items["input_scale"].split(",") if v),
            seed=int(items["seed"]),
        )
    except (ValueError, IndexError) as exc:
        raise ParseError(f"{path}: bad checkpoint config: {exc}") from None


def save_checkpoint(params, config: ModelConfig, path):
    """Text checkpoint: version line, config echo, then one `@name dims`
    block per parameter with repr() values."""
    expected = expected_param_shapes(config)
    missing = [n for n in expected if n not in params]
    extra = [n for n in params if n not in expected]
    if missing or extra:
        raise UsageError(f"params do not match config (missing {missing}, unexpected {extra})")
    with open(path, "w", newline="") as fh:
        fh.write(CHECKPOINT_HEADER + "\n")
        for key, value in _config_items(config).items():
            fh.write(f"{key}={value}\n")
        for name in expected:
            tensor = params[name]
            if tensor.shape != expected[name]:
                raise DimensionError(
                    f"parameter {name} has shape {tensor.shape}, config requires {expected[name]}"
                )
            fh.write("@" + name + " " + " ".join(str(d) for d in tensor.shape) + "\n")
            flat = tensor.array.reshape(-1, tensor.shape[-1] if tensor.ndim > 1 else tensor.size)
            for row in flat:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_checkpoint(path):
    """Read a checkpoint back as (params, config)."""
    _require_file(path)
    with open(path) as fh:
        lines = fh.read().split("\n")
    if not lines or lines[0] != CHECKPOINT_HEADER:
        raise ParseError(f"{path}: expected header {CHECKPOINT_HEADER!r}, got {lines[0]!r}")
    pos = 1
    items = {}
    while pos < len(lines) and lines[pos] and not lines[pos].startswith("@"):
        line = lines[pos]
        if "=" not in line:
            raise ParseError(f"{path}:{pos + 1}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        items[key] = value
        pos += 1
    config = _parse_config(items, path)
    expected = expected_param_shapes(config)
    params = {}
    while pos < len(lines):
        line = lines[pos]
        if not line:
            pos += 1
            continue
        if not line.startswith("@"):
            raise ParseError(f"{path}:{pos + 1}: expected a @parameter block, got {line!r}")
        fields = line[1:].split()
        name, dims = fields[0], fields[1:]
        if name not in expected:
            raise ValidationError(f"{path}: unknown parameter {name!r}")
        if name in params:
            raise ValidationError(f"{path}: duplicate parameter {name!r}")
        try:
            shape = tuple(int(d) for d in dims)
        except ValueError:
            raise ParseError(f"{path}:{pos + 1}: bad dimensions in {line!r}") from None
        if shape != expected[name]:
            raise DimensionError(
                f"{path}: parameter {name} has shape {shape}, config requires {expected[name]}"
            )
        count = 1
        for d in shape:
            count *= d
        values = []
        pos += 1
        while len(values) < count and pos < len(lines) and not lines[pos].startswith("@"):
            chunk = lines[pos].split()
            try:
                values.extend(float(v) for v in chunk)
            except ValueError as exc:
                raise ParseError(f"{path}:{pos + 1}: {exc}") from None
            pos += 1
        if len(values) != count:
            raise ParseError(
                f"{path}: incomplete block for {name}: got {len(values)} of {count} values"
            )
        params[name] = Tensor(np.array(values).reshape(shape))
    missing = [n for n in expected if n not in params]
    if missing:
        raise ValidationError(f"{path}: checkpoint is missing parameters {missing}")
    return params, config


# ---------------------------------------------------------------------------
# raw event / volume files


def write_events(path, events, channels):
    """One CSV row per event; auxiliary channels become named columns."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["event_id", "label", "latitude", "longitude", "timestamp"] + list(channels))
        for e in events:
            writer.writerow(
                [e.event_id, e.label, repr(float(e.latitude)), repr(float(e.longitude)), e.timestamp]
                + [repr(float(e.auxiliary[c])) for c in channels]
            )


def load_events(path):
    """Returns (events, channels) with channels taken from the header."""
    _require_file(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        fixed = ["event_id", "label", "latitude", "longitude", "timestamp"]
        if header is None or header[:5] != fixed:
            raise ParseError(f"{path}: header must start with {','.join(fixed)}")
        channels = tuple(header[5:])
        events = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                events.append(EventRecord(
                    event_id=row[0],
                    label=int(row[1]),
                    latitude=float(row[2]),
                    longitude=float(row[3]),
                    timestamp=int(row[4]),
                    auxiliary={c: float(v) for c, v in zip(channels, row[5:])},
                ))
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
    return events, channels


def write_volumes(path, events, volumes):
    """One CSV row per volume scan, grouped by event in event order."""
    if len(events) != len(volumes):
        raise UsageError(f"got {len(events)} events but {len(volumes)} volume lists")
    dims = {v.dims for scans in volumes for v in scans}
    if len(dims) > 1:
        raise DimensionError(f"volumes disagree on grid dims: {sorted(dims)}")
    nx, ny, nz = dims.pop() if dims else (0, 0, 0)
    cells = nx * ny * nz
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["event_id", "timestamp", "nx", "ny", "nz", "missing"]
                        + [f"v_{j + 1}" for j in range(cells)])
        for e, scans in zip(events, volumes):
            for v in scans:
                writer.writerow([e.event_id, v.timestamp, nx, ny, nz, repr(float(v.missing))]
                                + [repr(float(x)) for x in v.values])


def load_volumes(path):
    """Returns {event_id: [SHSRVolume, ...]} preserving file order."""
    _require_file(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        fixed = ["event_id", "timestamp", "nx", "ny", "nz", "missing"]
        if header is None or header[:6] != fixed:
            raise ParseError(f"{path}: header must start with {','.join(fixed)}")
        cells = len(header) - 6
        volumes = {}
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                dims = (int(row[2]), int(row[3]), int(row[4]))
                volume = SHSRVolume(
                    dims=dims,
                    values=np.array([float(v) for v in row[6:]]),
                    timestamp=int(row[1]),
                    missing=float(row[5]),
                )
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            if dims[0] * dims[1] * dims[2] != cells:
                raise DimensionError(f"{path}:{lineno}: dims {dims} do not match {cells} value columns")
            volumes.setdefault(row[0], []).append(volume)
    return volumes
