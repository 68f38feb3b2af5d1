"""Feature engineering: reflectivity statistics, sample assembly,
class balancing, and stratified splitting.

Each storm event contributes one sequence sample.  A sample row holds
six reflectivity statistics for one volume scan followed by the event's
auxiliary scalar channels, so the channel count is 6 + len(aux).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, UsageError, ValidationError
from .kalman import smooth_series
from .rng import SplitMix64

MISSING = -999.0
DEFAULT_THRESHOLD = 45.0
CLASS_NAMES = ("tornado", "hail", "wind")

AUX_CHANNELS = (
    "temperature",
    "humidity",
    "dew_point",
    "precip_amount",
    "precip_type",
    "wind_speed",
    "wind_direction",
    "pressure",
    "cloud_cover",
    "visibility",
)


@dataclass(frozen=True)
class SHSRVolume:
    """One gridded reflectivity scan.

    values is the flattened (nx, ny, nz) grid in row-major order; cells
    equal to `missing` are excluded from statistics.
    """

    dims: tuple
    values: np.ndarray
    timestamp: int
    missing: float = MISSING

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        values = np.asarray(self.values, dtype=np.float64).ravel()
        object.__setattr__(self, "values", values)
        if len(dims) != 3 or min(dims) < 1:
            raise ValidationError(f"dims must be three positive ints, got {self.dims}")
        expected = dims[0] * dims[1] * dims[2]
        if values.shape[0] != expected:
            raise DimensionError(
                f"volume has {values.shape[0]} cells, dims {dims} require {expected}"
            )

    def grid(self):
        """The values reshaped to (nx, ny, nz)."""
        return self.values.reshape(self.dims)


@dataclass(frozen=True)
class EventRecord:
    """One storm event: identity, class label, location, and auxiliary
    scalar observations keyed by channel name."""

    event_id: str
    label: int
    latitude: float
    longitude: float
    timestamp: int
    auxiliary: dict

    def __post_init__(self):
        if self.label not in (0, 1, 2):
            raise ValidationError(f"label must be 0, 1, or 2, got {self.label}")
        if not -90.0 <= self.latitude <= 90.0:
            raise ValidationError(f"latitude out of range: {self.latitude}")
        if not -180.0 <= self.longitude <= 180.0:
            raise ValidationError(f"longitude out of range: {self.longitude}")


@dataclass(frozen=True)
class FeatureSequence:
    """A (steps, channels) feature matrix with its sample id and label."""

    sample_id: str
    label: int
    data: np.ndarray

    def __post_init__(self):
        data = np.atleast_2d(np.asarray(self.data, dtype=np.float64))
        object.__setattr__(self, "data", data)
        if self.label not in (0, 1, 2):
            raise ValidationError(f"label must be 0, 1, or 2, got {self.label}")
        if data.size == 0:
            raise ValidationError("feature sequence must be nonempty")

    @property
    def steps(self):
        return self.data.shape[0]

    @property
    def channels(self):
        return self.data.shape[1]


@dataclass(frozen=True)
class DatasetSplit:
    """Train/validation/test partition of a sample list."""

    train: list
    validation: list
    test: list
    seed: int
    fractions: tuple

    def sizes(self):
        return (len(self.train), len(self.validation), len(self.test))


def extract_shsr_stats(volume: SHSRVolume, threshold: float = DEFAULT_THRESHOLD):
    """Six statistics over the non-missing cells of one volume.

    Returns (min, max, mean, variance, nonzero count, above-threshold
    count).  Variance is the population variance; the nonzero count
    uses |v| > 0 and the threshold count v > threshold, both strict.
    """
    valid = volume.values[volume.values != volume.missing]
    if valid.size == 0:
        raise ValidationError("volume has no non-missing cells")
    return (
        float(valid.min()),
        float(valid.max()),
        float(valid.mean()),
        float(valid.var()),
        float(np.count_nonzero(np.abs(valid) > 0.0)),
        float(np.count_nonzero(valid > threshold)),
    )


def build_sample(
    event: EventRecord,
    volumes,
    threshold: float = DEFAULT_THRESHOLD,
    channels=AUX_CHANNELS,
    kalman_q: float = None,
    kalman_r: float = 1.0,
) -> FeatureSequence:
    """Assemble the (T, 6 + len(channels)) sequence for one event.

    Row t holds the statistics of volume t followed by the event's
    auxiliary channels in the configured order (auxiliary values repeat
    across rows).  Volumes must be in strictly increasing timestamp
    order and fall inside the hour before the event.  When kalman_q is
    given, the six statistic channels are smoothed with the scalar
    random-walk filter; auxiliary channels are constant and pass
    through unchanged.
    """
    if len(volumes) == 0:
        raise ValidationError(f"event {event.event_id} has no volumes")
    stamps = [v.timestamp for v in volumes]
    if any(b <= a for a, b in zip(stamps, stamps[1:])):
        raise ValidationError(f"event {event.event_id} volume timestamps must strictly increase")
    lo, hi = event.timestamp - 60, event.timestamp
    if stamps[0] < lo or stamps[-1] >= hi:
        raise ValidationError(
            f"event {event.event_id} volumes must fall in [{lo}, {hi}), got [{stamps[0]}, {stamps[-1]}]"
        )
    missing = [c for c in channels if c not in event.auxiliary]
    extra = [c for c in event.auxiliary if c not in channels]
    if missing or extra:
        raise ValidationError(
            f"event {event.event_id} auxiliary channels do not match configuration"
            f" (missing {missing}, unexpected {extra})"
        )
    stats = np.array([extract_shsr_stats(v, threshold) for v in volumes])
    if kalman_q is not None:
        stats = smooth_series(stats, kalman_q, kalman_r)
    aux = np.array([float(event.auxiliary[c]) for c in channels])
    data = np.hstack([stats, np.tile(aux, (stats.shape[0], 1))])
    return FeatureSequence(sample_id=event.event_id, label=event.label, data=data)


def class_counts(samples):
    """Per-class sample counts as a {label: count} dict over 0, 1, 2."""
    counts = {0: 0, 1: 0, 2: 0}
    for s in samples:
        counts[s.label] += 1
    return counts


def balance(samples, seed: int):
    """Downsample every class to the size of the smallest one.

    Classes are visited in ascending label order; the kept subset of
    each oversized class is chosen by seeded draws without replacement,
    and survivors keep their relative order from the input.  The
    minority class is kept whole.
    """
    counts = class_counts(samples)
    if min(counts.values()) == 0:
        raise UsageError(f"balance needs all three classes present, counts {counts}")
    target = min(counts.values())
    rng = SplitMix64(seed)
    keep = set()
    for label in (0, 1, 2):
        positions = [i for i, s in enumerate(samples) if s.label == label]
        if len(positions) > target:
            chosen = rng.choose_indices(len(positions), target)
            keep.update(positions[j] for j in chosen)
        else:
            keep.update(positions)
    return [s for i, s in enumerate(samples) if i in keep]


def split(samples, fractions, seed: int) -> DatasetSplit:
    """Stratified split into train/validation/test parts.

    Each class is shuffled with the seeded generator, then the first
    floor(f_train * n) go to train, the next floor(f_val * n) to
    validation, and the remainder to test.  Fractions must be three
    nonnegative numbers summing to 1.
    """
    if len(samples) == 0:
        raise UsageError("split needs a nonempty sample list")
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or min(fractions) < 0:
        raise UsageError(f"fractions must be three nonnegative numbers, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise UsageError(f"fractions must sum to 1, got {fractions}")
    rng = SplitMix64(seed)
    train, validation, test = [], [], []
    for label in (0, 1, 2):
        members = [s for s in samples if s.label == label]
        rng.shuffle(members)
        n = len(members)
        n_train = int(fractions[0] * n)
        n_val = int(fractions[1] * n)
        train.extend(members[:n_train])
        validation.extend(members[n_train:n_train + n_val])
        test.extend(members[n_train + n_val:])
    return DatasetSplit(train=train, validation=validation, test=test, seed=seed, fractions=fractions)
