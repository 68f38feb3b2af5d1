"""Round trips and failure modes for the text file formats."""

import numpy as np
import pytest

from stormstack.dataio import (
    CHECKPOINT_HEADER,
    load_checkpoint,
    load_events,
    load_sequences,
    load_volumes,
    save_checkpoint,
    write_events,
    write_sequences,
    write_volumes,
)
from stormstack.errors import (
    DataError,
    DimensionError,
    ParseError,
    UsageError,
    ValidationError,
)
from stormstack.features import AUX_CHANNELS, EventRecord, FeatureSequence, SHSRVolume
from stormstack.model import ModelConfig, forward, init_params
from stormstack.tensor import Tensor

TINY = ModelConfig(steps=4, input_channels=2, conv_layers=((3, 2),),
                   lstm_hidden=2, attention_heads=1, attention_dim=4, seed=3)


def _sample(i, label, data):
    return FeatureSequence(sample_id=f"s{i}", label=label, data=np.asarray(data, dtype=np.float64))


def test_sequences_empty_round_trip(tmp_path):
    path = tmp_path / "seq.csv"
    write_sequences(path, [])
    assert path.read_text() == "sample_id,t,label\n"
    assert load_sequences(path) == []


def test_sequences_single_sample(tmp_path):
    path = tmp_path / "seq.csv"
    write_sequences(path, [_sample(0, 2, [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])])
    text = path.read_text()
    assert text.splitlines()[0] == "sample_id,t,label,f_1,f_2,f_3"
    got = load_sequences(path)
    assert len(got) == 1
    assert got[0].sample_id == "s0"
    assert got[0].label == 2
    assert np.array_equal(got[0].data, [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])


def test_sequences_round_trip_is_exact(tmp_path):
    # repr() prints enough digits to reconstruct any double bit for bit
    rng = np.random.default_rng(91)
    values = rng.standard_normal((10, 25, 4))
    values *= 10.0 ** rng.integers(-30, 31, size=values.shape)
    samples = [_sample(i, i % 3, values[i]) for i in range(10)]
    path = tmp_path / "seq.csv"
    write_sequences(path, samples)
    got = load_sequences(path)
    assert [s.sample_id for s in got] == [s.sample_id for s in samples]
    for a, b in zip(samples, got):
        assert a.label == b.label
        assert np.array_equal(a.data, b.data)


def test_sequences_missing_file(tmp_path):
    with pytest.raises(DataError) as err:
        load_sequences(tmp_path / "absent.csv")
    assert "absent.csv" in str(err.value)


def test_sequences_malformed(tmp_path):
    path = tmp_path / "seq.csv"
    path.write_text("who,what\n")
    with pytest.raises(ParseError):
        load_sequences(path)
    path.write_text("sample_id,t,label,f_1,f_9\n")
    with pytest.raises(ParseError):
        load_sequences(path)
    path.write_text("sample_id,t,label,f_1\na,0,1\n")
    with pytest.raises(ParseError) as err:
        load_sequences(path)
    assert ":2" in str(err.value)
    path.write_text("sample_id,t,label,f_1\na,0,1,notanumber\n")
    with pytest.raises(ParseError):
        load_sequences(path)


def test_sequences_structural_checks(tmp_path):
    path = tmp_path / "seq.csv"
    # interleaved ids
    path.write_text("sample_id,t,label,f_1\na,0,1,1.0\nb,0,1,1.0\na,1,1,1.0\n")
    with pytest.raises(ValidationError) as err:
        load_sequences(path)
    assert "contiguous" in str(err.value)
    # broken step counter
    path.write_text("sample_id,t,label,f_1\na,0,1,1.0\na,2,1,1.0\n")
    with pytest.raises(ValidationError):
        load_sequences(path)
    # label flips mid-sample
    path.write_text("sample_id,t,label,f_1\na,0,1,1.0\na,1,2,1.0\n")
    with pytest.raises(ValidationError):
        load_sequences(path)


def test_sequences_width_mismatch():
    mixed = [_sample(0, 0, [[1.0, 2.0]]), _sample(1, 0, [[1.0]])]
    with pytest.raises(DimensionError):
        write_sequences("/dev/null", mixed)


def test_checkpoint_round_trip(tmp_path):
    path = tmp_path / "model.ckpt"
    params = init_params(TINY)
    save_checkpoint(params, TINY, path)
    got_params, got_config = load_checkpoint(path)
    assert got_config == TINY
    assert set(got_params) == set(params)
    for name in params:
        assert np.array_equal(got_params[name].array, params[name].array)


def test_checkpoint_keeps_standardization(tmp_path):
    cfg = ModelConfig(**{**TINY.__dict__, "input_shift": (1.5, -0.25),
                         "input_scale": (2.0, 0.5)})
    path = tmp_path / "model.ckpt"
    save_checkpoint(init_params(cfg), cfg, path)
    _, got = load_checkpoint(path)
    assert got.input_shift == (1.5, -0.25)
    assert got.input_scale == (2.0, 0.5)


def test_checkpoint_predictions_survive_round_trip(tmp_path):
    path = tmp_path / "model.ckpt"
    params = init_params(TINY)
    save_checkpoint(params, TINY, path)
    loaded_params, loaded_config = load_checkpoint(path)
    rng = np.random.default_rng(92)
    for _ in range(5):
        x = rng.standard_normal((4, 2)) * 3.0
        assert np.array_equal(forward(x, params, TINY), forward(x, loaded_params, loaded_config))


def test_checkpoint_rejects_bad_header(tmp_path):
    path = tmp_path / "model.ckpt"
    path.write_text("#stormstack-checkpoint v2\n")
    with pytest.raises(ParseError):
        load_checkpoint(path)
    with pytest.raises(DataError):
        load_checkpoint(tmp_path / "none.ckpt")


def test_checkpoint_rejects_truncation(tmp_path):
    path = tmp_path / "model.ckpt"
    save_checkpoint(init_params(TINY), TINY, path)
    lines = path.read_text().rstrip("\n").split("\n")
    clipped = tmp_path / "clipped.ckpt"
    clipped.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises((ParseError, ValidationError)) as err:
        load_checkpoint(clipped)
    assert "incomplete" in str(err.value) or "missing" in str(err.value)


def test_checkpoint_rejects_unknown_parameter(tmp_path):
    path = tmp_path / "model.ckpt"
    save_checkpoint(init_params(TINY), TINY, path)
    text = path.read_text().replace("@out_b", "@mystery")
    path.write_text(text)
    with pytest.raises(ValidationError):
        load_checkpoint(path)


def test_checkpoint_rejects_duplicate_parameter(tmp_path):
    path = tmp_path / "model.ckpt"
    save_checkpoint(init_params(TINY), TINY, path)
    lines = path.read_text().rstrip("\n").split("\n")
    start = lines.index("@out_b 3")
    dup = lines + lines[start:start + 2]
    path.write_text("\n".join(dup) + "\n")
    with pytest.raises(ValidationError) as err:
        load_checkpoint(path)
    assert "duplicate" in str(err.value)


def test_checkpoint_rejects_missing_parameter(tmp_path):
    path = tmp_path / "model.ckpt"
    save_checkpoint(init_params(TINY), TINY, path)
    lines = path.read_text().rstrip("\n").split("\n")
    start = lines.index("@out_b 3")
    path.write_text("\n".join(lines[:start] + lines[start + 2:]) + "\n")
    with pytest.raises(ValidationError) as err:
        load_checkpoint(path)
    assert "out_b" in str(err.value)


def test_checkpoint_rejects_shape_mismatch(tmp_path):
    path = tmp_path / "model.ckpt"
    save_checkpoint(init_params(TINY), TINY, path)
    path.write_text(path.read_text().replace("@out_b 3", "@out_b 4"))
    with pytest.raises(DimensionError):
        load_checkpoint(path)


def test_checkpoint_rejects_config_tampering(tmp_path):
    path = tmp_path / "model.ckpt"
    save_checkpoint(init_params(TINY), TINY, path)
    text = path.read_text()
    path.write_text(text.replace("recurrent=bilstm", "recurrent=tcn"))
    with pytest.raises((ParseError, ValidationError)):
        load_checkpoint(path)
    path.write_text(text.replace("seed=3\n", ""))
    with pytest.raises(ParseError) as err:
        load_checkpoint(path)
    assert "seed" in str(err.value)


def test_save_checkpoint_validates_params(tmp_path):
    path = tmp_path / "model.ckpt"
    params = init_params(TINY)
    extra = dict(params, rogue=Tensor([1.0]))
    with pytest.raises(UsageError):
        save_checkpoint(extra, TINY, path)
    misshapen = dict(params, out_b=Tensor([0.0, 0.0]))
    with pytest.raises(DimensionError):
        save_checkpoint(misshapen, TINY, path)
    short = dict(params)
    del short["out_b"]
    with pytest.raises(UsageError):
        save_checkpoint(short, TINY, path)


def _events(n=3):
    out = []
    for i in range(n):
        aux = {c: float(10 * i + j) for j, c in enumerate(AUX_CHANNELS)}
        out.append(EventRecord(event_id=f"ev{i}", label=i % 3, latitude=30.0 + i,
                               longitude=-100.0 + i, timestamp=1000 + 100 * i,
                               auxiliary=aux))
    return out


def test_events_round_trip(tmp_path):
    path = tmp_path / "events.csv"
    sent = _events()
    write_events(path, sent, AUX_CHANNELS)
    got, channels = load_events(path)
    assert channels == tuple(AUX_CHANNELS)
    assert got == sent


def test_events_malformed(tmp_path):
    path = tmp_path / "events.csv"
    path.write_text("event_id,label\n")
    with pytest.raises(ParseError):
        load_events(path)
    header = "event_id,label,latitude,longitude,timestamp,temperature"
    path.write_text(header + "\nev0,0,35.0\n")
    with pytest.raises(ParseError):
        load_events(path)
    path.write_text(header + "\nev0,zero,35.0,-97.0,100,20.0\n")
    with pytest.raises(ParseError):
        load_events(path)


def _volume(values, timestamp):
    return SHSRVolume(dims=(2, 1, 2), values=np.asarray(values, dtype=np.float64),
                      timestamp=timestamp)


def test_volumes_round_trip(tmp_path):
    path = tmp_path / "volumes.csv"
    events = _events(2)
    volumes = [[_volume([1.0, 2.0, 3.0, 4.0], 950), _volume([5.0, 6.0, 7.0, 8.0], 960)],
               [_volume([0.5, -999.0, 1.5, 2.5], 1050)]]
    write_volumes(path, events, volumes)
    got = load_volumes(path)
    assert set(got) == {"ev0", "ev1"}
    assert [v.timestamp for v in got["ev0"]] == [950, 960]
    for sent, loaded in zip(volumes[0], got["ev0"]):
        assert loaded.dims == sent.dims
        assert np.array_equal(loaded.values, sent.values)
        assert loaded.missing == sent.missing
    assert got["ev1"][0].values[1] == -999.0


def test_volumes_validation(tmp_path):
    path = tmp_path / "volumes.csv"
    with pytest.raises(UsageError):
        write_volumes(path, _events(2), [[]])
    ragged = [[_volume([1, 2, 3, 4], 950)],
              [SHSRVolume(dims=(1, 1, 4), values=np.zeros(4), timestamp=950)]]
    with pytest.raises(DimensionError):
        write_volumes(path, _events(2), ragged)
    path.write_text("event_id,timestamp\n")
    with pytest.raises(ParseError):
        load_volumes(path)
    path.write_text("event_id,timestamp,nx,ny,nz,missing,v_1,v_2\n"
                    "ev0,950,3,1,1,-999.0,1.0,2.0\n")
    with pytest.raises(DimensionError):
        load_volumes(path)
