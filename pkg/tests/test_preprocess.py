import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from neuroscore.core import EventMarker, Recording
from neuroscore.errors import (
    AllRejected,
    ConfigError,
    NonIntegerFactor,
    SingleChannel,
    UnstableDesign,
)
from neuroscore.preprocess import (
    PreprocessConfig,
    bandpass,
    common_average_reference,
    design_bandpass,
    downsample,
    peak_to_peak,
    preprocess_epochs,
    preprocess_recording,
    reject_artifacts,
    rejection_table,
)
from neuroscore.synth import SynthSpec, generate, inject_artifacts

from conftest import make_epochset


def _tone(freq, rate=1000.0, seconds=20.0, amp=1.0, offset=0.0, n_ch=1):
    t = np.arange(int(seconds * rate)) / rate
    x = np.tile(amp * np.sin(2 * np.pi * freq * t) + offset, (n_ch, 1))
    return Recording(x, rate, tuple(f"c{i}" for i in range(n_ch)))


def _steady_amplitude(x, rate, trim_s=5.0):
    k = int(trim_s * rate)
    seg = x[..., k:-k]
    return np.sqrt(2.0) * seg.std(axis=-1)


# --- CAR -------------------------------------------------------------------

def test_car_column_example():
    es = make_epochset(np.array([1.0, 2.0, 3.0]).reshape(1, 3, 1), ["a"], rate_hz=1000.0)
    np.testing.assert_allclose(common_average_reference(es).data[0, :, 0], [-1, 0, 1])


def test_car_zero_mean_random(rng):
    es = make_epochset(rng.standard_normal((1, 32, 250)) * 20, ["a"])
    out = common_average_reference(es).data
    assert np.abs(out.mean(axis=1)).max() < 1e-9


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 3), st.integers(2, 8), st.integers(1, 6)),
              elements=st.floats(-1e3, 1e3)))
def test_car_idempotent_and_zero_mean(x):
    es = make_epochset(x, ["a"] * x.shape[0], rate_hz=1000.0)
    once = common_average_reference(es)
    twice = common_average_reference(once)
    scale = max(1.0, np.abs(x).max())
    assert np.abs(once.data.mean(axis=1)).max() <= 1e-12 * scale * x.shape[1]
    np.testing.assert_allclose(twice.data, once.data, atol=1e-12 * scale)


def test_car_single_channel():
    with pytest.raises(SingleChannel):
        common_average_reference(make_epochset(np.zeros((1, 1, 4)), ["a"], rate_hz=1000.0))


# --- bandpass --------------------------------------------------------------

def test_passband_tone_kept():
    rec = _tone(10.0)
    amp = _steady_amplitude(bandpass(rec).data, rec.rate_hz)
    assert 0.95 <= amp[0] <= 1.0


def test_stopband_tone_attenuated():
    rec = _tone(50.0)
    amp = _steady_amplitude(bandpass(rec).data, rec.rate_hz)
    assert amp[0] <= 0.15


def test_twice_high_edge_attenuated():
    rec = _tone(40.0)
    assert _steady_amplitude(bandpass(rec).data, rec.rate_hz)[0] <= 0.15


def test_dc_removed():
    rec = _tone(10.0, offset=100.0)
    out = bandpass(rec).data
    k = int(5 * rec.rate_hz)
    assert abs(out[0, k:-k].mean()) <= 1.0


def test_zero_phase(rng):
    """Forward-backward filtering does not shift a passband tone."""
    rec = _tone(6.0, rate=250.0)
    out = bandpass(rec).data[0]
    x = rec.data[0]
    k = 5 * 250
    lags = np.arange(-5, 6)
    xc = [np.dot(x[k:-k], np.roll(out, s)[k:-k]) for s in lags]
    assert lags[int(np.argmax(xc))] == 0


def test_filter_design_is_stable_sos():
    sos = design_bandpass((0.5, 20.0), 1000.0, 4)
    assert sos.shape == (4, 6)
    with pytest.raises(UnstableDesign):
        design_bandpass((0.5, 600.0), 1000.0)


def test_config_validation():
    with pytest.raises(UnstableDesign):
        PreprocessConfig(band_hz=(0.5, 130.0))
    with pytest.raises(ConfigError):
        PreprocessConfig(band_hz=(20.0, 5.0))
    with pytest.raises(ConfigError):
        PreprocessConfig(p2p_reject_uv=0)
    with pytest.raises(ConfigError):
        PreprocessConfig(filter_order=3)
    with pytest.raises(ConfigError):
        PreprocessConfig.from_mapping({"bandd_hz": [1, 2]})
    cfg = PreprocessConfig.from_mapping({"band_hz": [1, 15], "p2p_reject_uv": 80})
    assert PreprocessConfig.from_mapping(cfg.to_dict()) == cfg


def test_input_rate_too_low():
    with pytest.raises(UnstableDesign):
        bandpass(_tone(5.0, rate=40.0))


# --- downsample ------------------------------------------------------------

def test_downsample_counts_and_rate():
    rec = Recording(np.ones((2, 1000)), 1000.0, ("a", "b"))
    out = downsample(rec, 250.0)
    assert out.data.shape == (2, 250)
    assert out.rate_hz == 250.0
    np.testing.assert_array_equal(out.data, 1.0)


def test_downsample_events_remapped():
    rec = Recording(np.zeros((2, 1000)), 1000.0, ("a", "b"),
                    (EventMarker(400, "x"), EventMarker(998, "y")))
    out = downsample(rec, 250.0)
    assert [e.sample_index for e in out.events] == [100, 249]


def test_downsample_epochs():
    es = make_epochset(np.arange(2 * 1000).reshape(1, 2, 1000), ["a"], rate_hz=1000.0)
    out = downsample(es, 250.0)
    np.testing.assert_array_equal(out.data[0], es.data[0][:, ::4])
    assert out.window_ms == es.window_ms


def test_downsample_non_integer():
    with pytest.raises(NonIntegerFactor):
        downsample(Recording(np.zeros((2, 10)), 1000.0, ("a", "b")), 300.0)


def test_filter_then_decimate_keeps_frequency():
    rec = _tone(10.0, seconds=40.0)
    out = downsample(bandpass(rec), 250.0)
    x = out.data[0]
    spec = np.abs(np.fft.rfft(x * np.hanning(x.size)))
    freqs = np.fft.rfftfreq(x.size, 1 / out.rate_hz)
    k = int(np.argmax(spec))
    # parabolic interpolation of the peak bin
    a, b, c = np.log(spec[k - 1:k + 2])
    f = freqs[k] + 0.5 * (a - c) / (a - 2 * b + c) * (freqs[1] - freqs[0])
    assert abs(f - 10.0) <= 0.1


# --- rejection -------------------------------------------------------------

def test_reject_threshold_examples():
    data = np.zeros((3, 2, 10))
    data[0, 1, 3] = 150.0            # spans 150 uV
    data[1, 0, :] = np.linspace(-25, 25, 10)  # spans 50 uV
    data[2, 1, :5] = 100.0          # exactly at threshold: kept
    es = make_epochset(data, ["DCGAN", "BEGAN", "STANDARD"], rate_hz=10.0)
    np.testing.assert_allclose(peak_to_peak(es), [150.0, 50.0, 100.0])
    kept, rep = reject_artifacts(es, 100.0)
    assert kept.labels == ("BEGAN", "STANDARD")
    assert rep.rejected_indices == [0]
    assert rep.retained == {"DCGAN": 0, "BEGAN": 1, "STANDARD": 1}
    assert rep.rejected == {"DCGAN": 1, "BEGAN": 0, "STANDARD": 0}
    assert rep.total_retained + rep.total_rejected == len(es)


def test_reject_all_warns():
    es = make_epochset(np.r_[0.0, 500.0].reshape(1, 1, 2).repeat(3, 0), ["a"] * 3,
                       rate_hz=2.0)
    with pytest.warns(AllRejected):
        kept, rep = reject_artifacts(es, 100.0)
    assert len(kept) == 0 and rep.total_rejected == 3


def test_reject_under_threshold_keeps_all(rng):
    es = make_epochset(rng.uniform(-25, 25, (20, 4, 50)), ["a"] * 20)
    kept, rep = reject_artifacts(es, 100.0)
    assert len(kept) == 20 and rep.total_rejected == 0


def _small_epochs(seed, n_blocks=4):
    spec = SynthSpec(n_blocks=n_blocks, standards_per_block=1, seed=seed)
    return generate(spec, kind="epochs")


def test_injected_blinks_exactly_rejected():
    es, truth = _small_epochs(3)
    assert len(es) == 100
    dirty, flags = inject_artifacts(es, 5, 300.0, seed=11, truth=truth)
    kept, rep = reject_artifacts(dirty, 100.0)
    assert rep.rejected_indices == np.flatnonzero(flags).tolist()
    assert truth.contaminated.sum() == 5


def test_injected_blinks_rejected_after_chain():
    es, truth = _small_epochs(4)
    dirty, flags = inject_artifacts(es, 5, 300.0, seed=2, truth=truth)
    kept, rep = preprocess_epochs(dirty)
    assert rep.rejected_indices == np.flatnonzero(flags).tolist()
    assert kept.rate_hz == 250.0 and kept.n_times == 250


def test_small_blinks_survive():
    es, _ = _small_epochs(5)
    dirty, _ = inject_artifacts(es, 5, 10.0, seed=1)
    _, rep = preprocess_epochs(dirty)
    assert rep.total_rejected == 0


def test_recording_chain_and_table(tmp_path):
    spec = SynthSpec(n_blocks=2, seed=9)
    rec, _ = generate(spec)
    es, rep = preprocess_recording(rec)
    assert es.rate_hz == 250.0 and es.n_times == 250
    assert np.abs(es.data.mean(axis=1)).max() < 1e-9 * np.abs(es.data).max()
    assert rep.total_retained == len(es)
    rows = rejection_table({"1": rep, "2": rep})
    assert rows[0] == ["participant", "DCGAN", "BEGAN", "PROGAN", "RFACE", "STANDARD"] or \
        rows[0][-1] == "STANDARD"
    assert rows[1][1:] == [rep.retained[c] for c in rows[0][1:]]
    text = rep.to_csv(tmp_path / "r.csv").read_text().splitlines()
    assert text[0] == "category,retained,rejected"
