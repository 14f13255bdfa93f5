import csv
from dataclasses import replace

import numpy as np
import pytest

from echo_metrics import synth
from echo_metrics.polarization import (
    CONSPIRACY, SCIENCE, bimodality_coefficient, user_polarization,
)
from echo_metrics.tailstats import fit_powerlaw


def test_config_validation():
    for bad in (dict(mixture=(0.5, 0.5, 0.5)), dict(beta_params=(0, 1)), dict(platform="x"),
                dict(n_users=0), dict(switching_length=-1), dict(switching_fraction=1.5),
                dict(activity_theta=1.0), dict(activity_xmin=0)):
        with pytest.raises(ValueError):
            synth.GeneratorConfig(**bad)


def test_seed_determinism():
    cfg = synth.GeneratorConfig(n_users=300, switching_length=5, seed=3)
    a, ta = synth.generate(cfg)
    b, tb = synth.generate(cfg)
    assert a.same_events(b) and ta == tb
    c, _ = synth.generate(replace(cfg, seed=4))
    assert not a.same_events(c)


def test_pure_science_component():
    cfg = synth.GeneratorConfig(n_users=2000, mixture=(1, 0, 0), beta_params=(0.5, 50), seed=1)
    ds, truth = synth.generate(cfg)
    recs = user_polarization(ds)
    assert np.mean([t.rho_star for t in truth.values()]) < 0.02
    assert np.mean([r.label == SCIENCE for r in recs]) > 0.9


def test_pure_conspiracy_component():
    cfg = synth.GeneratorConfig(n_users=2000, mixture=(0, 0, 1), beta_params=(0.5, 50), seed=1)
    ds, _ = synth.generate(cfg)
    assert np.mean([r.label == CONSPIRACY for r in user_polarization(ds)]) > 0.9


def test_switching_phase_is_coin_flip():
    cfg = synth.GeneratorConfig(n_users=3000, mixture=(1, 0, 0), beta_params=(0.5, 1e6),
                                switching_length=20, activity_xmin=40, seed=2)
    ds, truth = synth.generate(cfg)
    early, late = [], []
    for uid, idx in ds.users.items():
        cats = ds.category[idx]
        early.append(cats[:20].mean())
        late.append(cats[20:].mean())
        assert truth[uid].switching_length == 20
    assert np.mean(early) == pytest.approx(0.5, abs=0.01)
    assert np.mean(late) < 1e-3


def test_switching_fraction_splits_users():
    cfg = synth.GeneratorConfig(n_users=4000, switching_length=10, switching_fraction=0.25, seed=3)
    _, truth = synth.generate(cfg)
    share = np.mean([t.switching_length > 0 for t in truth.values()])
    assert share == pytest.approx(0.25, abs=0.03)


def test_activity_tail_recovered():
    cfg = synth.GeneratorConfig(n_users=20_000, activity_theta=2.2, activity_xmin=8, seed=4)
    _, truth = synth.generate(cfg)
    counts = np.array([t.n_comments for t in truth.values()])
    assert counts.min() >= 8
    assert abs(fit_powerlaw(counts).theta_hat - 2.2) < 0.1


def test_timestamps_increase_per_user():
    ds, _ = synth.generate(synth.GeneratorConfig(n_users=200, seed=5))
    for idx in ds.users.values():
        assert np.all(np.diff(ds.timestamp[idx]) > 0)


def test_item_categories_consistent():
    ds, _ = synth.generate(synth.GeneratorConfig(n_users=500, seed=6))
    for (_, item), stats in ds.items.items():
        assert item.startswith(stats.category[:3])


def test_presets():
    ds, _ = synth.generate(replace(synth.UNIMODAL_POPULATION, n_users=20_000))
    assert bimodality_coefficient(user_polarization(ds)).bc < 5 / 9
    assert synth.CLASSIFIER_COHORT.switching_length == 30


def test_item_stats_shape_and_coupling_errors():
    fb, yt = synth.generate_item_stats(synth.GeneratorConfig(n_items=10), coupling=0.4)
    assert len(fb) == len(yt) == 20
    assert [i.item_id for i in fb] == [i.item_id for i in yt]
    assert all(i.views == 0 for i in fb) and all(i.shares == 0 for i in yt)
    with pytest.raises(ValueError):
        synth.generate_item_stats(synth.GeneratorConfig(), coupling=1.5)


def test_ground_truth_csv(tmp_path):
    _, truth = synth.generate(synth.GeneratorConfig(n_users=5))
    synth.write_ground_truth_csv(truth, tmp_path / "gt.csv")
    rows = list(csv.DictReader(open(tmp_path / "gt.csv")))
    assert list(rows[0]) == ["user_id", "rho_star", "class", "N_u", "L"]
    assert len(rows) == 5
