import json

import numpy as np
import pytest

from qmreceiver import infotheory as it
from qmreceiver.detection import DetectorModel, DolinarConfig
from qmreceiver.hadamard import SUPPORTED_ORDERS
from qmreceiver.infotheory import ChannelParams
from qmreceiver.simulation import (
    ConfusionMatrix,
    Scheme,
    SchemeConfig,
    compare_report,
    empirical_mutual_information,
    run_trials,
    sample_word,
    stratified_allocation,
    word_priors,
)


def direct(n_bar, L, trials, seed=0, **kw):
    return SchemeConfig(Scheme.DIRECT_PPM, ChannelParams(n_bar, L), trials=trials, seed=seed, **kw)


def hybrid(n_bar, L, lam, trials, seed=0, slices=1000, **kw):
    return SchemeConfig(Scheme.HYBRID, ChannelParams(n_bar, L, lam), dolinar=DolinarConfig(slices),
                        trials=trials, seed=seed, **kw)


def within(k, n, p, sigmas=3.0):
    return abs(k / n - p) <= sigmas * np.sqrt(p * (1 - p) / n)


def test_sample_word_uniform_for_direct():
    rng = np.random.default_rng(0)
    n = 10**5
    idx = np.array([sample_word(Scheme.DIRECT_PPM, 8, 1.0, rng).index for _ in range(n)])
    counts = np.bincount(idx, minlength=8)
    assert all(within(c, n, 1 / 8) for c in counts)


def test_sample_word_hybrid_zero_lambda():
    rng = np.random.default_rng(1)
    words = [sample_word(Scheme.HYBRID, 8, 0.0, rng) for _ in range(4000)]
    assert all(w.index == 0 for w in words)
    minus = sum(w.extended for w in words)
    assert within(minus, 4000, 0.5)


def test_hybrid_prior():
    pri = word_priors(Scheme.HYBRID, 8, 0.6)
    assert pri[0] == pytest.approx(0.2) and pri[8] == pytest.approx(0.2)
    assert np.allclose(pri[1:8], 0.6 / 7)
    assert pri.sum() == pytest.approx(1.0, abs=1e-15)
    rng = np.random.default_rng(2)
    n = 10**5
    draws = [sample_word(Scheme.HYBRID, 8, 0.6, rng) for _ in range(n)]
    minus = sum(w.extended for w in draws)
    plus = sum(w.index == 0 and not w.extended for w in draws)
    assert within(minus, n, 0.2) and within(plus, n, 0.2)
    assert within(sum(w.index == 3 for w in draws), n, 0.6 / 7)


def test_stratified_allocation():
    assert stratified_allocation(np.array([0.25, 0.25, 0.5]), 10).tolist() == [3, 2, 5]
    alloc = stratified_allocation(word_priors(Scheme.HYBRID, 8, 0.6), 1000)
    assert alloc.sum() == 1000 and alloc[0] == 200 and alloc[8] == 200


def test_non_erasure_frequency_bright_pulse():
    cm = run_trials(direct(0.5, 8, 200_000, seed=3))
    assert within(cm.total - cm.counts[:, 8].sum(), cm.total, 1 - np.exp(-4))


def test_ideal_ppm_never_misidentifies():
    cm = run_trials(direct(0.3, 12, 100_000, seed=4))
    words = cm.counts[:, :12]
    assert np.array_equal(words, np.diag(np.diag(words)))
    assert cm.counts[:, -1].sum() == 0  # no AMBIGUOUS without dark counts


def test_hybrid_routing_at_two_bins():
    cm = run_trials(hybrid(0.2, 2, 0.5, 50_000, seed=5))
    # rows: all-plus, word 1, all-minus; columns: word 1, PLUS, MINUS, AMBIGUOUS
    assert cm.counts[0, 0] == 0 and cm.counts[2, 0] == 0
    assert cm.counts[1, 0] > 0
    assert cm.counts[:, 3].sum() == 0
    # clickless trials of word 1 land on either Dolinar outcome
    assert cm.counts[1, 1] > 0 and cm.counts[1, 2] > 0
    # error between the two long words matches the Helstrom error at energy L n
    eps = it.helstrom_error(2 * 0.2)
    errors = cm.counts[0, 2] + cm.counts[2, 1]
    total = cm.counts[0].sum() + cm.counts[2].sum()
    assert within(errors, total, eps, sigmas=4)


def test_mutual_information_identity_channel():
    cm = ConfusionMatrix(np.eye(8, dtype=int) * 1000, np.full(8, 1 / 8), list(range(8)), list(range(8)))
    mi, se = empirical_mutual_information(cm)
    assert mi == pytest.approx(3.0, abs=1e-12)
    assert se == pytest.approx(0.0, abs=1e-12)


def test_mutual_information_independent_channel():
    rng = np.random.default_rng(0)
    counts = rng.multinomial(10**6, np.full(12, 1 / 12)).reshape(4, 3)
    cm = ConfusionMatrix(counts, np.full(4, 0.25), list("abcd"), list("xyz"))
    mi, se = empirical_mutual_information(cm)
    assert abs(mi) < 3 * se + 1e-5


def test_mutual_information_rejects_empty():
    cm = ConfusionMatrix(np.zeros((2, 2), int), [0.5, 0.5], ["a", "b"], ["x", "y"])
    with pytest.raises(ValueError):
        empirical_mutual_information(cm)


def test_deterministic_and_worker_independent():
    cfg = direct(2e-2, 8, 300_000, seed=9)
    a = run_trials(cfg)
    b = run_trials(cfg)
    c = run_trials(direct(2e-2, 8, 300_000, seed=9, workers=4))
    assert np.array_equal(a.counts, b.counts) and np.array_equal(a.counts, c.counts)
    d = run_trials(direct(2e-2, 8, 300_000, seed=10))
    assert not np.array_equal(a.counts, d.counts)


def test_hybrid_deterministic_across_workers():
    a = run_trials(hybrid(2e-2, 4, 0.3, 150_000, seed=1))
    b = run_trials(hybrid(2e-2, 4, 0.3, 150_000, seed=1, workers=3))
    assert np.array_equal(a.counts, b.counts)


@pytest.mark.parametrize("scheme", ["direct", "hybrid"])
def test_plan_and_matrix_agree(scheme):
    if scheme == "direct":
        mk = lambda plan: direct(0.05, 12, 100_000, seed=2, use_decomposed_plan=plan)
    else:
        mk = lambda plan: hybrid(0.05, 4, 0.4, 100_000, seed=2, use_decomposed_plan=plan)
    assert np.array_equal(run_trials(mk(True)).counts, run_trials(mk(False)).counts)


@pytest.mark.parametrize("n_bar", [2e-4, 2e-2])
@pytest.mark.parametrize("L", [L for L in SUPPORTED_ORDERS if L >= 2])
def test_direct_ppm_matches_erasure_rate(n_bar, L):
    report = compare_report(direct(n_bar, L, 400_000, seed=L))
    assert report.analytic_rate == pytest.approx(it.rate_ppm(n_bar, L), rel=1e-15)
    assert abs(report.empirical_rate - report.analytic_rate) < 3 * report.empirical_stderr
    assert within(report.outcome_stats["ERASURE"] * 400_000, 400_000, np.exp(-L * n_bar))


def test_stratified_direct_ppm():
    report = compare_report(direct(2e-2, 8, 400_000, seed=1, stratified=True))
    assert abs(report.empirical_rate - report.analytic_rate) < 3 * report.empirical_stderr


def test_hybrid_rate_two_bins():
    n = 2e-2
    lam, _ = it.optimize_lambda(n, 2)
    report = compare_report(hybrid(n, 2, float(lam), 1_000_000, seed=3, slices=2000))
    assert abs(report.empirical_rate - report.analytic_rate) < 3 * report.empirical_stderr


def test_hybrid_low_power_consistent_with_enhancement():
    n = 2e-4
    lam, r_opt = it.optimize_lambda(n, 2)
    report = compare_report(hybrid(n, 2, float(lam), 2_000_000, seed=4, slices=2000))
    assert r_opt / it.rate_individual(n) == pytest.approx(1.025, abs=1e-3)
    assert abs(report.empirical_rate - report.analytic_rate) < 3 * report.empirical_stderr


def test_lossy_circuit_uses_scaled_photon_number():
    cfg = direct(2e-2, 8, 500_000, seed=6, per_op_transmission=0.9)
    report = compare_report(cfg)
    eta = report.outcome_stats["circuit_transmission"]
    assert 0 < eta < 0.9
    assert report.analytic_rate == pytest.approx(it.rate_ppm(eta * 2e-2, 8), rel=1e-14)
    assert abs(report.empirical_rate - report.analytic_rate) < 3 * report.empirical_stderr


def test_dark_counts_produce_ambiguous_outcomes():
    cfg = direct(2e-2, 8, 100_000, seed=1, detector=DetectorModel(dark_click_probability=0.02))
    cm = run_trials(cfg)
    assert cm.outcome_frequency("AMBIGUOUS") > 0
    mi, _ = empirical_mutual_information(cm)
    assert mi < 8 * it.rate_ppm(2e-2, 8)


def test_config_validation():
    with pytest.raises(ValueError):
        direct(0.1, 8, 0)
    with pytest.raises(ValueError):
        SchemeConfig(Scheme.HYBRID, ChannelParams(0.1, 8, 0.5))
    with pytest.raises(ValueError):
        SchemeConfig(Scheme.DIRECT_PPM, ChannelParams(0.1, 8), dolinar=DolinarConfig(10))
    with pytest.raises(ValueError):
        run_trials(direct(0.1, 7, 10))


def test_confusion_csv_round_trip():
    cm = run_trials(hybrid(0.1, 4, 0.5, 20_000))
    back = ConfusionMatrix.from_csv(cm.to_csv())
    assert np.array_equal(back.counts, cm.counts)
    assert np.array_equal(back.input_priors, cm.input_priors)
    assert back.outcome_labels == cm.outcome_labels
    assert cm.to_csv().splitlines()[0] == "input,prior,1,2,3,PLUS_WORD,MINUS_WORD,AMBIGUOUS"


def test_report_json():
    report = compare_report(direct(0.1, 4, 10_000))
    data = json.loads(report.to_json())
    assert data["scheme"] == "DIRECT_PPM" and data["L"] == 4 and data["trials"] == 10_000
    assert data["empirical_stderr"] >= 0
