"""Monte Carlo of the direct-PPM and hybrid readout schemes.

Trials are grouped into fixed blocks of ``BLOCK_SIZE`` consecutive trial
indices and block ``b`` draws from a Philox stream keyed by ``(seed, b)``.
Trial ``i`` therefore sees the same random numbers whatever the number of
workers, and per-block confusion matrices are summed at the end.
"""

from __future__ import annotations

import csv
import functools
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from . import infotheory
from .circuit import apply_matrix, apply_plan, decompose_triangular, encode_word, equalize_attenuation
from .detection import (
    AMBIGUOUS,
    ERASURE,
    MINUS_WORD,
    OUTCOME_NAMES,
    PLUS_WORD,
    DetectorModel,
    DolinarConfig,
    click_probability,
    decode_direct_batch,
    decode_hybrid_batch,
    dolinar_decide_batch,
)
from .hadamard import Codeword, construct
from .infotheory import ChannelParams

BLOCK_SIZE = 1 << 16
DOLINAR_PORT = 0


class Scheme(str, Enum):
    DIRECT_PPM = "DIRECT_PPM"
    HYBRID = "HYBRID"


@dataclass(frozen=True)
class SchemeConfig:
    scheme: Scheme
    params: ChannelParams
    detector: DetectorModel = DetectorModel()
    dolinar: Optional[DolinarConfig] = None
    use_decomposed_plan: bool = True
    per_op_transmission: float = 1.0
    trials: int = 100_000
    seed: int = 0
    stratified: bool = False
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if (self.dolinar is not None) != (self.scheme is Scheme.HYBRID):
            raise ValueError("a Dolinar configuration is required for HYBRID and only for HYBRID")
        if self.scheme is Scheme.HYBRID and self.params.L < 2:
            raise ValueError("the hybrid scheme needs L >= 2")
        if not 0.0 < self.per_op_transmission <= 1.0:
            raise ValueError(f"per_op_transmission must be in (0, 1], got {self.per_op_transmission}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class ConfusionMatrix:
    counts: np.ndarray
    input_priors: np.ndarray
    input_labels: list
    outcome_labels: list

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        self.input_priors = np.asarray(self.input_priors, dtype=float)
        if self.counts.shape != (len(self.input_labels), len(self.outcome_labels)):
            raise ValueError("count matrix shape does not match the labels")
        if abs(self.input_priors.sum() - 1.0) > 1e-12:
            raise ValueError("input priors must sum to 1")
        if np.any(self.counts < 0):
            raise ValueError("counts must be nonnegative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def outcome_frequency(self, label) -> float:
        j = self.outcome_labels.index(label)
        return self.counts[:, j].sum() / self.total

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if self.outcome_labels != other.outcome_labels or self.input_labels != other.input_labels:
            raise ValueError("cannot merge confusion matrices with different labels")
        return ConfusionMatrix(self.counts + other.counts, self.input_priors, self.input_labels, self.outcome_labels)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["input", "prior"] + list(self.outcome_labels))
        for label, prior, row in zip(self.input_labels, self.input_priors, self.counts):
            w.writerow([label, f"{prior:.17g}"] + [int(c) for c in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ConfusionMatrix":
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        return cls(
            counts=[[int(c) for c in r[2:]] for r in body],
            input_priors=[float(r[1]) for r in body],
            input_labels=[r[0] for r in body],
            outcome_labels=header[2:],
        )


@dataclass
class RateReport:
    scheme: str
    L: int
    n_bar: float
    lam: Optional[float]
    transmission: float
    trials: int
    seed: int
    analytic_rate: float
    empirical_rate: float
    empirical_stderr: float
    outcome_stats: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, default=_json_float)


def _json_float(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(f"cannot serialize {type(x)}")


# --- priors and sampling ---------------------------------------------------

def word_priors(scheme: Scheme, L: int, lam: float = 1.0) -> np.ndarray:
    """Input distribution over rows 0..L-1 (plus the all-minus word for HYBRID)."""
    scheme = Scheme(scheme)
    if scheme is Scheme.DIRECT_PPM:
        return np.full(L, 1.0 / L)
    pri = np.empty(L + 1)
    pri[0] = pri[L] = (1.0 - lam) / 2.0
    pri[1:L] = lam / (L - 1)
    return pri


@functools.lru_cache(maxsize=None)
def codebook(scheme: Scheme, L: int) -> tuple[Codeword, ...]:
    return tuple(construct(L).codewords(extended=Scheme(scheme) is Scheme.HYBRID))


def sample_word(scheme: Scheme, L: int, lam: float, rng: np.random.Generator) -> Codeword:
    words = codebook(scheme, L)
    return words[rng.choice(len(words), p=word_priors(scheme, L, lam))]


def stratified_allocation(priors: np.ndarray, trials: int) -> np.ndarray:
    """Trials per input in proportion to ``priors``, remainders by largest fraction."""
    exact = priors * trials
    alloc = np.floor(exact).astype(np.int64)
    short = trials - alloc.sum()
    order = np.argsort(-(exact - alloc), kind="stable")
    alloc[order[:short]] += 1
    return alloc


# --- trial execution -------------------------------------------------------

def outcome_labels(scheme: Scheme, L: int) -> list[str]:
    if Scheme(scheme) is Scheme.DIRECT_PPM:
        return [str(k) for k in range(L)] + ["ERASURE", "AMBIGUOUS"]
    return [str(k) for k in range(1, L)] + ["PLUS_WORD", "MINUS_WORD", "AMBIGUOUS"]


_SENTINEL_OFFSET = -min(OUTCOME_NAMES)


def _outcome_columns(scheme: Scheme, L: int) -> dict[int, int]:
    labels = outcome_labels(scheme, L)
    names = {v: k for k, v in OUTCOME_NAMES.items()}
    return {(int(s) if s.isdigit() else names[s]): j for j, s in enumerate(labels)}


@dataclass(frozen=True)
class _Prepared:
    output_amps: np.ndarray  # (num_words, L) amplitudes after the circuit
    click_probs: np.ndarray
    eta: float


def _prepare(config: SchemeConfig) -> _Prepared:
    L = config.params.L
    H = construct(L)
    words = H.codewords(extended=config.scheme is Scheme.HYBRID)
    n_in = config.params.effective_n_bar
    inputs = np.stack([encode_word(w, n_in) for w in words], axis=1)  # (L, words)
    W = H.rescaled()
    eta = 1.0
    if config.use_decomposed_plan:
        plan = decompose_triangular(W)
        if config.per_op_transmission < 1.0:
            plan, eta = equalize_attenuation(plan, config.per_op_transmission)
        out = apply_plan(plan, inputs)
    else:
        if config.per_op_transmission < 1.0:
            _, eta = equalize_attenuation(decompose_triangular(W), config.per_op_transmission)
        out = np.sqrt(eta) * apply_matrix(W, inputs)
    out = out.T
    return _Prepared(out, click_probability(out, config.detector), eta)


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block])))


def _block_inputs(config: SchemeConfig, priors: np.ndarray, start: int, stop: int, rng) -> np.ndarray:
    if config.stratified:
        bounds = np.cumsum(stratified_allocation(priors, config.trials))
        return np.searchsorted(bounds, np.arange(start, stop), side="right")
    return rng.choice(len(priors), size=stop - start, p=priors)


def _run_block(config: SchemeConfig, prep: _Prepared, priors: np.ndarray, block: int) -> np.ndarray:
    start = block * BLOCK_SIZE
    stop = min(config.trials, start + BLOCK_SIZE)
    rng = _block_rng(config.seed, block)
    words = _block_inputs(config, priors, start, stop, rng)
    L = config.params.L
    clicks = rng.random((words.size, L)) < prep.click_probs[words]
    if config.scheme is Scheme.DIRECT_PPM:
        outcomes = decode_direct_batch(clicks)
    else:
        counters = clicks.copy()
        counters[:, DOLINAR_PORT] = False
        need = ~counters.any(axis=1)
        decisions = np.zeros(words.size, dtype=np.int8)
        a = abs(prep.output_amps[0, DOLINAR_PORT].real)
        received = prep.output_amps[words[need], DOLINAR_PORT]
        decisions[need] = dolinar_decide_batch(received, (a, -a), config.dolinar, rng)
        outcomes = decode_hybrid_batch(clicks, decisions, DOLINAR_PORT)
    cols = _outcome_columns(config.scheme, L)
    lookup = np.full(L + _SENTINEL_OFFSET, -1, dtype=np.int64)
    for code, j in cols.items():
        lookup[code + _SENTINEL_OFFSET] = j
    col = lookup[outcomes + _SENTINEL_OFFSET]
    counts = np.zeros((len(priors), len(cols)), dtype=np.int64)
    np.add.at(counts, (words, col), 1)
    return counts


def run_trials(config: SchemeConfig) -> ConfusionMatrix:
    """Run ``config.trials`` independent trials and tabulate input vs decoded outcome."""
    L = config.params.L
    priors = word_priors(config.scheme, L, config.params.lam)
    prep = _prepare(config)
    blocks = range(math.ceil(config.trials / BLOCK_SIZE))
    if config.workers == 1:
        parts = [_run_block(config, prep, priors, b) for b in blocks]
    else:
        with ThreadPoolExecutor(config.workers) as pool:
            parts = list(pool.map(lambda b: _run_block(config, prep, priors, b), blocks))
    counts = np.sum(parts, axis=0)
    inputs = [str(k) for k in range(L)] + (["MINUS"] if config.scheme is Scheme.HYBRID else [])
    return ConfusionMatrix(counts, priors, inputs, outcome_labels(config.scheme, L))


# --- mutual information ----------------------------------------------------

def _plug_in_mi(counts: np.ndarray, priors: np.ndarray) -> np.ndarray:
    """Plug-in I(X;Y) in bits for a stack of count matrices (..., inputs, outcomes)."""
    counts = np.asarray(counts, dtype=float)
    rows = counts.sum(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        cond = np.where(rows > 0, counts / np.where(rows > 0, rows, 1.0), 0.0)
    joint = priors[:, np.newaxis] * cond
    py = joint.sum(axis=-2, keepdims=True)
    px = priors[:, np.newaxis]
    with np.errstate(invalid="ignore", divide="ignore"):
        terms = np.where(joint > 0, joint * np.log2(joint / (px * py)), 0.0)
    return terms.sum(axis=(-2, -1))


def empirical_mutual_information(
    cm: ConfusionMatrix, resamples: int = 200, seed: int = 0, stratified: bool = False
) -> tuple[float, float]:
    """Plug-in mutual information per word and its bootstrap standard error.

    Resampling trials with replacement is equivalent to a multinomial draw
    over the cells of the count matrix (per row when the rows were allocated
    deterministically), which is what is done here.
    """
    if cm.total == 0:
        raise ValueError("empty confusion matrix")
    priors = cm.input_priors
    live = priors > 0
    if np.any(cm.counts[live].sum(axis=1) == 0):
        raise ValueError("an input with nonzero prior has no trials")
    counts = cm.counts[live]
    priors = priors[live] / priors[live].sum()
    point = float(_plug_in_mi(counts, priors))
    rng = np.random.default_rng(seed)
    if stratified:
        rows = counts.sum(axis=1)
        boot = np.stack(
            [rng.multinomial(n, c / n, size=resamples) for n, c in zip(rows, counts)], axis=1
        )
    else:
        flat = counts.ravel()
        boot = rng.multinomial(flat.sum(), flat / flat.sum(), size=resamples).reshape((resamples,) + counts.shape)
        empty = boot.sum(axis=-1) == 0
        if empty.any():
            # a resample that lost every trial of some input keeps the original row
            boot = np.where(empty[..., np.newaxis], counts[np.newaxis], boot)
    stderr = float(np.std(_plug_in_mi(boot, priors), ddof=1))
    return point, stderr


def analytic_rate(config: SchemeConfig, eta: float = 1.0) -> float:
    n = config.params.effective_n_bar * eta
    L = config.params.L
    if config.scheme is Scheme.DIRECT_PPM:
        return float(infotheory.rate_ppm(n, L))
    return float(infotheory.rate_hybrid(n, L, config.params.lam))


def compare_report(config: SchemeConfig, resamples: int = 200, cm: Optional[ConfusionMatrix] = None) -> RateReport:
    """Run (or reuse) the trials and pair the empirical rate with its closed form.

    With lossy interactions the closed form is evaluated at eta * n_bar, eta
    being the equalized circuit transmission.
    """
    if cm is None:
        cm = run_trials(config)
    eta = 1.0
    if config.per_op_transmission < 1.0:
        _, eta = equalize_attenuation(
            decompose_triangular(construct(config.params.L).rescaled()), config.per_op_transmission
        )
    mi, se = empirical_mutual_information(cm, resamples, seed=config.seed, stratified=config.stratified)
    L = config.params.L
    stats = {label: float(cm.outcome_frequency(label)) for label in cm.outcome_labels if not label.isdigit()}
    stats["circuit_transmission"] = eta
    return RateReport(
        scheme=config.scheme.value,
        L=L,
        n_bar=config.params.n_bar,
        lam=config.params.lam if config.scheme is Scheme.HYBRID else None,
        transmission=config.params.transmission * eta,
        trials=config.trials,
        seed=config.seed,
        analytic_rate=analytic_rate(config, eta),
        empirical_rate=mi / L,
        empirical_stderr=se / L,
        outcome_stats=stats,
    )
