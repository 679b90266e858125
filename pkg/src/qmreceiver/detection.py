"""Threshold photon counting and a time-sliced Dolinar receiver.

Outcome codes returned by the decoders are word indices (>= 0) or one of the
negative sentinels below.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

ERASURE = -1
AMBIGUOUS = -2
PLUS_WORD = -3
MINUS_WORD = -4

OUTCOME_NAMES = {ERASURE: "ERASURE", AMBIGUOUS: "AMBIGUOUS", PLUS_WORD: "PLUS_WORD", MINUS_WORD: "MINUS_WORD"}


@dataclass(frozen=True)
class DetectorModel:
    efficiency: float = 1.0
    dark_click_probability: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError(f"efficiency must be in [0, 1], got {self.efficiency}")
        if not 0.0 <= self.dark_click_probability < 1.0:
            raise ValueError(f"dark click probability must be in [0, 1), got {self.dark_click_probability}")

    @property
    def ideal(self) -> bool:
        return self.efficiency == 1.0 and self.dark_click_probability == 0.0


@dataclass(frozen=True)
class DolinarConfig:
    """``amplitude_cap`` bounds the feedback amplitude in units where the whole
    pulse lasts one time unit (a slice of width 1/N sees ``u / sqrt(N)``).
    ``None`` means ``10 * |a| * sqrt(num_slices)``."""

    num_slices: int = 10_000
    amplitude_cap: Optional[float] = None
    rng_seed: int = 0

    def __post_init__(self):
        if self.num_slices < 1:
            raise ValueError(f"num_slices must be >= 1, got {self.num_slices}")
        if self.amplitude_cap is not None and not self.amplitude_cap > 0:
            raise ValueError(f"amplitude_cap must be positive, got {self.amplitude_cap}")

    def cap_for(self, a: float) -> float:
        if self.amplitude_cap is not None:
            return self.amplitude_cap
        return 10.0 * abs(a) * np.sqrt(self.num_slices)


@dataclass(frozen=True)
class DetectionRecord:
    clicks: np.ndarray
    dolinar_port: Optional[int] = None
    dolinar_decision: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "clicks", np.asarray(self.clicks, dtype=bool))
        if (self.dolinar_port is None) != (self.dolinar_decision is None):
            raise ValueError("dolinar_decision must be given iff dolinar_port is")
        if self.dolinar_decision not in (None, 1, -1):
            raise ValueError("dolinar_decision must be +1 or -1")


def click_probability(amps, model: DetectorModel = DetectorModel()) -> np.ndarray:
    """1 - (1 - dark) * exp(-efficiency * |a|^2), elementwise."""
    mean = model.efficiency * np.abs(np.asarray(amps)) ** 2
    return -np.expm1(np.log1p(-model.dark_click_probability) - mean)


def threshold_detect(v, model: DetectorModel, rng: np.random.Generator) -> np.ndarray:
    """Independent click/no-click outcome on every port of ``v`` (any shape)."""
    p = click_probability(v, model)
    return rng.random(p.shape) < p


# --- Dolinar receiver ------------------------------------------------------

def dolinar_schedule(a: float, config: DolinarConfig) -> np.ndarray:
    """Feedback magnitude for each slice while the favoured hypothesis holds.

    Under the optimal feedback the posterior of the disfavoured hypothesis
    after observing energy n*t is the Helstrom error for that energy, and the
    feedback is a / (1 - 2 * posterior) = a / sqrt(1 - exp(-4 a^2 t)).  Each
    slice uses the value at its midpoint, clamped to the amplitude cap.
    """
    N = config.num_slices
    t = (np.arange(N) + 0.5) / N
    a = abs(a)
    if a == 0.0:
        g = 0.5 / np.sqrt(t)
    else:
        g = a / np.sqrt(-np.expm1(-4.0 * a * a * t))
    cap = config.cap_for(a) if a > 0 else np.inf
    return np.minimum(g, cap)


def _check_hypotheses(hypotheses) -> float:
    h0, h1 = (complex(h) for h in hypotheses)
    if h0.imag != 0 or h1.imag != 0:
        raise ValueError("hypotheses must be real amplitudes")
    if h0.real != -h1.real or h0.real < 0:
        raise ValueError("hypotheses must be (+a, -a) with a >= 0")
    return h0.real


def dolinar_decide_batch(amps, hypotheses, config: DolinarConfig, rng: np.random.Generator) -> np.ndarray:
    """Run the receiver on every received amplitude in ``amps``; return +1/-1 decisions.

    Clicks within a run of constant feedback sign form a discrete-time
    process with known per-slice click probabilities, so the next click slice
    is drawn by inverting the cumulative intensity; each trial then costs
    O(clicks * log N) instead of O(N).  The decision is the maximum-posterior
    hypothesis given the full click record, with ties broken by a fair coin.
    """
    a = _check_hypotheses(hypotheses)
    amps = np.asarray(amps)
    if np.iscomplexobj(amps):
        if np.any(np.abs(amps.imag) > 1e-12 * max(a, 1.0)):
            raise ValueError("received amplitudes must be real (in phase with the hypotheses)")
        amps = amps.real
    amps = np.asarray(amps, dtype=float).ravel()
    out = np.empty(amps.size, dtype=np.int8)
    if amps.size == 0:
        return out
    if a == 0.0:
        out[:] = np.where(rng.random(amps.size) < 0.5, 1, -1)
        return out

    N = config.num_slices
    g = dolinar_schedule(a, config)
    gsum = np.concatenate([[0.0], np.cumsum(g)]) / N
    # log-likelihood ratio increments for clicks, indexed by feedback sign
    click_llr = {}
    for sigma in (1, -1):
        mp = (a + sigma * g) ** 2 / N
        mm = (-a + sigma * g) ** 2 / N
        with np.errstate(divide="ignore"):
            click_llr[sigma] = np.log(-np.expm1(-mp)) - np.log(-np.expm1(-mm))

    # trial i's r-th exponential depends only on (base, r, i), so runs with
    # different slice counts share their random numbers
    base = int(rng.integers(2**63))
    for x in np.unique(amps):
        idx = np.flatnonzero(amps == x)
        m = idx.size
        intensity = {
            sigma: np.concatenate([[0.0], np.cumsum((x + sigma * g) ** 2)]) / N for sigma in (1, -1)
        }
        slice_pos = np.zeros(m, dtype=np.int64)
        # +1 feedback nulls the "-a" hypothesis, i.e. "-a" is favoured
        sign = np.ones(m, dtype=np.int64)
        llr = np.zeros(m)
        active = np.arange(m)
        rounds = 0
        while active.size:
            E = np.random.default_rng([base, rounds]).exponential(size=amps.size)[idx[active]]
            rounds += 1
            j = slice_pos[active]
            s = sign[active]
            k = np.empty(active.size, dtype=np.int64)
            for sigma in (1, -1):
                sel = s == sigma
                C = intensity[sigma]
                k[sel] = np.searchsorted(C, C[j[sel]] + E[sel], side="left") - 1
            k = np.maximum(k, j)
            stop = np.minimum(k, N)
            llr[active] -= 4.0 * a * s * (gsum[stop] - gsum[j])
            clicked = k < N
            c = active[clicked]
            kc, sc = k[clicked], s[clicked]
            llr[c] += np.where(sc == 1, click_llr[1][kc], click_llr[-1][kc])
            sign[c] = -sc
            slice_pos[c] = kc + 1
            active = c
        ties = llr == 0
        dec = np.where(llr > 0, 1, -1)
        if ties.any():
            dec[ties] = np.where(rng.random(int(ties.sum())) < 0.5, 1, -1)
        out[idx] = dec
    return out


def dolinar_decide(amp, hypotheses, config: DolinarConfig, rng: np.random.Generator) -> int:
    """Single-shot Dolinar decision (+1 or -1) on one received amplitude."""
    return int(dolinar_decide_batch([amp], hypotheses, config, rng)[0])


# --- decoding --------------------------------------------------------------

def decode_direct(record: DetectionRecord) -> int:
    if record.dolinar_port is not None:
        raise ValueError("direct decoding expects no Dolinar port")
    return int(decode_direct_batch(record.clicks[np.newaxis, :])[0])


def decode_direct_batch(clicks: np.ndarray) -> np.ndarray:
    clicks = np.asarray(clicks, dtype=bool)
    n = clicks.sum(axis=1)
    first = np.argmax(clicks, axis=1)
    return np.where(n == 0, ERASURE, np.where(n == 1, first, AMBIGUOUS))


def decode_hybrid(record: DetectionRecord) -> int:
    if record.dolinar_port is None:
        raise ValueError("hybrid decoding needs a Dolinar port")
    out = decode_hybrid_batch(record.clicks[np.newaxis, :], np.array([record.dolinar_decision]), record.dolinar_port)
    return int(out[0])


def decode_hybrid_batch(clicks: np.ndarray, dolinar_decisions, dolinar_port: int) -> np.ndarray:
    clicks = np.array(clicks, dtype=bool)
    clicks[:, dolinar_port] = False
    out = decode_direct_batch(clicks)
    dark = out == ERASURE
    dec = np.asarray(dolinar_decisions)
    out[dark] = np.where(dec[dark] > 0, PLUS_WORD, MINUS_WORD)
    return out
