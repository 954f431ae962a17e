"""Fast rigged-stream trials of the sequential test.

``bernoulli_trials`` plays the certification loop against synthetic
stability bits with a known success probability mu, which is how the
statistical guarantees (coverage at the stopping time, decision
soundness, sample-budget scaling) are exercised without an image
pipeline in the way.  It computes the exact same stopping rule as
``verifier.run_adaptive_loop`` but vectorised per trial: for one trial
the whole bit stream is drawn up front, so feeding the same generator to
the real loop reproduces a trial bit for bit (tested).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from proa.stats import ADAPTIVE_A, ADAPTIVE_C
from proa.verifier import Verdict, VerifyConfig

__all__ = ["TrialResults", "epsilon_schedule", "bernoulli_trials"]

_LOG_C = math.log(ADAPTIVE_C)


def epsilon_schedule(delta: float, counts: np.ndarray) -> np.ndarray:
    """Vectorised anytime bound over an array of sample counts."""
    counts = np.asarray(counts, dtype=np.float64)
    if counts.min() < 1:
        raise ValueError("sample counts must be >= 1")
    if delta <= 0.0:
        raise ValueError(f"delta must be positive, got {delta}")
    double_log = np.log(np.log(counts) / _LOG_C + 1.0)
    return np.sqrt((ADAPTIVE_A * double_log + math.log(24.0 / delta) / 1.8) / counts)


@dataclass(frozen=True)
class TrialResults:
    mu: float
    verdicts: np.ndarray  # object array of Verdict
    samples_used: np.ndarray
    mu_hat: np.ndarray
    epsilon: np.ndarray

    def mask(self, verdict: Verdict) -> np.ndarray:
        # identity comparison: numpy's elementwise == mangles str enums
        return np.array([v is verdict for v in self.verdicts])

    def fraction(self, verdict: Verdict) -> float:
        return float(self.mask(verdict).mean())

    @property
    def decided(self) -> np.ndarray:
        return self.mask(Verdict.CERTIFIED) | self.mask(Verdict.VIOLATED)

    @property
    def miscovered(self) -> np.ndarray:
        """Trials whose final estimate missed the true mean by more than
        the final bound."""
        return np.abs(self.mu_hat - self.mu) > self.epsilon


def bernoulli_trials(
    mu: float, config: VerifyConfig, trials: int, seed: int = 0
) -> TrialResults:
    """Run repeated certification loops on Bernoulli(mu) stability bits.

    Trial t draws from ``np.random.default_rng((seed, t))``, matching
    what a caller of run_adaptive_loop would see with the same stream.
    """
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f"mu must be in [0, 1], got {mu}")
    n_batches = config.n_max // config.n0
    checkpoints = config.n0 * np.arange(1, n_batches + 1)
    eps = epsilon_schedule(config.delta, checkpoints)
    certify_at = 1.0 - config.tau + eps  # mu_hat >= this certifies
    violate_at = 1.0 - config.tau - eps  # mu_hat < this rejects

    verdicts = np.empty(trials, dtype=object)
    samples_used = np.zeros(trials, dtype=np.int64)
    mu_hats = np.zeros(trials)
    epsilons = np.zeros(trials)

    # Bits are drawn in chunks so easy trials stop long before n_max.
    # Chunked draws from one generator yield the same stream as a single
    # draw, so this stays bit-compatible with the batch-at-a-time loop.
    chunk_batches = max(1, min(n_batches, 131_072 // config.n0 + 1))
    for t in range(trials):
        rng = np.random.default_rng((seed, t))
        successes = 0
        done = 0
        stop = -1
        while done < n_batches and stop < 0:
            take = min(chunk_batches, n_batches - done)
            bits = rng.random(take * config.n0) < mu
            batch_sums = bits.reshape(take, config.n0).sum(axis=1)
            window = slice(done, done + take)
            mu_hat = (successes + np.cumsum(batch_sums)) / checkpoints[window]
            certified = mu_hat >= certify_at[window]
            violated = mu_hat < violate_at[window]
            decided = certified | violated
            if decided.any():
                local = int(np.argmax(decided))
                stop = done + local
                verdicts[t] = (
                    Verdict.CERTIFIED if certified[local] else Verdict.VIOLATED
                )
                mu_hats[t] = mu_hat[local]
            else:
                successes += int(batch_sums.sum())
                done += take
                last_mu = mu_hat[-1]
        if stop < 0:
            stop = n_batches - 1
            verdicts[t] = Verdict.UNDETERMINED
            mu_hats[t] = last_mu
        samples_used[t] = checkpoints[stop]
        epsilons[t] = eps[stop]

    return TrialResults(
        mu=mu,
        verdicts=verdicts,
        samples_used=samples_used,
        mu_hat=mu_hats,
        epsilon=epsilons,
    )
