"""Shared fixture builders for synthetic textures and reference oracles."""

import numpy as np
import pytest

from resofilt import ResonanceRoots, synth_texture

# Four harmonic pairs with distinct per-axis frequencies, so both the
# marginal and the joint estimators see simple root multiplicities.
FOUR_PAIRS = [
    (0.11, 0.23, 1.0, 0.3),
    (0.27, 0.08, 0.8, 1.1),
    (0.34, 0.41, 0.6, 2.0),
    (0.05, 0.33, 0.9, 0.5),
]


def pairs_subset(k, rng=None):
    """First k reference pairs, optionally re-phased from a generator."""
    pairs = FOUR_PAIRS[:k]
    if rng is None:
        return pairs
    return [(fx, fy, amp, float(rng.uniform(0, 2 * np.pi))) for fx, fy, amp, _ in pairs]


def unit_roots(freqs):
    return ResonanceRoots(np.exp(2j * np.pi * np.asarray(freqs, dtype=float)))


def conj_freqs(pairs, axis):
    """Signed per-axis frequencies (each pair contributes +f and -f)."""
    idx = 0 if axis == "x" else 1
    out = []
    for p in pairs:
        out += [p[idx], -p[idx]]
    return sorted(out)


def root_set_error(estimated, truth):
    """max over true roots of the distance to the nearest estimate."""
    est = np.asarray(estimated, dtype=complex)
    return max(min(abs(z - t) for z in est) for t in np.asarray(truth, dtype=complex))


def dft_peak_frequencies(signal_2d, k_pairs, pad=1024):
    """Independent frequency oracle: zero-padded 2D DFT peak picking.

    Returns the (fx, fy) locations of the k strongest positive-fx peaks,
    using a local-maximum scan with a guard zone around found peaks.
    """
    spec = np.abs(np.fft.fft2(signal_2d - signal_2d.mean(), s=(pad, pad)))
    fx = np.fft.fftfreq(pad)
    fy = np.fft.fftfreq(pad)
    half = spec[: pad // 2 + 1, :].copy()  # keep fx >= 0 half-plane
    found = []
    guard = max(3, pad // 128)
    for _ in range(k_pairs):
        i, j = np.unravel_index(np.argmax(half), half.shape)
        found.append((fx[i], fy[j]))
        half[max(0, i - guard) : i + guard + 1, :][
            :, np.abs((np.arange(pad) - j + pad // 2) % pad - pad // 2) <= guard
        ] = 0.0
    return sorted(found)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def four_pair_texture():
    return synth_texture(FOUR_PAIRS, 64, 64)
