"""Resonance estimation by splitting the 2D correlation matrix.

The correlation matrix of sliding lag windows is factored by a symmetric
eigendecomposition; shifted row selections of the principal subspace form
a matrix pencil whose eigenvalues are the per-axis resonance roots.  The
Gram matrix of the base selection can be inverted either directly or by
rank-one (Sherman-Morrison) accumulation; the two must agree and the
direct path is the default.

Row-extraction convention (frozen; see docs/formats.md): for a data
window of size (M, N) with splitting parameter L, the lag window is
(M-L, N-L) and subspace rows are indexed by lag pairs (i_x, i_y) in
row-major order.  The base selection keeps i_x < M-L-1 and i_y < N-L-1;
the x-shifted selection moves i_x up by one, the y-shifted selection
moves i_y up by one.  All three have the same row count.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .errors import NumericError
from .harmonic import HarmonicModel, ResonanceRoots, spectrum
from .linear_symmetry import Correlation2D, correlation_2d

# Extra singular values kept beyond the requested subspace, for reports.
_DIAG_TAIL = 8


@dataclass(frozen=True)
class SubspaceBasis:
    """Principal left singular vectors of a 2D correlation matrix.

    ``vectors`` holds the top ``n_modes`` columns; ``singular_values``
    carries a short diagnostic tail beyond them.  ``dims`` is the size of
    the data region the correlation was built from and ``split`` the
    splitting parameter, so the lag window is (dims - split) per axis.
    """

    vectors: np.ndarray
    singular_values: np.ndarray
    split: int
    dims: tuple

    @property
    def n_modes(self) -> int:
        return self.vectors.shape[1]

    @property
    def lag_window(self) -> tuple:
        return (self.dims[0] - self.split, self.dims[1] - self.split)


@dataclass(frozen=True)
class PencilResult:
    """Per-axis roots with damping diagnostics and amplitude-ranked pairs."""

    zx: ResonanceRoots
    zy: ResonanceRoots
    dampings_x: np.ndarray
    dampings_y: np.ndarray
    paired: list


def pencil_correlation(region: np.ndarray, split: int) -> Correlation2D:
    """Correlation matrix with the symmetric (M-L, N-L) lag window."""
    region = np.asarray(region, dtype=float)
    m, n = region.shape
    if not (1 <= split <= min(m, n) - 2):
        raise ValueError(f"split {split} out of range [1, {min(m, n) - 2}]")
    return correlation_2d(region, m - split, n - split)


def default_split(dims: tuple, n_modes: int) -> int:
    """floor(min(M, N)/3), clamped into [n_modes, min(M, N) - 2]."""
    lo, hi = n_modes, min(dims) - 2
    if lo > hi:
        raise ValueError(
            f"region {dims} is too small for {n_modes} modes: no admissible split"
        )
    return int(np.clip(min(dims) // 3, lo, hi))


def svd_correlation(corr: Correlation2D, n_modes: int) -> SubspaceBasis:
    """Top-``n_modes`` singular pairs of a symmetric correlation matrix.

    The matrix is symmetric positive semidefinite, so the singular pairs
    coincide with the eigenpairs and a symmetric eigensolver is used.
    Raises when the requested subspace exceeds the numerical rank.
    """
    r = corr.matrix
    dim = r.shape[0]
    if not (1 <= n_modes <= dim):
        raise ValueError(f"n_modes {n_modes} out of range 1..{dim}")
    m, n = corr.source_size
    wx, wy = corr.window
    if m - wx != n - wy:
        raise ValueError("correlation window is not a symmetric split of the region")
    split = m - wx

    keep = min(dim, n_modes + _DIAG_TAIL)
    vals, vecs = eigh(r, subset_by_index=[dim - keep, dim - 1])
    vals = np.maximum(vals[::-1], 0.0)
    vecs = vecs[:, ::-1]
    if vals[n_modes - 1] < 1e-12 * max(vals[0], 1e-300):
        raise NumericError(
            f"requested subspace of {n_modes} exceeds the numerical rank: "
            "model order is overestimated"
        )
    return SubspaceBasis(
        vectors=vecs[:, :n_modes],
        singular_values=vals[:keep],
        split=split,
        dims=(m, n),
    )


def extraction_indices(window_x: int, window_y: int):
    """Frozen row-index sets (base, x-shift, y-shift) for a lag window."""
    ix = np.repeat(np.arange(window_x), window_y)
    iy = np.tile(np.arange(window_y), window_x)
    base = np.flatnonzero((ix < window_x - 1) & (iy < window_y - 1))
    shift_x = np.flatnonzero((ix >= 1) & (iy < window_y - 1))
    shift_y = np.flatnonzero((ix < window_x - 1) & (iy >= 1))
    return base, shift_x, shift_y


def extract_submatrices(basis: SubspaceBasis):
    """Base and shifted row selections (U0, Ux, Uy) of the subspace."""
    m, n = basis.dims
    el = basis.split
    if not (basis.n_modes <= el):
        raise ValueError(f"split {el} below the mode count {basis.n_modes}")
    if not (el < min(m, n) - 1):
        raise ValueError(f"split {el} too large for region {basis.dims}")
    wx, wy = basis.lag_window
    if basis.vectors.shape[0] != wx * wy:
        raise ValueError("subspace row count does not match the lag window")
    if (wx - 1) * (wy - 1) < basis.n_modes:
        raise NumericError(
            f"split {el} leaves {(wx - 1) * (wy - 1)} pencil rows for "
            f"{basis.n_modes} modes: shrink the split or the order"
        )
    base, shift_x, shift_y = extraction_indices(wx, wy)
    u = basis.vectors
    return u[base], u[shift_x], u[shift_y]


def gram_inverse_direct(u0: np.ndarray) -> np.ndarray:
    """(U0^H U0)^-1 by a dense solve."""
    g = u0.conj().T @ u0
    try:
        return np.linalg.inv(g)
    except np.linalg.LinAlgError as exc:
        raise NumericError("pencil base selection is rank deficient") from exc


def gram_inverse_iterative(u0: np.ndarray) -> np.ndarray:
    """(U0^H U0)^-1 accumulated by rank-one Sherman-Morrison updates.

    Seeded with the exact inverse of the Gram of the first k rows, then
    updated row by row: E <- E - (E u^H)(u E) / (1 + u E u^H).  Must match
    the direct inverse to 1e-8 max-abs; the direct path stays the default
    and this one is an opt-in optimisation.
    """
    u0 = np.asarray(u0)
    n, k = u0.shape
    if n < k:
        raise NumericError("fewer rows than columns: Gram matrix is singular")
    seed = u0[:k]
    g0 = seed.conj().T @ seed
    if np.linalg.cond(g0) > 1e12:
        raise NumericError("seed rows 0..{0} are rank deficient".format(k - 1))
    e = np.linalg.inv(g0)
    for alpha in range(k, n):
        u = u0[alpha : alpha + 1]
        eu = e @ u.conj().T
        denom = 1.0 + (u @ eu).item()
        if abs(denom) < 1e-12:
            raise NumericError(f"near-zero update denominator at row {alpha}")
        e = e - (eu @ (u @ e)) / denom
    return e


def pencil_eigenvalues(u0: np.ndarray, u_shift: np.ndarray, gram_inv: np.ndarray) -> ResonanceRoots:
    """Eigenvalues of (U0^H U0)^-1 U0^H Ushift as resonance roots."""
    if u0.shape != u_shift.shape:
        raise ValueError("base and shifted selections must have equal shapes")
    z = gram_inv @ (u0.conj().T @ u_shift)
    vals = np.linalg.eigvals(z)
    if not np.all(np.isfinite(vals)):
        raise NumericError("pencil produced non-finite eigenvalues")
    order = np.lexsort((np.abs(vals), np.round(np.angle(vals), 12)))
    return ResonanceRoots(vals[order])


def pair_frequencies(zx: ResonanceRoots, zy: ResonanceRoots, region: np.ndarray) -> PencilResult:
    """Joint amplitudes over the Cartesian root grid; no discrete pairing.

    The least-squares amplitude fit over all (zx_i, zy_j) candidates keeps
    every combination, so the result is a full amplitude matrix; dominant
    pairs are reported by amplitude magnitude for diagnostics.
    """
    amp = spectrum(region, zx, zy)
    mags = np.abs(amp)
    order = np.argsort(mags, axis=None)[::-1]
    paired = [
        (zx.roots[i // amp.shape[1]], zy.roots[i % amp.shape[1]], amp.flat[i])
        for i in order
    ]
    return PencilResult(
        zx=zx,
        zy=zy,
        dampings_x=zx.dampings,
        dampings_y=zy.dampings,
        paired=paired,
    )


@dataclass(frozen=True)
class PencilDiagnostics:
    singular_values: np.ndarray
    dampings_x: np.ndarray
    dampings_y: np.ndarray
    split: int
    fit_residual: float


def estimate_model_pencil(
    region: np.ndarray,
    n_modes: int,
    split: int = None,
    project: bool = True,
    dc_root: bool = True,
    iterative_gram: bool = False,
):
    """Full pencil estimate of a region: roots of both axes plus amplitudes.

    The estimate runs on the mean-removed region; with ``dc_root`` a unit
    root is appended to both axes afterwards and the amplitudes are fitted
    on the raw region, so the mean rides on the unit-root component.
    Returns (HarmonicModel, PencilDiagnostics).
    """
    region = np.asarray(region, dtype=float)
    work = region - region.mean() if dc_root else region
    if split is None:
        split = default_split(region.shape, n_modes)
    corr = pencil_correlation(work, split)
    basis = svd_correlation(corr, n_modes)
    u0, ux, uy = extract_submatrices(basis)
    gram_inv = gram_inverse_iterative(u0) if iterative_gram else gram_inverse_direct(u0)
    zx = pencil_eigenvalues(u0, ux, gram_inv)
    zy = pencil_eigenvalues(u0, uy, gram_inv)
    raw_dampings = (zx.dampings, zy.dampings)
    if project:
        zx, zy = zx.projected(), zy.projected()
    if dc_root:
        zx, zy = _append_unit_root(zx), _append_unit_root(zy)
    model = HarmonicModel.fit(region, zx, zy)
    diag = PencilDiagnostics(
        singular_values=basis.singular_values,
        dampings_x=raw_dampings[0],
        dampings_y=raw_dampings[1],
        split=split,
        fit_residual=model.fit_residual,
    )
    return model, diag


def _append_unit_root(roots: ResonanceRoots) -> ResonanceRoots:
    if np.abs(roots.roots - 1.0).min() < 1e-6:
        warnings.warn(
            "estimate already carries a unit root; skipping the mean component",
            stacklevel=3,
        )
        return roots
    return roots.with_appended(1.0)
