"""Eigen-harmonic texture model.

A textured raster is modelled as a sum of 2D complex exponentials
``z_x^i * z_y^k`` with an amplitude matrix coupling the two axes.  This
module holds the model types (polynomial coefficients, resonance roots,
amplitude model) and the operations on them: the linear shift operator in
companion form, root extraction, Vandermonde bases, forward and inverse
spectral transforms, kernel shifting, and a synthetic-texture generator
used throughout the tests.

Everything here is a pure function over immutable inputs; concurrent use
needs no locking.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError, NumericError

# Relative singular-value cutoff for pseudoinverses of Vandermonde bases.
PINV_RCOND = 1e-10

_TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class PolynomialCoeffs:
    """Real coefficients a_1..a_P of the prediction polynomial 1 + sum a_i z^i.

    When ``symmetric`` is set the coefficients must be exactly palindromic
    (a_P = 1 and a_i = a_{P-i}); the symmetric estimator constructs them
    that way bit for bit.
    """

    a: np.ndarray
    symmetric: bool = False

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        if a.ndim != 1 or a.size == 0:
            raise ValueError("coefficient list must be a non-empty 1D sequence")
        if not np.all(np.isfinite(a)):
            raise ValueError("coefficients must be finite")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "a", a)
        if self.symmetric:
            p = a.size
            if p % 2 != 0:
                raise ValueError("symmetric coefficients require even order")
            if a[-1] != 1.0:
                raise ValueError("symmetric coefficients require a_P = 1")
            for i in range(1, p // 2):
                if a[i - 1] != a[p - i - 1]:
                    raise ValueError("symmetric coefficients must be palindromic")

    @property
    def order(self) -> int:
        return int(self.a.size)


@dataclass(frozen=True)
class ResonanceRoots:
    """Complex resonance roots z_i = |z_i| exp(i 2 pi f_i) of one image axis.

    ``source_moduli`` keeps the moduli seen before any unit-circle
    projection so damping diagnostics survive the projection.
    """

    roots: np.ndarray
    source_moduli: np.ndarray = field(default=None)

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.roots, dtype=complex)).copy()
        if z.ndim != 1 or z.size == 0:
            raise ValueError("roots must be a non-empty 1D sequence")
        if not np.all(np.isfinite(z)):
            raise NumericError("non-finite resonance root")
        mod = self.source_moduli
        mod = np.abs(z) if mod is None else np.asarray(mod, dtype=float).copy()
        if mod.shape != z.shape:
            raise ValueError("source_moduli must match the root count")
        z.setflags(write=False)
        mod.setflags(write=False)
        object.__setattr__(self, "roots", z)
        object.__setattr__(self, "source_moduli", mod)

    def __len__(self) -> int:
        return int(self.roots.size)

    @property
    def frequencies(self) -> np.ndarray:
        """Root angles in cycles per pixel, in (-0.5, 0.5]."""
        f = np.angle(self.roots) / _TWO_PI
        return np.where(f <= -0.5, f + 1.0, f)

    @property
    def dampings(self) -> np.ndarray:
        """|z| - 1 per root, from the pre-projection moduli."""
        return self.source_moduli - 1.0

    def projected(self) -> "ResonanceRoots":
        """Copy with every root moved radially onto the unit circle."""
        mod = np.abs(self.roots)
        if np.any(mod == 0.0):
            raise NumericError("cannot project a zero root onto the unit circle")
        return ResonanceRoots(self.roots / mod, source_moduli=self.source_moduli)

    def with_appended(self, value: complex) -> "ResonanceRoots":
        return ResonanceRoots(
            np.concatenate([self.roots, [complex(value)]]),
            source_moduli=np.concatenate([self.source_moduli, [abs(value)]]),
        )


@dataclass(frozen=True)
class TextureKernel:
    """One period of the texture: a real P x Q block of pixel intensities."""

    values: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.values, dtype=float).copy()
        if b.ndim != 2:
            raise ValueError("kernel must be 2D")
        if not np.all(np.isfinite(b)):
            raise ValueError("kernel entries must be finite")
        b.setflags(write=False)
        object.__setattr__(self, "values", b)

    @property
    def shape(self):
        return self.values.shape


def _sorted_roots(z: np.ndarray) -> np.ndarray:
    order = np.lexsort((np.abs(z), np.round(np.angle(z), 12)))
    return z[order]


def companion_matrix(coeffs: PolynomialCoeffs) -> np.ndarray:
    """Linear shift operator in companion form.

    Superdiagonal ones; last row (-a_P, -a_{P-1}, ..., -a_1).  Applying it
    to a window of P consecutive samples shifts the window by one step,
    synthesising the new sample by linear prediction.
    """
    p = coeffs.order
    k = np.zeros((p, p))
    if p > 1:
        k[np.arange(p - 1), np.arange(1, p)] = 1.0
    k[-1, :] = -coeffs.a[::-1]
    return k


def polynomial_roots(coeffs: PolynomialCoeffs, project: bool = False) -> ResonanceRoots:
    """Roots of 1 + sum a_i z^i = 0 via companion-matrix eigenvalues.

    Trailing near-zero coefficients are stripped first (they only lower
    the order).  With ``project`` the roots are moved radially onto the
    unit circle; the raw moduli stay available as ``source_moduli``.
    """
    a = np.asarray(coeffs.a, dtype=float)
    scale = max(1.0, float(np.abs(a).max()))
    keep = a.size
    while keep > 0 and abs(a[keep - 1]) <= 1e-14 * scale:
        keep -= 1
    if keep == 0:
        raise NumericError("degenerate polynomial: no significant coefficients")
    a = a[:keep]
    # np.roots builds the companion matrix of the reversed (monic) polynomial
    # and takes its eigenvalues.
    z = np.roots(np.concatenate([a[::-1], [1.0]]))
    z = _sorted_roots(np.asarray(z, dtype=complex))
    roots = ResonanceRoots(z)
    return roots.projected() if project else roots


def coeffs_from_roots(roots) -> PolynomialCoeffs:
    """Polynomial coefficients whose root set is the given one.

    The root set must be closed under conjugation so the coefficients are
    real.
    """
    z = roots.roots if isinstance(roots, ResonanceRoots) else np.asarray(roots, complex)
    d = np.atleast_1d(np.poly(z))  # monic, descending powers
    if abs(d[-1]) < 1e-300:
        raise NumericError("root at zero has no finite prediction polynomial")
    ascending = d[::-1] / d[-1]
    a = ascending[1:]
    if np.abs(a.imag).max(initial=0.0) > 1e-8 * max(1.0, np.abs(a.real).max(initial=0.0)):
        raise NumericError("root set is not conjugate-closed; coefficients not real")
    return PolynomialCoeffs(a.real)


def vandermonde(roots, n: int) -> np.ndarray:
    """n x P basis with entry (t, i) = z_i^t, t = 0..n-1."""
    z = roots.roots if isinstance(roots, ResonanceRoots) else np.asarray(roots, complex)
    p = z.size
    if n < p:
        raise ValueError(f"basis length {n} is below the root count {p}")
    return z[None, :] ** np.arange(n)[:, None]


def _checked_pinv(z_matrix: np.ndarray) -> np.ndarray:
    s = np.linalg.svd(z_matrix, compute_uv=False)
    if s[-1] < PINV_RCOND * s[0]:
        raise ModelError(
            "coincident resonance roots: the amplitude fit is ill-posed"
        )
    return np.linalg.pinv(z_matrix, rcond=PINV_RCOND)


def spectrum(region: np.ndarray, zx: ResonanceRoots, zy: ResonanceRoots) -> np.ndarray:
    """Amplitude matrix of a region in the harmonic basis (least squares).

    Solves region ~ Zx A Zy^T for A with the overdetermined Vandermonde
    bases of both axes, using SVD pseudoinverses with a relative cutoff of
    ``PINV_RCOND``.
    """
    region = np.asarray(region, dtype=float)
    if region.ndim != 2:
        raise ValueError("region must be 2D")
    zx_b = vandermonde(zx, region.shape[0])
    zy_b = vandermonde(zy, region.shape[1])
    return _checked_pinv(zx_b) @ region @ _checked_pinv(zy_b).T


def fit_residual(region: np.ndarray, zx, zy, amplitudes: np.ndarray) -> float:
    """Max-abs reconstruction error of an amplitude fit over a region."""
    region = np.asarray(region, dtype=float)
    synth = vandermonde(zx, region.shape[0]) @ amplitudes @ vandermonde(zy, region.shape[1]).T
    return float(np.abs(synth.real - region).max())


@dataclass(frozen=True)
class HarmonicModel:
    """Resonance roots of both axes plus the complex amplitude matrix."""

    zx: ResonanceRoots
    zy: ResonanceRoots
    amplitudes: np.ndarray
    fit_residual: float = float("nan")

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex).copy()
        if a.shape != (len(self.zx), len(self.zy)):
            raise ValueError("amplitude matrix must be (len(zx), len(zy))")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @property
    def order(self):
        return (len(self.zx), len(self.zy))

    @classmethod
    def fit(cls, region: np.ndarray, zx: ResonanceRoots, zy: ResonanceRoots) -> "HarmonicModel":
        amp = spectrum(region, zx, zy)
        return cls(zx, zy, amp, fit_residual=fit_residual(region, zx, zy, amp))

    def degenerate_axes(self, tol: float = 1e-12):
        """Indices of all-zero amplitude rows/columns (model over-specified).

        Diagnostic only: a well-ordered model should have none.
        """
        mags = np.abs(self.amplitudes)
        cut = tol * max(mags.max(), 1e-300)
        rows = [i for i in range(mags.shape[0]) if np.all(mags[i, :] < cut)]
        cols = [j for j in range(mags.shape[1]) if np.all(mags[:, j] < cut)]
        return rows, cols


def reconstruct(model: HarmonicModel, n_x: int, n_y: int) -> np.ndarray:
    """Pixel values d_{i,k} = Re[ sum A_{m,n} zx_m^i zy_n^k ] on an n_x x n_y grid."""
    synth = (
        vandermonde(model.zx, n_x) @ model.amplitudes @ vandermonde(model.zy, n_y).T
    )
    return synth.real


def reconstruction_imag_residue(model: HarmonicModel, n_x: int, n_y: int) -> float:
    """Largest imaginary part left over by the synthesis, relative to its scale.

    Near zero whenever roots and amplitudes come in conjugate pairs.
    """
    synth = (
        vandermonde(model.zx, n_x) @ model.amplitudes @ vandermonde(model.zy, n_y).T
    )
    return float(np.abs(synth.imag).max() / max(1e-300, np.abs(synth.real).max()))


def shift_kernel(
    kernel: TextureKernel,
    coeffs_x: PolynomialCoeffs,
    coeffs_y: PolynomialCoeffs,
    t: int,
    tau: int,
) -> TextureKernel:
    """Kernel shifted t rows and tau columns through the companion operators."""
    if t < 0 or tau < 0:
        raise ValueError("shifts must be non-negative")
    kx = np.linalg.matrix_power(companion_matrix(coeffs_x), t)
    ky = np.linalg.matrix_power(companion_matrix(coeffs_y), tau)
    return TextureKernel(kx @ kernel.values @ ky.T)


def synth_texture(
    freq_pairs,
    n_x: int,
    n_y: int,
    noise_sigma: float = 0.0,
    seed: int = 0,
    mean: float = 0.0,
) -> np.ndarray:
    """Sum of real 2D harmonics plus optional white Gaussian noise.

    ``freq_pairs`` holds (fx, fy, amplitude, phase) tuples with frequencies
    in (-0.5, 0.5] cycles/pixel.  The noise stream is seeded, so fixtures
    are reproducible.
    """
    rows = np.arange(n_x)[:, None]
    cols = np.arange(n_y)[None, :]
    out = np.full((n_x, n_y), float(mean))
    seen = []
    for entry in freq_pairs:
        fx, fy, amp, phase = (float(v) for v in entry)
        for f in (fx, fy):
            if not (-0.5 < f <= 0.5):
                raise ValueError(f"frequency {f} outside (-0.5, 0.5]")
        for gx, gy in seen:
            if abs(gx - fx) < 1e-12 and abs(gy - fy) < 1e-12:
                raise ValueError(f"aliased duplicate frequency pair ({fx}, {fy})")
        seen.append((fx, fy))
        out += amp * np.cos(_TWO_PI * (fx * rows + fy * cols) + phase)
    if noise_sigma:
        out += np.random.default_rng(seed).normal(0.0, noise_sigma, out.shape)
    return out
