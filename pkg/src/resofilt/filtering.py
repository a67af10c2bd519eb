"""Inverse resonance filter: design, application, and the 3-sigma detector.

The filter kernel is synthesised so that convolving it over a texture in
the model span returns a flat level E everywhere; residual fluctuation on
the training (base) region defines the noise dispersion, and pixels whose
filtered value leaves the E +- k*sigma band in any colour channel are
flagged as anomalies carrying their original intensities.

Functions are pure; per-channel designs are independent and may run
concurrently.  Each output pixel of the convolution is an independent dot
product, accumulated in a fixed (row-major kernel) order so results do not
depend on scheduling.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NumericError
from .harmonic import HarmonicModel, spectrum, vandermonde

# Relative amplitude floor below which a spectral component is dropped
# instead of divided by.
DROP_TOL = 1e-9


@dataclass(frozen=True)
class IRFilter:
    """Inverse resonance filter for one colour channel.

    ``kernel`` is the real P x Q transient characteristic, ``flat_level``
    the constant the filter drives own-texture output toward, ``sigma2``
    the dispersion of the filtered base region around that level.
    """

    kernel: np.ndarray
    flat_level: float
    sigma2: float
    channel: str = "gray"

    def __post_init__(self):
        k = np.asarray(self.kernel, dtype=float).copy()
        if k.ndim != 2:
            raise ValueError("kernel must be 2D")
        if not np.all(np.isfinite(k)):
            raise NumericError("kernel has non-finite entries")
        if self.sigma2 < 0.0:
            raise ValueError("sigma2 must be non-negative")
        k.setflags(write=False)
        object.__setattr__(self, "kernel", k)

    @property
    def order(self):
        return self.kernel.shape


@dataclass(frozen=True)
class DetectionMask:
    """Per-channel anomaly verdicts at original-image coordinates.

    ``values[c][i, k]`` holds the original pixel value where the pixel is
    anomalous and 0 elsewhere.  Only the top-left valid region (the part
    fully covered by filter windows) can be nonzero; ``valid_shape`` gives
    its extent from the (0, 0) corner.
    """

    values: np.ndarray
    valid_shape: tuple

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 3:
            raise ValueError("mask values must be (channels, rows, cols)")
        object.__setattr__(self, "values", v)

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    def positive(self) -> np.ndarray:
        """Boolean raster: anomalous in any channel."""
        return (self.values > 0).any(axis=0)


def resolve_flat_level(base_region: np.ndarray, policy) -> float:
    """Flat-level policy: 'mean' (default), 'zero', or an explicit number."""
    if policy == "mean":
        return float(np.asarray(base_region).mean())
    if policy == "zero":
        return 0.0
    if isinstance(policy, (int, float)) and not isinstance(policy, bool):
        return float(policy)
    raise ValueError(f"unknown flat-level policy {policy!r}")


def design_filter(
    base_region: np.ndarray,
    model: HarmonicModel,
    e_policy="mean",
    channel: str = "gray",
) -> IRFilter:
    """Design the inverse filter of a base region under a harmonic model.

    The amplitude matrix of the base region and of the constant flat-level
    image are fitted in the model basis; their elementwise ratio is the
    filter spectrum, synthesised back into a P x Q kernel through the
    square inverse bases.  Components whose texture amplitude is below
    DROP_TOL relative are dropped; a warning is raised only when the flat
    target actually needed such a component.  The noise dispersion is the
    filtered base region's mean squared deviation from the flat level.
    """
    base_region = np.asarray(base_region, dtype=float)
    p, q = model.order
    if base_region.shape[0] < p + 1 or base_region.shape[1] < q + 1:
        raise ValueError(
            f"base region {base_region.shape} must exceed the model order ({p}, {q})"
        )
    flat = resolve_flat_level(base_region, e_policy)

    amp = spectrum(base_region, model.zx, model.zy)
    flat_spec = spectrum(np.full_like(base_region, flat), model.zx, model.zy)

    mags = np.abs(amp)
    floor = DROP_TOL * max(mags.max(), 1e-300)
    small = mags < floor
    ratio = np.zeros_like(amp)
    ratio[~small] = flat_spec[~small] / amp[~small]
    needed = small & (np.abs(flat_spec) > DROP_TOL * max(np.abs(flat_spec).max(), 1e-300))
    if np.any(needed):
        warnings.warn(
            f"dropped {int(needed.sum())} spectral component(s) with vanishing "
            "texture amplitude; the model over-specifies this texture",
            stacklevel=2,
        )

    try:
        zx_inv = np.linalg.inv(vandermonde(model.zx, p))
        zy_inv = np.linalg.inv(vandermonde(model.zy, q))
    except np.linalg.LinAlgError as exc:
        raise NumericError("coincident roots: square basis not invertible") from exc
    kernel_c = zx_inv.T @ ratio @ zy_inv
    residue = np.abs(kernel_c.imag).max() / max(1.0, np.abs(kernel_c.real).max())
    if residue > 1e-8:
        raise NumericError(
            f"kernel synthesis left imaginary residue {residue:.3g}: "
            "model is not conjugate-closed"
        )
    kernel = kernel_c.real

    filtered = _correlate_valid(base_region, kernel)
    sig2 = noise_dispersion(filtered, flat)
    return IRFilter(kernel=kernel, flat_level=flat, sigma2=sig2, channel=channel)


def _correlate_valid(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Valid-region sliding sum: out[i,k] = sum_{m,n} h[m,n] d[m+i, n+k].

    Accumulated as kernel-sized shifted adds in row-major (m, n) order, so
    every output pixel reproduces the definitional double sum bit for bit.
    """
    p, q = kernel.shape
    ox = image.shape[0] - p + 1
    oy = image.shape[1] - q + 1
    if ox < 1 or oy < 1:
        raise ValueError(f"image {image.shape} smaller than kernel {kernel.shape}")
    out = np.zeros((ox, oy))
    for m in range(p):
        for n in range(q):
            out += kernel[m, n] * image[m : m + ox, n : n + oy]
    return out


def apply_filter(image: np.ndarray, irf: IRFilter) -> np.ndarray:
    """Filter one plane; output shape (n_x - P + 1, n_y - Q + 1)."""
    return _correlate_valid(np.asarray(image, dtype=float), irf.kernel)


def noise_dispersion(filtered: np.ndarray, flat_level: float) -> float:
    """Mean squared deviation of a filtered raster from the flat level."""
    filtered = np.asarray(filtered, dtype=float)
    if filtered.size == 0:
        raise ValueError("empty filtered raster")
    return float(np.mean((filtered - flat_level) ** 2))


def detect(
    filtered_channels,
    filters,
    original_planes,
    multiplier: float = 3.0,
) -> DetectionMask:
    """Union 3-sigma rule across channels.

    A pixel is anomalous when |filtered - E| exceeds multiplier * sigma in
    any channel; anomalous pixels copy their original values into the mask
    (all channels), others are zero.  An anomalous pixel whose original
    value is exactly zero is stored as the smallest positive double so the
    v > 0 convention stays faithful.
    """
    if len(filtered_channels) != len(filters) or len(filters) != len(original_planes):
        raise ValueError("channel counts of filtered, filters and original differ")
    if not filters:
        raise ValueError("at least one channel is required")
    shape = np.asarray(original_planes[0]).shape
    out_shape = np.asarray(filtered_channels[0]).shape

    flagged = np.zeros(out_shape, dtype=bool)
    for filt_plane, irf in zip(filtered_channels, filters):
        filt_plane = np.asarray(filt_plane, dtype=float)
        if filt_plane.shape != out_shape:
            raise ValueError("filtered channels disagree in shape")
        band = multiplier * np.sqrt(irf.sigma2)
        flagged |= np.abs(filt_plane - irf.flat_level) > band

    tiny = np.nextafter(0.0, 1.0)
    values = np.zeros((len(original_planes),) + shape)
    for c, plane in enumerate(original_planes):
        plane = np.asarray(plane, dtype=float)
        if plane.shape != shape:
            raise ValueError("original channels disagree in shape")
        region = plane[: out_shape[0], : out_shape[1]]
        marked = np.where(flagged, region, 0.0)
        marked[flagged & (region == 0.0)] = tiny
        values[c, : out_shape[0], : out_shape[1]] = marked
    return DetectionMask(values=values, valid_shape=out_shape)


def within_band_fraction(filtered: np.ndarray, irf: IRFilter, multiplier: float = 3.0) -> float:
    """Fraction of filtered pixels inside the flat-level band (diagnostic)."""
    band = multiplier * np.sqrt(irf.sigma2)
    return float(np.mean(np.abs(filtered - irf.flat_level) <= band))
