"""Versioned structured-text documents for models, filters, and run reports.

Everything is JSON.  Complex values are stored as [re, im] pairs and
floats rely on the encoder's shortest round-trip decimal form, so a
parse(write(x)) cycle reproduces every double exactly.  Documents carry a
``format_version`` field; see docs/formats.md for the schema and a golden
example.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ImageFormatError
from .filtering import IRFilter
from .harmonic import HarmonicModel, ResonanceRoots

FORMAT_VERSION = 1


def _complex_list(values: np.ndarray):
    return [[float(v.real), float(v.imag)] for v in np.asarray(values, complex).ravel()]


def _complex_matrix(matrix: np.ndarray):
    m = np.asarray(matrix, complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


def _to_complex(pairs) -> np.ndarray:
    return np.array([complex(re, im) for re, im in pairs], dtype=complex)


def model_to_doc(model: HarmonicModel, filters=(), extra=None) -> dict:
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": "resonance-model",
        "order": [len(model.zx), len(model.zy)],
        "zx": _complex_list(model.zx.roots),
        "zx_moduli": [float(v) for v in model.zx.source_moduli],
        "zy": _complex_list(model.zy.roots),
        "zy_moduli": [float(v) for v in model.zy.source_moduli],
        "amplitudes": _complex_matrix(model.amplitudes),
        "fit_residual": float(model.fit_residual),
        "filters": [
            {
                "channel": f.channel,
                "order": list(f.order),
                "kernel": [[float(v) for v in row] for row in f.kernel],
                "flat_level": float(f.flat_level),
                "sigma2": float(f.sigma2),
            }
            for f in filters
        ],
    }
    if extra:
        doc["diagnostics"] = extra
    return doc


def doc_to_model(doc: dict):
    """Parse a model document back into (HarmonicModel, [IRFilter...])."""
    try:
        if doc.get("format_version") != FORMAT_VERSION:
            raise ImageFormatError(
                f"unsupported model document version {doc.get('format_version')!r}"
            )
        zx = ResonanceRoots(_to_complex(doc["zx"]), source_moduli=np.array(doc["zx_moduli"]))
        zy = ResonanceRoots(_to_complex(doc["zy"]), source_moduli=np.array(doc["zy_moduli"]))
        amp = np.array(
            [[complex(re, im) for re, im in row] for row in doc["amplitudes"]], dtype=complex
        )
        model = HarmonicModel(zx, zy, amp, fit_residual=float(doc["fit_residual"]))
        filters = [
            IRFilter(
                kernel=np.array(f["kernel"], dtype=float),
                flat_level=float(f["flat_level"]),
                sigma2=float(f["sigma2"]),
                channel=f["channel"],
            )
            for f in doc.get("filters", [])
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise ImageFormatError(f"malformed model document: {exc}") from exc
    return model, filters


def dump_json(doc: dict, path=None) -> str:
    text = json.dumps(doc, indent=2, sort_keys=True)
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return text


def load_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ImageFormatError(f"malformed JSON document: {exc}") from exc


@dataclass
class RunReport:
    """Serializable record of one pipeline run.

    Wall-clock timings are kept out of the serialised form unless
    explicitly requested, so identical runs produce identical bytes.
    """

    config: dict
    model: dict
    frames: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def to_doc(self, include_timings: bool = False) -> dict:
        doc = {
            "format_version": FORMAT_VERSION,
            "kind": "run-report",
            "config": self.config,
            "model": self.model,
            "frames": self.frames,
        }
        if include_timings:
            doc["timings"] = self.timings
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "RunReport":
        if doc.get("kind") != "run-report" or doc.get("format_version") != FORMAT_VERSION:
            raise ImageFormatError("not a run-report document")
        return cls(
            config=doc["config"],
            model=doc["model"],
            frames=doc["frames"],
            timings=doc.get("timings", {}),
        )
