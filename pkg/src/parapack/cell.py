"""Cell-level building blocks: OCV curves, ECM parameters, derived quantities.

Ships synthetic OCV-SOC tables for an NMC-like and an LFP-like cell. The
midranges are deliberately close to linear (steady rise for NMC, shallow
plateau for LFP) so a single secant linearization is representative.
"""

from __future__ import annotations

import csv
import importlib.resources
from dataclasses import dataclass, field

import numpy as np

# Experimentally characterized ECM parameters (Molicel 18650 NMC,
# LithiumWerks 18650 LFP): Q [C], R_s [ohm], RC pairs [(ohm, F)].
NOMINAL_PARAMS = {
    "nmc": {"q": 9925.0, "r_s": 0.102, "rc_pairs": [(9.4e-3, 6330.0), (3.63e-2, 6797.0)]},
    "lfp": {"q": 4579.0, "r_s": 0.261, "rc_pairs": [(0.187, 8232.0), (1.75e-2, 1749.0)]},
}


class OcvCurve:
    """Tabulated open-circuit voltage vs. state of charge.

    Piecewise-linear between points; the table must start at soc=0, end at
    soc=1, and be strictly increasing in soc.
    """

    def __init__(self, soc, ocv):
        soc = np.asarray(soc, dtype=float)
        ocv = np.asarray(ocv, dtype=float)
        if soc.ndim != 1 or soc.shape != ocv.shape or soc.size < 2:
            raise ValueError("OCV table needs two equal-length 1-D columns with >= 2 rows")
        if np.any(np.diff(soc) <= 0):
            raise ValueError("soc column must be strictly increasing")
        if soc[0] != 0.0 or soc[-1] != 1.0:
            raise ValueError("OCV table must cover soc range [0, 1]")
        if not (np.all(np.isfinite(soc)) and np.all(np.isfinite(ocv))):
            raise ValueError("OCV table contains non-finite values")
        self.soc = soc
        self.ocv = ocv

    @classmethod
    def from_points(cls, points):
        pts = sorted(points)
        return cls([p[0] for p in pts], [p[1] for p in pts])

    @classmethod
    def from_csv(cls, path):
        soc, ocv = [], []
        with open(path, newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header is None or [h.strip() for h in header[:2]] != ["soc", "ocv_volts"]:
                raise ValueError(f"{path}: expected header 'soc,ocv_volts'")
            for row in reader:
                if not row:
                    continue
                soc.append(float(row[0]))
                ocv.append(float(row[1]))
        return cls(soc, ocv)

    def eval(self, soc):
        """Interpolate OCV at a SOC in [0, 1]."""
        s = np.asarray(soc, dtype=float)
        if np.any(s < 0.0) or np.any(s > 1.0):
            raise ValueError(f"soc {soc} outside [0, 1]")
        out = np.interp(s, self.soc, self.ocv)
        return float(out) if np.isscalar(soc) else out

    __call__ = eval

    def slope(self, soc_lo, soc_hi):
        """Secant slope of the curve over [soc_lo, soc_hi], volts per unit SOC."""
        if not soc_lo < soc_hi:
            raise ValueError(f"need soc_lo < soc_hi, got {soc_lo} >= {soc_hi}")
        return (self.eval(soc_hi) - self.eval(soc_lo)) / (soc_hi - soc_lo)

    def __eq__(self, other):
        return (
            isinstance(other, OcvCurve)
            and np.array_equal(self.soc, other.soc)
            and np.array_equal(self.ocv, other.ocv)
        )

    def __hash__(self):
        return hash((self.soc.tobytes(), self.ocv.tobytes()))


def builtin_ocv(chemistry: str) -> OcvCurve:
    """Load one of the shipped synthetic curves ('nmc' or 'lfp')."""
    name = chemistry.lower()
    if name not in ("nmc", "lfp"):
        raise ValueError(f"unknown chemistry {chemistry!r}, expected 'nmc' or 'lfp'")
    ref = importlib.resources.files("parapack.data") / f"{name}_ocv.csv"
    with importlib.resources.as_file(ref) as path:
        return OcvCurve.from_csv(path)


@dataclass(frozen=True)
class CellParams:
    """Equivalent-circuit parameters of one cell.

    q: charge capacity [C]; r_s: Ohmic series resistance [ohm];
    rc_pairs: list of (r_j [ohm], c_j [F]); ocv: the cell's OCV-SOC curve.
    """

    q: float
    r_s: float
    rc_pairs: tuple = ()
    ocv: OcvCurve = None

    def __post_init__(self):
        if not (self.q > 0 and np.isfinite(self.q)):
            raise ValueError(f"capacity q must be positive and finite, got {self.q}")
        if not (self.r_s > 0 and np.isfinite(self.r_s)):
            raise ValueError(f"series resistance r_s must be positive and finite, got {self.r_s}")
        object.__setattr__(self, "rc_pairs", tuple((float(r), float(c)) for r, c in self.rc_pairs))
        for r, c in self.rc_pairs:
            if r <= 0 or c <= 0:
                raise ValueError(f"RC pair values must be positive, got ({r}, {c})")
        if self.ocv is None:
            raise ValueError("CellParams requires an OCV curve")

    @property
    def n_rc(self) -> int:
        return len(self.rc_pairs)

    def without_rc(self) -> "CellParams":
        return CellParams(self.q, self.r_s, (), self.ocv)


@dataclass
class CellState:
    """Dynamic state of one cell: SOC plus capacitor charges [C]."""

    soc: float
    rc_charges: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.rc_charges = np.asarray(self.rc_charges, dtype=float)


def cell_eigenvalue(params: CellParams, gamma: float) -> float:
    """Potentiostatic current-relaxation eigenvalue -gamma / (q * r_s) [1/s].

    Its reciprocal magnitude is the time constant of the cell's current decay
    under constant-voltage operation; gamma is the local OCV-SOC slope.
    """
    if not np.isfinite(gamma):
        raise ValueError(f"gamma must be finite, got {gamma}")
    return -gamma / (params.q * params.r_s)
