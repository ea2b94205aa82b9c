"""Shared builders for the test modules."""

import numpy as np

from degstirap.linkage import CouplingPair, FieldSpec, LinkageSpec

FIG4_PHASES = (1.1814, 0.0, 1.8925, 2.8198)
FIG4_ETA = 1.3376
FIG4_THETA = 0.4636


def fig4_spec(omega_p=52.0, omega_s=42.0) -> LinkageSpec:
    pP, qP, pS, qS = FIG4_PHASES
    return LinkageSpec(1, 2, 3, FieldSpec.from_angles(omega_p, FIG4_ETA, pP, qP),
                       FieldSpec.from_angles(omega_s, FIG4_THETA, pS, qS))


def random_complex(rng, shape, scale=1.0):
    return scale * (rng.normal(size=shape) + 1j * rng.normal(size=shape))


def random_pair(rng, sizes) -> CouplingPair:
    Ng, Ne, Nf = sizes
    return CouplingPair(random_complex(rng, (Ng, Ne)), random_complex(rng, (Ne, Nf)))



ACCEPTANCE: dict[int, str] = {}


def record(number: int, passed: bool, detail: str) -> bool:
    """Store and print the one-line verdict of an acceptance criterion."""
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return passed
