"""Compton scattering kinematics shared by the transport and imaging code."""

from __future__ import annotations

import numpy as np

M_E_KEV = 510.99895  # electron rest energy

# Slack allowed before a reconstructed cos(theta) just past +-1 is declared
# unphysical; absorbs rounding of tabulated energies (e.g. the 511/3 keV
# backscatter pair quoted to three decimals).
COS_TOLERANCE = 1e-4


class UnphysicalEventError(ValueError):
    """Energy pair incompatible with Compton kinematics."""


def compton_cosine(e_scatter, e_absorb):
    """cos(theta) from the energy deposits in the scatter and absorber layers.

    Returns the raw (unclamped) value; callers decide how to treat values
    outside [-1, 1].
    """
    e1 = np.asarray(e_scatter, dtype=float)
    e2 = np.asarray(e_absorb, dtype=float)
    return 1.0 - M_E_KEV / e2 + M_E_KEV / (e1 + e2)


def scattering_angle(e_scatter, e_absorb):
    """Kinematic scattering angle (rad) for one event's energy pair.

    Raises UnphysicalEventError when cos(theta) falls outside [-1, 1] by
    more than COS_TOLERANCE; values inside the tolerance band are clamped.
    """
    if not np.all(np.asarray(e_absorb) > 0) or not np.all(np.asarray(e_scatter) >= 0):
        raise ValueError("require e_scatter >= 0 and e_absorb > 0")
    cos = compton_cosine(e_scatter, e_absorb)
    if np.any(np.abs(cos) > 1.0 + COS_TOLERANCE):
        raise UnphysicalEventError(f"cos(theta) = {cos} outside [-1, 1]")
    theta = np.arccos(np.clip(cos, -1.0, 1.0))
    return float(theta) if np.ndim(theta) == 0 else theta


def is_physical(e_scatter, e_absorb):
    """Vectorized physicality check for a (scatter, absorb) energy pair."""
    with np.errstate(divide="ignore", invalid="ignore"):
        cos = compton_cosine(e_scatter, e_absorb)
    return np.abs(cos) <= 1.0 + COS_TOLERANCE


def compton_outgoing_energy(energy_kev, theta):
    """Photon energy after scattering by theta (inverse of the angle formula)."""
    e = np.asarray(energy_kev, dtype=float)
    if np.any(e <= 0):
        raise ValueError("photon energy must be positive")
    return e / (1.0 + (e / M_E_KEV) * (1.0 - np.cos(theta)))
