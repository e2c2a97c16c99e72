"""Regenerate the bundled GAGG/BGO photon attenuation tables.

The toolkit tracks only two interaction channels, photoelectric absorption
and Compton scattering.  The Compton linear attenuation coefficient is exact
(total Klein-Nishina cross-section per electron times electron density).
The photoelectric coefficient uses the classic Z^4.5 / E^3 scaling per atom,
anchored so that the high-Z constituents reproduce published coefficients at
100 keV to within tens of percent.  Above a few hundred keV photoabsorption
is negligible against Compton for these materials, so the approximation only
matters near the bottom of the 30 keV - 3 MeV instrument band.

Run from the repository root:

    python demos/make_attenuation_tables.py
"""

import math
from pathlib import Path

import numpy as np

AVOGADRO = 6.02214076e23          # 1/mol
R_E_CM = 2.8179403262e-13         # classical electron radius, cm
M_E_KEV = 510.99895               # electron rest energy, keV

# material -> list of (Z, atomic mass g/mol, count per formula unit), density g/cm^3
MATERIALS = {
    "gagg": {
        # Gd3Al2Ga3O12, rho = 6.63 g/cm^3
        "composition": [(64, 157.25, 3), (13, 26.982, 2), (31, 69.723, 3), (8, 15.999, 12)],
        "density": 6.63,
    },
    "bgo": {
        # Bi4Ge3O12, rho = 7.13 g/cm^3
        "composition": [(83, 208.980, 4), (32, 72.630, 3), (8, 15.999, 12)],
        "density": 7.13,
    },
}

# Photoelectric anchor: sigma_pe(Z, E) = PE_NORM * Z^4.5 * (100 keV / E)^3  [cm^2/atom]
# calibrated against the bismuth photoabsorption cross-section near 100 keV.
PE_NORM = 4.4e-30


def klein_nishina_total(energy_kev):
    """Total Klein-Nishina cross-section per electron in cm^2."""
    k = np.asarray(energy_kev, dtype=float) / M_E_KEV
    term1 = (1 + k) / k**2 * (2 * (1 + k) / (1 + 2 * k) - np.log1p(2 * k) / k)
    term2 = np.log1p(2 * k) / (2 * k)
    term3 = (1 + 3 * k) / (1 + 2 * k) ** 2
    return 2 * math.pi * R_E_CM**2 * (term1 + term2 - term3)


def build_table(name, n_points=60, e_min=10.0, e_max=3500.0):
    spec = MATERIALS[name]
    energies = np.geomspace(e_min, e_max, n_points)

    molar_mass = sum(a * n for _, a, n in spec["composition"])
    n_formula = spec["density"] * AVOGADRO / molar_mass   # formula units / cm^3
    n_electron = n_formula * sum(z * n for z, _, n in spec["composition"])

    mu_compton_cm = n_electron * klein_nishina_total(energies)
    sigma_pe = sum(
        n * PE_NORM * z**4.5 * (100.0 / energies) ** 3 for z, _, n in spec["composition"]
    )
    mu_pe_cm = n_formula * sigma_pe

    # store in 1/mm
    return energies, mu_pe_cm / 10.0, mu_compton_cm / 10.0


def main():
    out_dir = Path(__file__).resolve().parents[1] / "src" / "ccbox" / "data"
    for name in MATERIALS:
        energies, mu_pe, mu_c = build_table(name)
        path = out_dir / f"{name}_attenuation.csv"
        with open(path, "w", newline="\n") as fh:
            fh.write("energy_keV,mu_pe_per_mm,mu_compton_per_mm\n")
            for e, p, c in zip(energies, mu_pe, mu_c):
                fh.write(f"{e:.6e},{p:.6e},{c:.6e}\n")
        print(f"wrote {path} ({len(energies)} points)")


if __name__ == "__main__":
    main()
