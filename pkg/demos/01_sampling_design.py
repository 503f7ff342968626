"""
Lattice sites and neighbourhoods
================================

A sampling design is a box scaled by ``lambda_n`` with a lattice of spacing
``eta_n`` inside it. This script builds one, looks at a neighbourhood and
checks a few growth conditions.
"""

import numpy as np

from spatialdnn.sampling import (
    RegimeParams, SamplingDesign, build_sites, growth_ratio, neighborhood, refine, validate_regime,
)

# A 4 x 4 square with spacing 0.16 holds 25 x 25 sites. The box is open
# at its lower edge and closed at the upper one, so -2 is out and 2 is in.
design = SamplingDesign.box(2, 4.0, 0.16)
sites = build_sites(design)
print("sites:", sites.count)
print("x range:", sites.sites[:, 0].min(), "to", sites.sites[:, 0].max())

# Five sites nearest the middle are the default regression targets
centre = sites.central_sites(5)
print("central sites:", centre, sites.sites[centre].round(2).tolist())

# Responses use the neighbours without the centre, covariates include it
c = int(sites.central_sites(1)[0])
for delta in (0.3, 0.6, 0.8):
    resp = neighborhood(sites, c, delta, include_center=False)
    cov = neighborhood(sites, c, delta, include_center=True)
    print(f"delta={delta}: {resp.gamma_n} response neighbours, {cov.gamma_n} covariate sites")

# Halving the spacing roughly quadruples the site count
finer = refine(design, 1)
print("refined spacing:", finer.eta_n, "sites:", build_sites(finer).count)
print("growth ratio N / volume:", growth_ratio(design, sites.count))

# Check a configuration against the growth conditions
ok = RegimeParams(n=50, psi=0.5, beta=0.3, r=3, gamma_n=7, v1=1.2, v2=1.2)
bad = RegimeParams(n=20, psi=0.5, beta=0.3, r=2, gamma_n=20, v1=1.2, v2=1.2)
print("valid design violations:", validate_regime(ok))
print("oversized neighbourhood violations:", validate_regime(bad))
