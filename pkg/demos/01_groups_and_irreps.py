#!/usr/bin/env python3
"""Finite symmetry groups, their representations, and irrep tables.

Builds the groups used throughout the toolkit (cyclic groups, the Klein
four-group, and their products), inspects regular representations, and
prints the canonical real irrep tables with their characters.
"""

import numpy as np

from dha import (
    direct_product,
    group_from_descriptor,
    irreps_real,
    make_cyclic,
    orbit,
    regular_representation,
)

np.set_printoptions(precision=3, suppress=True)

# A group is just a composition table with dense element ids; id 0 is the
# identity.  C4 composes by addition mod 4:
c4 = make_cyclic(4)
print("C4 composition table:")
print(c4.compose_table)
print("inverses:", c4.inverse_table)

# Products compose componentwise.  The Klein four-group is C2 x C2, and
# descriptors parse directly:
k4 = direct_product(make_cyclic(2), make_cyclic(2))
print("\nKlein four-group:", k4.descriptor, "order", k4.order)
print("every non-identity element is its own inverse:", all(k4.inverse(a) == a for a in range(1, 4)))
print("parse a product descriptor:", group_from_descriptor("(C2xC2)xC2").descriptor)

# The regular representation permutes the group elements themselves, so
# its character is |G| at the identity and 0 elsewhere:
reg = regular_representation(c4)
print("\nregular representation of C4, rho(1):")
print(reg.matrices[1])
print("character:", reg.character())

# Real irrep tables.  For cyclic groups these are the trivial irrep, the
# sign irrep when the order is even, and 2-dimensional rotation irreps:
for desc in ["C2", "C5", "C2xC2", "C2xC3"]:
    table = irreps_real(group_from_descriptor(desc))
    print(f"\nirreps of {desc}:")
    for ir in table:
        print(f"  {ir.label:5s} dim={ir.dim} type={ir.field_type:7s} character={ir.character()}")

# Multiplicities in the regular representation follow from character
# inner products; dimensions always account for the full group order:
c5 = make_cyclic(5)
table = irreps_real(c5)
mults = table.multiplicities(regular_representation(c5))
dims = np.array([ir.dim for ir in table])
print("\nC5 regular representation decomposes with multiplicities", mults)
print("dimension check:", mults @ dims, "== |C5| =", c5.order)

# Group orbits of a state vector: all symmetric copies, norms preserved.
x = np.array([1.0, 2.0, 0.0, 0.0])
print("\norbit of", x, "under C4 (regular action):")
for g, v in enumerate(orbit(x, reg)):
    print(f"  g={g}: {v}")
