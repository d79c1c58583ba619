"""Regenerate the FCIDUMP fixtures and golden energies.

Integrals are expressed in the Loewdin (symmetric) orthonormalized STO-3G
atomic-orbital basis so that orbital index ranges map onto atoms.

    python3 fixtures/generate.py

Requires pyscf. Output is deterministic.
"""

import os

import numpy as np
from pyscf import ao2mo, fci, gto, scf
from pyscf.tools import fcidump

HERE = os.path.dirname(os.path.abspath(__file__))


def chain(n_atoms, distance):
    return [("H", (0.0, 0.0, i * distance)) for i in range(n_atoms)]


def build(n_atoms, distance):
    mol = gto.M(atom=chain(n_atoms, distance), basis="sto-3g", unit="Angstrom", verbose=0)
    s = mol.intor("int1e_ovlp")
    w, v = np.linalg.eigh(s)
    c = v @ np.diag(w ** -0.5) @ v.T
    h1 = c.T @ (mol.intor("int1e_kin") + mol.intor("int1e_nuc")) @ c
    h2 = ao2mo.restore(1, ao2mo.full(mol.intor("int2e"), c), c.shape[1])
    mf = scf.RHF(mol)
    mf.conv_tol = 1e-12
    e_rhf = mf.kernel()
    e_fci = fci.FCI(mf).kernel()[0]
    return mol, h1, h2, e_rhf, e_fci


def main():
    grid = {
        "h2": [0.735],
        "h4": sorted(set([round(1.0 + 0.25 * k, 3) for k in range(9)] + [1.3, 1.6])),
    }
    for molecule, distances in grid.items():
        n_atoms = 2 if molecule == "h2" else 4
        out_dir = os.path.join(HERE, molecule)
        os.makedirs(out_dir, exist_ok=True)
        rows = []
        for d in distances:
            mol, h1, h2, e_rhf, e_fci = build(n_atoms, d)
            path = os.path.join(out_dir, "d%.3f.fcidump" % d)
            fcidump.from_integrals(
                path, h1, h2, h1.shape[0], mol.nelectron, mol.energy_nuc(), tol=1e-15,
                float_format="%.16e",
            )
            rows.append("%.3f,%.12f,%.12f" % (d, e_fci, e_rhf))
        with open(os.path.join(out_dir, "golden.csv"), "w") as f:
            f.write("distance,e_fci,e_rhf\n")
            f.write("\n".join(rows) + "\n")


if __name__ == "__main__":
    main()
