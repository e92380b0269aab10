"""Writes QSVT phase files for the odd inverse polynomial (needs numpy, pyqsp).

usage: python3 gen_phases.py K J out.txt

The file holds d+1 angles in the reflection convention (projector phases
exp(i psi (2 Pi - I)) interleaved with U, U^dagger); the real part of the
resulting block is (-1)^J p(sigma) with p = p_tilde / scale.
"""
import sys
from math import comb

import numpy as np
from numpy.polynomial.chebyshev import Chebyshev
from pyqsp.angle_sequence import QuantumSignalProcessingPhases


def coefficients(k, j):
    den = 4 ** k
    return [4 * (-1) ** i * sum(comb(2 * k, k + t) for t in range(i + 1, k + 1)) / den for i in range(j + 1)]


def main():
    k, j, out = int(sys.argv[1]), int(sys.argv[2]), sys.argv[3]
    c = coefficients(k, j)
    cheb = np.zeros(2 * j + 2)
    cheb[1::2] = c
    grid = np.linspace(-1.0, 1.0, max(10000, 4 * (2 * j + 2)))
    scale = np.max(np.abs(Chebyshev(cheb)(grid)))
    # strict contraction keeps the Newton iteration well posed
    scale *= 1.0 + 1e-6
    target = cheb / scale
    full, _, _ = QuantumSignalProcessingPhases(target, method="sym_qsp", chebyshev_basis=True)
    d = 2 * j + 1
    assert len(full) == d + 1
    # Wx convention -> reflection convention
    psi = [full[0] - np.pi / 4] + [p - np.pi / 2 for p in full[1:-1]] + [full[-1] - np.pi / 4]
    x = np.linspace(-1, 1, 201)
    err = 0.0
    for v in x:
        s = np.sqrt(1 - v * v)
        r = np.array([[v, s], [s, -v]], dtype=complex)
        u = np.diag([np.exp(1j * psi[0]), np.exp(-1j * psi[0])])
        for p in psi[1:]:
            u = u @ r @ np.diag([np.exp(1j * p), np.exp(-1j * p)])
        err = max(err, abs(u[0, 0].real * (-1) ** j - Chebyshev(target)(v)))
    assert err < 1e-9, err
    with open(out, "w") as f:
        f.write(f"# inverse polynomial K={k} J={j}, reflection convention, {d + 1} angles\n")
        f.write(f"# scale {float(scale)!r}\n")
        for p in psi:
            f.write(f"{float(p)!r}\n")
    print(out, "max reconstruction error", err)


if __name__ == "__main__":
    main()
