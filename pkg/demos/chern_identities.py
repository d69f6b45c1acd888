"""Chern calculus on a non-Kähler metric.

Builds the metric g = diag(1 + |z₂|², 1) on a few points of C², prints its
torsion, the two Chern-Ricci forms, and the residuals of the curvature and
torsion commutation identities at two finite-difference steps.
"""

import numpy as np

from hermcont.chern import chern_curvature, commutation_residuals, residual_norms, torsion_and_tau
from hermcont.differentiation import CentralDifference
from hermcont.fields import HermitianField, PointSet


def metric(Z):
    g = np.zeros((Z.shape[0], 2, 2), complex)
    g[:, 0, 0] = 1 + np.abs(Z[:, 1]) ** 2
    g[:, 1, 1] = 1
    return g


def main():
    pts = PointSet(np.array([[0.2 + 0.1j, 0.5 - 0.3j], [-0.4j, 0.1 + 0.7j]]))
    g = HermitianField.from_function(metric, pts)
    eng = CentralDifference(pts, order=6, step=1e-2)

    cd = torsion_and_tau(chern_curvature(g, eng))
    print("torsion 1-form τ at the first point:", np.round(cd.tau[0], 6))
    print("expected (0, -conj(z₂)/(1+|z₂|²)) has second entry",
          np.round(-np.conj(pts.points[0, 1]) / (1 + abs(pts.points[0, 1]) ** 2), 6))
    print("first Chern-Ricci:\n", np.round(cd.ricci_first[0], 6))
    print("second Chern-Ricci:\n", np.round(cd.ricci_second[0], 6))

    print("\ncommutation identity residuals (sup norm)")
    for step in (1e-2, 5e-3):
        norms = residual_norms(commutation_residuals(g, eng.with_step(step)))
        print(f"  step {step:g}: " + ", ".join(f"{k} {v:.1e}" for k, v in sorted(norms.items())))


if __name__ == "__main__":
    main()
