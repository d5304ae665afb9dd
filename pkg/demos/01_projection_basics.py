"""
Symmetric-matrix vectorization and cone projection
==================================================

"""

import numpy as np

from spectraproj import moreau_envelope, project_face, project_psd, smat, svec

rng = np.random.default_rng(0)

# a random symmetric matrix and its vectorized form; the scaling keeps
# inner products intact, so norms agree between the two pictures
G = rng.standard_normal((4, 4))
S = 0.5 * (G + G.T)
s = svec(S)
print("matrix norm  ", np.linalg.norm(S))
print("vector norm  ", np.linalg.norm(s))
print("roundtrip ok ", np.allclose(smat(s), S))

# projecting onto the psd cone splits S into a psd part X and a psd
# remainder Zneg with X - Zneg = S and X ._| Zneg
X, Zneg = project_psd(S)
print()
print("eigs of S    ", np.round(np.linalg.eigvalsh(S), 3))
print("eigs of X    ", np.round(np.linalg.eigvalsh(X), 3))
print("split defect ", np.linalg.norm(X - Zneg - S))
print("orthogonality", abs(np.sum(X * Zneg)))

# restricting the projection to a face: only the part of S seen through
# an orthonormal basis V survives, projected inside the smaller cone
V = np.linalg.qr(rng.standard_normal((4, 2)))[0]
XF = project_face(S, V)
print()
print("face projection lives in range(V):", np.linalg.norm(XF - V @ V.T @ XF))

# half the squared norm of the projection is a smooth function of S even
# though the projection itself is only directionally differentiable; its
# gradient is the projection, checked here by central differences
H = 0.5 * (lambda B: B + B.T)(rng.standard_normal((4, 4)))
H /= np.linalg.norm(H)
for h in (1e-2, 1e-4):
    fd = (moreau_envelope(S + h * H) - moreau_envelope(S - h * H)) / (2 * h)
    print("h=%.0e  fd=%.10f  <X,H>=%.10f" % (h, fd, np.sum(X * H)))
