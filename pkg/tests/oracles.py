"""Reference values computed independently of the package and frozen here.

The coefficient values come from a 40-digit mpmath evaluation of the
defining integrals on the explicit orbit; the monodromy matrices follow
from the closed-form fundamental solutions and the 2*pi*i periodicity of
the hyperbolic functions.
"""

import math

import numpy as np

RESONANCE_S2 = {0: 1.70710678, 1: 7.5355339, 2: 17.36396103}

# saddle-node coefficients at s = 2, ell = 0, beta3 = 4
A2 = -2.524007244223130365
B2 = -5.16059297799500444
# transcritical/pitchfork coefficient at s = 2, ell = 0
ABAR2 = -2.4018731183320757086

# pitchfork cubic coefficient with the coupling tied to beta1
BBAR2_TIED = {
    (2, 0): -0.645117043795104329,
    (2, 1): -0.121060035839971402,
    (2, 2): -0.0435343930161258682,
    (3, 0): 0.458153307103694078,
    (3, 1): -0.0457894321790675574,
    (3, 2): -0.0153363133290332176,
}
# sqrt(s) equal to the golden ratio is a root of the ell = 0 polynomial
GOLDEN_S = ((1 + math.sqrt(5)) / 2) ** 2

# pitchfork cubic coefficient with the displayed coupling c = 8
BBAR2_C8_S2_L0 = 10.8373146857577

# stable left eigenvectors of the linearization at the origin (s = 2)
LEFT_STABLE = (np.array([1.0, 0.0, -1.0, 0.0]),
               np.array([0.0, math.sqrt(2.0), 0.0, -1.0]))

# the explicit orbit x1 = sqrt(2) sech t has squared L2 norm 4
ORBIT_X1_L2_SQUARED = 4.0

# block 1 in the (bounded, unbounded) basis, loops around the pole at i*pi/2
BLOCK1_PLUS = np.array([[1.0, -1.5j * math.pi], [0.0, 1.0]])
BLOCK1_MINUS = np.array([[1.0, 1.5j * math.pi], [0.0, 1.0]])
# block 2 eigenvalues at s = 2
BLOCK2_EIGS = (np.exp(2j * math.pi * math.sqrt(2)), np.exp(-2j * math.pi * math.sqrt(2)))
