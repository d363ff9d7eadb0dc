"""Reference five-decimal values used as oracles."""

import numpy as np

KDV_BETAS = (1.0, 1.5, 2.0, 4.0)
KDV_ETAS = tuple(k / 10 for k in range(1, 10))

# rows follow KDV_ETAS, columns follow KDV_BETAS
KDV_PHI = np.array([
    [5.88251, 2.19345, 1.75226, 0.78565],
    [5.47775, 3.65183, 2.07024, 1.09422],
    [5.06441, 3.37626, 2.29727, 1.36578],
    [4.63711, 3.09141, 2.47717, 1.62689],
    [4.18879, 2.79252, 2.62703, 1.89375],
    [3.70918, 2.47278, 2.75579, 2.18372],
    [3.18159, 2.12106, 2.86860, 2.52387],
    [2.57400, 1.71600, 2.96898, 2.97357],
    [1.80404, 1.20273, 3.05934, 3.73515],
])

NLS_BETAS = (1.5, 2.0, 3.0, 3.5)
NLS_LAMBDAS = (0.5, 0.6, 0.7, 0.8, 0.9)

# lambda * phi(lambda) * sqrt(1 - lambda^2); rows follow NLS_LAMBDAS
NLS_G = np.array([
    [0.0, 0.0, 0.0, 0.0],
    [1.10957, 1.29635, 1.48400, 1.53471],
    [1.62180, 1.64627, 1.63429, 1.62240],
    [2.16222, 1.97843, 1.76762, 1.70143],
    [2.69501, 2.21615, 1.76986, 1.64733],
])
