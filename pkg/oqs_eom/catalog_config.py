
import numpy as np

# Fixed environment coupling matrix of the QB3 fixture (hermitian 3x3)
QB3_V = np.array([
    [0.3, 0.5, 0.1 - 0.2j],
    [0.5, -0.4, 0.6],
    [0.1 + 0.2j, 0.6, 0.2],
], dtype=complex)

# Define the available catalog models and their descriptions
CATALOG_CONFIG = {
    "QB3": {
        "description": "Qubit (H_S = 0.5 sigma_z) coupled by 0.2 sigma_x (x) V to a three-level "
                       "environment H_E = diag(0, 0.7, 1.3); rho_E Gibbs at beta = 1.",
        "seeded": False,
        "h_e_diagonal": (0.0, 0.7, 1.3),
        "coupling_strength": 0.2,
        "beta": 1.0,
    },
    "GENERIC": {
        "description": "Qubit coupled through sigma_x and sigma_z to a seeded Gaussian-hermitian "
                       "environment; H_tot free of degeneracies (re-drawn otherwise).",
        "seeded": True,
        "default_env_dim": 3,
        "env_scale": 0.5,
        "coupling_scales": (0.3, 0.15),
        "beta": 1.0,
    },
    "DECOUPLED": {
        "description": "Pure-dephasing qubit: every coupling is diagonal in the system basis, so the "
                       "populations of |0> and |1> are two dynamically disconnected sectors.",
        "seeded": True,
        "default_env_dim": 3,
        "env_scale": 0.5,
        "coupling_scales": (0.3,),
        "beta": 1.0,
    },
    "DEGENERATE": {
        "description": "Three-level system; level 0 is disconnected while the pair {1, 2} exchanges "
                       "energy with the environment, giving a two-fold zero cluster.",
        "seeded": True,
        "default_env_dim": 3,
        "env_scale": 0.5,
        "coupling_scales": (0.3, 0.2),
        "beta": 1.0,
        "h_s_diagonal": (0.0, 0.4, 0.9),
    },
}

# List of catalog names for validation
CATALOG_NAMES = list(CATALOG_CONFIG.keys())
