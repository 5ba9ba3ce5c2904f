import os
from dotenv import load_dotenv

load_dotenv()

class Config:
    """
    Central numerical configuration for the open-system toolkit.
    Values can be overridden by environment variables (prefix OQS_).
    """

    # Operator / density validation
    HERMITIAN_TOL = float(os.getenv("OQS_HERMITIAN_TOL", 1e-12))
    TRACE_TOL = float(os.getenv("OQS_TRACE_TOL", 1e-10))
    PSD_TOL = float(os.getenv("OQS_PSD_TOL", 1e-10))
    Q_SPACE_TOL = float(os.getenv("OQS_Q_SPACE_TOL", 1e-10))

    # Projectors
    RANK_TOL = float(os.getenv("OQS_RANK_TOL", 1e-9))

    # Frequency domain
    EPS_MIN = float(os.getenv("OQS_EPS_MIN", 1e-9))
    NEAR_POLE_COND = float(os.getenv("OQS_NEAR_POLE_COND", 1e12))

    # Spectral / long time
    ZERO_CLUSTER_TOL = float(os.getenv("OQS_ZERO_CLUSTER_TOL", 1e-6))
    DEGENERACY_TOL = float(os.getenv("OQS_DEGENERACY_TOL", 1e-9))
    DEFECTIVE_COND = float(os.getenv("OQS_DEFECTIVE_COND", 1e10))
    EPS_REF_FACTOR = float(os.getenv("OQS_EPS_REF_FACTOR", 0.01))
    RICHARDSON_ORDER = int(os.getenv("OQS_RICHARDSON_ORDER", 2))
    SLOW_MODE_FACTOR = float(os.getenv("OQS_SLOW_MODE_FACTOR", 100.0))
    SLOW_MODE_MATCH_TOL = float(os.getenv("OQS_SLOW_MODE_MATCH_TOL", 0.1))

    # Inverse Laplace contour
    CONTOUR_EPS_FACTOR = float(os.getenv("OQS_CONTOUR_EPS_FACTOR", 0.05))
    CONTOUR_OMEGA_FACTOR = float(os.getenv("OQS_CONTOUR_OMEGA_FACTOR", 4.0))
    NYQUIST_SAFETY = float(os.getenv("OQS_NYQUIST_SAFETY", 8.0))
    TAIL_ORDER = int(os.getenv("OQS_TAIL_ORDER", 4))
    TAIL_DAMPING_FACTOR = float(os.getenv("OQS_TAIL_DAMPING_FACTOR", 0.25))

    # Acceptance
    ACCEPTANCE_TOL = float(os.getenv("OQS_ACCEPTANCE_TOL", 1e-8))
    LONGTIME_TOL = float(os.getenv("OQS_LONGTIME_TOL", 5e-3))

    # Execution
    THREADS = int(os.getenv("OQS_THREADS", 1))
    FREQUENCY_CHUNK = int(os.getenv("OQS_FREQUENCY_CHUNK", 1024))
    LOG_LEVEL = os.getenv("OQS_LOG_LEVEL", "INFO")

    # Cache Settings
    EIGEN_CACHE_SIZE = int(os.getenv("OQS_EIGEN_CACHE_SIZE", 64))
    PIPELINE_CACHE_SIZE = int(os.getenv("OQS_PIPELINE_CACHE_SIZE", 16))

    @classmethod
    def get_tolerances(cls):
        return {
            "hermitian": cls.HERMITIAN_TOL,
            "trace": cls.TRACE_TOL,
            "psd": cls.PSD_TOL,
            "q_space": cls.Q_SPACE_TOL,
            "rank": cls.RANK_TOL,
            "near_pole_cond": cls.NEAR_POLE_COND,
            "zero_cluster": cls.ZERO_CLUSTER_TOL,
            "degeneracy": cls.DEGENERACY_TOL,
            "slow_mode_factor": cls.SLOW_MODE_FACTOR,
            "slow_mode_match": cls.SLOW_MODE_MATCH_TOL,
        }

    @classmethod
    def get_contour_defaults(cls):
        return {
            "eps_factor": cls.CONTOUR_EPS_FACTOR,
            "omega_factor": cls.CONTOUR_OMEGA_FACTOR,
            "nyquist_safety": cls.NYQUIST_SAFETY,
            "tail_order": cls.TAIL_ORDER,
            "tail_damping_factor": cls.TAIL_DAMPING_FACTOR,
        }
