"""Configuration management for the RRM engine."""

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict
from dotenv import load_dotenv

# Load environment variables
load_dotenv()


class Settings(BaseSettings):
    """Application settings."""

    # Mesh
    gamma0: float = Field(default=10.0, alias="RRM_GAMMA0")
    pattern_ratio: float = Field(default=0.65, alias="RRM_PATTERN_RATIO")

    # Local fits and rank decisions
    fit_tol: float = Field(default=1e-9, alias="RRM_FIT_TOL")
    rank_tol: float = Field(default=1e-9, alias="RRM_RANK_TOL")

    # Gauss-Legendre points per direction
    interp_quad_order: int = Field(default=6, alias="RRM_INTERP_QUAD_ORDER")
    load_quad_order: int = Field(default=6, alias="RRM_LOAD_QUAD_ORDER")
    stiffness_quad_order: int = Field(default=2, alias="RRM_STIFFNESS_QUAD_ORDER")
    error_quad_order: int = Field(default=10, alias="RRM_ERROR_QUAD_ORDER")

    # Linear solver
    solver_rtol: float = Field(default=1e-12, alias="RRM_SOLVER_RTOL")
    solver_maxiter: int = Field(default=20000, alias="RRM_SOLVER_MAXITER")
    refinement_steps: int = Field(default=3, alias="RRM_REFINEMENT_STEPS")
    dense_check_limit: int = Field(default=4000, alias="RRM_DENSE_CHECK_LIMIT")

    # Execution
    max_workers: int = Field(default=1, alias="RRM_MAX_WORKERS")
    cache_enabled: bool = Field(default=True, alias="RRM_CACHE_ENABLED")
    cache_max_entries: int = Field(default=32, alias="RRM_CACHE_MAX_ENTRIES")

    # Logging
    log_level: str = Field(default="INFO", alias="LOG_LEVEL")

    model_config = SettingsConfigDict(
        env_file=".env",
        case_sensitive=False,
        env_file_encoding='utf-8',
        populate_by_name=True
    )


# Global settings instance
settings = Settings()

# Default sweeps per example id
DEFAULT_EPS = {
    1: [2.0 ** -k for k in (0, 2, 4, 6, 8, 10)],
    2: [2.0 ** -k for k in (0, 2, 4, 6, 8, 10)],
    3: [2.0 ** -k for k in (8, 10, 12)],
}

DEFAULT_LEVELS = {
    "uniform": [2, 3, 4, 5, 6],
    "pattern": [1, 2, 3, 4, 5],
}

# (example id, mesh kind) -> published table number
TABLE_FOR_RUN = {
    (1, "pattern"): 1,
    (1, "uniform"): 2,
    (2, "pattern"): 3,
    (2, "uniform"): 4,
    (3, "pattern"): 5,
    (3, "uniform"): 6,
}

_PATTERN_H = [3.250e-1, 1.625e-1, 8.125e-2, 4.063e-2, 2.031e-2]
_UNIFORM_H = [2.0 ** -k for k in (2, 3, 4, 5, 6)]

# Relative energy errors; rows keyed by the exponent k of eps = 2^-k
PUBLISHED_TABLES = {
    1: {
        "example": 1, "mesh": "pattern", "h": _PATTERN_H,
        "rows": {
            0: ([0.6196, 0.3127, 0.1556, 0.0776, 0.0388], 1.00),
            2: ([0.5691, 0.2798, 0.1380, 0.0686, 0.0343], 1.01),
            4: ([0.3691, 0.1597, 0.0699, 0.0330, 0.0162], 1.13),
            6: ([0.2825, 0.1318, 0.0553, 0.0192, 0.0064], 1.37),
            8: ([0.2746, 0.1337, 0.0664, 0.0311, 0.0127], 1.10),
            10: ([0.2741, 0.1339, 0.0676, 0.0338, 0.0166], 1.01),
        },
    },
    2: {
        "example": 1, "mesh": "uniform", "h": _UNIFORM_H,
        "rows": {
            0: ([0.5403, 0.2754, 0.1376, 0.0688, 0.0344], 0.99),
            2: ([0.4890, 0.2448, 0.1218, 0.0608, 0.0304], 1.00),
            4: ([0.2926, 0.1238, 0.0585, 0.0288, 0.0144], 1.08),
            6: ([0.2080, 0.0585, 0.0199, 0.0084, 0.0040], 1.42),
            8: ([0.2002, 0.0502, 0.0130, 0.0037, 0.0013], 1.84),
            10: ([0.1996, 0.0496, 0.0124, 0.0031, 0.0008], 1.99),
        },
    },
    3: {
        "example": 2, "mesh": "pattern", "h": _PATTERN_H,
        "rows": {
            0: ([0.6236, 0.3142, 0.1558, 0.0776, 0.0388], 1.00),
            2: ([0.5722, 0.2812, 0.1382, 0.0687, 0.0343], 1.02),
            4: ([0.3711, 0.1610, 0.0700, 0.0330, 0.0162], 1.13),
            6: ([0.2863, 0.1349, 0.0556, 0.0192, 0.0064], 1.38),
            8: ([0.2787, 0.1373, 0.0668, 0.0312, 0.0127], 1.11),
            10: ([0.2782, 0.1375, 0.0681, 0.0338, 0.0166], 1.02),
        },
    },
    4: {
        "example": 2, "mesh": "uniform", "h": _UNIFORM_H,
        "rows": {
            0: ([0.5463, 0.2763, 0.1377, 0.0688, 0.0344], 1.00),
            2: ([0.4938, 0.2456, 0.1219, 0.0608, 0.0304], 1.01),
            4: ([0.2937, 0.1242, 0.0586, 0.0288, 0.0144], 1.08),
            6: ([0.2077, 0.0585, 0.0200, 0.0084, 0.0040], 1.42),
            8: ([0.1997, 0.0502, 0.0130, 0.0037, 0.0013], 1.84),
            10: ([0.1991, 0.0496, 0.0124, 0.0031, 0.0008], 1.98),
        },
    },
    5: {
        "example": 3, "mesh": "pattern", "h": _PATTERN_H,
        "rows": {
            8: ([0.5846, 0.3945, 0.2755, 0.1995, 0.1555], 0.48),
            10: ([0.5843, 0.3934, 0.2725, 0.1912, 0.1358], 0.53),
            12: ([0.5843, 0.3933, 0.2723, 0.1907, 0.1343], 0.53),
        },
    },
    6: {
        "example": 3, "mesh": "uniform", "h": _UNIFORM_H,
        "rows": {
            8: ([0.5731, 0.3896, 0.2743, 0.1992, 0.1549], 0.47),
            10: ([0.5728, 0.3886, 0.2714, 0.1913, 0.1362], 0.52),
            12: ([0.5728, 0.3885, 0.2712, 0.1908, 0.1347], 0.52),
        },
    },
}

# Acceptance tolerances for --check-tables
TABLE_TOLERANCES = {
    "uniform": {"abs": 5e-4, "rel": 0.02, "rate": 0.05},
    "pattern": {"rate": 0.1, "report_rel": 0.25},
}
