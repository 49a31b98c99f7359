import os

DEFAULT_SEED = 42
DEFAULT_TIMEOUT_SECONDS = 900.0
DEFAULT_MAX_TERMS = 2_000_000


def default_seed() -> int:
    """Seed used when --seed is not given; ADVMC_SEED overrides"""
    value = os.getenv("ADVMC_SEED")
    return int(value) if value else DEFAULT_SEED


def default_timeout() -> float:
    value = os.getenv("ADVMC_TIMEOUT")
    return float(value) if value else DEFAULT_TIMEOUT_SECONDS


def default_max_terms() -> int:
    value = os.getenv("ADVMC_MAX_TERMS")
    return int(value) if value else DEFAULT_MAX_TERMS
