# config/config.py
import hashlib
import os
from dotenv import load_dotenv

load_dotenv()

# Runtime environment
ENVIRONMENT = os.getenv("ENVIRONMENT", "development").lower()
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO").upper()
LOG_DIR = os.getenv("LOG_DIR")  # file logging only when set

# PAD container
PAD_FORMAT_VERSION = int(os.getenv("PAD_FORMAT_VERSION", "1"))
DEFAULT_CRYPTO_SUITE = int(os.getenv("DEFAULT_CRYPTO_SUITE", "0x0001"), 0)

# Key delegator service
DELEGATOR_HOST = os.getenv("DELEGATOR_HOST", "127.0.0.1")
DELEGATOR_PORT = int(os.getenv("DELEGATOR_PORT", "7443"))
DELEGATOR_IDLE_TIMEOUT_SECONDS = float(os.getenv("DELEGATOR_IDLE_TIMEOUT_SECONDS", "600"))
HANDSHAKE_TIMEOUT_SECONDS = float(os.getenv("HANDSHAKE_TIMEOUT_SECONDS", "10"))
QUOTE_MAX_AGE_SECONDS = float(os.getenv("QUOTE_MAX_AGE_SECONDS", "300"))
MAX_FRAME_SIZE = int(os.getenv("MAX_FRAME_SIZE", str(4 * 1024 * 1024)))
MOCK_QUOTE_LATENCY_MS = float(os.getenv("MOCK_QUOTE_LATENCY_MS", "0"))
ACCEPT_MIDDLEWARE_PROVISIONING = os.getenv("ACCEPT_MIDDLEWARE_PROVISIONING", "true").lower() == "true"

# Key table backend: "memory" or "redis"
KEY_TABLE_BACKEND = os.getenv("KEY_TABLE_BACKEND", "memory").lower()
REDIS_URL = os.getenv("REDIS_URL", "redis://localhost:6379")
REDIS_KEY_PREFIX = os.getenv("REDIS_KEY_PREFIX", "pad_key:")
REDIS_MAX_CONNECTIONS = int(os.getenv("REDIS_MAX_CONNECTIONS", "20"))
REDIS_CONNECT_TIMEOUT_SECONDS = float(os.getenv("REDIS_CONNECT_TIMEOUT_SECONDS", "5"))

# Build identities of the measured roles. The measurement of a role is the
# SHA-256 digest of its build identity string.
MIDDLEWARE_BUILD_ID = os.getenv("MIDDLEWARE_BUILD_ID", "pad-consumer-middleware/0.1.0")
DELEGATOR_BUILD_ID = os.getenv("DELEGATOR_BUILD_ID", "pad-key-delegator/0.1.0")
PRODUCER_BUILD_ID = os.getenv("PRODUCER_BUILD_ID", "pad-producer/0.1.0")


def measurement_of(build_id: str) -> bytes:
    """Measurement digest for a build identity string"""
    return hashlib.sha256(build_id.encode("utf-8")).digest()


# Reference overheads (ms) of one middleware run on SGX-class hardware, per
# breakdown row. "cold" = key fetched from a delegator, "warm" = key cached.
REFERENCE_LATENCY_MS = {
    "new_dataset": 0.007,
    "load": {
        "attestation": {"cold": 135.089, "warm": None},
        "fetch_key": {"cold": 0.177, "warm": 0.007},
        "decrypt": {"cold": 0.088, "warm": 0.098},
        "policy_matching": {"cold": 0.007, "warm": 0.008},
        "total": {"cold": 135.362, "warm": 0.113},
    },
    "policy_eval": {"init": 1.544, "copy": 0.138, "eval": 0.366, "post": 0.025, "total": 2.073},
    "access_data": 0.258,
    "output": {"init": 0.119, "copy": 0.074, "eval": 0.330, "post": 0.009, "generate_pad": 1.405,
               "total": 1.937},
}

# Scalability simulation defaults
SIM_CONFIG = {
    "attest_mean_ms": REFERENCE_LATENCY_MS["load"]["attestation"]["cold"],
    "attest_std_ms": float(os.getenv("SIM_ATTEST_STD_MS", "13.5")),
    "fetch_mean_ms": REFERENCE_LATENCY_MS["load"]["fetch_key"]["cold"],
    "fetch_std_ms": float(os.getenv("SIM_FETCH_STD_MS", "0.018")),
    "delegators": [4, 16, 64],
    "consumers": [8, 64, 512],
    "pads_per_consumer": [2 ** i for i in range(11)],  # 1..1024
    "seed": int(os.getenv("SIM_SEED", "20231")),
}

# Benchmark defaults
BENCH_CONFIG = {
    "iterations": int(os.getenv("BENCH_ITERATIONS", "20")),
    "payload_sizes": [1024, 1024 * 1024],
    "custodians": 3,
    "pads_per_custodian": 3,
}

APP_CONFIG = {
    "title": "Policy-Attached Data Middleware",
    "description": "Sticky-policy enforcement for policy-attached data with attested key delegation",
    "version": "0.1.0",
    "roles": ["producer", "consumer_middleware", "key_delegator", "custodian"],
}


class ConfigError(Exception):
    """A configuration file or value is invalid"""
    code = "CONFIG_ERROR"
