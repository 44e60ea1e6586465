# middleware/phases.py
"""Names under which middleware phases are recorded, in the row order of the overhead breakdown"""
from config.config import REFERENCE_LATENCY_MS

NEW_DATASET = "new_dataset"
LOAD_ATTESTATION = "load.attestation"
LOAD_FETCH_KEY = "load.fetch_key"
LOAD_DECRYPT = "load.decrypt"
LOAD_POLICY_MATCHING = "load.policy_matching"
LOAD_TOTAL = "load.total"
POLICY_EVAL_INIT = "policy_eval.init"
POLICY_EVAL_COPY = "policy_eval.copy"
POLICY_EVAL_EVAL = "policy_eval.eval"
POLICY_EVAL_POST = "policy_eval.post"
POLICY_EVAL_TOTAL = "policy_eval.total"
ACCESS_DATA = "access_data"
OUTPUT_INIT = "output.init"
OUTPUT_COPY = "output.copy"
OUTPUT_EVAL = "output.eval"
OUTPUT_POST = "output.post"
OUTPUT_GENERATE_PAD = "output.generate_pad"
OUTPUT_TOTAL = "output.total"

BREAKDOWN_ROWS = [
    NEW_DATASET,
    LOAD_ATTESTATION,
    LOAD_FETCH_KEY,
    LOAD_DECRYPT,
    LOAD_POLICY_MATCHING,
    LOAD_TOTAL,
    POLICY_EVAL_INIT,
    POLICY_EVAL_COPY,
    POLICY_EVAL_EVAL,
    POLICY_EVAL_POST,
    POLICY_EVAL_TOTAL,
    ACCESS_DATA,
    OUTPUT_INIT,
    OUTPUT_COPY,
    OUTPUT_EVAL,
    OUTPUT_POST,
    OUTPUT_GENERATE_PAD,
    OUTPUT_TOTAL,
]

# rows whose reference value differs between a cold and a warm key load
LOAD_ROWS = [LOAD_ATTESTATION, LOAD_FETCH_KEY, LOAD_DECRYPT, LOAD_POLICY_MATCHING, LOAD_TOTAL]


def reference_ms(row: str, column: str = "cold"):
    """Reference latency of a breakdown row from REFERENCE_LATENCY_MS, None when not reported"""
    group, _, leaf = row.partition(".")
    value = REFERENCE_LATENCY_MS.get(group)
    if leaf:
        value = value.get(leaf) if isinstance(value, dict) else None
    if isinstance(value, dict):
        value = value.get(column)
    return value
