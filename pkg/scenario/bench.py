# scenario/bench.py
"""
Overhead benchmark of one middleware run: nine PADs from three custodians
loaded cold (key fetched) and warm (key cached), checked, read and turned
into one derived PAD, repeated for several payload sizes.
"""
import logging
import os
from typing import List, Sequence

import pandas as pd

from config.config import BENCH_CONFIG
from consumers import program_artifact
from pad.payload import DATA_COUNT_ATTRIBUTE, DataAttribute
from policy.engines.base import OutputProposal
from policy.model import ProgramKind, ProgramManifest
from producer.producer import ProducerConfig
from scenario.deployment import LoopbackDeployment
from scenario.hospital import entity_id
from scenario.policies import training_data_policy
from scenario.timing import breakdown_table
from utils.logging_config import PhaseRecorder, log_performance_metric

logger = logging.getLogger(__name__)


async def _bench_size(payload_bytes: int, iterations: int, custodians: int, pads_per_custodian: int,
                      quote_latency_ms: float) -> pd.DataFrame:
    cold, warm = PhaseRecorder(), PhaseRecorder()
    attestations: List[int] = []
    artifact = program_artifact(ProgramKind.TRAINING)
    joint = entity_id("joint")

    async with LoopbackDeployment(1, quote_latency_ms) as deployment:
        producer = deployment.producer()
        program = ProgramManifest.from_artifact(artifact, entity_id("custodian-0"), ProgramKind.TRAINING)
        policy = training_data_policy(100, program.program_hash, joint)
        pads = []
        for c in range(custodians):
            config = ProducerConfig(deployment.custodian(f"custodian-{c}", entity_id(f"custodian-{c}")),
                                    deployment.uri_for(0), (policy,))
            for _ in range(pads_per_custodian):
                pad_bytes, _ = await producer.produce(
                    os.urandom(payload_bytes), (DataAttribute.uint64(DATA_COUNT_ATTRIBUTE, 1),), config)
                pads.append(pad_bytes)

        for _ in range(iterations):
            middleware = deployment.middleware(recorder=cold)
            handle = middleware.dataset_new()
            for pad_bytes in pads:
                await middleware.dataset_add(handle, pad_bytes)
            middleware.dataset_check(handle, program)
            for index in range(len(pads)):
                middleware.dataset_access(handle, index)
            await middleware.propose_output(handle, OutputProposal(
                raw_data=b"derived", policies=(policy,), custodian_id=joint,
                delegator_uri=deployment.uri_for(0)))

            middleware.recorder = middleware.secret_store.recorder = warm
            handle = middleware.dataset_new()
            for pad_bytes in pads:
                await middleware.dataset_add(handle, pad_bytes)

            attestations.append(middleware.secret_store.stats.attestations)
            await middleware.close()

    table = breakdown_table(cold, warm)
    table.insert(0, "payload_bytes", payload_bytes)
    table["attestations_per_run"] = sum(attestations) / len(attestations)
    log_performance_metric("bench.load_total.cold", cold.mean("load.total") or 0.0,
                           context={"payload_bytes": payload_bytes})
    return table


async def run_bench(iterations: int = BENCH_CONFIG["iterations"],
                    sizes: Sequence[int] = tuple(BENCH_CONFIG["payload_sizes"]),
                    custodians: int = BENCH_CONFIG["custodians"],
                    pads_per_custodian: int = BENCH_CONFIG["pads_per_custodian"],
                    quote_latency_ms: float = 0.0) -> pd.DataFrame:
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    tables = []
    for size in sizes:
        logger.info(f"Benchmarking {iterations} runs with {size}-byte payloads")
        tables.append(await _bench_size(size, iterations, custodians, pads_per_custodian, quote_latency_ms))
    return pd.concat(tables, ignore_index=True)
