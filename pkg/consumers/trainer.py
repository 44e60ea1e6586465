# consumers/trainer.py
"""Joint training program: one dataset over every hospital PAD, one model PAD out"""
from typing import Any, Dict, Mapping, Sequence

import numpy as np

from consumers.models import FeatureMeansModel, parse_samples
from middleware.errors import OutputDenied
from pad.payload import DATA_COUNT_ATTRIBUTE, DataAttribute
from policy.engines.base import OutputProposal


async def run(host, inputs: Sequence[bytes], params: Mapping[str, Any]) -> Dict[str, Any]:
    handle = host.dataset_new()
    for pad_bytes in inputs:
        await host.dataset_add(handle, pad_bytes)
    if not host.dataset_check(handle):
        return {"check": False, "output": None}

    samples = np.vstack([parse_samples(host.dataset_access(handle, i).raw_data) for i in range(len(inputs))])
    model = FeatureMeansModel.fit(samples)

    proposal = OutputProposal(
        raw_data=model.to_bytes(),
        policies=params["output_policies"],
        custodian_id=params["output_custodian"],
        delegator_uri=params["output_delegator"],
        attributes=(DataAttribute.uint64(DATA_COUNT_ATTRIBUTE, model.entries),),
    )
    try:
        pad_bytes = await host.propose_output(handle, proposal)
    except OutputDenied as e:
        return {"check": True, "output": None, "denied": str(e)}
    return {"check": True, "output": pad_bytes, "entries": model.entries}
