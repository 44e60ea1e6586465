# consumers/query.py
from typing import Any, Dict, Mapping, Sequence

from consumers.models import FeatureMeansModel


async def run(host, inputs: Sequence[bytes], params: Mapping[str, Any]) -> Dict[str, Any]:
    """Score params["features"] against the model PAD in inputs[0]"""
    handle = host.dataset_new()
    await host.dataset_add(handle, inputs[0])
    if not host.dataset_check(handle):
        return {"check": False, "prediction": None}
    model = FeatureMeansModel.from_bytes(host.dataset_access(handle, 0).raw_data)
    return {"check": True, "prediction": model.predict(params["features"])}
