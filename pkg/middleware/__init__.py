from middleware.consumer_middleware import ConsumerMiddleware
from middleware.consumer_runner import ConsumerExit, ConsumerProgram, run_consumer
from middleware.dataset import DenialReason, EntryView, Verdict
from middleware.host_api import HostApi
from middleware.secret_store import SecretStore

__all__ = [
    "SecretStore",
    "ConsumerMiddleware",
    "HostApi",
    "ConsumerProgram",
    "ConsumerExit",
    "run_consumer",
    "Verdict",
    "DenialReason",
    "EntryView",
]
