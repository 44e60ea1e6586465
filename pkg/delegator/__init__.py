from delegator.attestation import AttestationIdentity, MockAttestationAuthority, MockQuoteVerifier, Role
from delegator.client import DelegatorClient
from delegator.custodian import CustodianCredential, CustodianDirectory
from delegator.key_table import InMemoryKeyTable, KeyOrigin, KeyRecord, create_key_table
from delegator.server import KeyDelegatorServer

__all__ = [
    "Role",
    "MockAttestationAuthority",
    "AttestationIdentity",
    "MockQuoteVerifier",
    "DelegatorClient",
    "CustodianCredential",
    "CustodianDirectory",
    "KeyOrigin",
    "KeyRecord",
    "InMemoryKeyTable",
    "create_key_table",
    "KeyDelegatorServer",
]
