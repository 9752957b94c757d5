"""Model gateway: role routing, prompt templates, and backends."""

from .prompts import PromptTemplates
from .remote import RemoteBackend, TokenBucket
from .roles import ROLES, DecodeParams, RoleConfig, default_roles
from .service import ModelGateway, Rollout, VerificationSet
from .sim import SIM_SKILLS, SimProblemPayload, SimulatedBackend, extract_payload, make_seed_records

__all__ = [
    "ROLES",
    "DecodeParams",
    "ModelGateway",
    "PromptTemplates",
    "RemoteBackend",
    "RoleConfig",
    "Rollout",
    "SIM_SKILLS",
    "SimProblemPayload",
    "SimulatedBackend",
    "TokenBucket",
    "VerificationSet",
    "default_roles",
    "extract_payload",
    "make_seed_records",
]
