"""Model role configuration shared by all backends."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ConfigError

ROLES = ("generator", "student", "skill_classifier", "validity_oracle")

# Decode defaults: the generator samples hot for variety, the student keeps
# some temperature so rollouts differ, classifier and oracle run greedy.
DEFAULT_TEMPERATURES = {
    "generator": 1.0,
    "student": 0.7,
    "skill_classifier": 0.0,
    "validity_oracle": 0.0,
}


@dataclass(frozen=True)
class DecodeParams:
    temperature: float = 0.0
    max_tokens: int = 1024
    stop: tuple = ()

    def __post_init__(self):
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ConfigError("max_tokens must be >= 1")


@dataclass(frozen=True)
class RoleConfig:
    """One model role: its name, backend binding, and decode parameters."""

    role: str
    model: str = ""  # remote model identifier; unused by the simulator
    decode: DecodeParams = field(default_factory=DecodeParams)

    def __post_init__(self):
        if self.role not in ROLES:
            raise ConfigError(f"unknown role {self.role!r}, expected one of {ROLES}")


def default_roles(models: dict | None = None) -> dict:
    """RoleConfig map with per-role decode defaults."""
    models = models or {}
    return {
        role: RoleConfig(
            role=role,
            model=models.get(role, ""),
            decode=DecodeParams(temperature=DEFAULT_TEMPERATURES[role]),
        )
        for role in ROLES
    }
