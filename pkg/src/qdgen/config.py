"""Run configuration: a sectioned TOML file plus seed-dataset loading.

Secrets never live in the file; the remote backend reads its bearer token
from the environment variable named by `gateway.remote.api_key_env`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .answers import NORMALIZATION_PROFILES
from .engine import EngineConfig
from .errors import ConfigError, DataError
from .gateway import ModelGateway, PromptTemplates, RemoteBackend, SimulatedBackend
from .gateway.roles import DEFAULT_TEMPERATURES, ROLES, DecodeParams, RoleConfig
from .persist import iter_jsonl
from .samples import sample_from_texts
from .scoring import QualityConfig, as_exact


@dataclass
class GatewaySettings:
    backend: str = "sim"
    fan_out: int = 1
    sim: dict = field(default_factory=dict)
    remote: dict = field(default_factory=dict)
    models: dict = field(default_factory=dict)
    decode: dict = field(default_factory=dict)
    templates: dict = field(default_factory=dict)


@dataclass
class RunConfig:
    engine: EngineConfig
    gateway: GatewaySettings
    seed_dataset: Optional[Path] = None
    out_dir: Optional[Path] = None
    normalization_profile: str = "default"


_KNOWN_KEYS = {
    "": ("run", "quality", "skills", "answers", "gateway"),
    "run": (
        "root_seed", "rounds", "batch_size", "policy", "working_set_cap",
        "niche_cap", "niche_selection", "max_div_niches", "checkpoint_every",
        "seed_dataset", "out_dir",
    ),
    "quality": ("k_rollouts", "lower", "upper"),
    "skills": ("max_labels", "vocabulary_size", "mode"),
    "answers": ("normalization_profile",),
    "gateway": ("backend", "fan_out", "verify_requeue", "sim", "remote", "decode", "templates"),
    "gateway.sim": ("generator_malform_rate", "skill_swap_rate", "difficulty_step"),
    "gateway.remote": (
        "base_url", "api_key_env", "requests_per_second", "max_retries",
        "backoff_base", "timeout", "models",
    ),
    "gateway.templates": ("mutation", "skills", "verify"),
}


def _get_section(data: dict, name: str, problems: list) -> dict:
    section = data.get(name, {})
    if not isinstance(section, dict):
        problems.append(f"[{name}] must be a table")
        return {}
    return section


def _check_keys(section: dict, name: str, problems: list) -> None:
    known = _KNOWN_KEYS.get(name)
    if known is None:
        return
    for key in section:
        if key not in known:
            label = f"[{name}].{key}" if name else f"[{key}]"
            problems.append(f"{label} is not a recognized setting")


def load_config(path) -> RunConfig:
    """Parse and validate a TOML run config; raises ConfigError with
    field-level diagnostics on any problem."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from exc

    problems: list = []
    _check_keys(data, "", problems)
    run = _get_section(data, "run", problems)
    quality_section = _get_section(data, "quality", problems)
    skills_section = _get_section(data, "skills", problems)
    answers_section = _get_section(data, "answers", problems)
    gateway_section = _get_section(data, "gateway", problems)
    for section, name in (
        (run, "run"),
        (quality_section, "quality"),
        (skills_section, "skills"),
        (answers_section, "answers"),
        (gateway_section, "gateway"),
    ):
        _check_keys(section, name, problems)

    try:
        quality = QualityConfig.create(
            lower=_threshold(quality_section.get("lower", 0.1)),
            upper=_threshold(quality_section.get("upper", 0.9)),
            k_rollouts=quality_section.get("k_rollouts", 16),
        )
    except (ConfigError, ValueError, TypeError) as exc:
        problems.append(f"[quality]: {exc}")
        quality = QualityConfig.create()

    engine = None
    try:
        engine = EngineConfig(
            quality=quality,
            batch_size=run.get("batch_size", 64),
            rounds=run.get("rounds", 5000),
            policy=run.get("policy", "static_uniform"),
            skills_per_sample=skills_section.get("max_labels", 3),
            vocabulary_size=skills_section.get("vocabulary_size", 100),
            vocabulary_mode=skills_section.get("mode", "bounded"),
            working_set_cap=run.get("working_set_cap", 256),
            niche_cap=run.get("niche_cap"),
            niche_selection=run.get("niche_selection", "uniform"),
            max_div_niches=run.get("max_div_niches"),
            root_seed=run.get("root_seed", 0),
            fan_out=gateway_section.get("fan_out", 1),
            checkpoint_every=run.get("checkpoint_every", 50),
            verify_requeue=gateway_section.get("verify_requeue", 2),
        )
    except ConfigError as exc:
        problems.extend(f"[run]: {p}" for p in exc.problems)
    except (ValueError, TypeError) as exc:
        problems.append(f"[run]: {exc}")

    profile = answers_section.get("normalization_profile", "default")
    if profile not in NORMALIZATION_PROFILES:
        problems.append(
            f"[answers].normalization_profile must be one of {NORMALIZATION_PROFILES}"
        )

    backend = gateway_section.get("backend", "sim")
    if backend not in ("sim", "remote"):
        problems.append("[gateway].backend must be 'sim' or 'remote'")
    sim_section = _get_section(gateway_section, "sim", problems) if "sim" in gateway_section else {}
    remote_section = _get_section(gateway_section, "remote", problems) if "remote" in gateway_section else {}
    templates_section = (
        _get_section(gateway_section, "templates", problems) if "templates" in gateway_section else {}
    )
    _check_keys(sim_section, "gateway.sim", problems)
    _check_keys(remote_section, "gateway.remote", problems)
    _check_keys(templates_section, "gateway.templates", problems)
    if backend == "remote" and not remote_section.get("base_url"):
        problems.append("[gateway.remote].base_url is required for the remote backend")
    models = remote_section.get("models", {}) if isinstance(remote_section.get("models", {}), dict) else {}
    if backend == "remote":
        for role in ROLES:
            if not models.get(role):
                problems.append(f"[gateway.remote.models].{role} is required for the remote backend")

    decode_section = _get_section(gateway_section, "decode", problems) if "decode" in gateway_section else {}
    for role in decode_section:
        if role not in ROLES:
            problems.append(f"[gateway.decode].{role} is not a known role")

    seed_dataset = run.get("seed_dataset")
    out_dir = run.get("out_dir")

    if problems:
        raise ConfigError(problems)

    settings = GatewaySettings(
        backend=backend,
        fan_out=gateway_section.get("fan_out", 1),
        sim=sim_section,
        remote={k: v for k, v in remote_section.items() if k != "models"},
        models=models,
        decode=decode_section,
        templates=templates_section,
    )
    return RunConfig(
        engine=engine,
        gateway=settings,
        seed_dataset=Path(seed_dataset) if seed_dataset else None,
        out_dir=Path(out_dir) if out_dir else None,
        normalization_profile=profile,
    )


def _threshold(value):
    # Floats arrive via their shortest decimal form so 0.1 means 1/10.
    return as_exact(value)


def build_roles(settings: GatewaySettings) -> dict:
    roles = {}
    for role in ROLES:
        decode = settings.decode.get(role, {})
        roles[role] = RoleConfig(
            role=role,
            model=settings.models.get(role, ""),
            decode=DecodeParams(
                temperature=decode.get("temperature", DEFAULT_TEMPERATURES[role]),
                max_tokens=decode.get("max_tokens", 1024),
                stop=tuple(decode.get("stop", ())),
            ),
        )
    return roles


def build_gateway(cfg: RunConfig) -> ModelGateway:
    settings = cfg.gateway
    if settings.backend == "sim":
        backend = SimulatedBackend(
            generator_malform_rate=settings.sim.get("generator_malform_rate", 0.02),
            skill_swap_rate=settings.sim.get("skill_swap_rate", 0.3),
            difficulty_step=settings.sim.get("difficulty_step", 0.2),
        )
    else:
        backend = RemoteBackend(
            base_url=settings.remote.get("base_url", ""),
            api_key_env=settings.remote.get("api_key_env", "QDGEN_API_KEY"),
            requests_per_second=settings.remote.get("requests_per_second"),
            max_retries=settings.remote.get("max_retries", 3),
            backoff_base=settings.remote.get("backoff_base", 0.5),
            timeout=settings.remote.get("timeout", 60.0),
        )
    templates = PromptTemplates.load(
        mutation_path=settings.templates.get("mutation"),
        skills_path=settings.templates.get("skills"),
        verify_path=settings.templates.get("verify"),
    )
    return ModelGateway(
        backend,
        roles=build_roles(settings),
        templates=templates,
        fan_out=settings.fan_out,
    )


def load_seed_samples(path) -> list:
    """Load a JSONL seed dataset of {problem, solution} records.

    Fails listing every item whose solution has no extractable final
    answer, since those can never be verified.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"seed dataset not found: {path}")
    samples: list = []
    bad_lines: list = []
    for line_no, obj in enumerate(iter_jsonl(path), start=1):
        problem = obj.get("problem")
        solution = obj.get("solution")
        if not isinstance(problem, str) or not isinstance(solution, str):
            bad_lines.append(f"line {line_no}: needs string 'problem' and 'solution' fields")
            continue
        try:
            samples.append(sample_from_texts(problem, solution, origin="seed"))
        except DataError:
            bad_lines.append(f"line {line_no}: no extractable \\boxed{{...}} final answer")
    if bad_lines:
        raise DataError("seed dataset rejected: " + "; ".join(bad_lines))
    if not samples:
        raise DataError(f"seed dataset {path} is empty")
    return samples
