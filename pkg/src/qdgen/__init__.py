"""qdgen: quality-diversity driven synthetic problem generation and filtering."""

from .answers import FinalAnswer, answers_equal, extract_final_answer, is_correct
from .archive import Archive, ArchiveRecord
from .engine import EngineConfig, GenerationEngine, RunStore, run_generation, select_parents
from .errors import (
    ConfigError,
    DataError,
    GatewayError,
    MutationParseError,
    PermanentBackendError,
    QdgenError,
    TransportError,
    UnusableVerificationError,
)
from .filters import FilterSpec, TrainingPair, build_training_pairs, build_unique_pool, downsample_easy, filter_subset
from .gateway import ModelGateway, RemoteBackend, SimulatedBackend, VerificationSet
from .samples import Sample, sample_from_texts
from .scoring import QualityConfig, quality, solve_rate
from .skills import SkillVocabulary, UNCLASSIFIED, build_vocabulary, canonical_skill_set, coverage, max_unique_skill_subset
from .working_set import WorkingSet, update_working_set

__version__ = "0.1.0"
