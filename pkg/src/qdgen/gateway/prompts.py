"""Prompt template loading and placeholder substitution.

Templates are plain-text files with {problem}, {solution}, and {k}
placeholders. Substitution is literal string replacement (not str.format)
because the templates themselves contain latex braces like \\boxed{...}.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

_TEMPLATE_DIR = resources.files("qdgen.gateway") / "templates"


def _load_default(name: str) -> str:
    return (_TEMPLATE_DIR / name).read_text(encoding="utf-8")


@dataclass(frozen=True)
class PromptTemplates:
    mutation: str
    skills: str
    verify: str

    @classmethod
    def load(
        cls,
        mutation_path: Optional[str] = None,
        skills_path: Optional[str] = None,
        verify_path: Optional[str] = None,
    ) -> "PromptTemplates":
        """Package defaults, with any template overridable by file path."""

        def pick(path: Optional[str], default_name: str) -> str:
            if path is None:
                return _load_default(default_name)
            return Path(path).read_text(encoding="utf-8")

        return cls(
            mutation=pick(mutation_path, "mutation_prompt.txt"),
            skills=pick(skills_path, "skill_prompt.txt"),
            verify=pick(verify_path, "verify_prompt.txt"),
        )

    def render_mutation(self, problem: str, solution: str) -> str:
        return self.mutation.replace("{problem}", problem).replace(
            "{solution}", solution
        )

    def render_skills(self, problem: str, solution: str, max_labels: int) -> str:
        return (
            self.skills.replace("{k}", str(max_labels))
            .replace("{problem}", problem)
            .replace("{solution}", solution)
        )

    def render_verify(self, problem: str) -> str:
        return self.verify.replace("{problem}", problem)
