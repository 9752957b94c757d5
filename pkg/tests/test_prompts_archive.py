from fractions import Fraction

import pytest

from qdgen.archive import Archive, record_from_json_obj
from qdgen.errors import ConfigError, DataError
from qdgen.gateway import ModelGateway, PromptTemplates, SimulatedBackend
from qdgen.scoring import QualityConfig

from conftest import make_record


class TestPromptTemplates:
    def setup_method(self):
        self.templates = PromptTemplates.load()

    def test_mutation_placeholders_substituted(self):
        rendered = self.templates.render_mutation("THE PROBLEM", "THE SOLUTION")
        assert "THE PROBLEM" in rendered
        assert "THE SOLUTION" in rendered
        assert "{problem}" not in rendered
        assert "{solution}" not in rendered

    def test_latex_braces_survive_rendering(self):
        rendered = self.templates.render_mutation("p", "s")
        assert "\\boxed{...}" in rendered
        assert "\\boxed{(n1, n2,...)}" in rendered
        assert "<problem>...</problem>" in rendered

    def test_skills_template_takes_count(self):
        rendered = self.templates.render_skills("p", "s", 3)
        assert "up to 3 relevant skills" in rendered
        assert "<skills>arithmetic,pigeonhole-principle</skills>" in rendered

    def test_verify_template_wraps_problem(self):
        rendered = self.templates.render_verify("THE PROBLEM")
        assert rendered.endswith("THE PROBLEM")
        assert "\\boxed{...}" in rendered

    def test_file_override(self, tmp_path):
        custom = tmp_path / "verify.txt"
        custom.write_text("Answer this: {problem}")
        templates = PromptTemplates.load(verify_path=str(custom))
        assert templates.render_verify("X") == "Answer this: X"
        # untouched templates still come from the package defaults
        assert templates.mutation == self.templates.mutation


class TestArchiveContainer:
    def test_duplicate_id_rejected(self):
        archive = Archive()
        archive.append(make_record(1, "1/2"))
        with pytest.raises(DataError):
            archive.append(make_record(1, "1/4"))

    def test_insertion_indices_sequential(self):
        archive = Archive()
        for i in range(5):
            archive.append(make_record(i, "1/2"))
        assert [r.insertion_index for r in archive] == list(range(5))

    def test_strict_load_rejects_corrupt_lines(self, tmp_path):
        log = tmp_path / "archive.jsonl"
        log.write_text(make_record(1, "1/2").to_json_line() + "\nnot json\n")
        with pytest.raises(DataError):
            Archive.load(log, QualityConfig.create())

    def test_round_trip_preserves_unreduced_solve_rate(self):
        record = make_record(1, Fraction(3, 4), k_rollouts=16)  # 4/16 correct
        obj = record.to_json_obj()
        assert obj["solve_rate"] == "4/16"
        back = record_from_json_obj(obj, QualityConfig.create("0.1", "0.9", 16))
        assert back.solve_rate == Fraction(1, 4)
        assert back.k_rollouts == 16
        assert back.quality == Fraction(3, 4)


def test_gateway_rejects_unknown_role():
    gateway = ModelGateway(SimulatedBackend())
    with pytest.raises(ConfigError):
        gateway.complete("planner", "prompt", 1)
