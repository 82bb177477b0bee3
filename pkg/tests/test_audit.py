import random
from collections import Counter

import pytest
from hypothesis import given
import hypothesis.strategies as st

from entre.audit import (
    DiversityReport,
    ReportMismatchError,
    ShortcutReport,
    compare_reports,
    diversity_stats,
    eligibility_filter,
    flag_annotations,
    load_report,
    shortcut_analysis,
)
from entre.corpus import NO_RELATION, REInstance
from entre.oracle.stubs import (
    annotation_echo_ner,
    context_reader_stub,
    entity_memorizer_stub,
    memorizer_pairs,
)
from entre.synthetic import default_trigger_map, synthetic_corpus

from .conftest import in_process_client, in_process_ner_client
from .strategies import instances


def corrupt_subj_span(inst: REInstance) -> REInstance:
    """Shift the subject span by one token, keeping it legal."""
    start, end = inst.subj_span
    if start > 0 and not REInstance._spans_overlap((start - 1, end - 1), inst.obj_span):
        return inst.replaced(subj_span=(start - 1, end - 1))
    return inst.replaced(subj_span=(start + 1, end + 1))


class TestFlagAnnotations:
    def test_perfect_tagger_flags_nothing(self, small_corpus):
        client = in_process_ner_client(annotation_echo_ner(small_corpus))
        clean, report = flag_annotations(small_corpus, client)
        assert clean == small_corpus
        assert report.n_flagged == 0
        assert report.flagged_ratio == 0.0

    def test_span_shift_flags_span_mismatch(self, small_corpus):
        reference = annotation_echo_ner(small_corpus)
        corrupted = [corrupt_subj_span(small_corpus[0])] + small_corpus[1:]
        clean, report = flag_annotations(corrupted, in_process_ner_client(reference))
        assert report.flagged_ids == [small_corpus[0].id]
        verdicts = {
            (e.role): e.verdict for e in report.entries if e.instance_id == small_corpus[0].id
        }
        assert verdicts["subject"] == "span_mismatch"
        assert verdicts["object"] == "match"
        assert [i.id for i in clean] == [i.id for i in small_corpus[1:]]

    def test_type_change_flags_type_mismatch(self, small_corpus):
        reference = annotation_echo_ner(small_corpus)
        corrupted = [small_corpus[0].replaced(subj_type="LOCATION")] + small_corpus[1:]
        _, report = flag_annotations(corrupted, in_process_ner_client(reference))
        entry = next(
            e for e in report.entries
            if e.instance_id == small_corpus[0].id and e.role == "subject"
        )
        assert entry.verdict == "type_mismatch"

    def test_no_overlap_is_missing(self):
        inst = REInstance(
            "m", ("a", "b", "c", "d", "e", "f"), (0, 1), (2, 3), "PERSON", "PERSON", "r"
        )
        shifted = inst.replaced(subj_span=(4, 5))
        client = in_process_ner_client(annotation_echo_ner([inst]))
        _, report = flag_annotations([shifted], client)
        entry = next(e for e in report.entries if e.role == "subject")
        assert entry.verdict == "missing"

    def test_jaccard_tolerance_accepts_near_match(self):
        inst = REInstance(
            "j", ("Anne", "Marie", "Curie", "visited", "Acme"), (0, 3), (4, 5),
            "PERSON", "ORGANIZATION", "r",
        )
        # Tagger saw only the two leading tokens: Jaccard 2/3.
        tagged = inst.replaced(subj_span=(0, 2))
        client = in_process_ner_client(annotation_echo_ner([tagged]))
        _, strict = flag_annotations([inst], client)
        assert strict.flagged_ids == ["j"]
        _, tolerant = flag_annotations([inst], client, jaccard_threshold=0.5)
        assert tolerant.flagged_ids == []

    def test_constructed_ten_percent(self):
        corpus = synthetic_corpus(100, seed=21)
        reference = annotation_echo_ner(corpus)
        corrupted = [
            corrupt_subj_span(inst) if i < 10 else inst for i, inst in enumerate(corpus)
        ]
        _, report = flag_annotations(corrupted, in_process_ner_client(reference))
        assert report.n_instances == 100
        assert report.n_flagged == 10
        assert report.flagged_ratio == pytest.approx(0.10)


class TestEligibility:
    def test_one_replaceable_role_is_enough(self):
        inst = REInstance(
            "e", ("Ann", "on", "May", "1"), (0, 1), (2, 4), "PERSON", "DATE", "r"
        )
        eligible, ineligible = eligibility_filter([inst])
        assert eligible == [inst] and ineligible == []

    def test_neither_role_replaceable(self):
        inst = REInstance(
            "e", ("May", "1", "in", "Town"), (0, 2), (3, 4), "DATE", "LOCATION", "r"
        )
        eligible, ineligible = eligibility_filter([inst])
        assert eligible == []
        assert ineligible[0][0] is inst
        assert "no replaceable role" in ineligible[0][1]

    def test_synthetic_split(self):
        corpus = synthetic_corpus(20, seed=1, n_ineligible=4)
        eligible, ineligible = eligibility_filter(corpus)
        assert len(eligible) == 16 and len(ineligible) == 4


class TestShortcutAnalysis:
    def test_memorizer_on_own_pairs_is_all_shortcut(self, small_corpus):
        client = in_process_client(entity_memorizer_stub(memorizer_pairs(small_corpus)))
        report = shortcut_analysis(small_corpus, client)
        assert report.overall_ratio == 1.0
        for row in report.per_relation.values():
            assert row.n_shortcut == row.n_instances

    def test_context_reader_shortcut_is_no_relation_fraction(self, small_corpus):
        client = in_process_client(context_reader_stub(default_trigger_map()))
        report = shortcut_analysis(small_corpus, client)
        expected = sum(1 for i in small_corpus if i.relation == NO_RELATION)
        assert report.n_shortcut == expected
        assert report.per_relation[NO_RELATION].ratio == 1.0
        for relation, row in report.per_relation.items():
            if relation != NO_RELATION:
                assert row.n_shortcut == 0

    def test_permutation_invariance(self, small_corpus):
        client = in_process_client(entity_memorizer_stub(memorizer_pairs(small_corpus)))
        report_a = shortcut_analysis(small_corpus, client)
        shuffled = list(small_corpus)
        random.Random(3).shuffle(shuffled)
        report_b = shortcut_analysis(shuffled, client)
        assert report_a.to_json() == report_b.to_json()

    def test_counts_are_integers_and_consistent(self, small_corpus):
        client = in_process_client(context_reader_stub(default_trigger_map()))
        report = shortcut_analysis(small_corpus, client)
        assert report.n_instances == len(small_corpus)
        assert sum(r.n_shortcut for r in report.per_relation.values()) == report.n_shortcut
        assert 0.0 <= report.overall_ratio <= 1.0
        assert report.mask_mode == "preserve_positions"
        assert report.mask_token == "[MASK]"

    def test_entities_only_mode_recorded(self, small_corpus):
        client = in_process_client(context_reader_stub(default_trigger_map()))
        report = shortcut_analysis(small_corpus, client, mask_mode="entities_only")
        assert report.mask_mode == "entities_only"


class TestDiversity:
    def test_all_unique_subjects(self):
        corpus = synthetic_corpus(25, seed=2)
        report = diversity_stats(corpus)
        assert report.n_distinct_subjects == 25

    def test_duplication_does_not_change_distinct_counts(self, small_corpus):
        once = diversity_stats(small_corpus)
        twice = diversity_stats(list(small_corpus) + list(small_corpus))
        assert twice.n_distinct_subjects == once.n_distinct_subjects
        assert twice.n_distinct_persons == once.n_distinct_persons
        assert twice.n_distinct_organizations == once.n_distinct_organizations
        assert twice.n_instances == 2 * once.n_instances

    def test_top_k_ordering_with_ties(self):
        base = REInstance(
            "b0", ("Ann", "saw", "Acme"), (0, 1), (2, 3), "PERSON", "ORGANIZATION", "r"
        )
        corpus = []
        for i, (name, copies) in enumerate([("Zoe", 3), ("Ann", 3), ("Bob", 1)]):
            for j in range(copies):
                corpus.append(
                    base.replaced(id=f"{name}-{j}", tokens=(name, "saw", "Acme"))
                )
        report = diversity_stats(corpus, top_k=2)
        assert report.top_subjects == [(("Ann",), 3), (("Zoe",), 3)]

    def test_distinct_counts_bounded_by_instances(self, small_corpus):
        report = diversity_stats(small_corpus)
        assert report.n_distinct_subjects <= report.n_instances

    @given(st.lists(instances(), min_size=1, max_size=10, unique_by=lambda i: i.id))
    def test_counter_agreement(self, corpus):
        report = diversity_stats(corpus)
        assert report.n_distinct_subjects == len(Counter(i.subject_name for i in corpus))


class TestCompareReports:
    def _shortcut_report(self, ratios: dict[str, tuple[int, int]]) -> ShortcutReport:
        from entre.audit import RelationShortcut

        report = ShortcutReport(mask_mode="preserve_positions", mask_token="[MASK]")
        for rel, (n, k) in ratios.items():
            report.per_relation[rel] = RelationShortcut(rel, n_instances=n, n_shortcut=k)
        return report

    def test_relative_reduction(self):
        before = self._shortcut_report({"r1": (10, 8)})
        after = self._shortcut_report({"r1": (10, 3)})
        delta = compare_reports(before, after)
        row = delta["per_relation"][0]
        assert row["before_ratio"] == pytest.approx(0.8)
        assert row["after_ratio"] == pytest.approx(0.3)
        assert row["relative_reduction"] == pytest.approx(0.625)

    def test_identical_reports_zero_delta(self):
        report = self._shortcut_report({"r1": (4, 2), "r2": (5, 5)})
        delta = compare_reports(report, report)
        assert all(row["absolute_delta"] == 0.0 for row in delta["per_relation"])
        assert delta["overall"]["absolute_delta"] == 0.0

    def test_mismatched_relation_sets(self):
        before = self._shortcut_report({"r1": (4, 2)})
        after = self._shortcut_report({"r2": (4, 2)})
        with pytest.raises(ReportMismatchError):
            compare_reports(before, after)

    def test_diversity_multiplier(self):
        before = DiversityReport(10, 4, 4, 2)
        after = DiversityReport(10, 10, 9, 5)
        delta = compare_reports(before, after)
        assert delta["subjects"]["multiplier"] == pytest.approx(2.5)

    def test_mixed_kinds_rejected(self):
        with pytest.raises(ReportMismatchError):
            compare_reports(DiversityReport(1, 1, 1, 1), self._shortcut_report({"r": (1, 1)}))

    def test_report_files_round_trip(self, tmp_path, small_corpus):
        client = in_process_client(context_reader_stub(default_trigger_map()))
        report = shortcut_analysis(small_corpus, client)
        path = tmp_path / "short.json"
        import json

        path.write_text(json.dumps(report.to_json()))
        loaded = load_report(path)
        assert loaded.to_json() == report.to_json()
