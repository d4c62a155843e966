"""Template rendering, hedging, leakage scanning, and prompt file formats.

The golden paragraph texts below were written out by hand from the bundled
template file and a fully specified record; any change to template wording,
slot formatting, or hedge phrasing shows up as a diff against them.
"""

import dataclasses
import json
from datetime import datetime

import pytest

from crashkit.errors import TemplateError
from crashkit.model import (
    MISSING,
    AccidentType,
    CrashRecord,
    EventInfo,
    GeneralInfo,
    InfrastructureInfo,
    Labels,
    Severity,
    Task,
    UnitInfo,
)
from crashkit.textualize import (
    ANSWER_PREFIX,
    PARAGRAPH_ORDER,
    WORD_BUDGET,
    Paragraph,
    budget_warnings,
    build_prompt,
    bundle_from_json,
    bundle_to_json,
    export_sft,
    leakage_hits,
    load_templates,
    read_bundles,
    render_paragraphs,
    user_text_from_paragraphs,
    write_bundles,
)


def make_record(**overrides) -> CrashRecord:
    base = dict(
        case_id="T1",
        general=GeneralInfo(
            crash_datetime=datetime(2022, 6, 15, 14, 30),
            city="olympia", route_id="I-5", milepost=12.4,
            road_type="interstate",
            state_plane_easting=510000.0, state_plane_northing=70000.0,
        ),
        infrastructure=InfrastructureInfo(
            lane_count=4, speed_limit=60, work_zone=False,
            lighting="daylight", road_surface="dry", intersection_related=False,
        ),
        event=EventInfo(
            alcohol_involved=False, drug_involved=False,
            narrative_facts=(("weather", "clear"), ("traffic_control", "signal")),
            contributing_factors=("speeding",),
        ),
        units=(UnitInfo("vehicle", "passenger_car", 34.0, "male", "going_straight"),),
        labels=Labels(1, Severity.POSSIBLE_INJURY, AccidentType.REAR_END_COLLISION),
    )
    base.update(overrides)
    return CrashRecord(**base)


GOLDEN_GENERAL = (
    "On June 15, 2022 at approximately 14:30, a traffic crash was reported "
    "in the city of olympia. "
    "The crash occurred along route I-5 near milepost 12.4. "
    "This location is classified as a interstate roadway. "
    "The recorded grid position lies at an easting of 510000 meters and a "
    "northing of 70000 meters in the regional state plane system. "
    "The incident took place in June, during the afternoon hours of the day."
)

GOLDEN_INFRASTRUCTURE = (
    "The number of through travel lanes on this segment is recorded as 4. "
    "The posted speed limit on this segment is 60 miles per hour. "
    "At the time of the crash, the lighting condition at the scene was daylight. "
    "The surface of the roadway was reported as dry. "
    "No work zone was active at the crash site. "
    "The crash was not related to an intersection. "
    "These attributes describe the fixed roadway environment rather than the "
    "behavior of any driver."
)

GOLDEN_EVENT = (
    "According to the report, the weather at the scene was clear. "
    "Traffic control at this location consisted of a traffic signal. "
    "No alcohol involvement was recorded for this crash. "
    "No drug involvement was recorded for this crash. "
    "The investigating officer listed the following contributing "
    "circumstances: speeding. "
    "No other circumstances beyond those listed here were noted by the "
    "responding officer. "
    "The report reflects conditions as they were observed at the scene "
    "shortly after the crash."
)

GOLDEN_UNIT = (
    "The number of units involved in this crash is 1. "
    "The first listed unit was a passenger car. "
    "Its driver was 34 years old, with gender recorded as male. "
    "Immediately before the crash, this unit was going straight ahead. "
    "No pedestrian was involved as a unit in this crash. "
    "No pedal cyclist was involved as a unit in this crash. "
    "Unit details describe the people and vehicles involved rather than the "
    "roadway itself."
)


class TestGoldenRendering:
    def test_paragraph_names_and_titles(self, templates, dictionary):
        paragraphs = render_paragraphs(make_record(), templates, dictionary)
        assert [p.name for p in paragraphs] == list(PARAGRAPH_ORDER)
        assert [p.title for p in paragraphs] == [
            "General Information", "Infrastructure Information",
            "Event Information", "Unit Information",
        ]

    def test_golden_texts(self, templates, dictionary):
        paragraphs = render_paragraphs(make_record(), templates, dictionary)
        texts = {p.name: p.text for p in paragraphs}
        assert texts["general"] == GOLDEN_GENERAL
        assert texts["infrastructure"] == GOLDEN_INFRASTRUCTURE
        assert texts["event"] == GOLDEN_EVENT
        assert texts["unit"] == GOLDEN_UNIT

    def test_multiple_contributing_factors_join_with_and(self, templates, dictionary):
        record = make_record(event=EventInfo(
            alcohol_involved=False, drug_involved=False,
            narrative_facts=(("weather", "clear"), ("traffic_control", "none")),
            contributing_factors=("speeding", "following_too_close", "inattention"),
        ))
        paragraphs = render_paragraphs(record, templates, dictionary)
        event = next(p for p in paragraphs if p.name == "event")
        assert "speeding, following too close and inattention." in event.text
        assert "Traffic control at this location consisted of no control devices." \
            in event.text

    def test_true_boolean_phrasing(self, templates, dictionary):
        record = make_record(infrastructure=InfrastructureInfo(
            lane_count=4, speed_limit=60, work_zone=True,
            lighting="daylight", road_surface="icy", intersection_related=True,
        ))
        paragraphs = render_paragraphs(record, templates, dictionary)
        infra = next(p for p in paragraphs if p.name == "infrastructure")
        assert "An active work zone was present at the crash site." in infra.text
        assert "The crash was related to an intersection." in infra.text
        assert "reported as icy." in infra.text


class TestHedging:
    def test_missing_slot_drops_sentence_and_hedges(self, templates, dictionary):
        record = make_record(infrastructure=InfrastructureInfo(
            lane_count=4, speed_limit=60, work_zone=False,
            lighting=MISSING, road_surface="dry", intersection_related=False,
        ))
        paragraphs = render_paragraphs(record, templates, dictionary)
        infra = next(p for p in paragraphs if p.name == "infrastructure")
        assert "lighting condition at the scene was" not in infra.text
        assert "The lighting condition was not recorded." in infra.text
        # Hedges come after every rendered sentence.
        assert infra.text.endswith("The lighting condition was not recorded.")

    def test_missing_datetime_hedges_all_derived_slots(self, templates, dictionary):
        record = make_record(general=GeneralInfo(
            crash_datetime=MISSING, city="olympia", route_id="I-5",
            milepost=12.4, road_type="interstate",
            state_plane_easting=510000.0, state_plane_northing=70000.0,
        ))
        paragraphs = render_paragraphs(record, templates, dictionary)
        general = next(p for p in paragraphs if p.name == "general")
        assert "On " not in general.text
        assert general.text.count("was not recorded.") == 4
        for phrase in ("date of the crash", "time of the crash",
                       "month of the crash", "part of the day"):
            assert f"The {phrase} was not recorded." in general.text

    def test_hedge_falls_back_to_slot_name(self, templates):
        from crashkit.textualize import _hedge

        slim = dataclasses.replace(templates, missing_phrases={})
        assert _hedge("road_surface", slim) == "The road surface was not recorded."

    def test_fully_missing_record_still_renders_four_paragraphs(
            self, templates, dictionary):
        record = make_record(
            general=GeneralInfo(
                crash_datetime=MISSING, city=MISSING, route_id=MISSING,
                milepost=MISSING, road_type=MISSING,
                state_plane_easting=MISSING, state_plane_northing=MISSING),
            infrastructure=InfrastructureInfo(
                lane_count=MISSING, speed_limit=MISSING, work_zone=MISSING,
                lighting=MISSING, road_surface=MISSING,
                intersection_related=MISSING),
            event=EventInfo(
                alcohol_involved=MISSING, drug_involved=MISSING,
                narrative_facts=(), contributing_factors=MISSING),
            units=(UnitInfo("vehicle", MISSING, MISSING, MISSING, MISSING),),
        )
        paragraphs = render_paragraphs(record, templates, dictionary)
        assert len(paragraphs) == 4
        for p in paragraphs:
            assert p.text
            assert "was not recorded." in p.text


class TestLeakage:
    def test_label_tokens_are_hits(self):
        assert "<OVERTURN>" in leakage_hits("the unit went <OVERTURN> on ice")
        assert "<FATAL>" in leakage_hits("prediction: <FATAL>")

    def test_label_phrases_are_hits(self):
        hits = leakage_hits("this was a rear end collision on I-5")
        assert "Rear End Collision" in hits

    def test_phrase_match_respects_word_boundaries(self):
        # "overturned" contains "overturn" but not as a whole word.
        assert leakage_hits("the vehicle overturned") == []

    def test_feature_category_words_are_exempt(self, dictionary):
        text = "The surface of the roadway was reported as other."
        assert "Other" in leakage_hits(text)
        assert leakage_hits(text, dictionary) == []

    def test_non_category_labels_still_hit_with_dictionary(self, dictionary):
        assert "Fatal" in leakage_hits("the outcome was fatal", dictionary)

    def test_rendered_corpus_is_leakage_free(self, corpus_small, templates,
                                             dictionary):
        for record in corpus_small:
            paragraphs = render_paragraphs(record, templates, dictionary)
            assert leakage_hits(user_text_from_paragraphs(paragraphs),
                                dictionary) == []


class TestPromptBundles:
    def test_target_text_per_task(self, templates, dictionary):
        record = make_record()
        expected = {
            Task.INJURY: "<ONE>",
            Task.SEVERITY: "<POSSIBLE INJURY>",
            Task.ACCIDENT_TYPE: "<REAR END COLLISIONS>",
        }
        for task, token in expected.items():
            bundle = build_prompt(record, task, templates, dictionary)
            assert bundle.target_text == ANSWER_PREFIX + token

    def test_system_text_lists_every_token(self, templates, dictionary):
        for task in Task:
            bundle = build_prompt(make_record(), task, templates, dictionary)
            for token in task.tokens:
                assert token in bundle.system_text

    def test_user_text_joins_titled_paragraphs(self, templates, dictionary):
        bundle = build_prompt(make_record(), Task.SEVERITY, templates, dictionary)
        blocks = bundle.user_text.split("\n\n")
        assert len(blocks) == 4
        assert blocks[0].startswith("General Information: On June 15, 2022")
        assert blocks[3].startswith("Unit Information: ")

    def test_prerendered_paragraphs_shortcut_matches(self, templates, dictionary):
        record = make_record()
        paragraphs = render_paragraphs(record, templates, dictionary)
        direct = build_prompt(record, Task.INJURY, templates, dictionary)
        shortcut = build_prompt(record, Task.INJURY, templates, dictionary,
                                paragraphs=paragraphs)
        assert direct == shortcut

    def test_bundle_json_round_trip(self, templates, dictionary):
        bundle = build_prompt(make_record(), Task.ACCIDENT_TYPE, templates,
                              dictionary)
        line = bundle_to_json(bundle)
        assert bundle_from_json(line) == bundle
        keys = list(json.loads(line))
        assert keys == ["case_id", "task", "system", "user", "target"]

    def test_bundle_file_round_trip(self, tmp_path, corpus_small, templates,
                                    dictionary):
        bundles = [build_prompt(r, Task.SEVERITY, templates, dictionary)
                   for r in corpus_small[:25]]
        path = tmp_path / "bundles.jsonl"
        assert write_bundles(str(path), bundles) == 25
        assert read_bundles(str(path)) == bundles


class TestSftExport:
    def test_export_sorted_and_keyed(self, tmp_path, templates, dictionary):
        records = [make_record(case_id=cid) for cid in ("B2", "A1", "C3")]
        path = tmp_path / "sft.jsonl"
        count = export_sft(records, Task.SEVERITY, templates, dictionary,
                           str(path))
        assert count == 3
        lines = path.read_text(encoding="utf-8").splitlines()
        rows = [json.loads(line) for line in lines]
        assert [r["case_id"] for r in rows] == ["A1", "B2", "C3"]
        for row in rows:
            assert list(row) == ["case_id", "system", "user", "assistant"]
            assert row["assistant"] == ANSWER_PREFIX + "<POSSIBLE INJURY>"

    def test_export_is_byte_stable_under_input_order(self, tmp_path, templates,
                                                     dictionary):
        records = [make_record(case_id=f"R{i}") for i in range(6)]
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        export_sft(records, Task.INJURY, templates, dictionary, str(p1))
        export_sft(list(reversed(records)), Task.INJURY, templates, dictionary,
                   str(p2))
        assert p1.read_bytes() == p2.read_bytes()


class TestBudget:
    def test_golden_record_is_within_budget(self, templates, dictionary):
        paragraphs = render_paragraphs(make_record(), templates, dictionary)
        assert budget_warnings(paragraphs) == []

    def test_out_of_budget_paragraphs_are_reported(self):
        low, high = WORD_BUDGET
        short = Paragraph(name="general", title="t", text="too short")
        long = Paragraph(name="unit", title="t", text="word " * (high + 1))
        notes = budget_warnings([short, long])
        assert len(notes) == 2
        assert "general" in notes[0] and "2 words" in notes[0]
        assert "unit" in notes[1]


class TestTemplateValidation:
    def _write_variant(self, tmp_path, transform):
        from crashkit.textualize import default_templates_path

        text = open(default_templates_path(), encoding="utf-8").read()
        out = tmp_path / "templates.txt"
        out.write_text(transform(text), encoding="utf-8")
        return str(out)

    def test_unknown_slot_rejected(self, tmp_path, dictionary):
        path = self._write_variant(
            tmp_path,
            lambda t: t + "\n[paragraph unit]\nThe {bogus_slot} was noted.\n")
        with pytest.raises(TemplateError):
            load_templates(path, dictionary)

    def test_outcome_vocabulary_in_sentence_rejected(self, tmp_path, dictionary):
        path = self._write_variant(
            tmp_path,
            lambda t: t + "\n[paragraph unit]\nLooked like a head on collision.\n")
        with pytest.raises(TemplateError):
            load_templates(path, dictionary)

    def test_conditional_on_non_boolean_rejected(self, tmp_path, dictionary):
        path = self._write_variant(
            tmp_path,
            lambda t: t + "\n[paragraph unit]\n{city:in town|out of town}.\n")
        with pytest.raises(TemplateError):
            load_templates(path, dictionary)

    def test_missing_paragraph_rejected(self, tmp_path, dictionary):
        path = self._write_variant(
            tmp_path, lambda t: t.replace("[paragraph unit]", "[paragraph extra]"))
        with pytest.raises(TemplateError):
            load_templates(path, dictionary)

    def test_system_prompt_must_take_label_tokens(self, tmp_path, dictionary):
        path = self._write_variant(
            tmp_path, lambda t: t.replace("{label_tokens}", "these tokens"))
        with pytest.raises(TemplateError):
            load_templates(path, dictionary)

    def test_sha_tracks_file_bytes(self, tmp_path, dictionary):
        import hashlib

        path = self._write_variant(tmp_path, lambda t: t)
        templates = load_templates(path, dictionary)
        assert templates.sha256 == hashlib.sha256(
            open(path, "rb").read()).hexdigest()
