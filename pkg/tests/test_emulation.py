import pytest

from daqsynth.diagram import BlockEdge, BlockGraph, BlockNode
from daqsynth.emulation import (
    AcceptFirstPolicy,
    EmulationMode,
    RequirementList,
    StructuralVerdictPolicy,
    compose_direct_description,
    direct_port,
    open_port,
    split_numbered_answers,
)
from daqsynth.errors import ScriptUnderrunError, UsageError
from daqsynth.events import EV_LLM_CALL, EventLog
from daqsynth.flow import VerdictRequest
from daqsynth.gateway import ScriptedBackend, emulator_config
from daqsynth.testbench import get_testbench


POT_REQUIREMENTS = RequirementList(
    (
        "1. The potentiometer is linear;",
        "2. The value of the potentiometer is 10 kOhms;",
        "3. The power source connected to the potentiometer is between -10 and 10 Volts;",
    )
)


class TestDirectPort:
    def test_three_questions_three_empty_answers(self):
        port = direct_port()
        assert port.answer_questions(["a?", "b?", "c?"]) == ["", "", ""]

    def test_zero_questions_zero_answers(self):
        assert direct_port().answer_questions([]) == []

    def test_accept_first_policy_accepts_everything(self):
        port = direct_port(AcceptFirstPolicy())
        graph = BlockGraph(nodes=[BlockNode("a", "A")])
        for kind in ("architecture", "detail", "summary"):
            verdict = port.give_verdict(VerdictRequest(kind, "content", graph=graph))
            assert verdict.accepted


class TestStructuralPolicy:
    def test_sound_diagram_accepted_first_round(self):
        policy = StructuralVerdictPolicy()
        graph = BlockGraph(
            nodes=[BlockNode("a", "A"), BlockNode("b", "B")],
            edges=[BlockEdge("a", "b")],
        )
        verdict = policy.verdict(VerdictRequest("architecture", "dot", graph=graph))
        assert verdict.accepted

    def test_error_findings_trigger_one_revision_then_accept(self):
        policy = StructuralVerdictPolicy()
        broken = BlockGraph(
            nodes=[BlockNode("a", "A"), BlockNode("b", "B"), BlockNode("c", "C")],
            edges=[BlockEdge("a", "b")],
        )
        first = policy.verdict(VerdictRequest("architecture", "dot", graph=broken))
        assert not first.accepted
        assert "connections" in first.feedback_text
        second = policy.verdict(VerdictRequest("architecture", "dot", graph=broken))
        assert second.accepted

    def test_empty_detail_revised_once(self):
        policy = StructuralVerdictPolicy()
        first = policy.verdict(VerdictRequest("detail", "   ", block="b1"))
        assert not first.accepted
        assert policy.verdict(VerdictRequest("detail", "   ", block="b1")).accepted

    def test_policy_is_deterministic(self):
        graph = BlockGraph(nodes=[BlockNode("a", "A")])
        one = StructuralVerdictPolicy().verdict(VerdictRequest("architecture", "d", graph=graph))
        two = StructuralVerdictPolicy().verdict(VerdictRequest("architecture", "d", graph=graph))
        assert one == two


class TestOpenPort:
    def _port(self, replies, log=None):
        return open_port(
            POT_REQUIREMENTS,
            emulator_config(),
            ScriptedBackend(replies),
            policy=AcceptFirstPolicy(),
            log=log or EventLog(),
        )

    def test_answer_from_requirement_list(self):
        port = self._port(["1. The value of the potentiometer is 10 kOhms"])
        answers = port.answer_questions(["What is the potentiometer value?"])
        assert len(answers) == 1
        assert "10 kOhms" in answers[0]

    def test_unknown_fact_answered_i_dont_know(self):
        port = self._port(["1. I don't know"])
        answers = port.answer_questions(["What is the moon made of?"])
        assert answers == ["I don't know"]

    def test_emulator_requests_use_low_temperature(self):
        log = EventLog()
        port = self._port(["1. x\n2. y"], log=log)
        port.answer_questions(["a?", "b?"])
        calls = log.of_type(EV_LLM_CALL)
        assert len(calls) == 1
        assert calls[0]["actor"] == "emulator"
        assert calls[0]["temperature"] == 0.2

    def test_system_prompt_contains_requirements_only_once(self):
        log = EventLog()
        port = self._port(["1. a", "1. b"], log=log)
        port.answer_questions(["first?"])
        port.answer_questions(["second?"])
        calls = log.of_type(EV_LLM_CALL)
        assert len(calls) == 2
        # the emulator keeps its own conversation: 1 system + growing exchange
        assert [m["role"] for m in calls[1]["messages"]] == [
            "system",
            "user",
            "assistant",
            "user",
        ]
        assert "10 kOhms" in calls[1]["messages"][0]["content"]

    def test_answer_count_mismatch_padded_and_flagged(self):
        log = EventLog()
        port = self._port(["1. only one answer"], log=log)
        answers = port.answer_questions(["a?", "b?", "c?"])
        assert answers == ["only one answer", "", ""]
        assert log.of_type("answers_padded")

    def test_emulator_failure_propagates(self):
        port = self._port([])
        with pytest.raises(ScriptUnderrunError):
            port.answer_questions(["a?"])

    def test_no_questions_no_emulator_call(self):
        log = EventLog()
        port = self._port([], log=log)
        assert port.answer_questions([]) == []
        assert log.of_type(EV_LLM_CALL) == []


class TestSplitNumberedAnswers:
    def test_exact_split(self):
        answers, padded = split_numbered_answers("1. a\n2. b", 2)
        assert answers == ["a", "b"]
        assert padded == 0

    def test_over_long_reply_truncated(self):
        answers, _ = split_numbered_answers("1. a\n2. b\n3. c", 2)
        assert answers == ["a", "b"]

    def test_single_question_freeform_reply(self):
        answers, padded = split_numbered_answers("It is 10 kOhms.", 1)
        assert answers == ["It is 10 kOhms."]
        assert padded == 0

    def test_empty_reply_padding(self):
        answers, padded = split_numbered_answers("", 3)
        assert answers == ["", "", ""]
        assert padded == 3


class TestComposeDirectDescription:
    def test_angular_position_contains_description_and_requirements(self):
        tb = get_testbench("angular_position")
        text = compose_direct_description(tb)
        assert "calculates the angle of a pendulum" in text
        assert "maximum accepted input voltage for the DAQ is +/- 7 V" in text

    def test_open_context_description_lacks_requirements(self):
        tb = get_testbench("angular_position")
        assert "maximum accepted input voltage" not in tb.description

    def test_requirement_count_preserved(self):
        tb = get_testbench("angular_position")
        assert len(tb.requirements.items) == 9
        composed = compose_direct_description(tb)
        for item in tb.requirements.items:
            assert item in composed

    def test_requirements_keep_numbering(self):
        tb = get_testbench("angular_position")
        assert tb.requirements.items[0].startswith("1.")
        assert tb.requirements.items[8].startswith("9.")


class TestRequirementList:
    def test_nonempty_enforced(self):
        with pytest.raises(UsageError):
            RequirementList(())

    def test_modes(self):
        assert EmulationMode("direct") is EmulationMode.DIRECT
        assert EmulationMode("open") is EmulationMode.OPEN
