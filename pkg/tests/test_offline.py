from __future__ import annotations

import json

from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import sample_doc
from secextract.cam import extract_cam
from secextract.corpus import all_filings
from secextract.dispatch import FinishState, LlmJob
from secextract.offline import OfflineBackend, answer
from secextract.parsing import cleanup_text, html_to_text
from secextract.prompts import build_cam_prompt, build_payratio_prompt


def test_proxy_irobot_2022():
    reply = answer(build_payratio_prompt([sample_doc("proxy_irobot_2022").text]))
    assert reply == '{"#1_1":["6,273,391","122,236","51"]}'


def test_all_sample_proxies():
    expected = {"proxy_irobot_2022": ["6,273,391", "122,236", "51"],
                "proxy_veeco_2018": ["2,402,882", "141,390", "17.0"],
                "proxy_viad_2019": ["3,741,915", "5,501", "680"],
                "proxy_everest_2022": ["8,864,322", "151,276", "58.60"]}
    for name, triple in expected.items():
        text = sample_doc(name).text
        assert json.loads(answer(build_payratio_prompt([text])))["#1_1"] == triple


def test_no_figures():
    reply = answer(build_payratio_prompt(["The committee met four times during the year."]))
    assert json.loads(reply) == {"#1_1": ["Not Found", "Not Found", "Not Found"]}


def test_cam_ethan_allen_2021_cam():
    f = next(f for f in all_filings(7) if f.kind == "cam_ethan_allen_2021")
    doc = html_to_text(f.html, f.record.doc_id)
    doc.text = cleanup_text(doc.text)
    reply = json.loads(answer(build_cam_prompt([extract_cam(doc).text])))
    assert list(reply) == ["#1_1"]
    number, title, desc, proc = reply["#1_1"]
    assert number == "1"
    assert title == "Assessment of the carrying value of retail design center long-lived assets"
    assert desc != "Not Found" and proc != "Not Found"


def test_two_extracts_keyed_separately():
    a = sample_doc("proxy_irobot_2022").text
    b = sample_doc("proxy_viad_2019").text
    reply = json.loads(answer(build_payratio_prompt([a, b])))
    assert list(reply) == ["#1_1", "#2_1"]
    assert reply["#2_1"][2] == "680"


def test_unrecognized_prompt_sentinel():
    assert json.loads(answer("what is the weather"))["error"]


@settings(max_examples=100)
@given(st.text(min_size=1, max_size=300).filter(lambda s: s.strip()))
def test_pure_and_single_line(text):
    prompt = build_payratio_prompt([text])
    first = answer(prompt)
    assert first == answer(prompt)
    assert "\n" not in first
    json.loads(first)


def _job(task_id: int, attempts: int = 1) -> LlmJob:
    prompt = build_payratio_prompt([sample_doc("proxy_veeco_2018").text])
    return LlmJob(task_id, f"b{task_id}", prompt, 10, attempts=attempts)


def test_faults_seeded_and_reproducible():
    def outcomes(seed):
        backend = OfflineBackend(seed, p_malformed=0.3, p_rate_limit=0.3)
        return [(r.finish_state, r.raw_response)
                for r in (backend(_job(t, a)) for t in range(1, 40) for a in (1, 2))]

    first = outcomes(11)
    assert first == outcomes(11)
    assert first != outcomes(12)
    states = {s for s, _ in first}
    assert FinishState.API_ERROR in states
    malformed = [raw for s, raw in first if s is FinishState.OK and not raw.endswith("}")]
    assert malformed


def test_no_faults_by_default():
    backend = OfflineBackend()
    res = backend(_job(1))
    assert res.finish_state is FinishState.OK
    assert json.loads(res.raw_response)["#1_1"] == ["2,402,882", "141,390", "17.0"]
    assert backend.calls == 1
