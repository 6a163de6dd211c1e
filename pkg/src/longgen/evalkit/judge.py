"""Order-flipped side-by-side comparisons with a pluggable judge.

A judge is any callable mapping a rendered prompt string to a response
string.  The prompt wire format is fixed below; the verdict is the last
bracketed grammar token in the response.  Every pair is judged twice with
presentation order flipped, which cancels position bias in aggregate, and
both transcripts are word-truncated to the shorter one first so length
never leaks into the comparison.
"""

from __future__ import annotations

import dataclasses
import json
import os
import re
import urllib.request
from concurrent.futures import ThreadPoolExecutor

JUDGE_PROMPT_TEMPLATE = """\
# Instructions

Please act as an impartial judge and evaluate the quality of two texts which occur in the context of a book. These texts are transcribed from audio recordings that were truncated to a fixed duration. Your job is to consider the following criteria to evaluate which text is better:
- Fluency: How grammatically correct is the text?
- Coherence: How well do the sentences of the text fit together?
- Logicality: How much does the text obey common sense?
- Interestingness: How enjoyable is the text to read?

First, read text A and consider its fluency, coherence, logicality, and interestingness. Do not penalize the text for ending mid-sentence or mid-paragraph.

Then, read text B and consider its fluency, coherence, logicality, and interestingness. Do not penalize the text for ending mid-sentence or mid-paragraph.

Afterwards, compare the fluency, coherence, logicality, and interestingness of the two texts. Do not penalize either text for ending mid-sentence or mid-paragraph.

Finally, after providing your explanations, you must output only one of the following choices as your final verdict with a label:
1. Text A is significantly better: [[A>>B]]
2. Text A is slightly better: [[A>B]]
3. Tie, relatively the same: [[A=B]]
4. Text B is slightly better: [[B>A]]
5. Text B is significantly better: [[B>>A]]

Example output: "My final verdict is tie: [[A=B]]".

# Comparison task

## ---------- Text A ----------

{text_a}

## ---------- Text B ----------

{text_b}

## ---------- Detailed Comparison of Continuations ----------

"""

_TEXT_A_HEADER = "## ---------- Text A ----------"
_TEXT_B_HEADER = "## ---------- Text B ----------"
_COMPARISON_HEADER = "## ---------- Detailed Comparison of Continuations ----------"

VERDICT_LABELS = ("A>>B", "A>B", "A=B", "B>A", "B>>A")

# Credit for the text presented as A, per verdict; significantly and
# slightly better both score a full win, ties a half.
_CREDIT_FOR_PRESENTED_A = {"A>>B": 1.0, "A>B": 1.0, "A=B": 0.5, "B>A": 0.0, "B>>A": 0.0}

_VERDICT_RE = re.compile(r"\[\[(A>>B|A>B|A=B|B>A|B>>A)\]\]")


def render_judge_prompt(text_a: str, text_b: str) -> str:
    # str.format would choke on braces inside transcripts.
    return JUDGE_PROMPT_TEMPLATE.replace("{text_a}", text_a).replace("{text_b}", text_b)


@dataclasses.dataclass(frozen=True)
class JudgeVerdict:
    label: str
    raw_response: str


def parse_verdict(response: str) -> JudgeVerdict:
    """The verdict is the last bracketed token matching the grammar."""
    matches = _VERDICT_RE.findall(response)
    if not matches:
        raise ValueError("no verdict token found in judge response")
    return JudgeVerdict(label=matches[-1], raw_response=response)


def truncate_to_shorter(text_a: str, text_b: str) -> tuple[str, str, int]:
    """Word-truncate both transcripts to the shorter one's word count."""
    words_a = text_a.split()
    words_b = text_b.split()
    n = min(len(words_a), len(words_b))
    return " ".join(words_a[:n]), " ".join(words_b[:n]), n


@dataclasses.dataclass
class SideBySideResult:
    """Aggregated judgments.  `credit_half_points` is the exact A-side score
    in half-point units (win 2, tie 1, loss 0), so `win_pct_a` is the float
    image of the rational credit_half_points / (2 * judgments)."""

    win_pct_a: float
    judgments: int
    judge_errors: int
    credit_half_points: int
    records: list[dict]

    def to_records(self) -> list[dict]:
        return self.records


def _judgment_tasks(pairs):
    tasks = []
    for i, (text_a, text_b) in enumerate(pairs):
        ta, tb, n = truncate_to_shorter(text_a, text_b)
        tasks.append((i, "AB", render_judge_prompt(ta, tb), n))
        tasks.append((i, "BA", render_judge_prompt(tb, ta), n))
    return tasks


def side_by_side(pairs, judge, jobs: int = 1) -> SideBySideResult:
    """Win percentage for the A side of each (A, B) transcript pair.

    Each pair is judged in both presentation orders; per judgment the A
    text scores 1 for a win at either strength, 0.5 for a tie, 0 for a
    loss.  Unparseable responses are recorded as judge errors and excluded
    from the mean.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("need at least one pair")
    tasks = _judgment_tasks(pairs)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            responses = list(pool.map(lambda t: _call_judge(judge, t[2]), tasks))
    else:
        responses = [_call_judge(judge, prompt) for _, _, prompt, _ in tasks]

    half_points = 0
    judged = 0
    errors = 0
    records = []
    for (pair_id, order, _, n_words), response in zip(tasks, responses):
        record = {"pair_id": pair_id, "order": order, "truncated_word_count": n_words}
        if isinstance(response, Exception):
            errors += 1
            record["verdict"] = "judge-error"
            record["error"] = str(response)
        else:
            try:
                verdict = parse_verdict(response)
            except ValueError as exc:
                errors += 1
                record["verdict"] = "judge-error"
                record["error"] = str(exc)
            else:
                record["verdict"] = verdict.label
                presented_a = int(2 * _CREDIT_FOR_PRESENTED_A[verdict.label])
                # In the flipped order the original A was presented as B.
                half_points += presented_a if order == "AB" else 2 - presented_a
                judged += 1
        records.append(record)
    win = 100.0 * (half_points / 2.0) / judged if judged else float("nan")
    return SideBySideResult(
        win_pct_a=win,
        judgments=judged,
        judge_errors=errors,
        credit_half_points=half_points,
        records=records,
    )


def _call_judge(judge, prompt: str):
    try:
        return judge(prompt)
    except Exception as exc:  # recorded per judgment, never fatal for the run
        return exc


# ---------------------------------------------------------------------------
# Shipped judges.


class MockUniqueVocabJudge:
    """Offline deterministic judge: the text with the larger unique-word
    count wins, equal counts tie.  Symmetric under presentation order, so a
    model judged against itself scores exactly 50."""

    def extract_texts(self, prompt: str) -> tuple[str, str]:
        try:
            _, rest = prompt.split(_TEXT_A_HEADER, 1)
            text_a, rest = rest.split(_TEXT_B_HEADER, 1)
            text_b, _ = rest.split(_COMPARISON_HEADER, 1)
        except ValueError as exc:
            raise ValueError("prompt does not follow the judge wire format") from exc
        return text_a.strip(), text_b.strip()

    def __call__(self, prompt: str) -> str:
        text_a, text_b = self.extract_texts(prompt)
        ua = len(set(text_a.split()))
        ub = len(set(text_b.split()))
        if ua > ub:
            label = "A>B"
        elif ub > ua:
            label = "B>A"
        else:
            label = "A=B"
        return (
            f"Text A uses {ua} unique words and Text B uses {ub}.\n\n"
            f"My final verdict is: [[{label}]]"
        )


class HttpJudge:
    """Thin client for an external judge endpoint.

    POSTs {"model": ..., "prompt": ...} as JSON and expects a JSON body
    with a "text" field (a plain-text body also works).  The API key is
    read from the environment, never from flags or files.
    """

    def __init__(self, endpoint: str, model: str, api_key_env: str = "LONGGEN_JUDGE_API_KEY",
                 timeout_s: float = 60.0):
        self.endpoint = endpoint
        self.model = model
        self.api_key_env = api_key_env
        self.timeout_s = timeout_s

    def __call__(self, prompt: str) -> str:
        body = json.dumps({"model": self.model, "prompt": prompt}).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        req = urllib.request.Request(self.endpoint, data=body, headers=headers, method="POST")
        with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
            raw = resp.read().decode("utf-8")
        try:
            parsed = json.loads(raw)
        except json.JSONDecodeError:
            return raw
        if isinstance(parsed, dict) and "text" in parsed:
            return str(parsed["text"])
        return raw
