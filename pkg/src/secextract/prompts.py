"""Prompt assembly for batched extraction requests.

A prompt is the task's instruction template followed by the numbered
extracts, each written as ``#N:`` on its own line, the extract text, and a
blank line. The same delimiter is used by :func:`split_prompt` to recover
the extracts, which the offline backend relies on.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Sequence

from .extracts import TextExtract
from .metrics import TokenEstimator, estimate_tokens

log = logging.getLogger(__name__)


class Task(str, Enum):
    PAY_RATIO = "payratio"
    CAM = "cam"


TRUNCATE_CUT = 1000
GRADUAL_STEP = 500
TRUNCATE_FLOOR = 2000

DEFAULT_ESCALATION = ("unmodified", "moderate", "example")

_BLOCK_RE = re.compile(r"(?m)^#(\d+):\n")

EXAMPLE_HEADER = "**Reference Example (format illustration only):**"
EXAMPLE_GUARD = ("The reference example above only illustrates the expected answer. "
                 "Never copy its values. Answer solely from the numbered extracts below.")

# Canned examples for the augmented prompt; the figures are deliberately
# unusual so that copying them into an answer is easy to detect.
PAYRATIO_EXAMPLE = (
    "Example extract:\n"
    "Pay Ratio\n"
    "For fiscal 2020, the annual total compensation of our median employee was $48,317 "
    "and the annual total compensation of our Chief Executive Officer was $3,911,077. "
    "The resulting ratio is 81 to 1.\n\n"
    'Example answer: {"#1_1": ["3,911,077", "48,317", "81"]}'
)
PAYRATIO_EXAMPLE_VALUES = ("3,911,077", "48,317", "81")

CAM_EXAMPLE = (
    "Example extract:\n"
    "Critical Audit Matters\n"
    "Valuation of acquired customer relationships\n"
    "Description of the Matter\n"
    "The Company recorded customer relationship intangibles using projected attrition rates.\n"
    "How We Addressed the Matter in Our Audit\n"
    "We tested the attrition assumptions against historical customer data.\n\n"
    'Example answer: {"#1_1": ["1", "Valuation of acquired customer relationships", '
    '"The Company recorded customer relationship intangibles using projected attrition rates.", '
    '"We tested the attrition assumptions against historical customer data."]}'
)
CAM_EXAMPLE_VALUES = ("Valuation of acquired customer relationships",)


@lru_cache(maxsize=None)
def _packaged_template(task: Task) -> str:
    name = f"data/templates/{task.value}_prompt.txt"
    return resources.files("secextract").joinpath(name).read_text(encoding="utf-8")


def load_template(task: Task | str, path: str | Path | None = None) -> str:
    task = Task(task)
    if path is None:
        return _packaged_template(task)
    return Path(path).read_text(encoding="utf-8")


@dataclass(frozen=True)
class PromptBatch:
    batch_id: str
    task: Task
    members: tuple[tuple[str, int], ...]
    member_texts: tuple[str, ...]
    prompt_text: str
    prompt_token_estimate: int

    @property
    def doc_ids(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(d for d, _ in self.members))

    @property
    def member_keys(self) -> tuple[str, ...]:
        return tuple(f"{d}#{i}" for d, i in self.members)


def batch_extracts(extracts: Sequence[TextExtract], batch_size: int) -> list[list[TextExtract]]:
    """Greedy sequential grouping; only the final group may be short."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    extracts = list(extracts)
    return [extracts[i:i + batch_size] for i in range(0, len(extracts), batch_size)]


def n_batches(n: int, batch_size: int) -> int:
    return math.ceil(n / batch_size)


def _compose(template: str, member_texts: Sequence[str], example: str | None = None) -> str:
    if not member_texts:
        raise ValueError("a prompt needs at least one extract")
    for n, text in enumerate(member_texts, 1):
        if not text or not text.strip():
            raise ValueError(f"extract #{n} is empty")
    parts = [template.rstrip("\n"), ""]
    if example:
        parts += [EXAMPLE_HEADER, "", example, "", EXAMPLE_GUARD, ""]
    for n, text in enumerate(member_texts, 1):
        parts += [f"#{n}:", text.strip("\n"), ""]
    return "\n".join(parts)


def build_payratio_prompt(member_texts: Sequence[str], template: str | None = None,
                          example: str | None = None) -> str:
    return _compose(template if template is not None else load_template(Task.PAY_RATIO),
                    member_texts, example)


def build_cam_prompt(member_texts: Sequence[str], template: str | None = None,
                     example: str | None = None) -> str:
    return _compose(template if template is not None else load_template(Task.CAM),
                    member_texts, example)


def build_prompt(task: Task | str, member_texts: Sequence[str], template: str | None = None,
                 example: str | None = None) -> str:
    if Task(task) is Task.PAY_RATIO:
        return build_payratio_prompt(member_texts, template, example)
    return build_cam_prompt(member_texts, template, example)


def split_prompt(prompt_text: str) -> tuple[str, list[str]]:
    """Split a prompt into ``(preamble, extracts)``.

    Blocks must be numbered 1..k in order; anything else is treated as part
    of the preamble, so a malformed prompt yields no extracts.
    """
    marks = list(_BLOCK_RE.finditer(prompt_text))
    # the extracts are the trailing run of blocks numbered 1..k
    first = None
    for i, m in enumerate(marks):
        if m.group(1) == "1" and all(marks[j].group(1) == str(j - i + 1)
                                     for j in range(i, len(marks))):
            first = i
            break
    if first is None:
        return prompt_text, []
    blocks = marks[first:]
    texts = []
    for j, m in enumerate(blocks):
        end = blocks[j + 1].start() if j + 1 < len(blocks) else len(prompt_text)
        texts.append(prompt_text[m.end():end].rstrip("\n"))
    return prompt_text[:blocks[0].start()], texts


def truncate_extract(text: str, mode: str = "moderate", *, level: int = 1,
                     cut: int = TRUNCATE_CUT, step: int = GRADUAL_STEP,
                     floor: int = TRUNCATE_FLOOR, warnings: list[str] | None = None) -> str:
    """Trim characters from both ends of an extract.

    ``moderate`` drops ``cut`` characters from each end. ``gradual`` drops
    ``step * level`` from each end but never shrinks below ``floor``.
    """
    def warn(msg: str) -> None:
        log.warning(msg)
        if warnings is not None:
            warnings.append(msg)

    if mode == "moderate":
        if len(text) < 2 * cut:
            warn(f"extract of {len(text)} chars too short for a {cut}-char cut; left unchanged")
            return text
        return text[cut:len(text) - cut]
    if mode == "gradual":
        if level < 0 or step < 0:
            raise ValueError("level and step must be non-negative")
        if len(text) <= floor:
            warn(f"extract of {len(text)} chars already at or below the {floor}-char floor")
            return text
        drop = min(step * level, (len(text) - floor) // 2)
        return text[drop:len(text) - drop]
    raise ValueError(f"unknown truncation mode {mode!r}")


def escalation_step(n_format_failures: int,
                    policy: Sequence[str] = DEFAULT_ESCALATION) -> str:
    """Prompt variant to use after ``n`` format failures of the same batch."""
    if n_format_failures <= 0:
        return "unmodified"
    return policy[min(n_format_failures, len(policy)) - 1]


def make_batches(extracts: Sequence[TextExtract], task: Task | str, batch_size: int,
                 template: str | None = None,
                 estimator: TokenEstimator = estimate_tokens) -> list[PromptBatch]:
    task = Task(task)
    template = template if template is not None else load_template(task)
    out = []
    for n, group in enumerate(batch_extracts(extracts, batch_size), 1):
        texts = tuple(e.text for e in group)
        prompt = build_prompt(task, texts, template)
        out.append(PromptBatch(
            batch_id=f"{task.value}-{n:06d}",
            task=task,
            members=tuple((e.doc_id, e.extract_index) for e in group),
            member_texts=texts,
            prompt_text=prompt,
            prompt_token_estimate=estimator(prompt),
        ))
    return out


@dataclass
class PromptVariant:
    prompt_text: str
    variant: str
    warnings: list[str] = field(default_factory=list)


def rebuild_prompt(batch: PromptBatch, n_format_failures: int, template: str | None = None,
                   policy: Sequence[str] = DEFAULT_ESCALATION) -> PromptVariant:
    """Prompt for the next attempt of a batch whose replies failed to parse."""
    variant = escalation_step(n_format_failures, policy)
    if variant == "unmodified":
        return PromptVariant(batch.prompt_text, variant)
    warnings: list[str] = []
    texts = list(batch.member_texts)
    example = None
    if variant == "moderate":
        texts = [truncate_extract(t, "moderate", warnings=warnings) for t in texts]
    elif variant.startswith("gradual"):
        level = max(1, n_format_failures - 1)
        texts = [truncate_extract(t, "gradual", level=level, warnings=warnings) for t in texts]
    elif variant == "example":
        example = PAYRATIO_EXAMPLE if batch.task is Task.PAY_RATIO else CAM_EXAMPLE
    else:
        raise ValueError(f"unknown escalation step {variant!r}")
    return PromptVariant(build_prompt(batch.task, texts, template, example), variant, warnings)


def example_contamination(task: Task | str, values: Sequence[str], source_text: str) -> bool:
    """True when a reply repeats the canned example instead of the extract.

    A value only counts as copied if it is absent from the extract itself.
    """
    canned = PAYRATIO_EXAMPLE_VALUES if Task(task) is Task.PAY_RATIO else CAM_EXAMPLE_VALUES
    hits = [v for v in values if v in canned and v not in source_text]
    return bool(hits) and len(hits) >= min(2, len(canned))
