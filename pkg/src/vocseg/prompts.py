"""Category vocabularies and prompt templates.

Three templates are supported; the open-set entry ("something else") always
renders as its own fixed prompt so the template cannot demand a super
category for it.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

OPEN_SET_NAME = "something else"
OPEN_SET_PROMPT = "a photo of something else"

TEMPLATES = {
    "Phrase1": "a photo of a {super_category} such as {category}",
    "Phrase2": "this is a {category} of a {super_category}",
    "Phrase3": "a photo of {category}",
}
DEFAULT_TEMPLATE = "Phrase3"


@dataclass
class Category:
    name: str
    super_category: str | None = None


@dataclass
class Vocabulary:
    categories: list[Category] = field(default_factory=list)
    includes_open_set: bool = True

    def __post_init__(self):
        names = [c.name for c in self.categories]
        if any(not n for n in names):
            raise ValueError("category names must be non-empty")
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"duplicate category names: {dupes}")

    @property
    def entries(self) -> list[Category]:
        """Categories plus the trailing open-set entry when enabled."""
        out = list(self.categories)
        if self.includes_open_set:
            out.append(Category(OPEN_SET_NAME))
        return out

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.entries]

    def digest(self) -> str:
        payload = json.dumps(
            [[c.name, c.super_category] for c in self.categories]
            + [["__open_set__", self.includes_open_set]],
            separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: dict) -> "Vocabulary":
        cats = [Category(name=c["name"], super_category=c.get("super_category"))
                for c in data["categories"]]
        return cls(categories=cats, includes_open_set=data.get("includes_open_set", True))

    def to_dict(self) -> dict:
        return {
            "categories": [{"name": c.name, "super_category": c.super_category}
                           for c in self.categories],
            "includes_open_set": self.includes_open_set,
        }


def build_prompts(vocab: Vocabulary, template: str = DEFAULT_TEMPLATE) -> list[str]:
    """One prompt per vocabulary entry, in vocabulary order."""
    if template not in TEMPLATES:
        raise ValueError(f"unknown template '{template}' (expected one of {sorted(TEMPLATES)})")
    pattern = TEMPLATES[template]
    needs_super = "{super_category}" in pattern
    prompts = []
    for cat in vocab.categories:
        if needs_super and not cat.super_category:
            raise ValueError(f"template {template} needs a super_category for '{cat.name}'")
        prompts.append(pattern.format(category=cat.name,
                                      super_category=cat.super_category or ""))
    if vocab.includes_open_set:
        prompts.append(OPEN_SET_PROMPT)
    return prompts
