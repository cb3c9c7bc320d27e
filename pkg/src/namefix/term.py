"""Labeled s-expression terms.

Programs are plain s-expressions: constants, name occurrences, and compound
terms. Every name occurrence carries a label that identifies the variable
occurrence independently of its spelling; transformations copy labels when
they copy names and allocate fresh ones for names they invent.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Mapping


class Provenance(Enum):
    SOURCE = "source"
    SYNTHESIZED = "synthesized"


class TermError(Exception):
    """Base class for term-level errors."""


class LabelNotFound(TermError):
    """Queried label does not occur in the term."""


class InconsistentLabel(TermError):
    """Occurrences of one label disagree on the name text (corrupt term)."""


@dataclass(frozen=True, eq=False)
class Label:
    """Unique identifier of a name occurrence group.

    Equality and hashing are by id only; provenance is carried alongside so
    that names introduced by a transformation can be told apart from names
    copied out of a source program.
    """

    id: int
    provenance: Provenance = Provenance.SOURCE

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Label) and self.id == other.id

    def __hash__(self) -> int:
        return hash(self.id)

    @property
    def synthesized(self) -> bool:
        return self.provenance is Provenance.SYNTHESIZED

    def __repr__(self) -> str:
        tick = "'" if self.synthesized else ""
        return f"@{tick}{self.id}"


class Term:
    """Base class of term nodes. Instances are immutable values."""

    __slots__ = ()


@dataclass(frozen=True)
class Const(Term):
    value: object  # int or str

    def __repr__(self) -> str:
        return f"Const({self.value!r})"


@dataclass(frozen=True)
class Name(Term):
    text: str
    label: Label

    def __repr__(self) -> str:
        return f"Name({self.text!r}{self.label!r})"


@dataclass(frozen=True)
class Compound(Term):
    children: tuple[Term, ...]

    def __repr__(self) -> str:
        return "Compound" + repr(self.children)


def compound(*children: Term) -> Compound:
    return Compound(tuple(children))


class _Counter:
    """Monotone session-wide id source. Safe under concurrent calls."""

    def __init__(self, start: int = 1) -> None:
        self._lock = threading.Lock()
        self._next = start

    def next_id(self) -> int:
        with self._lock:
            value = self._next
            self._next += 1
            return value

    def reserve(self, upto: int) -> None:
        """Ensure all future ids are strictly greater than `upto`."""
        with self._lock:
            self._next = max(self._next, upto + 1)


_SESSION = _Counter()


def fresh_label() -> Label:
    """A synthesized label distinct from every label produced so far."""
    return Label(_SESSION.next_id(), Provenance.SYNTHESIZED)


def fresh_source_label() -> Label:
    """A source-provenance label from the session counter (parser use)."""
    return Label(_SESSION.next_id(), Provenance.SOURCE)


def reserve_ids(upto: int) -> None:
    """Keep the session counter clear of explicitly pinned ids."""
    _SESSION.reserve(upto)


class LabelAllocator:
    """Deterministic synthesized-label source for a single transformation.

    Ids start right after the largest id of the input term, so two runs on
    label-identical inputs allocate identical labels.
    """

    def __init__(self, start: int) -> None:
        self._next = start

    @classmethod
    def after(cls, t: Term) -> "LabelAllocator":
        ids = [lbl.id for lbl in labels_of(t)]
        return cls(max(ids, default=0) + 1)

    def fresh(self) -> Label:
        label = Label(self._next, Provenance.SYNTHESIZED)
        self._next += 1
        return label


def iter_names(t: Term) -> Iterator[Name]:
    """All Name nodes of t in preorder."""
    stack = [t]
    out: list[Name] = []
    while stack:
        node = stack.pop()
        if isinstance(node, Name):
            out.append(node)
        elif isinstance(node, Compound):
            stack.extend(reversed(node.children))
    return iter(out)


def name_at(t: Term, v: Label) -> str:
    """The name text at label v. All occurrences of v must agree on it."""
    text: str | None = None
    for node in iter_names(t):
        if node.label == v:
            if text is None:
                text = node.text
            elif text != node.text:
                raise InconsistentLabel(
                    f"label {v!r} occurs as both {text!r} and {node.text!r}"
                )
    if text is None:
        raise LabelNotFound(f"label {v!r} does not occur in term")
    return text


def labels_of(t: Term) -> frozenset[Label]:
    """The set of labels occurring in t."""
    seen: dict[int, tuple[Label, str]] = {}
    for node in iter_names(t):
        prior = seen.get(node.label.id)
        if prior is None:
            seen[node.label.id] = (node.label, node.text)
        elif prior[1] != node.text:
            raise InconsistentLabel(
                f"label {node.label!r} occurs as both {prior[1]!r} and {node.text!r}"
            )
    return frozenset(label for label, _ in seen.values())


def names_of(t: Term) -> frozenset[str]:
    """All name texts occurring in t."""
    return frozenset(node.text for node in iter_names(t))


def rename(t: Term, pi: Mapping[Label, str]) -> Term:
    """Respell every name whose label is in dom(pi); labels are untouched.

    Unchanged subterms are shared with the input, so an empty renaming
    returns t itself.
    """
    if not pi:
        return t
    if isinstance(t, Name):
        new_text = pi.get(t.label)
        if new_text is None or new_text == t.text:
            return t
        return Name(new_text, t.label)
    if isinstance(t, Compound):
        new_children = tuple(rename(c, pi) for c in t.children)
        if all(a is b for a, b in zip(new_children, t.children)):
            return t
        return Compound(new_children)
    return t


def label_equiv(t1: Term, t2: Term) -> bool:
    """Equal up to name spellings: same structure, constants, and labels."""
    if isinstance(t1, Const) and isinstance(t2, Const):
        return t1.value == t2.value
    if isinstance(t1, Name) and isinstance(t2, Name):
        return t1.label == t2.label
    if isinstance(t1, Compound) and isinstance(t2, Compound):
        return len(t1.children) == len(t2.children) and all(
            label_equiv(a, b) for a, b in zip(t1.children, t2.children)
        )
    return False


def mark(s: str, t: Term) -> Term:
    """Flip every name spelled s to synthesized provenance (ids preserved).

    Marked names are treated like transformation-invented names downstream,
    which lets a transformation opt out of capture repair for them.
    """
    if isinstance(t, Name):
        if t.text == s and not t.label.synthesized:
            return Name(t.text, Label(t.label.id, Provenance.SYNTHESIZED))
        return t
    if isinstance(t, Compound):
        new_children = tuple(mark(s, c) for c in t.children)
        if all(a is b for a, b in zip(new_children, t.children)):
            return t
        return Compound(new_children)
    return t


def to_sexpr(t: Term) -> str:
    """Debug rendering: names as name@id, synthesized ids ticked."""
    if isinstance(t, Const):
        return repr(t.value) if isinstance(t.value, str) else str(t.value)
    if isinstance(t, Name):
        tick = "'" if t.label.synthesized else ""
        return f"{t.text}@{tick}{t.label.id}"
    assert isinstance(t, Compound)
    return "(" + " ".join(to_sexpr(c) for c in t.children) + ")"
