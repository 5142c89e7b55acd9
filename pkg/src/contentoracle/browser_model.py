"""Data-driven decision trees for browser content handling, plus a
differential runner that enumerates a finite request grid and reports every
point where two models disagree.

Tree text format: one node per line, two-space indentation, yes-branch
first. ``? <field> <op> [<value>]`` is a predicate, ``! <Action>`` a leaf,
``#`` starts a comment line. Supported ops:

    present            optional type field has a value
    is <literal>       equals a boolean, disposition, or family/subtype
    agrees <field>     both type fields present and equal on family/subtype
    in <a/b,c/d,...>   type field is one of the listed family/subtype pairs
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence, Union

from .errors import MalformedTree
from .mime_db import MimeType, parse_mime_type


class Action(Enum):
    RENDER = "Render"
    DOWNLOAD = "Download"
    PROMPT_DOC_TYPE = "PromptDocType"
    PROMPT_MIME = "PromptMime"
    OPEN_WITH_APP = "OpenWithApp"
    AUTO_OPEN = "AutoOpen"


class Disposition(Enum):
    NONE = "none"
    INLINE = "inline"
    ATTACHMENT = "attachment"


@dataclass(frozen=True)
class RequestContext:
    """The input tuple a browser sees when deciding what to do with a payload."""

    sniffed_mime: MimeType | None = None
    extension_mime: MimeType | None = None
    content_type: MimeType | None = None
    content_disposition: Disposition = Disposition.NONE
    nosniff: bool = False
    auto_download: bool = False
    auto_open: bool = False


_MIME_FIELDS = ("sniffed_mime", "extension_mime", "content_type")
_BOOL_FIELDS = ("nosniff", "auto_download", "auto_open")
_FIELDS = _MIME_FIELDS + _BOOL_FIELDS + ("content_disposition",)


@dataclass(frozen=True)
class Leaf:
    action: Action


@dataclass(frozen=True)
class Predicate:
    field: str
    op: str
    value: str
    yes: Union["Predicate", Leaf]
    no: Union["Predicate", Leaf]


@dataclass(frozen=True)
class DecisionTree:
    name: str
    root: Union[Predicate, Leaf]


def _effective(ctx: RequestContext, field: str):
    # nosniff suppresses sniffing: predicates see the sniffed type as absent.
    if field == "sniffed_mime" and ctx.nosniff:
        return None
    return getattr(ctx, field)


def _eval(node: Predicate, ctx: RequestContext) -> bool:
    value = _effective(ctx, node.field)
    if node.op == "present":
        return value is not None
    if node.op == "is":
        if node.field in _BOOL_FIELDS:
            return value is (node.value == "true")
        if node.field == "content_disposition":
            return value == Disposition(node.value)
        return value is not None and value.key == parse_mime_type(node.value).key
    if node.op == "agrees":
        other = _effective(ctx, node.value)
        return value is not None and other is not None and value.key == other.key
    if node.op == "in":
        if value is None:
            return False
        allowed = {parse_mime_type(t).key for t in node.value.split(",")}
        return value.key in allowed
    raise AssertionError(f"unvalidated op {node.op}")  # load_tree rejects these


def run(tree: DecisionTree, ctx: RequestContext) -> Action:
    """Walk the tree to its leaf action; total for every context."""
    node = tree.root
    while isinstance(node, Predicate):
        node = node.yes if _eval(node, ctx) else node.no
    return node.action


def _validate_predicate(field: str, op: str, value: str, line_no: int) -> None:
    def bad(msg: str) -> MalformedTree:
        return MalformedTree(f"line {line_no}: {msg}")

    if field not in _FIELDS:
        raise bad(f"unknown field {field!r}")
    if op == "present":
        if field not in _MIME_FIELDS:
            raise bad(f"'present' only applies to type fields, not {field!r}")
        if value:
            raise bad("'present' takes no value")
    elif op == "is":
        if field in _BOOL_FIELDS:
            if value not in ("true", "false"):
                raise bad(f"boolean literal expected, got {value!r}")
        elif field == "content_disposition":
            if value not in [d.value for d in Disposition]:
                raise bad(f"unknown disposition {value!r}")
        else:
            parse_mime_type(value)
    elif op == "agrees":
        if field not in _MIME_FIELDS or value not in _MIME_FIELDS:
            raise bad("'agrees' compares two type fields")
    elif op == "in":
        if field not in _MIME_FIELDS:
            raise bad(f"'in' only applies to type fields, not {field!r}")
        if not value:
            raise bad("'in' needs a non-empty list")
        for token in value.split(","):
            parse_mime_type(token)
    else:
        raise bad(f"unknown op {op!r}")


def load_tree(source: str | Iterable[str], name: str = "tree") -> DecisionTree:
    """Parse and validate a tree description.

    Validation guarantees totality: every predicate has both branches (yes
    listed first), every path ends at a leaf, and predicates reference only
    request-context fields.
    """
    lines = source.splitlines() if isinstance(source, str) else list(source)
    items: list[tuple[int, int, str]] = []  # (line_no, depth, body)
    for line_no, raw in enumerate(lines, start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        stripped = raw.lstrip(" ")
        indent = len(raw) - len(stripped)
        if indent % 2 != 0:
            raise MalformedTree(f"line {line_no}: indentation must be a multiple of two spaces")
        items.append((line_no, indent // 2, stripped.rstrip()))
    if not items:
        raise MalformedTree("empty tree description")

    def build(index: int, depth: int) -> tuple[Union[Predicate, Leaf], int]:
        line_no, d, body = items[index]
        if d != depth:
            raise MalformedTree(f"line {line_no}: expected depth {depth}, found {d}")
        if body.startswith("!"):
            token = body[1:].strip()
            try:
                action = Action(token)
            except ValueError:
                raise MalformedTree(f"line {line_no}: unknown action {token!r}") from None
            return Leaf(action), index + 1
        if not body.startswith("?"):
            raise MalformedTree(f"line {line_no}: node must start with '?' or '!'")
        parts = body[1:].split(None, 2)
        if len(parts) < 2:
            raise MalformedTree(f"line {line_no}: predicate needs a field and an op")
        field, op = parts[0], parts[1]
        value = parts[2] if len(parts) == 3 else ""
        _validate_predicate(field, op, value, line_no)
        if index + 1 >= len(items) or items[index + 1][1] != depth + 1:
            raise MalformedTree(f"line {line_no}: predicate is missing its yes-branch")
        yes, nxt = build(index + 1, depth + 1)
        if nxt >= len(items) or items[nxt][1] != depth + 1:
            raise MalformedTree(f"line {line_no}: predicate is missing its no-branch")
        no, nxt = build(nxt, depth + 1)
        return Predicate(field, op, value, yes, no), nxt

    root, consumed = build(0, 0)
    if consumed != len(items):
        line_no = items[consumed][0]
        raise MalformedTree(f"line {line_no}: unexpected extra node after the tree root")
    return DecisionTree(name=name, root=root)


#: Default enumeration panel: five representative types plus "absent".
DEFAULT_MIME_PANEL: tuple[MimeType | None, ...] = (
    MimeType("application", "pdf"),
    MimeType("text", "html"),
    MimeType("text", "javascript"),
    MimeType("image", "gif"),
    MimeType("application", "zip"),
    None,
)


def enumerate_grid(
    mimes: Sequence[MimeType | None] = DEFAULT_MIME_PANEL,
) -> list[RequestContext]:
    """Cartesian product over the finite field alphabets (~5k points for the
    default six-type panel)."""
    grid = []
    for sniffed, ext, ct, disp, nosniff, auto_dl, auto_open in itertools.product(
        mimes, mimes, mimes, Disposition, (False, True), (False, True), (False, True)
    ):
        grid.append(RequestContext(
            sniffed_mime=sniffed,
            extension_mime=ext,
            content_type=ct,
            content_disposition=disp,
            nosniff=nosniff,
            auto_download=auto_dl,
            auto_open=auto_open,
        ))
    return grid


def context_sort_key(ctx: RequestContext):
    def mk(m: MimeType | None) -> str:
        return m.format() if m is not None else ""

    return (
        mk(ctx.sniffed_mime), mk(ctx.extension_mime), mk(ctx.content_type),
        ctx.content_disposition.value, ctx.nosniff, ctx.auto_download, ctx.auto_open,
    )


def differential(
    a: DecisionTree,
    b: DecisionTree,
    grid: Iterable[RequestContext],
) -> list[tuple[RequestContext, Action, Action]]:
    """Exactly the grid points where the two models act differently,
    sorted so the report is order-independent of the enumeration."""
    diverging = [
        (ctx, act_a, act_b)
        for ctx in grid
        for act_a, act_b in [(run(a, ctx), run(b, ctx))]
        if act_a != act_b
    ]
    diverging.sort(key=lambda item: context_sort_key(item[0]))
    return diverging
