"""MIME type parsing, the extension<->type database, and handler registration.

Everything in here is immutable after construction: loading returns fresh
values and registration returns a modified copy, so shared instances are safe
for unsynchronized concurrent reads.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

from .errors import MalformedMime

#: The nine top-level media-type families with official standing.
IANA_FAMILIES = frozenset({
    "application", "audio", "font", "image", "message",
    "model", "multipart", "text", "video",
})

# Token characters for family/subtype/parameter-name fields. Deliberately the
# HTTP tchar set: concrete enough to test against without a full grammar.
_TOKEN_CHARS = frozenset(
    "!#$%&'*+-.^_`|~"
    "0123456789"
    "abcdefghijklmnopqrstuvwxyz"
    "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
)


def _check_token(token: str, context: str) -> None:
    if not token:
        raise MalformedMime(f"empty token in {context!r}")
    bad = [c for c in token if c not in _TOKEN_CHARS]
    if bad:
        raise MalformedMime(f"illegal character {bad[0]!r} in {context!r}")


def _check_param_value(value: str, context: str) -> None:
    for c in value:
        if c == ";" or not (0x20 <= ord(c) <= 0x7E):
            raise MalformedMime(f"illegal parameter value character {c!r} in {context!r}")


@dataclass(frozen=True, eq=False)
class MimeType:
    """A parsed media type: family/subtype plus ordered parameters.

    Parameter names compare case-insensitively, values case-sensitively.
    """

    family: str
    subtype: str
    parameters: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        _check_token(self.family, self.family)
        _check_token(self.subtype, self.subtype)
        if self.family != self.family.lower() or self.subtype != self.subtype.lower():
            raise MalformedMime(f"family/subtype must be lowercase: {self.family}/{self.subtype}")
        for name, value in self.parameters:
            _check_token(name, name)
            _check_param_value(value, name)

    @property
    def key(self) -> tuple[str, str]:
        """(family, subtype) pair, the identity used when parameters are irrelevant."""
        return (self.family, self.subtype)

    def same_type(self, other: "MimeType") -> bool:
        return self.key == other.key

    def format(self) -> str:
        parts = [f"{self.family}/{self.subtype}"]
        parts.extend(f"; {name}={value}" for name, value in self.parameters)
        return "".join(parts)

    def _cmp_key(self):
        return (self.family, self.subtype,
                tuple((name.lower(), value) for name, value in self.parameters))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MimeType):
            return NotImplemented
        return self._cmp_key() == other._cmp_key()

    def __hash__(self) -> int:
        return hash(self._cmp_key())

    def __str__(self) -> str:
        return self.format()

    def __repr__(self) -> str:
        return f"MimeType({self.format()!r})"


def parse_mime_type(text: str) -> MimeType:
    """Parse ``family/subtype[; name=value]*`` into a :class:`MimeType`.

    Surrounding whitespace is trimmed and family/subtype are lowercased;
    parameter order is preserved. Raises :class:`MalformedMime` on a missing
    "/" separator, empty tokens, or illegal characters.
    """
    body = text.strip()
    type_part, _, param_part = body.partition(";")
    if "/" not in type_part:
        raise MalformedMime(f"missing '/' separator in {text!r}")
    family, _, subtype = type_part.partition("/")
    params: list[tuple[str, str]] = []
    for segment in param_part.split(";") if param_part else ():
        segment = segment.strip()
        if not segment:
            continue  # tolerate stray/trailing semicolons
        if "=" not in segment:
            raise MalformedMime(f"parameter without '=' in {text!r}")
        name, _, value = segment.partition("=")
        params.append((name.strip(), value.strip()))
    try:
        return MimeType(family.lower(), subtype.lower(), tuple(params))
    except MalformedMime as exc:
        raise MalformedMime(f"{exc} (while parsing {text!r})") from None


class RegistrationClass(Enum):
    """Where a media type stands with respect to the official registry."""

    OFFICIAL_FAMILY = "official_family"
    UNOFFICIAL_SUBTYPE = "unofficial_subtype"
    UNKNOWN_FAMILY = "unknown_family"


def classify_registration(m: MimeType) -> RegistrationClass:
    """Classify a type as official, x-prefixed within an official family, or
    belonging to an out-of-registry family (chemical, inode, x-conference...).

    Vendor-style ``vnd.`` and ``x.`` subtype prefixes count as official; only
    the conventional ``x-`` prefix marks a subtype unofficial.
    """
    if m.family not in IANA_FAMILIES:
        return RegistrationClass.UNKNOWN_FAMILY
    if m.subtype.startswith("x-"):
        return RegistrationClass.UNOFFICIAL_SUBTYPE
    return RegistrationClass.OFFICIAL_FAMILY


def normalize_extension(ext: str) -> str:
    """Canonical extension key: NFC-normalized, lowercased, no leading dot."""
    ext = unicodedata.normalize("NFC", ext.strip())
    if ext.startswith("."):
        ext = ext[1:]
    return ext.lower()


@dataclass(frozen=True)
class MalformedLine:
    """One unparseable line of a mime.types-style file; loading continues."""

    line_no: int
    line: str
    reason: str


@dataclass(frozen=True)
class ExtensionMap:
    """Forward extension->types and reverse type->extensions indexes.

    Forward lists preserve source order; the first entry for an extension is
    its primary mapping. ``reverse`` also carries types registered with zero
    extensions (empty extension list).
    """

    entries: Mapping[str, tuple[MimeType, ...]] = field(default_factory=dict)
    reverse: Mapping[MimeType, tuple[str, ...]] = field(default_factory=dict)

    def lookup(self, ext: str) -> tuple[MimeType, ...]:
        return self.entries.get(normalize_extension(ext), ())

    def primary(self, ext: str) -> MimeType | None:
        types = self.lookup(ext)
        return types[0] if types else None

    def extensions_for(self, mime: MimeType) -> tuple[str, ...]:
        return self.reverse.get(mime, ())

    def types(self) -> frozenset[MimeType]:
        return frozenset(self.reverse)

    def known_extensions(self) -> frozenset[str]:
        return frozenset(self.entries)


def load_extension_map(source: str | Iterable[str]) -> tuple[ExtensionMap, list[MalformedLine]]:
    """Load a mime.types-style file: ``type ext1 ext2 ...`` per line.

    "#" comments and blank lines are ignored; fields are whitespace-separated
    with the type first. Later lines append and never overwrite earlier ones.
    Bad lines are skipped and reported with their line number.
    """
    lines = source.splitlines() if isinstance(source, str) else source
    entries: dict[str, list[MimeType]] = {}
    reverse: dict[MimeType, list[str]] = {}
    errors: list[MalformedLine] = []
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        try:
            mime = parse_mime_type(fields[0])
        except MalformedMime as exc:
            errors.append(MalformedLine(line_no, raw.rstrip("\n"), str(exc)))
            continue
        reverse.setdefault(mime, [])
        for token in fields[1:]:
            ext = normalize_extension(token)
            if not ext:
                errors.append(MalformedLine(line_no, raw.rstrip("\n"), f"empty extension token {token!r}"))
                continue
            bucket = entries.setdefault(ext, [])
            if mime not in bucket:
                bucket.append(mime)
            if ext not in reverse[mime]:
                reverse[mime].append(ext)
    return (
        ExtensionMap(
            entries={k: tuple(v) for k, v in entries.items()},
            reverse={k: tuple(v) for k, v in reverse.items()},
        ),
        errors,
    )


@dataclass(frozen=True)
class FamilyStats:
    official: int = 0
    unofficial_subtype: int = 0
    unknown_family: int = 0

    @property
    def total(self) -> int:
        return self.official + self.unofficial_subtype + self.unknown_family


def db_stats(ext_map: ExtensionMap) -> dict[str, FamilyStats]:
    """Per-family counts of distinct types by registration class.

    The three counters partition the distinct types of each family, so the
    grand total equals the number of distinct types in the map.
    """
    buckets: dict[str, dict[RegistrationClass, int]] = {}
    for mime in ext_map.types():
        per_class = buckets.setdefault(mime.family, {})
        cls = classify_registration(mime)
        per_class[cls] = per_class.get(cls, 0) + 1
    return {
        family: FamilyStats(
            official=per_class.get(RegistrationClass.OFFICIAL_FAMILY, 0),
            unofficial_subtype=per_class.get(RegistrationClass.UNOFFICIAL_SUBTYPE, 0),
            unknown_family=per_class.get(RegistrationClass.UNKNOWN_FAMILY, 0),
        )
        for family, per_class in sorted(buckets.items())
    }


@dataclass(frozen=True)
class HandlerRegistry:
    """Applications registered per type, with an optional per-type default.

    The default, when set, is always a member of the entry list.
    """

    entries: Mapping[MimeType, tuple[str, ...]] = field(default_factory=dict)
    defaults: Mapping[MimeType, str] = field(default_factory=dict)

    def handlers_for(self, mime: MimeType) -> tuple[str, ...]:
        return self.entries.get(mime, ())

    def default_for(self, mime: MimeType) -> str | None:
        return self.defaults.get(mime)


def register_handler(
    registry: HandlerRegistry,
    app_id: str,
    types: Iterable[MimeType],
    make_default: bool = False,
) -> HandlerRegistry:
    """Return a new registry with ``app_id`` registered for ``types``.

    Registration is idempotent per (app, type). With ``make_default`` the app
    displaces any previous default for each listed type, mirroring the
    newest-user-registration-wins precedence of desktop handler databases.
    """
    if not app_id:
        raise ValueError("app_id must be non-empty")
    entries = {k: list(v) for k, v in registry.entries.items()}
    defaults = dict(registry.defaults)
    for mime in types:
        bucket = entries.setdefault(mime, [])
        if app_id not in bucket:
            bucket.append(app_id)
        if make_default:
            defaults[mime] = app_id
    return HandlerRegistry(
        entries={k: tuple(v) for k, v in entries.items()},
        defaults=defaults,
    )
