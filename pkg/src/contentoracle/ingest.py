"""Fetch content over HTTP, persist provenance, and run the full pipeline.

The fetch step captures the three identification-relevant response headers
byte-verbatim, saves the body under a sanitized name derived from the URL,
and stamps the file with origin/referrer attributes. Assessment then treats
the saved artifact exactly like any local file.
"""

from __future__ import annotations

import shutil
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping
from urllib.parse import unquote, urlsplit

from .discrepancy_engine import DiscrepancyReport, Evidence
from .errors import HttpError, NetworkError
from .mime_db import MimeType, parse_mime_type
from .name_analyzer import strip_bidi_controls
from .policy_engine import PolicyDecision
from .runtime import Runtime, assess_path
from .view_registry import (
    AttributeStore,
    ContentView,
    ORIGIN_KEY,
    REFERRER_KEY,
    content_identity,
    record_view,
)

INGEST_APP_ID = "contentoracle.ingest"

#: Response headers captured verbatim for identification purposes.
CAPTURED_HEADERS = ("Content-Type", "Content-Disposition", "X-Content-Type-Options")

MAX_REDIRECTS = 5

_FALLBACK_NAME = "download"


@dataclass(frozen=True)
class FetchRecord:
    """One completed download plus the metadata identification needs."""

    url: str
    final_url: str
    status: int
    headers: Mapping[str, str]
    body_path: Path
    fetched_at: int
    sanitizations: tuple[str, ...] = ()


class _BoundedRedirects(urllib.request.HTTPRedirectHandler):
    max_redirections = MAX_REDIRECTS


def sanitize_url_filename(url: str) -> tuple[str, tuple[str, ...]]:
    """Destination filename from the URL path's final segment.

    Traversal and display tricks are neutralized: percent-encoding is
    decoded first so smuggled separators cannot survive, directional
    override characters are stripped (and reported), and dot-only names
    fall back to a fixed placeholder.
    """
    notes: list[str] = []
    segment = urlsplit(url).path.rsplit("/", 1)[-1]
    segment = unquote(segment)
    for sep in ("/", "\\"):
        if sep in segment:
            segment = segment.rsplit(sep, 1)[-1]
            notes.append(f"dropped path components reintroduced by percent-decoding ({sep!r})")
    stripped = strip_bidi_controls(segment)
    if stripped != segment:
        notes.append("stripped directional-override characters")
    segment = "".join(c for c in stripped if ord(c) >= 0x20)
    if len(segment) > 255:
        segment = segment[:255]
        notes.append("truncated overlong name")
    if segment in ("", ".", ".."):
        segment = _FALLBACK_NAME
        notes.append("empty or dot-only name replaced")
    return segment, tuple(notes)


def fetch(
    url: str,
    dest_dir: str | Path,
    store: AttributeStore,
    referrer: str | None = None,
    now: int | None = None,
    timeout: float = 30.0,
) -> FetchRecord:
    """Download ``url`` into ``dest_dir`` and stamp provenance attributes.

    Redirects are followed to depth 5 and the final URL is what gets
    recorded as the origin. Non-success statuses raise
    :class:`HttpError` and persist nothing.
    """
    dest_dir = Path(dest_dir)
    opener = urllib.request.build_opener(_BoundedRedirects())
    request = urllib.request.Request(url)
    if referrer:
        request.add_header("Referer", referrer)
    try:
        response = opener.open(request, timeout=timeout)
    except urllib.error.HTTPError as exc:
        if 300 <= exc.code < 400:
            raise NetworkError(f"redirect limit exceeded fetching {url}") from exc
        raise HttpError(exc.code, f"HTTP {exc.code} fetching {url}") from exc
    except urllib.error.URLError as exc:
        raise NetworkError(f"cannot fetch {url}: {exc.reason}") from exc

    with response:
        final_url = response.geturl()
        status = response.status
        headers = {
            name: response.headers[name]
            for name in CAPTURED_HEADERS
            if response.headers[name] is not None
        }
        name, notes = sanitize_url_filename(final_url)
        dest_dir.mkdir(parents=True, exist_ok=True)
        dest = dest_dir / name
        if dest.resolve().parent != dest_dir.resolve():  # pragma: no cover - sanitizer guarantees this
            raise NetworkError(f"refusing to write outside {dest_dir}")
        partial = dest_dir / f".{name}.part"
        with open(partial, "wb") as out:
            shutil.copyfileobj(response, out)
        partial.replace(dest)

    store.set(dest, ORIGIN_KEY, final_url.encode("utf-8"))
    if referrer:
        store.set(dest, REFERRER_KEY, referrer.encode("utf-8"))
    return FetchRecord(
        url=url,
        final_url=final_url,
        status=status,
        headers=headers,
        body_path=dest,
        fetched_at=int(time.time()) if now is None else now,
        sanitizations=notes,
    )


def declared_mime(record: FetchRecord) -> MimeType | None:
    """The parsed Content-Type header, or None when absent or unparseable."""
    raw = record.headers.get("Content-Type")
    if not raw:
        return None
    try:
        return parse_mime_type(raw)
    except Exception:
        return None


def nosniff(record: FetchRecord) -> bool:
    raw = record.headers.get("X-Content-Type-Options", "")
    return "nosniff" in [token.strip().lower() for token in raw.split(",")]


def assess_record(
    record: FetchRecord,
    runtime: Runtime,
    now: int | None = None,
) -> tuple[Evidence, DiscrepancyReport, PolicyDecision]:
    """Evaluate a fetched artifact and record this pipeline's own view.

    A nosniff response header suppresses the sniffer's contribution to the
    evidence, mirroring the browser models. The resulting opinion is
    written back as a content view under the ingest application id; the
    returned evidence is the pre-recording snapshot the report was
    computed from.
    """
    evidence, report, decision = assess_path(
        runtime,
        record.body_path,
        declared_mime=declared_mime(record),
        nosniff=nosniff(record),
    )
    resolved = report.resolved_mime or MimeType("application", "octet-stream")
    view = ContentView(
        app_id=INGEST_APP_ID,
        mime=resolved,
        active=runtime.active.is_active(resolved),
        content_hash=content_identity(record.body_path),
        recorded_at=int(time.time()) if now is None else now,
    )
    record_view(runtime.store, record.body_path, view)
    return evidence, report, decision


def assess(
    record: FetchRecord,
    runtime: Runtime,
    now: int | None = None,
) -> tuple[DiscrepancyReport, PolicyDecision]:
    _, report, decision = assess_record(record, runtime, now=now)
    return report, decision
