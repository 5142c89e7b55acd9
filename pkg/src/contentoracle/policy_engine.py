"""Active-content registry, trust-aware decisions, per-file handler lists.

Activity uses union semantics: a type is active when the shipped base set
or any application's claim says so, because one application's knowledge
should protect every other one.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping

from .discrepancy_engine import DiscrepancyReport, Severity
from .mime_db import MimeType, parse_mime_type
from .view_registry import AttributeStore, POLICY_KEY, TrustState, _canonical_json


@dataclass(frozen=True)
class ActiveRegistry:
    """Which types count as active (executable) content.

    ``base_active`` ships with the package; ``app_claims`` collects what
    individual applications have declared active. Parameters are irrelevant
    to activity, so membership is by (family, subtype).
    """

    base_active: frozenset[tuple[str, str]] = frozenset()
    app_claims: Mapping[str, frozenset[tuple[str, str]]] = field(default_factory=dict)

    def is_active(self, mime: MimeType) -> bool:
        if mime.key in self.base_active:
            return True
        return any(mime.key in claimed for claimed in self.app_claims.values())

    def with_claim(self, app_id: str, types: Iterable[MimeType]) -> "ActiveRegistry":
        claims = {k: v for k, v in self.app_claims.items()}
        merged = claims.get(app_id, frozenset()) | {m.key for m in types}
        claims[app_id] = merged
        return ActiveRegistry(self.base_active, claims)


def is_active(mime: MimeType, registry: ActiveRegistry) -> bool:
    return registry.is_active(mime)


def load_active_registry(source: str | Iterable[str]) -> ActiveRegistry:
    """Load the base active set: one type per line, "#" comments."""
    lines = source.splitlines() if isinstance(source, str) else source
    base: set[tuple[str, str]] = set()
    for raw in lines:
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        base.add(parse_mime_type(line).key)
    return ActiveRegistry(base_active=frozenset(base))


@dataclass(frozen=True)
class HandlerPolicy:
    """Which applications may be invoked for one particular file.

    An empty ``allowed`` list with ``deny_all`` unset means no restriction
    was recorded; the explicit deny-all sentinel refuses every handler.
    """

    allowed: tuple[str, ...] = ()
    deny_all: bool = False

    @property
    def restricts(self) -> bool:
        return self.deny_all or bool(self.allowed)

    def permits(self, app_id: str) -> bool:
        if self.deny_all:
            return False
        if not self.allowed:
            return True
        return app_id in self.allowed


NO_RESTRICTION = HandlerPolicy()
DENY_ALL = HandlerPolicy(deny_all=True)


def set_handler_policy(store: AttributeStore, path: str | Path, policy: HandlerPolicy) -> None:
    os.stat(path)
    payload = _canonical_json({
        "v": 1,
        "deny_all": policy.deny_all,
        "handlers": list(policy.allowed),
    })
    with store.lock(path):
        store.set(path, POLICY_KEY, payload)


def set_allowed_handlers(store: AttributeStore, path: str | Path, apps: Iterable[str]) -> None:
    set_handler_policy(store, path, HandlerPolicy(allowed=tuple(apps)))


def get_allowed_handlers(store: AttributeStore, path: str | Path) -> HandlerPolicy:
    os.stat(path)
    raw = store.get(path, POLICY_KEY)
    if raw is None:
        return NO_RESTRICTION
    doc = json.loads(raw)
    return HandlerPolicy(
        allowed=tuple(doc.get("handlers", ())),
        deny_all=bool(doc.get("deny_all", False)),
    )


class Verdict(Enum):
    ALLOW = "allow"
    WARN = "warn"
    DENY = "deny"


@dataclass(frozen=True)
class PolicyDecision:
    verdict: Verdict
    reasons: tuple[str, ...]


def decide(
    report: DiscrepancyReport,
    trust: TrustState,
    handler: str | None = None,
    policy: HandlerPolicy = NO_RESTRICTION,
) -> PolicyDecision:
    """Combine discrepancies, trust state, and handler policy into a verdict.

    Handler restrictions are absolute. Critical findings deny unless the
    file carries a valid trust decision, in which case they only warn: the
    user asked for the file but still deserves to hear that something about
    it flipped. Warnings (or an invalidated trust record) warn; everything
    else is allowed.
    """
    if handler is not None and policy.restricts and not policy.permits(handler):
        reason = "handler policy denies all applications" if policy.deny_all else \
            f"handler {handler!r} not in allowed list [{', '.join(policy.allowed)}]"
        return PolicyDecision(Verdict.DENY, (reason,))

    max_sev = report.max_severity
    kinds = sorted({d.kind.value for d in report.discrepancies})
    if max_sev == Severity.CRITICAL and trust is not TrustState.TRUSTED:
        return PolicyDecision(
            Verdict.DENY,
            (f"critical discrepancies: {', '.join(kinds)}", f"trust state: {trust.value}"),
        )
    if (max_sev is not None and max_sev >= Severity.WARNING) or trust is TrustState.INVALIDATED:
        reasons = []
        if max_sev is not None and max_sev >= Severity.WARNING:
            reasons.append(f"discrepancies at or above warning: {', '.join(kinds)}")
        if max_sev == Severity.CRITICAL:
            reasons.append("critical findings downgraded by valid trust record")
        if trust is TrustState.INVALIDATED:
            reasons.append("trust record invalidated by content change")
        return PolicyDecision(Verdict.WARN, tuple(reasons))
    if report.discrepancies:
        return PolicyDecision(Verdict.ALLOW, (f"informational findings only: {', '.join(kinds)}",))
    return PolicyDecision(Verdict.ALLOW, ())
