"""Loaded registries plus the evidence-building step shared by the CLI and
the ingest pipeline."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .config import Config
from .discrepancy_engine import DiscrepancyReport, Evidence, evaluate
from .mime_db import ExtensionMap, MimeType, load_extension_map
from .name_analyzer import analyze_name
from .policy_engine import (
    ActiveRegistry,
    PolicyDecision,
    decide,
    get_allowed_handlers,
    load_active_registry,
)
from .sniffer import EMPTY_REPORT, SignatureDb, load_signatures, sniff
from .view_registry import (
    AttributeStore,
    AutoStore,
    SidecarStore,
    XattrStore,
    get_trust,
    read_provenance,
    read_views,
)


def make_store(config: Config) -> AttributeStore:
    sidecar = SidecarStore(config.sidecar_path)
    if config.backend == "sidecar":
        return sidecar
    xattr = XattrStore(overflow=sidecar)
    if config.backend == "xattr":
        return xattr
    return AutoStore(xattr, sidecar)


@dataclass(frozen=True)
class Runtime:
    """Immutable bundle of everything a pipeline run needs."""

    ext_map: ExtensionMap
    sig_db: SignatureDb
    active: ActiveRegistry
    store: AttributeStore
    models_dir: Path

    @classmethod
    def load(cls, config: Config | None = None) -> "Runtime":
        config = config or Config()
        ext_map, _ = load_extension_map(config.mime_types_path.read_text("utf-8"))
        sig_db = load_signatures(config.magic_path.read_text("utf-8"))
        active = load_active_registry(config.active_types_path.read_text("utf-8"))
        return cls(
            ext_map=ext_map,
            sig_db=sig_db,
            active=active,
            store=make_store(config),
            models_dir=config.models_dir,
        )


def build_evidence(
    runtime: Runtime,
    path: str | Path,
    declared_mime: MimeType | None = None,
    nosniff: bool = False,
) -> Evidence:
    """Gather every evidence source for one on-disk file.

    ``nosniff`` suppresses the sniffer's contribution the same way the
    browser models treat the corresponding response header.
    """
    path = Path(path)
    name_report = analyze_name(path.name, runtime.ext_map.known_extensions())
    extension_mime = (
        runtime.ext_map.primary(name_report.logical_extension)
        if name_report.logical_extension
        else None
    )
    if nosniff:
        sniff_report = EMPTY_REPORT
    else:
        sniff_report = sniff(path.read_bytes(), runtime.sig_db)
    return Evidence(
        extension_mime=extension_mime,
        sniff=sniff_report,
        declared_mime=declared_mime,
        views=tuple(read_views(runtime.store, path)),
        name_report=name_report,
        provenance=read_provenance(runtime.store, path),
    )


def assess_path(
    runtime: Runtime,
    path: str | Path,
    declared_mime: MimeType | None = None,
    nosniff: bool = False,
    handler: str | None = None,
) -> tuple[Evidence, DiscrepancyReport, PolicyDecision]:
    """Evidence, discrepancy report, and policy decision for one file."""
    evidence = build_evidence(runtime, path, declared_mime, nosniff)
    report = evaluate(evidence, runtime.active)
    decision = decide(
        report,
        trust=get_trust(runtime.store, path),
        handler=handler,
        policy=get_allowed_handlers(runtime.store, path),
    )
    return evidence, report, decision
