"""Declarative app specs: the contract between a community app and fedcore.

A spec file declares the objects, tables, views, sync bindings, and toolkit
transform assignments an app needs, split across the parent (community) and
child (member) nodes it runs on. Loading validates everything and reports
every violation at once; instantiation is atomic per fedcore. The file format
is documented in SPEC_FORMAT.md.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import yaml

from comverse.errors import InstantiationError, InvalidArgument, SpecValidationError
from comverse.fedcore.core import FedCore, SyncBinding, ViewSpec
from comverse.fedcore.store import COLUMN_TYPES, OBJECT_KINDS
from comverse.fedcore.toolkit import transform_known
from comverse.fedctl import ShareStatus
from comverse.identity import FedId

_SEMVER_RE = re.compile(r"^(\d+)\.(\d+)\.(\d+)$")

COMMUNITY_PLACEHOLDER = "$community"

NODES = ("parent", "child")


@dataclass(frozen=True)
class ObjectDecl:
    object_id: str
    role: str
    node: str


@dataclass(frozen=True)
class TableDecl:
    table_id: str
    schema: tuple[tuple[str, str], ...]
    node: str


@dataclass(frozen=True)
class BindingDecl:
    local_object: str
    remote_community: str  # concrete fedID or $community
    remote_object: str
    direction: str
    interval: int


@dataclass
class AppSpec:
    app_id: str
    version: str
    objects: list[ObjectDecl] = field(default_factory=list)
    tables: list[TableDecl] = field(default_factory=list)
    views: list[ViewSpec] = field(default_factory=list)
    bindings: list[BindingDecl] = field(default_factory=list)
    transforms: dict[str, list[dict]] = field(default_factory=dict)
    update_policy: dict = field(default_factory=dict)

    def objects_for(self, node: str) -> list[ObjectDecl]:
        return [o for o in self.objects if o.node == node]

    def to_doc(self) -> dict:
        return {
            "app": self.app_id,
            "version": self.version,
            "objects": [
                {"id": o.object_id, "role": o.role, "node": o.node} for o in self.objects
            ],
            "tables": [
                {"id": t.table_id, "schema": [list(c) for c in t.schema], "node": t.node}
                for t in self.tables
            ],
            "views": [
                {
                    "id": v.view_id,
                    "purpose": v.purpose,
                    "sources": list(v.source_refs),
                    "transform": v.transform,
                    "filter": v.filter,
                    "output": [list(c) for c in v.output_schema],
                    "refresh_interval": v.refresh_interval,
                }
                for v in self.views
            ],
            "bindings": [
                {
                    "local": b.local_object,
                    "remote": {"community": b.remote_community, "object": b.remote_object},
                    "direction": b.direction,
                    "interval": b.interval,
                }
                for b in self.bindings
            ],
            "transforms": {k: list(v) for k, v in self.transforms.items()},
            "policy": dict(self.update_policy),
        }

    def serialize(self) -> str:
        return yaml.safe_dump(self.to_doc(), sort_keys=False)


def parse_version(version: str) -> tuple[int, int, int]:
    match = _SEMVER_RE.match(version or "")
    if not match:
        raise InvalidArgument(f"malformed semantic version {version!r}")
    return tuple(int(g) for g in match.groups())  # type: ignore[return-value]


def check_compatibility(parent: str, child: str) -> tuple[bool, str]:
    """Parent/child app versions are compatible iff their majors match."""
    p, c = parse_version(parent), parse_version(child)
    if p[0] != c[0]:
        return False, f"major version mismatch: {parent} vs {child}"
    return True, ""


def load_spec(document: str | dict) -> AppSpec:
    doc = yaml.safe_load(document) if isinstance(document, str) else document
    if not isinstance(doc, dict):
        raise SpecValidationError(["spec document must be a mapping"])
    problems: list[str] = []

    app_id = doc.get("app") or ""
    if not app_id:
        problems.append("missing app id")
    version = str(doc.get("version", ""))
    try:
        parse_version(version)
    except InvalidArgument as exc:
        problems.append(str(exc))

    objects: list[ObjectDecl] = []
    seen_ids: set[str] = set()
    for odoc in doc.get("objects") or []:
        oid = odoc.get("id", "")
        role = odoc.get("role", "raw")
        node = odoc.get("node", "parent")
        if not oid:
            problems.append("object with missing id")
            continue
        if oid in seen_ids:
            problems.append(f"duplicate object id {oid!r}")
        seen_ids.add(oid)
        if role not in OBJECT_KINDS:
            problems.append(f"object {oid}: unknown role {role!r}")
        if node not in NODES:
            problems.append(f"object {oid}: unknown node {node!r}")
        objects.append(ObjectDecl(object_id=oid, role=role, node=node))
    declared = {o.object_id for o in objects}
    aggregates = {o.object_id for o in objects if o.role == "aggregate"}

    tables: list[TableDecl] = []
    for tdoc in doc.get("tables") or []:
        tid = tdoc.get("id", "")
        if not tid:
            problems.append("table with missing id")
            continue
        schema = tuple((str(c[0]), str(c[1])) for c in tdoc.get("schema") or [])
        for name, ctype in schema:
            if ctype not in COLUMN_TYPES:
                problems.append(f"table {tid}: unknown column type {ctype!r}")
        node = tdoc.get("node", "parent")
        if node not in NODES:
            problems.append(f"table {tid}: unknown node {node!r}")
        tables.append(TableDecl(table_id=tid, schema=schema, node=node))

    views: list[ViewSpec] = []
    for vdoc in doc.get("views") or []:
        view = ViewSpec(
            view_id=vdoc.get("id", ""),
            purpose=vdoc.get("purpose", ""),
            source_refs=tuple(vdoc.get("sources") or []),
            transform=vdoc.get("transform", ""),
            output_schema=tuple((str(c[0]), str(c[1])) for c in vdoc.get("output") or []),
            refresh_interval=int(vdoc.get("refresh_interval", 0)),
            filter=vdoc.get("filter"),
        )
        problems.extend(view.validate())
        for ref in view.source_refs:
            if ref in aggregates:
                problems.append(f"view {view.view_id}: aggregate object {ref!r} used as raw source")
        views.append(view)
    if views and not objects:
        problems.append("spec declares views but no objects to source them")

    bindings: list[BindingDecl] = []
    for bdoc in doc.get("bindings") or []:
        remote = bdoc.get("remote") or {}
        binding = BindingDecl(
            local_object=bdoc.get("local", ""),
            remote_community=remote.get("community", COMMUNITY_PLACEHOLDER),
            remote_object=remote.get("object", ""),
            direction=bdoc.get("direction", ""),
            interval=int(bdoc.get("interval", 0)),
        )
        if binding.local_object not in declared:
            problems.append(f"binding references undeclared local object {binding.local_object!r}")
        if binding.remote_object not in declared:
            problems.append(f"binding references undeclared remote object {binding.remote_object!r}")
        if binding.direction not in ("pull", "push"):
            problems.append(f"binding {binding.local_object}: direction must be pull or push")
        if binding.interval <= 0:
            problems.append(f"binding {binding.local_object}: interval must be positive")
        bindings.append(binding)

    transforms: dict[str, list[dict]] = {}
    for oid, stages in (doc.get("transforms") or {}).items():
        if oid not in declared:
            problems.append(f"transforms assigned to undeclared object {oid!r}")
        stage_docs = []
        for stage in stages or []:
            sdoc = {"name": stage} if isinstance(stage, str) else dict(stage)
            if not transform_known(sdoc.get("name", "")):
                problems.append(f"unknown toolkit transform {sdoc.get('name')!r} on object {oid}")
            stage_docs.append(sdoc)
        transforms[oid] = stage_docs

    policy = dict(doc.get("policy") or {})
    round_policy = policy.get("round")
    if round_policy is not None:
        for key in ("accumulator", "result"):
            target = round_policy.get(key, "")
            if target not in declared:
                problems.append(f"round policy {key} {target!r} is not a declared object")
            elif target not in aggregates:
                problems.append(f"round policy {key} {target!r} must be an aggregate object")

    if problems:
        raise SpecValidationError(problems)
    return AppSpec(
        app_id=app_id,
        version=version,
        objects=objects,
        tables=tables,
        views=views,
        bindings=bindings,
        transforms=transforms,
        update_policy=policy,
    )


@dataclass
class Registration:
    app_id: str
    version: str
    node: str
    object_ids: list[str]
    view_ids: list[str]
    events: list[dict] = field(default_factory=list)


def instantiate(
    spec: AppSpec, fedcore: FedCore, node: str = "parent", community: FedId | None = None
) -> Registration:
    """Create the spec's objects/views/bindings on one fedcore, atomically.

    `community` resolves the $community placeholder in bindings and must be an
    active membership of the hosting fedlet. Re-instantiating the same
    app+version+node is a no-op.
    """
    if node not in NODES:
        raise InvalidArgument(f"unknown node {node!r}")
    key = (spec.app_id, f"{spec.version}:{node}")
    local_objects = spec.objects_for(node)
    local_ids = [o.object_id for o in local_objects]
    local_bindings = [b for b in spec.bindings if b.local_object in local_ids]
    view_ids = [v.view_id for v in spec.views] if node == "parent" else []

    if key in fedcore.registrations:
        return Registration(
            app_id=spec.app_id, version=spec.version, node=node,
            object_ids=local_ids, view_ids=view_ids,
        )

    # Pre-flight: every remote binding needs an active membership.
    for binding in local_bindings:
        target = binding.remote_community
        if target == COMMUNITY_PLACEHOLDER:
            if community is None:
                raise InstantiationError(
                    f"binding {binding.local_object}: no community given for $community"
                )
            target = community.value
        entry = fedcore.fedlet.fedctl.communities.get(target)
        is_own_member = target in fedcore.fedlet.fedctl.members
        if not is_own_member and (entry is None or entry.share_status is not ShareStatus.ACTIVE):
            raise InstantiationError(
                f"binding {binding.local_object}: not an active member of community {target}"
            )

    created: list[str] = []
    try:
        for odecl in local_objects:
            fedcore.create_object(odecl.object_id, kind=odecl.role)
            created.append(odecl.object_id)
        for tdecl in spec.tables:
            if tdecl.node == node:
                fedcore.create_table(tdecl.table_id, list(tdecl.schema))
        for binding in local_bindings:
            target = binding.remote_community
            if target == COMMUNITY_PLACEHOLDER:
                assert community is not None
                target = community.value
            fedcore.add_binding(
                SyncBinding(
                    local_object=binding.local_object,
                    remote=(FedId(target), binding.remote_object),
                    direction=binding.direction,
                    interval=binding.interval,
                    transforms=tuple(spec.transforms.get(binding.local_object, ())),
                )
            )
        if node == "parent":
            for view in spec.views:
                fedcore.define_view(view)
            round_policy = spec.update_policy.get("round")
            if round_policy is not None:
                fedcore.configure_rounds(
                    accumulator=round_policy["accumulator"],
                    result=round_policy["result"],
                    timeout=int(round_policy.get("timeout", fedcore.fedlet.config.round_timeout)),
                    interval=round_policy.get("interval"),
                )
    except Exception:
        fedcore.drop_app_state(created)
        raise

    registration = Registration(
        app_id=spec.app_id, version=spec.version, node=node,
        object_ids=local_ids, view_ids=view_ids,
    )
    fedcore.notifier.subscribe(
        spec.app_id, set(local_ids) | set(view_ids), registration.events.append
    )
    fedcore.registrations.add(key)
    return registration
