"""Mapping blocks to the entities that produced them.

Attribution proceeds in three stages, in strict order:

1. tag rules: the first pattern that occurs as a substring of the block's
   tag wins (list order from the rules file, case-sensitive);
2. address rules: exact match on the reward address;
3. fallback: the reward address itself (or ``height:<h>`` when the address
   is empty) becomes a synthetic one-off entity.

Cluster rules then replace a matched entity's name with its cluster's
canonical name. Clusters are applied only after stage 1 or 2 succeeded;
synthetic entities are never merged.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Optional, Sequence, Union

from .ingest import BlockDataset, BlockRecord


@dataclass(frozen=True)
class EntityId:
    """A resolved producer name; `synthetic` marks fallback identities."""

    name: str
    synthetic: bool = False

    def __post_init__(self):
        if not self.name:
            raise ValueError("entity name must be non-empty")


@dataclass(frozen=True)
class Cluster:
    canonical: str
    members: frozenset[str]


@dataclass(frozen=True)
class AttributionRules:
    """Validated tag, address, and cluster rules.

    Tag patterns are tried in list order; cluster member sets must be
    pairwise disjoint and canonical names unique. A canonical name may only
    appear as a member of its own cluster, which keeps canonicalization
    idempotent.
    """

    tag_rules: tuple[tuple[str, str], ...] = ()
    address_rules: dict[str, str] = field(default_factory=dict)
    clusters: tuple[Cluster, ...] = ()

    def __post_init__(self):
        for pattern, entity in self.tag_rules:
            if not pattern:
                raise ValueError(f"empty tag pattern for entity {entity!r}")
            if not entity:
                raise ValueError(f"empty entity name for pattern {pattern!r}")
        seen_members: dict[str, str] = {}
        seen_canonical: set[str] = set()
        for cluster in self.clusters:
            if cluster.canonical in seen_canonical:
                raise ValueError(
                    f"duplicate canonical cluster name {cluster.canonical!r}"
                )
            seen_canonical.add(cluster.canonical)
            for member in cluster.members:
                if member in seen_members:
                    raise ValueError(
                        f"entity {member!r} appears in more than one cluster"
                    )
                seen_members[member] = cluster.canonical
        for canonical in seen_canonical:
            target = seen_members.get(canonical)
            if target is not None and target != canonical:
                raise ValueError(
                    f"canonical name {canonical!r} is a member of another cluster"
                )
        object.__setattr__(self, "_member_to_canonical", seen_members)

    def canonicalize(self, entity: str) -> str:
        """Replace an entity name by its cluster's canonical name, if any."""
        return self._member_to_canonical.get(entity, entity)


def _read_json(stream: Union[bytes, BinaryIO, None], label: str):
    if stream is None:
        return None
    data = stream if isinstance(stream, bytes) else stream.read()
    try:
        return json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ValueError(f"{label}: invalid JSON: {e}") from None


def load_rules(
    tag_file: Union[bytes, BinaryIO, None] = None,
    address_file: Union[bytes, BinaryIO, None] = None,
    cluster_file: Union[bytes, BinaryIO, None] = None,
) -> AttributionRules:
    """Load attribution rules from three JSON documents.

    tag_file: ordered array of {"pattern": str, "entity": str}.
    address_file: object mapping reward address to entity name.
    cluster_file: array of {"canonical": str, "members": [str, ...]}.

    Any argument may be None or empty, meaning no rules of that kind.
    """
    tag_doc = _read_json(tag_file, "tags file")
    tag_rules: list[tuple[str, str]] = []
    if tag_doc is not None:
        if not isinstance(tag_doc, list):
            raise ValueError("tags file: expected a JSON array")
        for i, item in enumerate(tag_doc):
            if not isinstance(item, dict) or "pattern" not in item or "entity" not in item:
                raise ValueError(f"tags file: entry {i}: expected pattern/entity keys")
            tag_rules.append((str(item["pattern"]), str(item["entity"])))

    addr_doc = _read_json(address_file, "addresses file")
    address_rules: dict[str, str] = {}
    if addr_doc is not None:
        if not isinstance(addr_doc, dict):
            raise ValueError("addresses file: expected a JSON object")
        address_rules = {str(k): str(v) for k, v in addr_doc.items()}

    cluster_doc = _read_json(cluster_file, "clusters file")
    clusters: list[Cluster] = []
    if cluster_doc is not None:
        if not isinstance(cluster_doc, list):
            raise ValueError("clusters file: expected a JSON array")
        for i, item in enumerate(cluster_doc):
            if not isinstance(item, dict) or "canonical" not in item or "members" not in item:
                raise ValueError(
                    f"clusters file: entry {i}: expected canonical/members keys"
                )
            clusters.append(
                Cluster(str(item["canonical"]), frozenset(str(m) for m in item["members"]))
            )

    return AttributionRules(
        tag_rules=tuple(tag_rules),
        address_rules=address_rules,
        clusters=tuple(clusters),
    )


def _resolve(record: BlockRecord, rules: AttributionRules) -> tuple[EntityId, str, bool]:
    """Return (entity, stage, cluster_merged) for one block.

    stage is "tag", "address", or "synthetic".
    """
    matched = None
    stage = "synthetic"
    for pattern, entity in rules.tag_rules:
        if pattern in record.tag:
            matched, stage = entity, "tag"
            break
    if matched is None:
        matched = rules.address_rules.get(record.reward_address)
        if matched is not None:
            stage = "address"
    if matched is None:
        name = record.reward_address or f"height:{record.height}"
        return EntityId(name, synthetic=True), stage, False
    canonical = rules.canonicalize(matched)
    return EntityId(canonical, synthetic=False), stage, canonical != matched


def attribute_block(record: BlockRecord, rules: AttributionRules) -> EntityId:
    """Resolve the entity behind one block. Total: never fails.

    Matched entities (via tag or address) pass through cluster
    canonicalization; fallback identities do not.
    """
    return _resolve(record, rules)[0]


@dataclass(frozen=True)
class AttributionResult:
    """Per-block attributions plus how each match was made.

    `cluster_merged` counts blocks whose resolved entity was renamed by a
    cluster rule; those blocks are also counted under tag or address.
    """

    pairs: tuple[tuple[BlockRecord, EntityId], ...]
    matched_by_tag: int
    matched_by_address: int
    cluster_merged: int
    synthetic: int


def attribute_dataset(
    dataset: Union[BlockDataset, Sequence[BlockRecord], Iterable[BlockRecord]],
    rules: Optional[AttributionRules] = None,
) -> AttributionResult:
    """Attribute every record of a dataset, preserving input order."""
    if rules is None:
        rules = AttributionRules()
    records = dataset.records if isinstance(dataset, BlockDataset) else tuple(dataset)
    pairs: list[tuple[BlockRecord, EntityId]] = []
    by_tag = by_addr = merged = synth = 0
    for record in records:
        eid, stage, was_merged = _resolve(record, rules)
        if stage == "tag":
            by_tag += 1
        elif stage == "address":
            by_addr += 1
        else:
            synth += 1
        if was_merged:
            merged += 1
        pairs.append((record, eid))
    return AttributionResult(
        pairs=tuple(pairs),
        matched_by_tag=by_tag,
        matched_by_address=by_addr,
        cluster_merged=merged,
        synthetic=synth,
    )
