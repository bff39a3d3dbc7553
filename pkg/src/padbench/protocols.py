"""Declarative protocol engine: per-subset filter predicates over a registry."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional

from .errors import ProtocolError
from .registry import SUBSETS, Registry, Sample
from .taxonomy import ATTACK_KINDS, DeviceKind, PaiKind, parse_enum

ATTRIBUTES = (
    "dataset_id",
    "label",
    "pai_kind",
    "pai_subtype",
    "device_kind",
    "device_quality",
    "lighting",
    "face_resolution",
)

FAMILIES = (
    "grandtest",
    "cross_dataset",
    "one_pai",
    "unseen_attack",
    "unseen_device",
    "cross_face_resolution",
    "cross_conditions",
)


def sample_attribute(sample: Sample, attribute: str) -> Optional[str]:
    """Snake-case value of a filterable attribute (``None`` when absent)."""
    if attribute == "dataset_id":
        return sample.dataset_id
    if attribute == "label":
        return sample.label.value
    if attribute == "pai_kind":
        return sample.pai.kind.value
    if attribute == "pai_subtype":
        return sample.pai.subtype
    if attribute == "device_kind":
        return sample.device.kind.value
    if attribute == "device_quality":
        return sample.device.quality.value
    if attribute == "lighting":
        return sample.lighting.value
    if attribute == "face_resolution":
        return None if sample.face_resolution is None else sample.face_resolution.value
    raise ProtocolError(f"unknown filter attribute {attribute!r}")


@dataclass(frozen=True)
class Clause:
    """Include-set or exclude-set test on one attribute.

    With ``attacks_only`` the clause is skipped for bona fide samples.
    """

    attribute: str
    values: frozenset
    exclude: bool = False
    attacks_only: bool = False

    def __post_init__(self):
        if self.attribute not in ATTRIBUTES:
            raise ProtocolError(f"unknown filter attribute {self.attribute!r}")
        object.__setattr__(self, "values", frozenset(self.values))

    def accepts(self, sample: Sample) -> bool:
        if self.attacks_only and not sample.is_attack:
            return True
        hit = sample_attribute(sample, self.attribute) in self.values
        return not hit if self.exclude else hit

    def to_json(self) -> dict:
        out = {"attribute": self.attribute, ("exclude" if self.exclude else "include"): sorted(self.values)}
        if self.attacks_only:
            out["attacks_only"] = True
        return out

    @classmethod
    def from_json(cls, doc: Mapping) -> "Clause":
        if ("include" in doc) == ("exclude" in doc):
            raise ProtocolError(f"clause needs exactly one of include/exclude: {doc}")
        exclude = "exclude" in doc
        values = doc["exclude" if exclude else "include"]
        return cls(doc["attribute"], frozenset(values), exclude, bool(doc.get("attacks_only", False)))


@dataclass(frozen=True)
class FilterPredicate:
    clauses: tuple[Clause, ...] = ()

    def accepts(self, sample: Sample) -> bool:
        return all(c.accepts(sample) for c in self.clauses)

    def to_json(self) -> list:
        return [c.to_json() for c in self.clauses]


ACCEPT_ALL = FilterPredicate()
DEFAULT_SOURCES = {"train": ("train",), "dev": ("dev",), "test": ("test",)}


@dataclass(frozen=True)
class ProtocolSpec:
    """Named protocol: for each output subset, a predicate and the registry
    subsets it draws from (identity unless a protocol relabels)."""

    name: str
    train: FilterPredicate = ACCEPT_ALL
    dev: FilterPredicate = ACCEPT_ALL
    test: FilterPredicate = ACCEPT_ALL
    sources: tuple = tuple(sorted(DEFAULT_SOURCES.items()))

    def predicate(self, subset: str) -> FilterPredicate:
        return getattr(self, subset)

    def source_subsets(self, subset: str) -> tuple:
        return dict(self.sources)[subset]

    def to_json(self) -> dict:
        return {
            "name": self.name,
            **{s: self.predicate(s).to_json() for s in SUBSETS},
            "sources": {s: list(self.source_subsets(s)) for s in SUBSETS},
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "ProtocolSpec":
        if "name" not in doc:
            raise ProtocolError("custom protocol needs a 'name'")
        preds = {}
        for s in SUBSETS:
            if s not in doc:
                raise ProtocolError(f"custom protocol {doc['name']!r} lacks a {s!r} predicate")
            preds[s] = FilterPredicate(tuple(Clause.from_json(c) for c in doc[s]))
        sources = dict(DEFAULT_SOURCES)
        for s, src in (doc.get("sources") or {}).items():
            if s not in SUBSETS or not set(src) <= set(SUBSETS):
                raise ProtocolError(f"bad sources entry {s!r}: {src!r}")
            sources[s] = tuple(src)
        return cls(str(doc["name"]), sources=tuple(sorted(sources.items())), **preds)


@dataclass
class ProtocolSplit:
    name: str
    train: list = field(default_factory=list)
    dev: list = field(default_factory=list)
    test: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def subset(self, name: str) -> list:
        return getattr(self, name)

    @property
    def degenerate(self) -> bool:
        return bool(self.warnings)

    def cardinalities(self) -> dict:
        out = {}
        for s in SUBSETS:
            items = self.subset(s)
            n_attack = sum(1 for x in items if x.is_attack)
            out[s] = {"bona_fide": len(items) - n_attack, "attack": n_attack}
        return out


def apply_protocol(registry: Registry | Iterable[Sample], spec: ProtocolSpec) -> ProtocolSplit:
    """Filter a registry into sorted train/dev/test lists for one protocol.

    Subsets missing bona fide or attack samples produce warnings, not errors.
    """
    samples = registry.samples.values() if isinstance(registry, Registry) else registry
    buckets = {s: [] for s in SUBSETS}
    for sample in samples:
        for target in SUBSETS:
            if sample.subset in spec.source_subsets(target) and spec.predicate(target).accepts(sample):
                buckets[target].append(sample)
    for items in buckets.values():
        items.sort(key=lambda x: x.sample_id)
    out = ProtocolSplit(spec.name, **buckets)
    for s in SUBSETS:
        counts = out.cardinalities()[s]
        for cls in ("bona_fide", "attack"):
            if counts[cls] == 0:
                out.warnings.append(f"{spec.name}: {s} subset has no {cls} samples")
    return out


def _spec(name, train=(), dev=(), test=(), sources=None):
    src = dict(DEFAULT_SOURCES)
    src.update(sources or {})
    return ProtocolSpec(
        name,
        FilterPredicate(tuple(train)),
        FilterPredicate(tuple(dev)),
        FilterPredicate(tuple(test)),
        tuple(sorted(src.items())),
    )


def make_grandtest() -> ProtocolSpec:
    return _spec("grandtest")


def make_cross_dataset(held_out: str, known: Optional[Iterable[str]] = None) -> ProtocolSpec:
    """Train/dev on every other dataset; all subsets of ``held_out`` become test."""
    if known is not None and held_out not in set(known):
        raise ProtocolError(f"unknown dataset id {held_out!r}")
    out = Clause("dataset_id", frozenset({held_out}), exclude=True)
    only = Clause("dataset_id", frozenset({held_out}))
    return _spec(f"cross_dataset:{held_out}", [out], [out], [only], {"test": SUBSETS})


def _attack_kind(kind) -> PaiKind:
    kind = parse_enum(PaiKind, kind, "pai_kind")
    if kind not in ATTACK_KINDS:
        raise ProtocolError(f"{kind.value!r} is not an attack PAI")
    return kind


def make_one_pai(pai_kind) -> ProtocolSpec:
    kind = _attack_kind(pai_kind)
    keep = Clause("pai_kind", frozenset({"none", kind.value}))
    return _spec(f"one_pai:{kind.value}", [keep], [keep], [keep])


def make_unseen_attack(pai_kind) -> ProtocolSpec:
    kind = _attack_kind(pai_kind)
    drop = Clause("pai_kind", frozenset({kind.value}), exclude=True)
    only = Clause("pai_kind", frozenset({"none", kind.value}))
    return _spec(f"unseen_attack:{kind.value}", [drop], [drop], [only])


def make_unseen_device(device_kind) -> ProtocolSpec:
    kind = parse_enum(DeviceKind, device_kind, "device_kind")
    drop = Clause("device_kind", frozenset({kind.value}), exclude=True)
    only = Clause("device_kind", frozenset({kind.value}))
    return _spec(f"unseen_device:{kind.value}", [drop], [drop], [only])


def make_cross_face_resolution(variant: str) -> ProtocolSpec:
    """``lf_test``: train on small+medium faces, test on large; ``sf_test`` the reverse."""
    if variant == "lf_test":
        seen, unseen = {"small", "medium"}, {"large"}
    elif variant == "sf_test":
        seen, unseen = {"large", "medium"}, {"small"}
    else:
        raise ProtocolError(f"unknown cross_face_resolution variant {variant!r} (lf_test|sf_test)")
    fit = Clause("face_resolution", frozenset(seen))
    return _spec(f"cross_face_resolution:{variant}", [fit], [fit], [Clause("face_resolution", frozenset(unseen))])


def _conditions(optimal: bool) -> list:
    if optimal:
        return [
            Clause("device_quality", frozenset({"high"})),
            Clause("pai_subtype", frozenset({"low", "medium", "paper"}), attacks_only=True),
            Clause("lighting", frozenset({"controlled", "no_info"})),
        ]
    return [
        Clause("device_quality", frozenset({"low"})),
        Clause("pai_subtype", frozenset({"high", "rigid", "silicone"}), attacks_only=True),
        Clause("lighting", frozenset({"adverse"})),
    ]


def make_cross_conditions(variant: str) -> ProtocolSpec:
    """``test_adverse`` trains on optimal conditions and tests on adverse ones;
    ``test_optimal`` swaps them."""
    if variant not in ("test_adverse", "test_optimal"):
        raise ProtocolError(f"unknown cross_conditions variant {variant!r} (test_adverse|test_optimal)")
    train_optimal = variant == "test_adverse"
    fit = _conditions(train_optimal)
    return _spec(f"cross_conditions:{variant}", fit, fit, _conditions(not train_optimal))


def build_protocol(ref: str, registry: Optional[Registry] = None) -> ProtocolSpec:
    """Resolve ``name[:param]`` to a built-in protocol."""
    name, _, param = ref.partition(":")
    if name == "grandtest":
        return make_grandtest()
    if not param:
        raise ProtocolError(f"protocol {name!r} needs a parameter ({name}:<value>)")
    if name == "cross_dataset":
        return make_cross_dataset(param, None if registry is None else registry.datasets)
    makers = {
        "one_pai": make_one_pai,
        "unseen_attack": make_unseen_attack,
        "unseen_device": make_unseen_device,
        "cross_face_resolution": make_cross_face_resolution,
        "cross_conditions": make_cross_conditions,
    }
    if name not in makers:
        raise ProtocolError(f"unknown protocol {name!r} (known: {', '.join(FAMILIES)})")
    return makers[name](param)


def family_members(family: str, registry: Registry) -> list[str]:
    """Protocol refs of a sweep family restricted to what the registry holds."""
    if family == "grandtest":
        return ["grandtest"]
    if family == "cross_dataset":
        return [f"cross_dataset:{d}" for d in registry.dataset_ids()]
    if family in ("one_pai", "unseen_attack"):
        kinds = {s.pai.kind for s in registry.samples.values() if s.is_attack}
        return [f"{family}:{k.value}" for k in ATTACK_KINDS if k in kinds]
    if family == "unseen_device":
        kinds = {s.device.kind for s in registry.samples.values()}
        return [f"unseen_device:{k.value}" for k in DeviceKind if k in kinds]
    if family == "cross_face_resolution":
        return ["cross_face_resolution:lf_test", "cross_face_resolution:sf_test"]
    if family == "cross_conditions":
        return ["cross_conditions:test_adverse", "cross_conditions:test_optimal"]
    raise ProtocolError(f"unknown protocol family {family!r} (known: {', '.join(FAMILIES)})")


def load_protocol_config(path, registry: Optional[Registry] = None) -> ProtocolSpec:
    """Read a protocol file: ``{"protocol": "unseen_attack", "param": "replay"}``
    for a built-in, or an explicit ``{"name", "train", "dev", "test"}`` spec.
    JSON or YAML."""
    path = Path(path)
    text = path.read_text()
    if path.suffix in (".yaml", ".yml"):
        import yaml

        doc = yaml.safe_load(text)
    else:
        doc = json.loads(text)
    if not isinstance(doc, Mapping):
        raise ProtocolError(f"{path}: protocol config must be a mapping")
    if "protocol" in doc:
        ref = doc["protocol"]
        if doc.get("param") is not None:
            ref = f"{ref}:{doc['param']}"
        return build_protocol(ref, registry)
    return ProtocolSpec.from_json(doc)
