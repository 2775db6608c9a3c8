"""Triple ingestion and the indexed, read-only knowledge-graph store.

Entities, relations and labels are interned to integer ids assigned in sorted
name order, so every id-ordered array is also name-ordered. Adjacency is held
as CSR arrays (one sorted by subject, one by object), which keeps a
Freebase-scale dump of a few million triples in a few hundred megabytes.
"""

from __future__ import annotations

import hashlib
import io
import json
import logging
import struct
import unicodedata
from array import array
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator, NamedTuple

import numpy as np

from .errors import (
    IndexCorruptError,
    IndexVersionError,
    LabelExtractionError,
    MalformedLineError,
)

logger = logging.getLogger(__name__)

MAGIC = b"ORTK"
FORMAT_VERSION = 1

OUT = "out"
IN = "in"


class Triple(NamedTuple):
    subject: str
    relation: str
    object: str


def normalize_name(name: str) -> str:
    return unicodedata.normalize("NFC", name.strip())


def extract_labels(relation: str) -> tuple[str, str]:
    """Return ``(subject_label, object_label)`` for a dotted relation.

    The subject takes the second-to-last segment and the object the last one,
    e.g. ``meteorology.cyclone_affected_area.cyclones`` gives
    ``("cyclone_affected_area", "cyclones")``.
    """
    parts = relation.split(".")
    if len(parts) < 2 or not parts[-1] or not parts[-2]:
        raise LabelExtractionError(relation)
    return parts[-2], parts[-1]


def iter_triples(
    stream: BinaryIO | Iterable[bytes] | Iterable[str],
    *,
    strict: bool = False,
    problems: list | None = None,
) -> Iterator[Triple]:
    """Yield triples from tab-separated lines.

    Lines starting with ``#`` and blank lines are skipped. A malformed line is
    logged and appended to ``problems`` as a :class:`MalformedLineError`, or
    raised when ``strict`` is set.
    """
    for lineno, raw in enumerate(stream, 1):
        if isinstance(raw, bytes):
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError:
                _report(MalformedLineError(lineno, "not valid UTF-8"), strict, problems)
                continue
        else:
            line = raw
        line = line.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            _report(
                MalformedLineError(lineno, f"expected 3 tab-separated fields, got {len(fields)}", line),
                strict,
                problems,
            )
            continue
        s, r, o = (f.strip() for f in fields)
        if not (s and r and o):
            _report(MalformedLineError(lineno, "empty field", line), strict, problems)
            continue
        yield Triple(s, r, o)


def parse_triples(stream, *, strict: bool = False, problems: list | None = None) -> list[Triple]:
    return list(iter_triples(stream, strict=strict, problems=problems))


def read_triple_file(path, *, strict: bool = False, problems: list | None = None) -> list[Triple]:
    with open(path, "rb") as fh:
        return parse_triples(fh, strict=strict, problems=problems)


def _report(err: Exception, strict: bool, problems: list | None) -> None:
    if strict:
        raise err
    logger.warning("%s", err)
    if problems is not None:
        problems.append(err)


def _csr_offsets(keys: np.ndarray, n: int) -> np.ndarray:
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(keys, minlength=n), out=offsets[1:])
    return offsets


def _frozen(a) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


class KgStore:
    """Immutable indexed view over a deduplicated triple set.

    Safe to share between threads once constructed: nothing is mutated after
    ``__init__``.
    """

    def __init__(self, entities, relations, labels, subj, rel, obj):
        self.entities: tuple[str, ...] = tuple(entities)
        self.relations: tuple[str, ...] = tuple(relations)
        self.labels: tuple[str, ...] = tuple(labels)
        self._entity_id = {name: i for i, name in enumerate(self.entities)}
        self._relation_id = {name: i for i, name in enumerate(self.relations)}
        self._label_id = {name: i for i, name in enumerate(self.labels)}

        n_ent, n_lab = len(self.entities), len(self.labels)
        label_id = self._label_id
        pairs = [extract_labels(r) for r in self.relations]
        self._rel_subj_label = _frozen(np.array([label_id[a] for a, _ in pairs], dtype=np.int32))
        self._rel_obj_label = _frozen(np.array([label_id[b] for _, b in pairs], dtype=np.int32))

        # subj/rel/obj arrive sorted by (subject, relation, object) and deduplicated.
        self._subj = _frozen(subj)
        self._out_rel = _frozen(rel)
        self._out_obj = _frozen(obj)
        self._out_off = _frozen(_csr_offsets(subj, n_ent))

        order = np.lexsort((subj, rel, obj))
        self._in_rel = _frozen(rel[order])
        self._in_subj = _frozen(subj[order])
        self._in_off = _frozen(_csr_offsets(obj[order], n_ent))

        ents = np.concatenate([subj, obj]).astype(np.int64)
        labs = np.concatenate([self._rel_subj_label[rel], self._rel_obj_label[rel]]).astype(np.int64)
        key = np.unique(ents * max(n_lab, 1) + labs)
        el_ent = (key // max(n_lab, 1)).astype(np.int32)
        el_lab = (key % max(n_lab, 1)).astype(np.int32)
        self._el_lab = _frozen(el_lab)
        self._el_off = _frozen(_csr_offsets(el_ent, n_ent))
        order = np.lexsort((el_ent, el_lab))
        self._le_ent = _frozen(el_ent[order])
        self._le_off = _frozen(_csr_offsets(el_lab[order], n_lab))

    # -- sizes -------------------------------------------------------------

    @property
    def triple_count(self) -> int:
        return int(self._subj.shape[0])

    @property
    def entity_count(self) -> int:
        return len(self.entities)

    @property
    def relation_count(self) -> int:
        return len(self.relations)

    @property
    def label_count(self) -> int:
        return len(self.labels)

    # -- lookups -----------------------------------------------------------

    def has_entity(self, entity: str) -> bool:
        return entity in self._entity_id

    def has_label(self, label: str) -> bool:
        return label in self._label_id

    def relation_labels(self, relation: str) -> tuple[str, str]:
        i = self._relation_id[relation]
        return self.labels[self._rel_subj_label[i]], self.labels[self._rel_obj_label[i]]

    def entity_labels(self, entity: str) -> frozenset[str]:
        i = self._entity_id.get(entity)
        if i is None:
            return frozenset()
        lo, hi = self._el_off[i], self._el_off[i + 1]
        return frozenset(self.labels[j] for j in self._el_lab[lo:hi])

    def label_entities(self, label: str) -> frozenset[str]:
        i = self._label_id.get(label)
        if i is None:
            return frozenset()
        lo, hi = self._le_off[i], self._le_off[i + 1]
        return frozenset(self.entities[j] for j in self._le_ent[lo:hi])

    def outgoing(self, entity: str) -> list[tuple[str, str]]:
        i = self._entity_id.get(entity)
        if i is None:
            return []
        lo, hi = self._out_off[i], self._out_off[i + 1]
        return [(self.relations[r], self.entities[o]) for r, o in zip(self._out_rel[lo:hi], self._out_obj[lo:hi])]

    def incoming(self, entity: str) -> list[tuple[str, str]]:
        i = self._entity_id.get(entity)
        if i is None:
            return []
        lo, hi = self._in_off[i], self._in_off[i + 1]
        return [(self.relations[r], self.entities[s]) for r, s in zip(self._in_rel[lo:hi], self._in_subj[lo:hi])]

    def iter_triples(self) -> Iterator[Triple]:
        ents, rels = self.entities, self.relations
        for s, r, o in zip(self._subj, self._out_rel, self._out_obj):
            yield Triple(ents[s], rels[r], ents[o])

    def _incident(self, i: int):
        """Relation ids, neighbor ids and direction flags (0=out, 1=in) around entity ``i``."""
        olo, ohi = self._out_off[i], self._out_off[i + 1]
        ilo, ihi = self._in_off[i], self._in_off[i + 1]
        rel = np.concatenate([self._out_rel[olo:ohi], self._in_rel[ilo:ihi]])
        nb = np.concatenate([self._out_obj[olo:ohi], self._in_subj[ilo:ihi]])
        dirs = np.concatenate([np.zeros(ohi - olo, np.int8), np.ones(ihi - ilo, np.int8)])
        return rel, nb, dirs

    def _emit(self, rel, nb, dirs) -> list[tuple[str, str, str]]:
        order = np.lexsort((dirs, nb, rel))
        return [
            (self.relations[rel[k]], self.entities[nb[k]], IN if dirs[k] else OUT)
            for k in order
        ]

    def neighbors(self, entity: str, required_label: str | None = None) -> list[tuple[str, str, str]]:
        """Incident edges as ``(relation, neighbor, direction)``, sorted by relation then neighbor.

        With ``required_label`` only neighbors whose label set contains it are kept.
        """
        i = self._entity_id.get(entity)
        if i is None:
            return []
        rel, nb, dirs = self._incident(i)
        if required_label is not None:
            lab = self._label_id.get(required_label)
            if lab is None:
                return []
            keep = np.fromiter(
                (self._entity_has_label(int(n), lab) for n in nb), dtype=bool, count=nb.shape[0]
            )
            rel, nb, dirs = rel[keep], nb[keep], dirs[keep]
        return self._emit(rel, nb, dirs)

    def adjacent(self, entity: str, out_relations: Iterable[str], in_relations: Iterable[str]) -> list[tuple[str, str, str]]:
        """Edges leaving ``entity`` through ``out_relations`` or entering it through ``in_relations``."""
        i = self._entity_id.get(entity)
        if i is None:
            return []
        out_ids = np.array([self._relation_id[r] for r in out_relations if r in self._relation_id], dtype=np.int32)
        in_ids = np.array([self._relation_id[r] for r in in_relations if r in self._relation_id], dtype=np.int32)
        rel, nb, dirs = self._incident(i)
        keep = np.where(dirs == 0, np.isin(rel, out_ids), np.isin(rel, in_ids))
        return self._emit(rel[keep], nb[keep], dirs[keep])

    def _entity_has_label(self, e: int, lab: int) -> bool:
        lo, hi = self._el_off[e], self._el_off[e + 1]
        seg = self._el_lab[lo:hi]
        k = np.searchsorted(seg, lab)
        return bool(k < seg.shape[0] and seg[k] == lab)

    # -- equality helpers for round-trip checks ---------------------------

    def index_maps(self) -> dict:
        """Plain-dict snapshot of the four index maps (small graphs only)."""
        return {
            "outgoing": {e: self.outgoing(e) for e in self.entities},
            "incoming": {e: self.incoming(e) for e in self.entities},
            "entity_labels": {e: self.entity_labels(e) for e in self.entities},
            "label_entities": {label: self.label_entities(label) for label in self.labels},
        }


def build_index(triples: Iterable, *, strict: bool = False, problems: list | None = None) -> KgStore:
    """Intern, deduplicate and index ``triples`` into a :class:`KgStore`.

    Names are NFC-normalized and trimmed. Triples whose relation has fewer than
    two dotted segments are dropped with a :class:`LabelExtractionError`
    warning (raised in strict mode).
    """
    ent_ids: dict[str, int] = {}
    rel_ids: dict[str, int] = {}
    bad_relations: set[str] = set()
    s_buf, r_buf, o_buf = array("i"), array("i"), array("i")
    for triple in triples:
        s, r, o = triple
        r = normalize_name(r)
        rid = rel_ids.get(r)
        if rid is None:
            if r in bad_relations:
                _report(LabelExtractionError(r), strict, problems)
                continue
            try:
                extract_labels(r)
            except LabelExtractionError as err:
                bad_relations.add(r)
                _report(err, strict, problems)
                continue
            rid = rel_ids[r] = len(rel_ids)
        s = normalize_name(s)
        o = normalize_name(o)
        sid = ent_ids.get(s)
        if sid is None:
            sid = ent_ids[s] = len(ent_ids)
        oid = ent_ids.get(o)
        if oid is None:
            oid = ent_ids[o] = len(ent_ids)
        s_buf.append(sid)
        r_buf.append(rid)
        o_buf.append(oid)

    entities, ent_rank = _sorted_ids(ent_ids)
    relations, rel_rank = _sorted_ids(rel_ids)
    del ent_ids, rel_ids
    subj = ent_rank[np.frombuffer(s_buf, dtype=np.int32)] if len(s_buf) else np.zeros(0, np.int32)
    rel = rel_rank[np.frombuffer(r_buf, dtype=np.int32)] if len(r_buf) else np.zeros(0, np.int32)
    obj = ent_rank[np.frombuffer(o_buf, dtype=np.int32)] if len(o_buf) else np.zeros(0, np.int32)
    del s_buf, r_buf, o_buf

    order = np.lexsort((obj, rel, subj))
    subj, rel, obj = subj[order], rel[order], obj[order]
    if subj.shape[0]:
        keep = np.ones(subj.shape[0], dtype=bool)
        keep[1:] = (np.diff(subj) != 0) | (np.diff(rel) != 0) | (np.diff(obj) != 0)
        subj, rel, obj = subj[keep], rel[keep], obj[keep]

    labels = sorted({lab for r in relations for lab in extract_labels(r)})
    return KgStore(entities, relations, labels, subj, rel, obj)


def _sorted_ids(ids: dict[str, int]) -> tuple[list[str], np.ndarray]:
    names = list(ids)
    order = sorted(range(len(names)), key=names.__getitem__)
    rank = np.empty(len(names), dtype=np.int32)
    rank[np.array(order, dtype=np.int64)] = np.arange(len(names), dtype=np.int32)
    return [names[i] for i in order], rank


def neighbors(store: KgStore, entity: str, required_label: str | None = None) -> list[tuple[str, str, str]]:
    return store.neighbors(entity, required_label)


def entities_with_label(store: KgStore, label: str) -> frozenset[str]:
    return store.label_entities(label)


# -- index cache file ------------------------------------------------------


def _pack_strings(names) -> tuple[np.ndarray, bytes]:
    encoded = [n.encode("utf-8") for n in names]
    offsets = np.zeros(len(encoded) + 1, dtype=np.int64)
    np.cumsum([len(b) for b in encoded], out=offsets[1:])
    return offsets, b"".join(encoded)


def _unpack_strings(offsets: np.ndarray, blob: bytes) -> list[str]:
    return [blob[offsets[i]:offsets[i + 1]].decode("utf-8") for i in range(offsets.shape[0] - 1)]


def save_index(store: KgStore, path) -> None:
    """Write ``store`` as ``ORTK`` + version byte + manifest + arrays + SHA-256 trailer."""
    sections: list[tuple[str, bytes, str]] = []
    for name in ("entities", "relations", "labels"):
        offsets, blob = _pack_strings(getattr(store, name))
        sections.append((f"{name}.offsets", offsets.astype("<i8").tobytes(), "<i8"))
        sections.append((f"{name}.blob", blob, "bytes"))
    for name, arr in (("subj", store._subj), ("rel", store._out_rel), ("obj", store._out_obj)):
        sections.append((name, arr.astype("<i4").tobytes(), "<i4"))
    manifest = json.dumps(
        {"sections": [[n, len(b), dt] for n, b, dt in sections]},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    body = io.BytesIO()
    body.write(struct.pack("<Q", len(manifest)))
    body.write(manifest)
    for _, data, _ in sections:
        body.write(data)
    payload = body.getvalue()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(bytes([FORMAT_VERSION]))
        fh.write(payload)
        fh.write(hashlib.sha256(payload).digest())


def load_index(path) -> KgStore:
    data = Path(path).read_bytes()
    if len(data) < 5 or data[:4] != MAGIC:
        raise IndexCorruptError(f"{path}: not an index file (bad magic)")
    if data[4] != FORMAT_VERSION:
        raise IndexVersionError(f"{path}: index format version {data[4]}, expected {FORMAT_VERSION}")
    payload, digest = data[5:-32], data[-32:]
    if len(data) < 5 + 8 + 32 or hashlib.sha256(payload).digest() != digest:
        raise IndexCorruptError(f"{path}: checksum mismatch (truncated or corrupt)")
    try:
        (mlen,) = struct.unpack_from("<Q", payload, 0)
        manifest = json.loads(payload[8:8 + mlen].decode("utf-8"))
        pos = 8 + mlen
        raw = {}
        for name, size, dtype in manifest["sections"]:
            chunk = payload[pos:pos + size]
            pos += size
            raw[name] = chunk if dtype == "bytes" else np.frombuffer(chunk, dtype=dtype)
        names = {
            n: _unpack_strings(raw[f"{n}.offsets"], raw[f"{n}.blob"])
            for n in ("entities", "relations", "labels")
        }
        subj = raw["subj"].astype(np.int32)
        rel = raw["rel"].astype(np.int32)
        obj = raw["obj"].astype(np.int32)
    except (KeyError, ValueError, struct.error, UnicodeDecodeError) as err:
        raise IndexCorruptError(f"{path}: malformed index payload ({err})") from err
    return KgStore(names["entities"], names["relations"], names["labels"], subj, rel, obj)
