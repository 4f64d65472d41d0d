"""Edge-list file parsing, label mapping, and report/split persistence.

Input files are UTF-8 tab-separated text: one `user<TAB>item` (or
`user<TAB>user`) pair per line, `#` lines are comments, columns beyond the
second are ignored so rating/timestamp dumps load unchanged. Labels map to
dense indices in first-appearance order, which makes parsing one-pass and
deterministic.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, SplitMismatchError
from .harness import (ColdstartComparison, EvaluationResult, LinkSplit,
                      SweepResult)
from .metrics import MetricsReport
from .networks import BipartiteNetwork, CombinedNetwork, build_bipartite, build_social, combine

log = logging.getLogger(__name__)

CSV_COLUMNS = ("parameter", "run", "run_seed", "rs", "precision",
               "inter_diversity", "intra_diversity", "coverage", "novelty",
               "congestion", "l", "users_evaluated")


@dataclass
class IdMap:
    """Dense index <-> original label mapping, first-appearance ordered."""

    user_labels: list = field(default_factory=list)
    item_labels: list = field(default_factory=list)

    def __post_init__(self):
        self._user_index = {lb: i for i, lb in enumerate(self.user_labels)}
        self._item_index = {lb: i for i, lb in enumerate(self.item_labels)}

    def user(self, label: str) -> int:
        """Index for label, appending it if unseen."""
        idx = self._user_index.get(label)
        if idx is None:
            idx = len(self.user_labels)
            self.user_labels.append(label)
            self._user_index[label] = idx
        return idx

    def item(self, label: str) -> int:
        idx = self._item_index.get(label)
        if idx is None:
            idx = len(self.item_labels)
            self.item_labels.append(label)
            self._item_index[label] = idx
        return idx

    def known_user(self, label: str):
        return self._user_index.get(label)

    @property
    def n_users(self):
        return len(self.user_labels)

    @property
    def n_items(self):
        return len(self.item_labels)


def _data_lines(text: str, path):
    for no, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip("\r")
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) < 2 or not parts[0] or not parts[1]:
            raise ParseError(f"{path}:{no}: expected `left<TAB>right`, got {line!r}",
                             path=str(path), line_no=no)
        yield parts[0], parts[1]


@dataclass
class BipartiteParse:
    edges: np.ndarray
    id_map: IdMap
    duplicates: int


def parse_bipartite_file(path, id_map: IdMap = None) -> BipartiteParse:
    """Read user-item pairs; duplicates collapse (counted), empty file warns."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_bipartite_text(text, source=path, id_map=id_map)


def parse_bipartite_text(text: str, source="<memory>",
                         id_map: IdMap = None) -> BipartiteParse:
    id_map = id_map if id_map is not None else IdMap()
    seen = set()
    edges = []
    dups = 0
    for left, right in _data_lines(text, source):
        pair = (id_map.user(left), id_map.item(right))
        if pair in seen:
            dups += 1
            continue
        seen.add(pair)
        edges.append(pair)
    if not edges:
        log.warning("%s: no edges parsed", source)
    arr = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    return BipartiteParse(edges=arr, id_map=id_map, duplicates=dups)


@dataclass
class SocialParse:
    edges: np.ndarray
    skipped: int
    added_users: int


def parse_social_file(path, id_map: IdMap,
                      unknown_user_rule: str = "skip") -> SocialParse:
    """Read user-user pairs over the bipartite file's user index space.

    unknown_user_rule "skip" drops (and counts) pairs naming users absent
    from id_map; "add" extends the map with fresh empty-profile users, which
    is what pure cold-start users need. The id_map is extended in place.
    """
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_social_text(text, id_map, unknown_user_rule, source=path)


def parse_social_text(text: str, id_map: IdMap,
                      unknown_user_rule: str = "skip",
                      source="<memory>") -> SocialParse:
    if unknown_user_rule not in ("skip", "add"):
        raise ValueError("unknown_user_rule must be 'skip' or 'add'")
    before = id_map.n_users
    edges = []
    skipped = 0
    for left, right in _data_lines(text, source):
        if unknown_user_rule == "skip":
            a = id_map.known_user(left)
            b = id_map.known_user(right)
            if a is None or b is None:
                skipped += 1
                continue
        else:
            a = id_map.user(left)
            b = id_map.user(right)
        edges.append((a, b))
    if skipped:
        log.info("%s: skipped %d pair(s) naming unknown users", source, skipped)
    arr = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    return SocialParse(edges=arr, skipped=skipped,
                       added_users=id_map.n_users - before)


def load_dataset(items_path, social_path=None,
                 unknown_user_rule: str = "skip"):
    """Parse both files and build the combined network.

    Returns (CombinedNetwork, IdMap, diagnostics dict).
    """
    bp = parse_bipartite_file(items_path)
    social = None
    if social_path is not None:
        with open(social_path, encoding="utf-8") as fh:
            social = fh.read()
    return _assemble(bp, social, unknown_user_rule, source=str(social_path))


def networks_from_text(items_text: str, social_text=None,
                       unknown_user_rule: str = "skip",
                       items_name: str = "items", social_name: str = "social"):
    """In-memory version of load_dataset, for service uploads.

    items_name/social_name label the texts in parse errors, so a client can
    pass the original file paths through.
    """
    bp = parse_bipartite_text(items_text, source=items_name)
    return _assemble(bp, social_text, unknown_user_rule, source=social_name)


def _assemble(bp: BipartiteParse, social_text, unknown_user_rule, source):
    id_map = bp.id_map
    if social_text is not None:
        sc = parse_social_text(social_text, id_map, unknown_user_rule, source=source)
        soc_edges, skipped, added = sc.edges, sc.skipped, sc.added_users
    else:
        soc_edges, skipped, added = np.empty((0, 2), dtype=np.int64), 0, 0
    bip = build_bipartite(bp.edges, id_map.n_users, id_map.n_items)
    soc = build_social(soc_edges, id_map.n_users)
    diagnostics = {
        "duplicate_bipartite_pairs": bp.duplicates,
        "social_pairs_skipped": skipped,
        "users_added_from_social": added,
        "social_self_loops_dropped": soc.self_loops_dropped,
        "duplicate_social_pairs": soc.duplicates_collapsed,
    }
    return combine(bip, soc), id_map, diagnostics


# -- report writing --

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _report_dict(rep: MetricsReport) -> dict:
    d = {f: getattr(rep, f) for f in MetricsReport.FIELDS}
    d["l"] = rep.l
    d["users_evaluated"] = rep.users_evaluated
    return d


def _csv_rows(obj):
    if isinstance(obj, EvaluationResult):
        for run, (seed, rep) in enumerate(zip(obj.run_seeds, obj.per_run)):
            yield (None, run, seed) + tuple(getattr(rep, c) for c in CSV_COLUMNS[3:])
    elif isinstance(obj, SweepResult):
        for pt in sorted(obj.points, key=lambda p: p.parameter):
            for run, rep in enumerate(pt.per_run):
                seed = obj.run_seeds[run] if run < len(obj.run_seeds) else None
                yield (pt.parameter, run, seed) + tuple(getattr(rep, c)
                                                        for c in CSV_COLUMNS[3:])
    elif isinstance(obj, MetricsReport):
        yield (None, 0, None) + tuple(getattr(obj, c) for c in CSV_COLUMNS[3:])
    else:
        raise TypeError(f"no CSV schema for {type(obj).__name__}")


def _json_payload(obj, config=None):
    if isinstance(obj, EvaluationResult):
        body = {"mean": _report_dict(obj.mean),
                "runs": [_report_dict(r) for r in obj.per_run],
                "run_seeds": list(obj.run_seeds)}
    elif isinstance(obj, SweepResult):
        body = {"optimal_parameter": obj.optimal_parameter,
                "points": [{"parameter": pt.parameter,
                            "mean": _report_dict(pt.mean),
                            "runs": [_report_dict(r) for r in pt.per_run]}
                           for pt in sorted(obj.points, key=lambda p: p.parameter)],
                "run_seeds": list(obj.run_seeds)}
    elif isinstance(obj, ColdstartComparison):
        body = {"smd": _report_dict(obj.smd),
                "grm": _report_dict(obj.grm),
                "improvements": dict(obj.improvements),
                "selected_users": [int(u) for u in obj.selected_users],
                "excluded_no_friends": obj.excluded_no_friends,
                "excluded_no_links": obj.excluded_no_links,
                "lost_mass": obj.lost_mass}
    elif isinstance(obj, MetricsReport):
        body = {"mean": _report_dict(obj)}
    else:
        raise TypeError(f"no JSON schema for {type(obj).__name__}")
    return {"config": config or {}, **body}


def write_report(obj, path, format: str = "json", config=None) -> None:
    """Persist a result to CSV or JSON.

    CSV carries one row per (run, parameter) in the fixed CSV_COLUMNS order,
    sorted by (parameter, run); a cold-start comparison instead gets a
    metric/smd/grm/improvement table. JSON mirrors the report structure plus
    a config echo and the run seeds. Floats keep full precision for
    bit-faithful round-trips.
    """
    if format not in ("csv", "json"):
        raise ValueError("format must be 'csv' or 'json'")
    try:
        if format == "json":
            payload = _json_payload(obj, config)
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(payload, fh, indent=2)
                fh.write("\n")
            return
        with open(path, "w", encoding="utf-8", newline="") as fh:
            if isinstance(obj, ColdstartComparison):
                fh.write("metric,smd,grm,improvement\n")
                for f in MetricsReport.FIELDS:
                    fh.write(",".join([f, _fmt(getattr(obj.smd, f)),
                                       _fmt(getattr(obj.grm, f)),
                                       _fmt(obj.improvements[f])]) + "\n")
                return
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for row in _csv_rows(obj):
                fh.write(",".join(_fmt(v) for v in row) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc


# -- split persistence --

def _edge_checksum(edges: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(edges, dtype=np.int64).tobytes()).hexdigest()


def persist_split(split: LinkSplit, path) -> None:
    """Store the probe edges and seed; training edges are implied by the network."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# socdiff link split\n")
        fh.write(f"seed\t{split.seed}\n")
        fh.write(f"n_training\t{split.training.shape[0]}\n")
        fh.write(f"n_probe\t{split.probe.shape[0]}\n")
        checksum = _edge_checksum(np.concatenate([split.training, split.probe]))
        fh.write(f"checksum\t{checksum}\n")
        for u, i in split.probe:
            fh.write(f"{u}\t{i}\n")


def load_split(path, net: BipartiteNetwork) -> LinkSplit:
    """Rebuild a split against its original network; any mismatch is an error."""
    header = {}
    probe_rows = []
    with open(path, encoding="utf-8") as fh:
        for no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.startswith("#"):
                continue
            a, _, b = line.partition("\t")
            if not b:
                raise ParseError(f"{path}:{no}: malformed split line {line!r}",
                                 path=str(path), line_no=no)
            if a in ("seed", "n_training", "n_probe", "checksum") and a not in header:
                header[a] = b
            else:
                probe_rows.append((int(a), int(b)))
    if not probe_rows:
        raise SplitMismatchError(f"{path}: empty probe set (fraction must be > 0)")
    probe = np.asarray(probe_rows, dtype=np.int64)
    probe = probe[np.lexsort((probe[:, 1], probe[:, 0]))]
    edges = net.edges
    if int(header.get("n_probe", -1)) != probe.shape[0] \
            or int(header.get("n_training", -1)) != edges.shape[0] - probe.shape[0]:
        raise SplitMismatchError(f"{path}: header counts disagree with the network")
    keys = edges[:, 0] * np.int64(net.n_items) + edges[:, 1]
    probe_keys = probe[:, 0] * np.int64(net.n_items) + probe[:, 1]
    mask = np.isin(keys, probe_keys)
    if int(mask.sum()) != probe.shape[0] or np.unique(probe_keys).size != probe.shape[0]:
        raise SplitMismatchError(
            f"{path}: probe edges are not a subset of this network's edges")
    training = edges[~mask]
    if "checksum" in header and header["checksum"] != _edge_checksum(
            np.concatenate([training, edges[mask]])):
        raise SplitMismatchError(f"{path}: checksum mismatch against this network")
    return LinkSplit(training=training, probe=edges[mask], seed=int(header.get("seed", -1)))
