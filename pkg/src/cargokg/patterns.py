"""Built-in anomalous-movement detectors: loops and unnecessary transshipments.

A loop: a container is transshipped onto a vessel that swings back through
the itinerary's source port (or, in the intermediate form, any port the
container already visited) before the container reaches its destination.

An unnecessary transshipment: the vessel a container was discharged from at
a transshipment later reaches the container's own destination port, so the
hand-over bought nothing and often hides the shipment's true origin.

Both detectors instantiate the shipped query templates once per realized
port nominal (ports never touched by an itinerary cannot match and are
skipped), evaluate them against the sealed graph, and convert result rows
into Detections carrying evidence and a date gap between the container's
end and the vessel's return/arrival. Raw matches with a wide gap are almost
always sequence gaps rather than anomalies, so a threshold partitions them
into Suspicious and PrunedByDate.

The date-filtered templates are the primary path; the unfiltered forms stay
available for benchmark parity. Anchors evaluate independently over the
shared sealed graph, so they may run on a thread pool; results are
order-normalised either way.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import date
from enum import Enum
from importlib import resources
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .diagnostics import Diagnostics
from .engine import evaluate_rows, plan_indices, resolve_names
from .graph import KnowledgeGraph
from .queries import PatternQuery, parse_query, substitute_nominals

DEFAULT_DATE_THRESHOLD_DAYS = 3


class PatternKind(Enum):
    LOOP = "Loop"
    LOOP_INTERMEDIATE = "LoopIntermediate"
    UNNECESSARY_TRANSSHIPMENT = "UnnecessaryTransshipment"


class Verdict(Enum):
    SUSPICIOUS = "Suspicious"
    PRUNED_BY_DATE = "PrunedByDate"


class DetectTimeout(Exception):
    """Raised when a detection run exceeds its deadline."""


@dataclass
class PatternSpec:
    """A detection request; ports pin the nominals, None means iterate."""

    kind: PatternKind
    port_p1: Optional[str] = None
    port_px: Optional[str] = None
    date_threshold_days: int = DEFAULT_DATE_THRESHOLD_DAYS

    def __post_init__(self):
        if self.date_threshold_days < 0:
            raise ValueError("date_threshold_days must be non-negative")
        if (
            self.kind in (PatternKind.LOOP, PatternKind.LOOP_INTERMEDIATE)
            and self.port_p1 is not None
            and self.port_px is not None
            and self.port_p1 == self.port_px
        ):
            raise ValueError("loop patterns need two distinct ports")


@dataclass
class Evidence:
    container_id: str = ""
    transshipment_event_id: str = ""
    transshipment_port: str = ""
    vessel1: str = ""
    vessel2: str = ""
    port_p1: str = ""
    port_px: str = ""
    container_end_date: Optional[date] = None
    vessel_date: Optional[date] = None


@dataclass
class Detection:
    itinerary_id: str
    kind: PatternKind
    evidence: Evidence
    date_gap_days: Optional[int] = None
    verdict: Optional[Verdict] = None
    verdict_reason: str = ""

    def key(self) -> Tuple:
        return (
            self.kind.value,
            self.itinerary_id,
            self.evidence.port_p1,
            self.evidence.container_end_date,
            self.evidence.vessel_date,
        )

    def sort_key(self) -> Tuple:
        return (
            self.kind.value,
            self.itinerary_id,
            self.evidence.port_p1,
            self.evidence.container_end_date or date.min,
            self.evidence.vessel_date or date.min,
        )


# ---------------------------------------------------------------------------
# Query templates

_TEMPLATE_FILES = {
    "loop": "loop.pq",
    "loop_filtered": "loop_filtered.pq",
    "loop_intermediate": "loop_intermediate.pq",
    "unnecessary_transshipment": "unnecessary_transshipment.pq",
    "unnecessary_transshipment_unfiltered": "unnecessary_transshipment_unfiltered.pq",
}

_template_cache: Dict[str, PatternQuery] = {}


def load_query_text(name: str) -> str:
    """The raw text of a shipped query template."""
    filename = _TEMPLATE_FILES[name]
    return resources.files("cargokg.data").joinpath(filename).read_text("utf-8")


def load_query(name: str) -> PatternQuery:
    if name not in _template_cache:
        _template_cache[name] = parse_query(load_query_text(name))
    return _template_cache[name]


def template_for(kind: PatternKind, variant: str) -> str:
    if variant not in ("filtered", "unfiltered"):
        raise ValueError("variant must be 'filtered' or 'unfiltered'")
    if kind is PatternKind.LOOP:
        return "loop_filtered" if variant == "filtered" else "loop"
    if kind is PatternKind.LOOP_INTERMEDIATE:
        return "loop_intermediate"  # only exists date-filtered
    return (
        "unnecessary_transshipment"
        if variant == "filtered"
        else "unnecessary_transshipment_unfiltered"
    )


# ---------------------------------------------------------------------------
# Anchors: only ports realized by some itinerary can match


def realized_source_ports(graph: KnowledgeGraph) -> List[str]:
    return sorted({o for _, o in graph.role_pairs("hasCISourcePort")})


def realized_destination_ports(graph: KnowledgeGraph) -> List[str]:
    return sorted({o for _, o in graph.role_pairs("hasCIDestinationPort")})


def realized_visited_ports(graph: KnowledgeGraph) -> List[str]:
    ports: Set[str] = set()
    for _, event in graph.role_pairs("hasContainerEvent"):
        ports.update(graph.objects(event, "hasLocation"))
    return sorted(ports)


# ---------------------------------------------------------------------------
# Detection


def _date_of(graph: KnowledgeGraph, node: str) -> Optional[date]:
    try:
        return date.fromisoformat(graph.literal_form(node)[4:14])
    except ValueError:
        return None


def _event_date(graph: KnowledgeGraph, event_node: str) -> Optional[date]:
    stamps = graph.objects(event_node, "hasTimestamp")
    return _date_of(graph, stamps[0]) if stamps else None


def _port_name(graph: KnowledgeGraph, node: str) -> str:
    return graph.attr(node, "name") or node


def _vessel_of(graph: KnowledgeGraph, vessel_event: str) -> str:
    vessels = graph.objects(vessel_event, "hasMO")
    if not vessels:
        return ""
    return graph.attr(vessels[0], "label") or vessels[0]


def _adjacent_vessel(graph: KnowledgeGraph, event: str, direction: str, role: str) -> str:
    neighbours = (
        graph.subjects(event, "hasNextEvent")
        if direction == "before"
        else graph.objects(event, "hasNextEvent")
    )
    for n in neighbours:
        vessels = graph.objects(n, role)
        if vessels:
            return graph.attr(vessels[0], "label") or vessels[0]
    return ""


def _build_detection(
    graph: KnowledgeGraph,
    kind: PatternKind,
    row: Dict[str, str],
    p1_node: str,
    px_node: Optional[str],
) -> Detection:
    ci = row["c"]
    end_date = _date_of(graph, row["cd"])
    vessel_date = _event_date(graph, row["v1"])
    t = row["t"]
    container_nodes = graph.objects(ci, "hasMO")
    container = (
        graph.attr(container_nodes[0], "label") if container_nodes else ""
    ) or ""
    if kind is PatternKind.UNNECESSARY_TRANSSHIPMENT:
        vessel1 = _vessel_of(graph, row["v"])
        vessel2 = _adjacent_vessel(graph, t, "after", "hasLoadingVessel")
    else:
        vessel2 = _vessel_of(graph, row["v"])
        vessel1 = _adjacent_vessel(graph, t, "before", "hasDischargingVessel")
    t_ports = graph.objects(t, "hasLocation")
    if px_node is None:
        dests = graph.objects(ci, "hasCIDestinationPort")
        px_node = dests[0] if dests else None
    is_ut = kind is PatternKind.UNNECESSARY_TRANSSHIPMENT
    evidence = Evidence(
        container_id=container,
        transshipment_event_id=graph.attr(t, "label") or t,
        transshipment_port=_port_name(graph, t_ports[0]) if t_ports else "",
        vessel1=vessel1,
        vessel2=vessel2,
        port_p1="" if is_ut else _port_name(graph, p1_node),
        port_px=_port_name(graph, px_node) if px_node else "",
        container_end_date=end_date,
        vessel_date=vessel_date,
    )
    gap = None
    if end_date is not None and vessel_date is not None:
        gap = (vessel_date - end_date).days
    return Detection(
        itinerary_id=graph.attr(ci, "label") or ci,
        kind=kind,
        evidence=evidence,
        date_gap_days=gap,
    )


def _direction_holds(kind: PatternKind, end: Optional[date], vessel: Optional[date]) -> bool:
    """The pattern's inherent date direction: a loop return happens before
    the itinerary ends, an unnecessary-transshipment arrival after it.

    The date-filtered query forms enforce this inside the join; for the
    unfiltered forms it is applied here as post-cleaning, so every variant
    reports the same detections.
    """
    if end is None or vessel is None:
        return True  # kept; MissingDate routing happens at pruning
    if kind is PatternKind.UNNECESSARY_TRANSSHIPMENT:
        return vessel > end
    return vessel < end


def _rows_to_detections(
    graph: KnowledgeGraph,
    kind: PatternKind,
    rows: List[Dict[str, str]],
    p1_node: str,
    px_node: Optional[str],
) -> List[Detection]:
    """Group full binding rows by (itinerary, end date, vessel date) — the
    identity the projected DISTINCT form would give — and keep one canonical
    evidence row per group."""
    groups: Dict[Tuple, Dict[str, str]] = {}
    for row in rows:
        end = _date_of(graph, row["cd"])
        vessel = _event_date(graph, row["v1"])
        if not _direction_holds(kind, end, vessel):
            continue
        key = (row["c"], end, vessel)
        best = groups.get(key)
        candidate_rank = tuple(row[k] for k in sorted(row))
        if best is None or candidate_rank < tuple(best[k] for k in sorted(best)):
            groups[key] = row
    return [
        _build_detection(graph, kind, row, p1_node, px_node)
        for _, row in sorted(groups.items(), key=lambda kv: kv[0][0])
    ]


def _anchor_tasks(
    kind: PatternKind, graph: KnowledgeGraph, spec: PatternSpec
) -> List[Tuple[Dict[str, str], str, Optional[str]]]:
    """(nominal substitution, p1 node, px node) per query instantiation."""
    tasks = []
    if kind is PatternKind.UNNECESSARY_TRANSSHIPMENT:
        anchors = (
            [spec.port_px] if spec.port_px else realized_destination_ports(graph)
        )
        for p in anchors:
            tasks.append(({"port": p}, p, p))
    elif kind is PatternKind.LOOP_INTERMEDIATE:
        anchors = [spec.port_p1] if spec.port_p1 else realized_visited_ports(graph)
        for p in anchors:
            tasks.append(({"port": p}, p, None))
    else:
        return []
    return tasks


def detect(
    kind: PatternKind,
    graph: KnowledgeGraph,
    threshold_days: int = DEFAULT_DATE_THRESHOLD_DAYS,
    variant: str = "filtered",
    spec: Optional[PatternSpec] = None,
    parallelism: int = 1,
    deadline_seconds: Optional[float] = None,
    diagnostics: Optional[Diagnostics] = None,
) -> List[Detection]:
    """Run one pattern over all realized port nominals.

    Every matching (itinerary, container end, vessel return/arrival) triple
    becomes exactly one Detection; the threshold assigns the verdict.
    ``deadline_seconds`` bounds the wall time (DetectTimeout on expiry).
    """
    if spec is None:
        spec = PatternSpec(kind, date_threshold_days=threshold_days)
    started = time.monotonic()
    template_name = template_for(kind, variant)
    template = load_query(template_name)

    if kind is PatternKind.LOOP and variant == "unfiltered":
        if spec.port_p1 and spec.port_px:
            pairs = [(spec.port_p1, spec.port_px)]
        else:
            # all pairs of realized sources x realized destinations; ports no
            # itinerary starts from or ends at cannot match and are skipped
            sources = [spec.port_p1] if spec.port_p1 else realized_source_ports(graph)
            dests = [spec.port_px] if spec.port_px else realized_destination_ports(graph)
            pairs = [(a, b) for a in sources for b in dests]
        tasks = [({"port1": a, "port2": b}, a, b) for a, b in pairs if a != b]
    elif kind is PatternKind.LOOP:
        anchors = [spec.port_p1] if spec.port_p1 else realized_source_ports(graph)
        tasks = [({"port": p}, p, None) for p in anchors]
    else:
        tasks = _anchor_tasks(kind, graph, spec)

    # the greedy order depends only on the template's shape, so plan the
    # first instantiation and replay the order for every other anchor; the
    # transitive-closure memo is likewise shared (chains do not depend on
    # the anchor)
    order_indices: List[int] = []
    if tasks:
        first = substitute_nominals(template, tasks[0][0])
        order_indices = plan_indices(first, graph)
    closure_memo: Tuple[Dict, Dict] = ({}, {})

    def run_anchor(task) -> List[Detection]:
        mapping, p1_node, px_node = task
        bound = substitute_nominals(template, mapping)
        resolved = resolve_names(bound, graph)
        ordered = [resolved[i] for i in order_indices]
        rows = evaluate_rows(
            bound, graph, diagnostics, atom_order=ordered, closure_memo=closure_memo
        )
        return _rows_to_detections(graph, kind, rows, p1_node, px_node)

    detections: List[Detection] = []
    if parallelism > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            futures = []
            for task in tasks:
                if deadline_seconds is not None and time.monotonic() - started > deadline_seconds:
                    pool.shutdown(wait=False, cancel_futures=True)
                    raise DetectTimeout(kind.value)
                futures.append(pool.submit(run_anchor, task))
            for future in futures:
                detections.extend(future.result())
    else:
        for task in tasks:
            if deadline_seconds is not None and time.monotonic() - started > deadline_seconds:
                raise DetectTimeout(kind.value)
            detections.extend(run_anchor(task))

    suspicious, pruned = prune_by_date(detections, spec.date_threshold_days)
    merged = suspicious + pruned
    merged.sort(key=Detection.sort_key)
    return merged


def prune_by_date(
    detections: Iterable[Detection], threshold_days: int
) -> Tuple[List[Detection], List[Detection]]:
    """Partition detections by |date gap| <= threshold (inclusive).

    A detection missing either date cannot be confirmed and is routed to the
    pruned side with a MissingDate marker. Order is preserved within each
    side; every input lands on exactly one side.
    """
    suspicious: List[Detection] = []
    pruned: List[Detection] = []
    for det in detections:
        if det.date_gap_days is None:
            det.verdict = Verdict.PRUNED_BY_DATE
            det.verdict_reason = "MissingDate"
            pruned.append(det)
        elif abs(det.date_gap_days) <= threshold_days:
            det.verdict = Verdict.SUSPICIOUS
            det.verdict_reason = "gap %dd within %dd" % (
                det.date_gap_days,
                threshold_days,
            )
            suspicious.append(det)
        else:
            det.verdict = Verdict.PRUNED_BY_DATE
            det.verdict_reason = "gap %dd exceeds %dd" % (
                det.date_gap_days,
                threshold_days,
            )
            pruned.append(det)
    return suspicious, pruned


# ---------------------------------------------------------------------------
# Reporting

REPORT_COLUMNS = [
    "pattern",
    "itinerary",
    "container",
    "p1",
    "px_or_p",
    "vessel1",
    "vessel2",
    "container_date",
    "vessel_date",
    "gap_days",
    "verdict",
]


def detection_row(det: Detection) -> List[str]:
    ev = det.evidence
    return [
        det.kind.value,
        det.itinerary_id,
        ev.container_id,
        ev.port_p1,
        ev.port_px,
        ev.vessel1,
        ev.vessel2,
        ev.container_end_date.isoformat() if ev.container_end_date else "",
        ev.vessel_date.isoformat() if ev.vessel_date else "",
        "" if det.date_gap_days is None else str(det.date_gap_days),
        det.verdict.value if det.verdict else "",
    ]


def write_report_csv(path: str, detections: Sequence[Detection]) -> None:
    import csv

    ordered = sorted(detections, key=Detection.sort_key)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for det in ordered:
            writer.writerow(detection_row(det))


def report_text(detections: Sequence[Detection]) -> str:
    """Human-readable summary: per-pattern counts, per-port breakdown, rows."""
    ordered = sorted(detections, key=Detection.sort_key)
    lines: List[str] = []
    counts: Dict[Tuple[str, str], int] = {}
    for det in ordered:
        verdict = det.verdict.value if det.verdict else "?"
        counts[(det.kind.value, verdict)] = counts.get((det.kind.value, verdict), 0) + 1
    lines.append("Anomaly report")
    lines.append("==============")
    for kind in PatternKind:
        suspicious = counts.get((kind.value, Verdict.SUSPICIOUS.value), 0)
        pruned = counts.get((kind.value, Verdict.PRUNED_BY_DATE.value), 0)
        lines.append(
            "%-26s suspicious: %-5d pruned-by-date: %d"
            % (kind.value, suspicious, pruned)
        )
    pair_counts: Dict[Tuple[str, str, str], int] = {}
    for det in ordered:
        key = (det.kind.value, det.evidence.port_p1, det.evidence.port_px)
        pair_counts[key] = pair_counts.get(key, 0) + 1
    if pair_counts:
        lines.append("")
        lines.append("Per port pair:")
        for (kind, p1, px), n in sorted(pair_counts.items()):
            lines.append("  %-26s %-14s -> %-14s %d" % (kind, p1 or "-", px or "-", n))
    if ordered:
        lines.append("")
        lines.append(" | ".join(REPORT_COLUMNS))
        for det in ordered:
            lines.append(" | ".join(detection_row(det)))
    return "\n".join(lines) + "\n"
