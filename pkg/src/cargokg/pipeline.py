"""End-to-end convenience wrapper over the staged pipeline.

The CLI persists every stage separately; tests and the benchmark harness
want the whole chain in one call: classify and segment the CSM stream,
reconstruct vessel movements, bind transshipments and populate the graph.
"""

from dataclasses import dataclass
from typing import Iterable, List, Optional

from .diagnostics import Diagnostics
from .events import CsmRecord, VocabularyMap
from .graph import KnowledgeGraph, populate
from .linking import (
    DEFAULT_MATCH_WINDOW_DAYS,
    TransshipmentBinding,
    VesselEventIndex,
    bind_transshipments,
)
from .segmentation import ContainerItinerary, events_from_records, segment_all
from .vessels import (
    DEFAULT_CLUSTER_WINDOW_DAYS,
    VesselEvent,
    VesselPortCall,
    VesselTrip,
    reconstruct_all,
)


@dataclass
class PipelineResult:
    itineraries: List[ContainerItinerary]
    port_calls: List[VesselPortCall]
    vessel_events: List[VesselEvent]
    trips: List[VesselTrip]
    bindings: List[TransshipmentBinding]
    graph: KnowledgeGraph


def run_pipeline(
    records: Iterable[CsmRecord],
    vocab: Optional[VocabularyMap] = None,
    cluster_window_days: int = DEFAULT_CLUSTER_WINDOW_DAYS,
    match_window_days: int = DEFAULT_MATCH_WINDOW_DAYS,
    diagnostics: Optional[Diagnostics] = None,
) -> PipelineResult:
    vocab = vocab or VocabularyMap()
    per_container = events_from_records(records, vocab)
    itineraries = segment_all(per_container)
    flat = [e for events in per_container.values() for e in events]
    calls, vessel_events, trips = reconstruct_all(
        flat, cluster_window_days, diagnostics
    )
    bindings = bind_transshipments(
        itineraries, VesselEventIndex(vessel_events), match_window_days, diagnostics
    )
    graph = populate(itineraries, vessel_events, trips, bindings)
    return PipelineResult(itineraries, calls, vessel_events, trips, bindings, graph)
