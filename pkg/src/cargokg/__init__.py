"""cargokg: container itinerary analytics over Container Status Messages.

The pipeline turns raw CSM streams into semantically classified container
itineraries and vessel trips, stores them in a typed knowledge graph and
finds anomalous movement patterns (loops, unnecessary transshipments) with a
small conjunctive pattern-query language.
"""

__version__ = "0.1.0"
