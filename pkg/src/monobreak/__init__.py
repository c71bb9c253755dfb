"""Numerical irreducible decomposition by monodromy breakup of witness sets."""

from .breakup import BreakupResult, BreakupStats, run_classic, run_edgewise
from .embedding import EmbeddedSystem, SliceSet, embed, random_slice
from .polysys import ParseError, PolySystem, Term, format_system, parse_system
from .scheduler import Scheduler, SchedulerStats
from .startsolve import witness_points
from .trace import Certificate, TraceGrid, build_trace_grid, certify_partition, trace_test
from .tracker import MonodromyHomotopy, PathResult, PathStatus, TrackSettings, track
from .witness import WitnessSet, read_witness, resample, validate, write_witness

__all__ = [
    "BreakupResult", "BreakupStats", "run_classic", "run_edgewise",
    "EmbeddedSystem", "SliceSet", "embed", "random_slice",
    "ParseError", "PolySystem", "Term", "format_system", "parse_system",
    "Scheduler", "SchedulerStats", "witness_points",
    "Certificate", "TraceGrid", "build_trace_grid", "certify_partition", "trace_test",
    "MonodromyHomotopy", "PathResult", "PathStatus", "TrackSettings", "track",
    "WitnessSet", "read_witness", "resample", "validate", "write_witness",
]

__version__ = "0.1.0"
