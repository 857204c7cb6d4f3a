"""Location proofs from scavenged Wi-Fi access point observations.

Stable (long-lived) networks fingerprint a location; volatile (short-lived)
networks shared with co-located witnesses bound the time of a visit.
"""

from .core import (
    Device,
    GeoFix,
    Location,
    LocationCertificate,
    LocationClaim,
    NetworkId,
    Observation,
    RadioMeta,
    TimeWindow,
    User,
    WindowKind,
    network,
    validate_observation,
    window_hierarchy_ok,
)
from .netsets import (
    StableMap,
    StableStrategy,
    VolatileSet,
    compute_stable_intersection,
    compute_stable_top_fraction,
    compute_volatile_bottom_fraction,
    compute_volatile_ids,
    stable_match_rate,
)
from .simulator import (
    ItineraryStep,
    LocationSpec,
    Scene,
    SceneConfig,
    TransientSpec,
    generate_scene,
    simulate_scans,
)
from .store import IngestReport, ObservationStore, ObsFilter, distinct_transmitters, occurrence_counts
from .verifier import VerifierConfig, estimate_location, issue_certificate, time_bound_proof

__version__ = "0.1.0"
