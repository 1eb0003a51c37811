from .rng import RngStream, stream_id, as_generator
from .stable import sample_positive_stable
from .ppp import (
    PppSample,
    NodeMassSample,
    sample_fragment_ppp,
    sample_node_ppp,
    sample_node_mass,
    fragment_compensation,
    fragment_mean_count,
    node_compensation,
    node_mean_count,
    node_mean_mass,
    node_envelope_mass,
    node_remainder_mass,
    default_fragment_cutoff,
    default_node_cutoff,
)
