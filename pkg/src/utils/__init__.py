from .io import canonical_hash, format_float, sha256_file, to_json_text, write_csv, write_json
from .rng import split_counts, standard_coordinates, stream_generator
from .stats import effective_sample_size, normalized_weights, weighted_frequency, wilson_interval
