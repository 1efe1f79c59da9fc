from .adler import adler_conditioned_shape, adler_mode_check
from .helicity import (
    curl_field,
    helicity_analytic,
    helicity_conditioned_structure,
    helicity_numeric_check,
)
