import numpy as np

# Philox keys are 128 bits: the seed fills the high word, the stream id the low word.
_WORD = 2 ** 64


def stream_generator(seed, stream=0):
    """
    Counter-based generator addressed by (seed, stream id)

    Distinct stream ids give non-overlapping, reproducible sequences, so
    parallel replicas can be re-run one at a time and still match.
    """
    seed = int(seed)
    stream = int(stream)
    if not 0 <= seed < _WORD:
        raise ValueError(f"seed must be in [0, 2**64), got {seed}")
    if not 0 <= stream < _WORD:
        raise ValueError(f"stream id must be in [0, 2**64), got {stream}")
    return np.random.Generator(np.random.Philox(key=seed * _WORD + stream))


def standard_coordinates(rng, shape, kind):
    """
    Draw standard KL coordinates

    real: unit-variance normals. complex: real and imaginary parts each of
    variance 1/2, so <|t|^2> = 1 and <t^2> = 0.
    """
    if kind == 'real':
        return rng.standard_normal(shape)
    if kind == 'complex':
        real = rng.standard_normal(shape)
        imag = rng.standard_normal(shape)
        return (real + 1j * imag) / np.sqrt(2.0)
    raise ValueError(f"unknown field kind {kind!r}")


def split_counts(total, n_streams):
    """
    Split a sample count over streams; the split depends only on the inputs
    """
    base, extra = divmod(int(total), int(n_streams))
    return [base + (1 if i < extra else 0) for i in range(n_streams)]
