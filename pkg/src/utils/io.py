import csv
import hashlib
import json
import math
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np

FLOAT_FORMAT = '.17g'


def format_float(value):
    """
    Render a float with 17 significant digits (JSON spelling for non-finite)
    """
    value = float(value)
    if math.isnan(value):
        return 'NaN'
    if math.isinf(value):
        return 'Infinity' if value > 0 else '-Infinity'
    return format(value, FLOAT_FORMAT)


def to_plain(obj):
    """
    Convert dataclasses, numpy scalars and arrays into JSON-ready builtins
    """
    if is_dataclass(obj) and not isinstance(obj, type):
        return to_plain(asdict(obj))
    if isinstance(obj, dict):
        return {str(key): to_plain(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(value) for value in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, complex):
        return {'re': obj.real, 'im': obj.imag}
    if obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _encode(obj, indent, level):
    pad = ' ' * (indent * (level + 1))
    close = ' ' * (indent * level)
    if obj is None:
        return 'null'
    if isinstance(obj, bool):
        return 'true' if obj else 'false'
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, list):
        if not obj:
            return '[]'
        items = [_encode(value, indent, level + 1) for value in obj]
        return '[\n' + ',\n'.join(pad + item for item in items) + '\n' + close + ']'
    if isinstance(obj, dict):
        if not obj:
            return '{}'
        items = [f"{json.dumps(key)}: {_encode(value, indent, level + 1)}" for key, value in obj.items()]
        return '{\n' + ',\n'.join(pad + item for item in items) + '\n' + close + '}'
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def to_json_text(obj, indent=2):
    """
    Deterministic JSON text with 17-significant-digit floats
    """
    return _encode(to_plain(obj), indent, 0) + '\n'


def write_json(path, obj):
    path = Path(path)
    path.write_text(to_json_text(obj), encoding='utf-8')
    return path


def write_csv(path, columns, rows):
    """
    Write rows (sequences aligned with columns) with floats at 17 digits
    """
    path = Path(path)
    with path.open('w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_csv_cell(value) for value in row])
    return path


def _csv_cell(value):
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    return value


def sha256_file(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def canonical_hash(obj):
    """
    SHA-256 of the canonical JSON form (sorted keys) of a config-like object
    """
    text = json.dumps(to_plain(obj), sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def array_hash(*arrays):
    """
    SHA-256 over the raw bytes of numpy arrays (input fingerprints in reports)
    """
    digest = hashlib.sha256()
    for array in arrays:
        array = np.ascontiguousarray(array)
        digest.update(str(array.shape).encode('ascii'))
        digest.update(array.tobytes())
    return digest.hexdigest()
