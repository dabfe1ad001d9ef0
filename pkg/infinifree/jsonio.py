"""
JSON input and output for laws, cumulant tables, operator-valued law
descriptions and matrices. Complex numbers are [re, im] pairs.
"""

from __future__ import annotations

import os
from json import dumps as _j_dumps
from typing import IO, Any, Iterator, Union

import numpy as np
from ijson import items as _ij_items
from ijson import JSONError as _IJSONError

from .cumulants import ScalarCumulants, joint_from_free_cumulants
from .errors import DimensionError, ValidationError
from .measures import InfLaw
from .ovspace import LinearMapOnB, OVLaw, SemicircularOVLaw, SeriesOVLaw, lift_law


__all__ = ['JSONReader', 'JSONWriter', 'read_document', 'read_law', 'read_cumulants',
           'read_matrix', 'read_ov_law', 'parse_complex', 'encode', 'to_json']

Source = Union[str, os.PathLike, dict, list]


class JSONReader:
    """Streams the items of a top-level JSON array."""

    def __init__(self, path: Union[str, os.PathLike]):
        self.path = os.fspath(path)
        self.file: IO[bytes] = open(self.path, 'rb')
        self.processor = _ij_items(self.file, 'item', use_float=True)

    def __next__(self):
        try:
            return next(self.processor)
        except _IJSONError as e:
            raise ValidationError(f'malformed JSON in {self.path}: {e}') from None

    def __iter__(self) -> Iterator[Any]:
        return self

    def close(self):
        self.file.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class JSONWriter:
    """Writes a top-level JSON array one item at a time."""

    def __init__(self, file: IO[str]):
        self.file = file
        self.prefix = '['

    def send(self, message):
        self.file.write(self.prefix + _j_dumps(encode(message)))
        self.prefix = ','

    def close(self):
        if self.prefix == '[':
            self.file.write('[')
        self.file.write(']\n')


def read_document(path: Union[str, os.PathLike]) -> Any:
    with open(path, 'rb') as f:
        try:
            return next(_ij_items(f, '', use_float=True))
        except StopIteration:
            raise ValidationError(f'{os.fspath(path)} holds no JSON document') from None
        except _IJSONError as e:
            raise ValidationError(f'malformed JSON in {os.fspath(path)}: {e}') from None


def _load(source: Source, base: str = None) -> tuple[Any, str]:
    """(document, directory that relative references resolve against)."""
    if isinstance(source, (dict, list)):
        return source, base or os.getcwd()
    path = os.fspath(source)
    if base is not None and not os.path.isabs(path):
        path = os.path.join(base, path)
    if not os.path.exists(path):
        raise ValidationError(f'no such file: {path}')
    return read_document(path), os.path.dirname(os.path.abspath(path))


def parse_complex(value) -> complex:
    """A number, an [re, im] pair or a string such as '0+3i'."""
    if isinstance(value, str):
        text = value.strip().replace(' ', '').replace('i', 'j')
        try:
            return complex(text)
        except ValueError:
            raise ValidationError(f'not a complex number: {value!r}') from None
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ValidationError(f'complex pairs need two entries ({value})')
        return complex(float(value[0]), float(value[1]))
    return complex(value)


def encode(value):
    """Replace complex numbers and arrays by JSON-ready lists."""
    if isinstance(value, dict):
        return {k: encode(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [encode(v) for v in value]
    if isinstance(value, np.ndarray):
        return encode(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, np.generic):
        return value.item()
    return value


def to_json(obj) -> str:
    data = obj.to_json() if hasattr(obj, 'to_json') else obj
    return _j_dumps(encode(data), indent=2)


def read_law(source: Source, base: str = None) -> InfLaw:
    """
    {"kind": "semicircle", "mean": a, "variance": v},
    {"kind": "atomic", "atoms": [[x, w, w′], …]} or
    {"kind": "moment_table", "std_moments": […], "inf_moments": […], "support_bound": M}.
    """
    data, _ = _load(source, base)
    if not isinstance(data, dict):
        raise ValidationError('a law is a JSON object')
    kind = data.get('kind')
    K = int(data.get('K', 16))
    if kind == 'semicircle':
        return InfLaw.semicircle(float(data.get('mean', 0.0)), float(data.get('variance', 1.0)), K)
    if kind == 'atomic':
        return InfLaw.atomic(data.get('atoms', []), K)
    if kind == 'moment_table':
        if 'std_moments' not in data:
            raise ValidationError('moment_table law needs std_moments')
        return InfLaw.from_moments(data['std_moments'], data.get('inf_moments'), data.get('support_bound'))
    raise ValidationError(f'unknown law kind {kind!r}')


def _entry_scalar(entry: dict, key: str) -> complex:
    values = entry.get(key, [[0, 0]])
    if len(values) != 1:
        raise ValidationError(f'cumulant entry {entry.get("labels")} holds {len(values)} values; scalar tables hold one')
    return parse_complex(values[0])


def read_cumulants(source: Source, base: str = None) -> ScalarCumulants:
    """A table of {"order", "labels", "std", "inf"} entries."""
    if isinstance(source, list):
        entries = source
    else:
        path = os.fspath(source) if base is None or os.path.isabs(source) else os.path.join(base, source)
        if not os.path.exists(path):
            raise ValidationError(f'no such file: {path}')
        with JSONReader(path) as reader:
            entries = list(reader)
    table = {}
    for entry in entries:
        labels = tuple(entry['labels'])
        if int(entry.get('order', len(labels))) != len(labels):
            raise ValidationError(f'cumulant entry {labels} has order {entry["order"]}')
        table[labels] = (_entry_scalar(entry, 'std'), _entry_scalar(entry, 'inf'))
    if not table:
        raise ValidationError('cumulant table is empty')
    return ScalarCumulants(table, max(len(w) for w in table))


def read_matrix(source: Source, base: str = None) -> np.ndarray:
    """A d×d nested list whose entries are numbers, [re, im] pairs or strings."""
    data, _ = _load(source, base)
    if isinstance(data, dict):
        data = data.get('b', data.get('matrix'))
    try:
        matrix = np.array([[parse_complex(v) for v in row] for row in data], dtype=complex)
    except TypeError:
        raise ValidationError('a matrix is a list of rows') from None
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionError(f'matrix must be square ({matrix.shape})')
    return matrix


def _operand(value, d: int) -> np.ndarray:
    if isinstance(value, list):
        return read_matrix(value)
    return parse_complex(value) * np.eye(d)


def read_ov_law(source: Source, base: str = None) -> OVLaw:
    """
    {"d", "kind", …} with kind one of
    "scalar_lift" ({"law": law or file}),
    "cumulant_family" ({"cumulants": table or file, "label", "M", "K"}) or
    "semicircular" ({"variance" or "eta" as a d²×d² matrix, "mean", and
    optional "variance_inf"/"eta_inf", "mean_inf"}).
    """
    data, directory = _load(source, base)
    d = int(data.get('d', 1))
    kind = data.get('kind')
    if kind == 'scalar_lift':
        return lift_law(read_law(data['law'], directory), d)
    if kind == 'cumulant_family':
        family = read_cumulants(data['cumulants'], directory).lifted(d)
        label = data.get('label', next(iter(sorted(family.labels))))
        return SeriesOVLaw(joint_from_free_cumulants([family]), label, float(data['M']), int(data.get('K', 10)))
    if kind == 'semicircular':
        eta = _covariance(data, 'eta', 'variance', d, required=True)
        eta_inf = _covariance(data, 'eta_inf', 'variance_inf', d)
        mean = _operand(data.get('mean', 0), d)
        mean_inf = _operand(data.get('mean_inf', 0), d)
        return SemicircularOVLaw(eta, d, eta_inf, mean, mean_inf)
    raise ValidationError(f'unknown operator-valued law kind {kind!r}')


def _covariance(data: dict, matrix_key: str, scalar_key: str, d: int, required: bool = False):
    if matrix_key in data:
        linear = LinearMapOnB(read_matrix(data[matrix_key]))
        if linear.d != d:
            raise DimensionError(f'{matrix_key} acts on M_{linear.d}, law is over M_{d}')
        return linear
    if scalar_key in data:
        v = float(data[scalar_key])
        return lambda c: v * c
    if required:
        raise ValidationError(f'semicircular law needs {matrix_key} or {scalar_key}')
    return None
