import io
import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from infinifree.cumulants import ScalarCumulants
from infinifree.errors import DimensionError, ValidationError
from infinifree.jsonio import (
    JSONWriter, encode, parse_complex, read_cumulants, read_law, read_matrix, read_ov_law, to_json,
)
from infinifree.ovspace import AtomicOVLaw, SemicircularOVLaw, SeriesOVLaw


@pytest.mark.parametrize('value, expected', [
    (2, 2),
    (1.5, 1.5),
    ([0, 3], 3j),
    ('0+3i', 3j),
    (' -1 - 0.5i ', -1 - 0.5j),
    ('2j', 2j),
])
def test_parse_complex(value, expected):
    assert parse_complex(value) == expected


@pytest.mark.parametrize('value', ['abc', [1, 2, 3]])
def test_parse_complex_rejects(value):
    with pytest.raises(ValidationError):
        parse_complex(value)


def test_read_law_kinds(write_json):
    law = read_law(write_json('sc.json', {'kind': 'semicircle', 'mean': 1.0, 'variance': 0.5}))
    assert (law.kind, law.mean, law.variance) == ('semicircle', 1.0, 0.5)

    law = read_law({'kind': 'atomic', 'atoms': [[0, 1, -1], [2, 0, 1]], 'K': 8})
    assert law.kind == 'atomic' and law.K == 8
    assert law.inf_moments[1] == 2

    law = read_law({'kind': 'moment_table', 'std_moments': [1, 0, 1, 0, 2], 'support_bound': 2})
    assert law.kind == 'moment_table'
    assert law.inf_moments == (0, 0, 0, 0, 0)


@pytest.mark.parametrize('data', [
    {'kind': 'cauchy'},
    {'kind': 'moment_table'},
    {'kind': 'atomic', 'atoms': [[0, 0.5]]},
    [1, 2],
])
def test_read_law_rejects(data):
    with pytest.raises(ValidationError):
        read_law(data)


def test_malformed_and_missing_files(tmp_path):
    broken = tmp_path / 'broken.json'
    broken.write_text('{"kind": "semicircle",')
    with pytest.raises(ValidationError):
        read_law(str(broken))
    with pytest.raises(ValidationError):
        read_law(str(tmp_path / 'absent.json'))
    with pytest.raises(ValidationError):
        read_cumulants(str(tmp_path / 'absent.json'))


def test_cumulant_table_through_writer(tmp_path):
    original = ScalarCumulants({('x',): (0.5, 0.1), ('x', 'x'): (1.0, -0.2j), ('x', 'y'): (0.3, 0)}, 2)
    path = tmp_path / 'cumulants.json'
    with open(path, 'w') as f:
        writer = JSONWriter(f)
        for entry in original.to_json():
            writer.send(entry)
        writer.close()
    table = read_cumulants(str(path))
    assert table.max_order == 2
    assert table.labels == {'x', 'y'}
    assert table.value(('x', 'x')) == (1.0, -0.2j)
    assert table.value(('y', 'x')) == (0, 0)


def test_empty_writer_is_an_empty_array():
    out = io.StringIO()
    JSONWriter(out).close()
    assert json.loads(out.getvalue()) == []


@pytest.mark.parametrize('entries', [
    [],
    [{'order': 3, 'labels': ['x', 'x'], 'std': [[1, 0]]}],
    [{'labels': ['x'], 'std': [[1, 0], [2, 0]]}],
])
def test_read_cumulants_rejects(entries):
    with pytest.raises(ValidationError):
        read_cumulants(entries)


def test_read_matrix(write_json):
    path = write_json('b.json', {'b': [[[0, 2], 0.5], ['0.3', '1+3i']]})
    assert_allclose(read_matrix(path), [[2j, 0.5], [0.3, 1 + 3j]])
    with pytest.raises(DimensionError):
        read_matrix([[1, 2]])
    with pytest.raises(ValidationError):
        read_matrix({'b': 3})


def test_read_ov_law(write_json):
    law_file = write_json('spike.json', {'kind': 'atomic', 'atoms': [[0, 1, -1], [2, 0, 1]]})
    lifted = read_ov_law(write_json('lift.json', {'d': 2, 'kind': 'scalar_lift', 'law': 'spike.json'}))
    assert isinstance(lifted, AtomicOVLaw) and lifted.d == 2
    assert read_law(law_file).kind == 'atomic'

    semicircular = read_ov_law({'d': 2, 'kind': 'semicircular', 'variance': 1.0, 'mean': 0.5, 'variance_inf': 0.25})
    assert isinstance(semicircular, SemicircularOVLaw)
    assert_allclose(semicircular.mean, 0.5 * np.eye(2))
    assert_allclose(semicircular.eta_inf(np.eye(2)), 0.25 * np.eye(2))

    eta = np.eye(4).tolist()
    assert read_ov_law({'d': 2, 'kind': 'semicircular', 'eta': eta}).eta(np.ones((2, 2))).shape == (2, 2)

    family = read_ov_law({
        'd': 2, 'kind': 'cumulant_family', 'M': 2.0,
        'cumulants': [{'order': 2, 'labels': ['x', 'x'], 'std': [[1, 0]]}],
    })
    assert isinstance(family, SeriesOVLaw) and family.label == 'x'


@pytest.mark.parametrize('data, error', [
    ({'d': 2, 'kind': 'free'}, ValidationError),
    ({'d': 2, 'kind': 'semicircular'}, ValidationError),
    ({'d': 2, 'kind': 'semicircular', 'eta': np.eye(9).tolist()}, DimensionError),
])
def test_read_ov_law_rejects(data, error):
    with pytest.raises(error):
        read_ov_law(data)


def test_encode():
    data = {'G': 1 - 2j, 'rows': np.array([[1j, 0]]), 'n': np.int64(3), 'x': (0.5,)}
    assert encode(data) == {'G': [1.0, -2.0], 'rows': [[[0.0, 1.0], [0.0, 0.0]]], 'n': 3, 'x': [0.5]}
    assert json.loads(to_json({'z': 1j})) == {'z': [0.0, 1.0]}
