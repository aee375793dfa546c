import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from structhash.data import (
    DataFormatError,
    DataMatrix,
    KernelMapConfig,
    QueryNeighborhood,
    apply_standardization,
    default_bandwidth,
    fit_kernel_map,
    ground_truth_by_label,
    ground_truth_by_percentile,
    kernel_feature_map,
    load_dataset,
    read_raw,
    sample_neighborhood,
    standardize,
    write_raw,
)


def test_csv_parse(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("1.0,2.0\n3.0,4.0")
    data, labels = load_dataset(path)
    np.testing.assert_array_equal(data.values, [[1, 2], [3, 4]])
    assert labels is None


def test_csv_ragged_row_names_line(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("1.0,2.0\n3.0,4.0,5.0\n")
    with pytest.raises(DataFormatError, match=r"d\.csv:2"):
        load_dataset(path)


def test_csv_bad_token_and_label_column(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("1,2,0\n3,x,1\n")
    with pytest.raises(DataFormatError, match=":2"):
        load_dataset(path, label_column=True)
    path.write_text("1,2,0\n3,4,1\n")
    data, labels = load_dataset(path, label_column=True)
    assert data.dims == 2
    np.testing.assert_array_equal(labels, [0, 1])


def test_labels_file_length_checked(tmp_path):
    (tmp_path / "d.csv").write_text("1\n2\n3\n")
    (tmp_path / "l.txt").write_text("0\n1\n")
    with pytest.raises(DataFormatError, match="2 labels for 3 rows"):
        load_dataset(tmp_path / "d.csv", labels_path=tmp_path / "l.txt")


def test_missing_and_empty_files(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_dataset(tmp_path / "nope.csv")
    (tmp_path / "e.csv").write_text("")
    with pytest.raises(DataFormatError, match="empty"):
        load_dataset(tmp_path / "e.csv")


@given(arrays(np.float32, st.tuples(st.integers(1, 6), st.integers(1, 5)),
              elements=st.floats(-1e6, 1e6, width=32)))
def test_raw_round_trip_bit_exact(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("raw") / "d.bin"
    write_raw(path, values)
    data, _ = load_dataset(path, format="raw")
    assert data.values.astype(np.float32).tobytes() == values.tobytes()


def test_raw_errors(tmp_path):
    path = tmp_path / "d.bin"
    write_raw(path, np.ones((3, 2)))
    blob = path.read_bytes()
    path.write_bytes(b"XXXX" + blob[4:])
    with pytest.raises(DataFormatError, match="offset 0"):
        read_raw(path)
    path.write_bytes(blob[:-4])
    with pytest.raises(DataFormatError, match="offset 12"):
        read_raw(path)
    path.write_bytes(blob[:8])
    with pytest.raises(DataFormatError, match="truncated"):
        read_raw(path)


def test_data_matrix_rejects_bad_input():
    with pytest.raises(ValueError):
        DataMatrix(np.zeros((0, 3)))
    with pytest.raises(ValueError):
        DataMatrix(np.array([[1.0, np.nan]]))


def test_standardize_constant_column():
    out = standardize(DataMatrix(np.array([[2.0, 0.0], [2.0, 2.0], [2.0, 1.0]])))
    np.testing.assert_array_equal(out.values[:, 0], [0, 0, 0])
    assert out.standardization.scale[0] == 1.0


def test_standardize_population_denominator():
    out = standardize(DataMatrix(np.array([[0.0], [2.0]])))
    np.testing.assert_allclose(out.values[:, 0], [-1, 1])
    assert out.standardization.mean[0] == 1.0 and out.standardization.scale[0] == 1.0


def test_standardize_reapply_matches():
    rng = np.random.default_rng(0)
    data = DataMatrix(rng.normal(3, 2, (20, 4)))
    out = standardize(data)
    again = apply_standardization(data, out.standardization)
    np.testing.assert_array_equal(out.values, again.values)
    np.testing.assert_allclose(out.values.mean(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(out.values.std(axis=0), 1, atol=1e-12)


def test_ground_truth_by_label_examples():
    gt = ground_truth_by_label([0, 0, 1], 0)
    assert gt.relevant.tolist() == [1] and gt.irrelevant.tolist() == [2] and not gt.flagged
    gt = ground_truth_by_label([0, 1, 2], 0)
    assert gt.relevant.size == 0 and gt.irrelevant.tolist() == [1, 2] and gt.flagged
    gt = ground_truth_by_label([5, 5, 5, 5], 0)
    assert gt.relevant.tolist() == [1, 2, 3] and gt.irrelevant.size == 0 and gt.flagged


def test_percentile_two_of_hundred():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((101, 3))
    gt = ground_truth_by_percentile(X, 0, 2.0)
    assert gt.relevant.size == 2 and gt.irrelevant.size == 98
    dist = np.linalg.norm(X - X[0], axis=1)
    assert dist[gt.relevant].max() <= dist[gt.irrelevant].min()


def test_percentile_tie_prefers_lower_index():
    # points 1 and 2 are both at distance 1; the cutoff keeps exactly one
    X = np.array([[0.0], [1.0], [-1.0]] + [[10.0 + t] for t in range(97)])
    gt = ground_truth_by_percentile(X, 0, 1.0)
    assert gt.relevant.tolist() == [1]


def test_percentile_everything_relevant_is_flagged():
    X = np.arange(5.0)[:, None]
    gt = ground_truth_by_percentile(X, 2, 99.0)
    assert gt.irrelevant.size == 0 and gt.flagged


@given(st.integers(0, 2**31), st.integers(2, 40), st.floats(0.5, 60))
def test_neighbourhood_sides_disjoint(seed, n, pct):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 2))
    i = int(rng.integers(n))
    gt = ground_truth_by_percentile(X, i, pct)
    assert np.intersect1d(gt.relevant, gt.irrelevant).size == 0
    assert i not in gt.relevant and i not in gt.irrelevant
    assert gt.relevant.size + gt.irrelevant.size == n - 1
    lab = ground_truth_by_label(rng.integers(0, 3, n), i)
    assert np.intersect1d(lab.relevant, lab.irrelevant).size == 0
    assert lab.relevant.size + lab.irrelevant.size == n - 1


def test_query_neighbourhood_validation():
    with pytest.raises(ValueError, match="overlap"):
        QueryNeighborhood(0, [1, 2], [2, 3])
    with pytest.raises(ValueError, match="own"):
        QueryNeighborhood(0, [0], [1])


def test_sample_undersized_set_taken_whole():
    full = QueryNeighborhood(0, np.arange(1, 31), np.arange(31, 300))
    s = sample_neighborhood(full, 50, 50, seed=3)
    assert s.relevant.tolist() == list(range(1, 31))
    assert s.irrelevant.size == 50


def test_sample_is_deterministic_and_contained():
    full = QueryNeighborhood(0, np.arange(1, 201), np.arange(201, 260))
    a = sample_neighborhood(full, 50, 50, seed=7)
    b = sample_neighborhood(full, 50, 50, seed=7)
    np.testing.assert_array_equal(a.relevant, b.relevant)
    np.testing.assert_array_equal(a.irrelevant, b.irrelevant)
    assert np.unique(a.relevant).size == 50
    assert np.isin(a.relevant, full.relevant).all()


def test_sample_rejects_degenerate():
    with pytest.raises(ValueError):
        sample_neighborhood(QueryNeighborhood(0, [], [1, 2]), seed=0)


def test_kernel_self_response_and_monotone():
    rng = np.random.default_rng(2)
    data = DataMatrix(rng.standard_normal((40, 3)))
    kmap = fit_kernel_map(data, KernelMapConfig(anchor_count=5, bandwidth=1.5, seed=0))
    a = kmap.anchor_indices[2]
    assert kmap.transform(data.values[a:a + 1])[0, 2] == 1.0
    direction = rng.standard_normal(3)
    probes = kmap.anchors[0] + np.outer(np.linspace(0, 4, 9), direction)
    resp = kmap.transform(probes)[:, 0]
    assert np.all(np.diff(resp) < 0)


def test_kernel_dims_equal_anchor_count():
    data = DataMatrix(np.random.default_rng(3).standard_normal((400, 2)))
    out = kernel_feature_map(data, KernelMapConfig(anchor_count=300))
    assert out.dims == 300
    assert np.all(out.values > 0) and np.all(out.values <= 1)


def test_kernel_config_errors():
    data = DataMatrix(np.ones((4, 2)))
    with pytest.raises(ValueError, match="exceeds"):
        fit_kernel_map(data, KernelMapConfig(anchor_count=10))
    with pytest.raises(ValueError, match="positive"):
        fit_kernel_map(data, KernelMapConfig(anchor_count=2, bandwidth=0.0))


def test_default_bandwidth_mean_pairwise_distance():
    X = np.array([[0.0, 0.0], [3.0, 4.0], [0.0, 8.0]])
    # pairwise distances 5, 8, 5
    assert default_bandwidth(X) == pytest.approx(6.0)
