import numpy as np
import pytest

from diarclust.ahc import AhcConfig, ClusteringResult, ahc_asc, ahc_upgmc, apply_mcs
from diarclust.embed_prep import length_normalize
from diarclust.errors import ValidationError

from .oracles import naive_apply_mcs, naive_centroid_ahc, partition_of


def unit_circle(angles):
    angles = np.asarray(angles, dtype=float)
    return np.column_stack([np.cos(angles), np.sin(angles)])


def random_unit_vectors(rng, n, dim):
    return length_normalize(rng.normal(size=(n, dim)))


class TestAhcUpgmc:
    def test_single_vector(self):
        result = ahc_upgmc(np.array([[1.0, 0.0]]), AhcConfig(distance_threshold=0.5))
        assert result.num_clusters == 1
        assert result.labels.tolist() == [0]

    def test_two_identical_vectors_merge(self):
        result = ahc_upgmc(np.array([[1.0, 0.0], [1.0, 0.0]]), AhcConfig(distance_threshold=0.5))
        assert result.num_clusters == 1

    def test_zero_threshold_merges_only_duplicates(self):
        vectors = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.0, 1.0], [0.6, 0.8]])
        result = ahc_upgmc(vectors, AhcConfig(distance_threshold=0.0))
        assert result.num_clusters == 3
        assert partition_of(result.labels) == {frozenset({0, 2}), frozenset({1, 3}), frozenset({4})}

    def test_empty_input_rejected(self):
        with pytest.raises(ValidationError):
            ahc_upgmc(np.empty((0, 3)), AhcConfig())

    def test_asc_stopping_requires_other_entry_point(self):
        with pytest.raises(ValidationError, match="ahc_asc"):
            ahc_upgmc(np.array([[1.0, 0.0]]), AhcConfig(stopping="asc"))

    def test_centroids_are_member_means(self):
        rng = np.random.default_rng(0)
        vectors = random_unit_vectors(rng, 20, 4)
        result = ahc_upgmc(vectors, AhcConfig(distance_threshold=0.6))
        for g in range(result.num_clusters):
            assert np.allclose(result.centroids[g], vectors[result.labels == g].mean(axis=0))
        assert np.allclose(result.priors, 1.0 / result.num_clusters)

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(42)
        for trial in range(150):
            n = int(rng.integers(1, 13))
            dim = int(rng.integers(2, 6))
            vectors = random_unit_vectors(rng, n, dim)
            threshold = float(rng.uniform(0.0, 2.0))
            result = ahc_upgmc(vectors, AhcConfig(distance_threshold=threshold))
            expected = naive_centroid_ahc(vectors, distance_threshold=threshold)
            assert partition_of(result.labels) == expected, f"trial {trial}"

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(3)
        vectors = random_unit_vectors(rng, 15, 3)
        config = AhcConfig(distance_threshold=0.7)
        base = ahc_upgmc(vectors, config)
        perm = rng.permutation(15)
        permuted = ahc_upgmc(vectors[perm], config)
        base_partition = partition_of(base.labels)
        mapped = {frozenset(int(perm[i]) for i in cluster) for cluster in partition_of(permuted.labels)}
        assert mapped == base_partition


class TestApplyMcs:
    def make_result(self, vectors, labels):
        labels = np.asarray(labels)
        num = labels.max() + 1
        centroids = np.vstack([vectors[labels == g].mean(axis=0) for g in range(num)])
        return ClusteringResult(labels=labels, centroids=centroids, priors=np.full(num, 1 / num), num_clusters=num)

    def test_singleton_absorbed_into_large_cluster(self):
        vectors = unit_circle([0.0] * 10 + [1.0])
        result = self.make_result(vectors, [0] * 10 + [1])
        out = apply_mcs(result, vectors, 2)
        assert out.num_clusters == 1
        assert out.cluster_sizes().tolist() == [11]

    def test_no_small_clusters_is_a_noop(self):
        vectors = unit_circle([0.0, 0.01, 2.0, 2.01])
        result = self.make_result(vectors, [0, 0, 1, 1])
        out = apply_mcs(result, vectors, 2)
        assert out.labels.tolist() == result.labels.tolist()

    def test_singleton_joins_nearest_large_centroid(self):
        # clusters at angles 0 and 2.0; the singleton at 2.5 is far closer to cluster 1
        vectors = unit_circle([0.0] * 5 + [2.0] * 5 + [2.5])
        result = self.make_result(vectors, [0] * 5 + [1] * 5 + [2])
        out = apply_mcs(result, vectors, 2)
        assert out.num_clusters == 2
        assert out.labels[10] == out.labels[5]
        assert np.allclose(out.centroids[1], vectors[5:].mean(axis=0))

    def test_all_small_promotes_largest(self):
        vectors = unit_circle([0.0, 0.1, 2.0])
        result = self.make_result(vectors, [0, 0, 1])
        out = apply_mcs(result, vectors, 5)
        assert out.num_clusters == 1

    def test_matches_naive_reassignment(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            n = int(rng.integers(2, 14))
            vectors = random_unit_vectors(rng, n, 3)
            result = ahc_upgmc(vectors, AhcConfig(distance_threshold=float(rng.uniform(0.1, 1.0))))
            mcs = int(rng.integers(1, 5))
            out = apply_mcs(result, vectors, mcs)
            expected = naive_apply_mcs(partition_of(result.labels), vectors, mcs)
            assert partition_of(out.labels) == expected

    def test_no_undersized_clusters_remain(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            vectors = random_unit_vectors(rng, int(rng.integers(3, 20)), 4)
            result = ahc_upgmc(vectors, AhcConfig(distance_threshold=0.4))
            out = apply_mcs(result, vectors, 3)
            sizes = out.cluster_sizes()
            assert out.num_clusters == 1 or np.all(sizes >= 3)


class TestAhcAsc:
    def test_two_blobs_stop_at_first_big_big_merge(self):
        # geometric spacing forces accretion: the growing cluster is always
        # closer to the next point than any two remaining points are to
        # each other, so no (size>2, size>2) merge happens within a blob
        eps = 0.002
        blob = np.array([0.0, 1.0, 3.0, 7.0, 15.0, 31.0]) * eps
        vectors = unit_circle(np.concatenate([blob, np.pi + blob]))
        config = AhcConfig(min_cluster_size=2)
        result = ahc_asc(vectors, config)
        assert result.num_clusters == 2
        expected = naive_apply_mcs(
            naive_centroid_ahc(vectors, asc_min_cluster_size=2), vectors, 2
        )
        assert partition_of(result.labels) == expected

    def test_identical_points_collapse_fully(self):
        n = 7
        vectors = np.tile([1.0, 0.0], (n, 1))
        result = ahc_asc(vectors, AhcConfig(min_cluster_size=n))
        assert result.num_clusters == 1

    def test_single_point(self):
        result = ahc_asc(np.array([[0.0, 1.0]]), AhcConfig())
        assert result.num_clusters == 1

    def test_matches_naive_oracle_with_mcs(self):
        rng = np.random.default_rng(21)
        for _ in range(100):
            n = int(rng.integers(1, 13))
            vectors = random_unit_vectors(rng, n, 3)
            mcs = int(rng.integers(1, 5))
            result = ahc_asc(vectors, AhcConfig(min_cluster_size=mcs))
            expected = naive_apply_mcs(
                naive_centroid_ahc(vectors, asc_min_cluster_size=mcs), vectors, mcs
            )
            assert partition_of(result.labels) == expected


class TestConfigValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"distance_threshold": -0.1},
            {"distance_threshold": 2.5},
            {"min_cluster_size": 0},
            {"stopping": "unknown"},
        ],
    )
    def test_invalid_configs(self, kwargs):
        with pytest.raises(ValidationError):
            AhcConfig(**kwargs)
