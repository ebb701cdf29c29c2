#include <doctest.h>

#include <cstdlib>

#include "nuc/errors.hpp"
#include "nuc/knn_index.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace nuc;

TEST_CASE("hand geometry on a line") {
  auto set = nuc::testing::points_2d({{0, 0}, {1, 0}, {3, 0}});
  KnnIndex index(set);
  const float q[2] = {0, 0};

  auto nq = index.query(q, 2);
  CHECK(nq.neighbor_ids == std::vector<PointId>{0, 1});
  CHECK(nq.distances == std::vector<double>{0.0, 1.0});

  auto ex = index.query(q, 2, PointId{0});
  CHECK(ex.neighbor_ids == std::vector<PointId>{1, 2});
  CHECK(ex.distances == std::vector<double>{1.0, 3.0});
}

TEST_CASE("single-point index cannot answer a self-excluded query") {
  auto set = nuc::testing::points_2d({{1, 2}});
  KnnIndex index(set);
  CHECK(index.size() == 1);
  const float q[2] = {1, 2};
  CHECK_THROWS_AS(index.query(q, 1, PointId{0}), QueryError);
  CHECK(index.query(q, 1).neighbor_ids == std::vector<PointId>{0});
}

TEST_CASE("query errors") {
  auto set = nuc::testing::random_set(5, 3, 1);
  KnnIndex index(set);
  const float q3[3] = {0, 0, 0};
  const float q2[2] = {0, 0};
  CHECK_THROWS_AS(index.query(q3, 6), QueryError);
  CHECK_THROWS_AS(index.query(q3, 5, PointId{2}), QueryError);
  CHECK_THROWS_AS(index.query(q3, 0), QueryError);
  CHECK_THROWS_AS(index.query(q2, 1), ShapeError);
  // an id that is not in the index excludes nothing
  CHECK(index.query(q3, 5, PointId{99}).k() == 5);
}

TEST_CASE("cosine kernel rejects zero vectors") {
  auto set = nuc::testing::points_2d({{1, 0}, {0, 0}});
  CHECK_THROWS_AS(KnnIndex(set, DistanceKernel::cosine_distance), BuildError);
  auto ok = nuc::testing::points_2d({{1, 0}, {0, 2}});
  KnnIndex index(ok, DistanceKernel::cosine_distance);
  const float zero[2] = {0, 0};
  CHECK_THROWS_AS(index.query(zero, 1), QueryError);
  const float q[2] = {3, 0};
  auto nq = index.query(q, 2);
  CHECK(nq.neighbor_ids == std::vector<PointId>{0, 1});
  CHECK(nq.distances[0] == doctest::Approx(0.0));
  CHECK(nq.distances[1] == doctest::Approx(1.0));
}

TEST_CASE("kernel names") {
  CHECK(parse_kernel("euclidean") == DistanceKernel::euclidean);
  CHECK(parse_kernel("cosine") == DistanceKernel::cosine_distance);
  CHECK(kernel_name(DistanceKernel::cosine_distance) == "cosine");
  CHECK_THROWS_AS(parse_kernel("manhattan"), UsageError);
}

TEST_CASE("ties are ordered by ascending id") {
  ReprSet set;
  set.dim = 1;
  set.vectors = {1, -1, 1, -1, 0};
  set.ids = {40, 30, 20, 10, 50};
  set.labels = set.pred_labels = {0, 0, 0, 0, 0};
  set.confidences = {1, 1, 1, 1, 1};
  KnnIndex index(set);
  const float q[1] = {0};
  auto nq = index.query(q, 5);
  CHECK(nq.neighbor_ids == std::vector<PointId>{50, 10, 20, 30, 40});
  auto ex = index.query(q, 3, PointId{10});
  CHECK(ex.neighbor_ids == std::vector<PointId>{50, 20, 30});
}

TEST_CASE("random queries match the full-scan oracle") {
  for (auto kernel : {DistanceKernel::euclidean, DistanceKernel::cosine_distance}) {
    CAPTURE(kernel_name(kernel));
    auto set = nuc::testing::random_set(500, 16, 11, 4, 7);
    KnnIndex index(set, kernel);
    auto queries = nuc::testing::random_set(40, 16, 12);
    for (std::size_t i = 0; i < queries.count(); ++i)
      CHECK(oracle::knn_matches(index.query(queries.row(i), 10),
                                oracle::knn(set, queries.row(i), 10, kernel)));
    for (std::size_t i = 0; i < 40; ++i) {
      const PointId self = set.ids[i];
      auto got = index.query(set.row(i), 10, self);
      CHECK(oracle::knn_matches(got, oracle::knn(set, set.row(i), 10, kernel, &self)));
      CHECK(got.distances[0] > 0.0);
    }
  }
}

TEST_CASE("2000-point set, every self-excluded query matches the oracle") {
  auto set = nuc::testing::random_set(2000, 8, 21, 5);
  KnnIndex index(set);
  auto batch = index.query_batch(set, 5, true);
  std::size_t bad = 0;
  for (std::size_t i = 0; i < set.count(); ++i) {
    const PointId self = set.ids[i];
    if (!oracle::knn_matches(batch[i],
                             oracle::knn(set, set.row(i), 5, DistanceKernel::euclidean, &self)))
      ++bad;
  }
  CHECK(bad == 0);
}

TEST_CASE("prefix equals a direct smaller query and labels follow ids") {
  auto set = nuc::testing::random_set(300, 6, 4, 6);
  KnnIndex index(set);
  for (std::size_t i = 0; i < 20; ++i) {
    auto big = index.query(set.row(i), 50);
    for (std::size_t k : {1u, 7u, 50u}) {
      auto p = big.prefix(k);
      auto direct = index.query(set.row(i), k);
      CHECK(p.neighbor_ids == direct.neighbor_ids);
      CHECK(p.distances == direct.distances);
    }
    for (std::size_t j = 0; j < big.k(); ++j)
      CHECK(big.neighbor_labels[j] == index.label_of(big.neighbor_ids[j]));
  }
}

TEST_CASE("batch output is identical for any worker count and repeatable") {
  auto set = nuc::testing::random_set(400, 10, 8);
  auto queries = nuc::testing::random_set(123, 10, 9, 3, 10000);
  KnnIndex index(set);
  setenv("NUC_THREADS", "1", 1);
  auto one = index.query_batch(queries, 7, false);
  setenv("NUC_THREADS", "4", 1);
  auto four = index.query_batch(queries, 7, false);
  unsetenv("NUC_THREADS");
  REQUIRE(one.size() == four.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].neighbor_ids == four[i].neighbor_ids);
    CHECK(one[i].distances == four[i].distances);
    CHECK(one[i].neighbor_ids == index.query(queries.row(i), 7).neighbor_ids);
  }
}
