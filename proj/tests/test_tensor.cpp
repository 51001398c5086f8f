#include <gtest/gtest.h>

#include <atomic>
#include <numeric>
#include <set>
#include <stdexcept>

#include "air/error.hpp"
#include "air/matrix.hpp"
#include "air/parallel.hpp"
#include "air/random.hpp"

using namespace air;

TEST(Matrix, RowMajorLayoutAndRowSpans) {
  Matrix m{{1, 2, 3}, {4, 5, 6}};
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  EXPECT_EQ(m(1, 0), 4.0);
  EXPECT_EQ(m.values()[4], 5.0);
  auto r = m.row(1);
  r[2] = 9.0;
  EXPECT_EQ(m(1, 2), 9.0);
}

TEST(Matrix, RaggedInitializerIsRejected) {
  try {
    Matrix m{{1, 2}, {3}};
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::dimension_mismatch);
  }
}

TEST(Matrix, DotNormAndFiniteness) {
  const std::vector<double> a{3, 4}, b{1, 2};
  EXPECT_EQ(dot(a, b), 11.0);
  EXPECT_EQ(norm2(a), 5.0);
  Matrix m{{3, 0}, {0, 4}};
  EXPECT_EQ(frobenius_norm(m), 5.0);
  EXPECT_TRUE(all_finite(a));
  const std::vector<double> bad{1.0, std::nan("")};
  EXPECT_FALSE(all_finite(bad));
}

TEST(Random, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    differs |= x != c.next();
  }
  EXPECT_TRUE(differs);
}

TEST(Random, UniformInUnitInterval) {
  Rng r(1);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.01);
}

TEST(Random, IndexCoversRangeUniformly) {
  Rng r(2);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) ++counts[r.index(7)];
  for (int c : counts) EXPECT_NEAR(c, n / 7.0, 5 * std::sqrt(n / 7.0));
  EXPECT_EQ(r.index(1), 0u);
}

TEST(Random, NormalMoments) {
  Rng r(3);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Random, ShuffleIsAPermutation) {
  Rng r(4);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  r.shuffle(std::span<int>(v));
  std::set<int> s(v.begin(), v.end());
  EXPECT_EQ(s.size(), 50u);
  EXPECT_EQ(*s.begin(), 0);
  EXPECT_EQ(*s.rbegin(), 49);
}

TEST(Random, SampleWithoutReplacementIsSortedAndDistinct) {
  Rng r(5);
  const auto s = r.sample_without_replacement(100, 30);
  ASSERT_EQ(s.size(), 30u);
  for (std::size_t i = 1; i < s.size(); ++i) EXPECT_LT(s[i - 1], s[i]);
  EXPECT_LT(s.back(), 100u);
  EXPECT_EQ(r.sample_without_replacement(10, 10).size(), 10u);
}

TEST(Random, DerivedSeedsAreDistinctPerStream) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 4; ++s)
    for (std::uint64_t k = 0; k < 16; ++k) seen.insert(derive_seed(s, k));
  EXPECT_EQ(seen.size(), 64u);
  EXPECT_EQ(derive_seed(9, 3), derive_seed(9, 3));
}

TEST(Parallel, CoversEveryIndexExactlyOnce) {
  for (unsigned threads : {1u, 2u, 3u, 8u}) {
    std::vector<int> hits(1001, 0);
    parallel_for(
        hits.size(),
        [&](std::size_t b, std::size_t e) {
          for (std::size_t i = b; i < e; ++i) ++hits[i];
        },
        threads);
    for (int h : hits) ASSERT_EQ(h, 1);
  }
}

TEST(Parallel, EmptyRangeDoesNothing) {
  std::atomic<int> calls{0};
  parallel_for(0, [&](std::size_t, std::size_t) { ++calls; }, 4);
  EXPECT_EQ(calls.load(), 0);
}

TEST(Parallel, WorkerExceptionsPropagate) {
  EXPECT_THROW(parallel_for(
                   100,
                   [](std::size_t b, std::size_t) {
                     if (b > 0) throw std::runtime_error("boom");
                   },
                   4),
               std::runtime_error);
}

TEST(Parallel, ThreadSettingClampsToOne) {
  set_num_threads(0);
  EXPECT_EQ(num_threads(), 1u);
  set_num_threads(3);
  EXPECT_EQ(num_threads(), 3u);
  set_num_threads(1);
}

TEST(Error, KindIsCarriedAndNamedInMessage) {
  try {
    require(false, ErrorKind::wrong_magic, "bad header");
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::wrong_magic);
    EXPECT_NE(std::string(e.what()).find("wrong-magic"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("bad header"), std::string::npos);
  }
}
