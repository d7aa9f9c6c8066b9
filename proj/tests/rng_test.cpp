#include <gtest/gtest.h>

#include <array>
#include <set>

#include "trustlab/rng.hpp"

using trustlab::CounterRng;

TEST(CounterRng, SameSeedSameStream) {
  CounterRng a(7), b(7);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
}

TEST(CounterRng, RandomAccessMatchesSequentialDraws) {
  CounterRng a(11, 3);
  std::array<std::uint64_t, 50> seq{};
  for (auto& v : seq) v = a();
  const CounterRng b(11, 3);
  for (std::size_t i = 0; i < seq.size(); ++i) EXPECT_EQ(b.at(i), seq[i]);
}

TEST(CounterRng, SplitStreamsDiffer) {
  const CounterRng root(5);
  std::set<std::uint64_t> firsts;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    auto child = root.split(s);
    firsts.insert(child());
  }
  EXPECT_EQ(firsts.size(), 1000u);
  EXPECT_NE(CounterRng(5).split(1)(), CounterRng(6).split(1)());
}

TEST(CounterRng, UniformIndexIsUnbiased) {
  CounterRng rng(1);
  std::array<int, 7> counts{};
  const int n = 70'000;
  for (int i = 0; i < n; ++i) ++counts[rng.uniform_index(7)];
  for (int c : counts) EXPECT_NEAR(c / double(n), 1.0 / 7.0, 0.01);
}

TEST(CounterRng, Uniform01Range) {
  CounterRng rng(2);
  double sum = 0;
  for (int i = 0; i < 100'000; ++i) {
    const double u = rng.uniform01();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 100'000, 0.5, 0.005);
}
