#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "detkit/error.hpp"
#include "detkit/rng.hpp"

namespace detkit {

struct SplitRatio {
  int train = 15;
  int val = 3;
  int test = 2;

  std::array<int, 3> weights() const { return {train, val, test}; }
  void validate() const {
    if (train <= 0 || val <= 0 || test <= 0)
      throw ConfigError(fmt::format("split weights must be positive, got {}:{}:{}", train, val, test));
  }
};

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
};

/// Largest-remainder apportionment of `n` items over the ratio weights. Ties
/// in the remainder go to the earlier partition (train, val, test).
inline std::array<std::size_t, 3> apportion(std::size_t n, const SplitRatio& ratio) {
  ratio.validate();
  const auto w = ratio.weights();
  const std::uint64_t total = std::uint64_t(w[0]) + w[1] + w[2];
  std::array<std::size_t, 3> sizes{};
  std::array<std::uint64_t, 3> rem{};
  std::size_t assigned = 0;
  for (int k = 0; k < 3; ++k) {
    const std::uint64_t q = std::uint64_t(n) * std::uint64_t(w[k]);
    sizes[k] = std::size_t(q / total);
    rem[k] = q % total;
    assigned += sizes[k];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b]; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++sizes[order[i % 3]];
  return sizes;
}

/// Seeded Fisher-Yates shuffle followed by contiguous slicing into the
/// apportioned partition sizes.
inline DatasetSplit split_dataset(const std::vector<std::string>& image_ids, const SplitRatio& ratio,
                                  std::uint64_t rng_seed) {
  ratio.validate();
  if (image_ids.size() < 3)
    throw DomainError(fmt::format("cannot allocate {} images over 3 partitions", image_ids.size()));
  const auto sizes = apportion(image_ids.size(), ratio);
  std::vector<std::string> ids = image_ids;
  Stream rng(rng_seed);
  for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.below(i)]);
  DatasetSplit out;
  auto it = ids.begin();
  out.train.assign(it, it + sizes[0]);
  it += sizes[0];
  out.val.assign(it, it + sizes[1]);
  it += sizes[1];
  out.test.assign(it, ids.end());
  return out;
}

/// Draws `set_count` subsets of `set_size` ids. Without replacement each
/// subset is a distinct slice of one shuffle, so the pool must hold
/// set_count * set_size ids; with replacement each subset is sampled
/// independently (ids may repeat across subsets but not within one).
inline std::vector<std::vector<std::string>> sample_subsets(const std::vector<std::string>& pool,
                                                            std::size_t set_count,
                                                            std::size_t set_size,
                                                            bool with_replacement,
                                                            std::uint64_t rng_seed) {
  std::vector<std::vector<std::string>> out;
  if (set_size > pool.size())
    throw DomainError(fmt::format("subset size {} exceeds pool of {}", set_size, pool.size()));
  if (!with_replacement) {
    if (set_count * set_size > pool.size())
      throw DomainError(fmt::format("{} disjoint subsets of {} need {} ids, pool has {}", set_count,
                                    set_size, set_count * set_size, pool.size()));
    std::vector<std::string> ids = pool;
    Stream rng(rng_seed);
    for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.below(i)]);
    for (std::size_t s = 0; s < set_count; ++s)
      out.emplace_back(ids.begin() + s * set_size, ids.begin() + (s + 1) * set_size);
    return out;
  }
  for (std::size_t s = 0; s < set_count; ++s) {
    std::vector<std::string> ids = pool;
    Stream rng(rng_seed, s);
    for (std::size_t i = 0; i < set_size; ++i)
      std::swap(ids[i], ids[i + rng.below(ids.size() - i)]);
    out.emplace_back(ids.begin(), ids.begin() + set_size);
  }
  return out;
}

}  // namespace detkit
