#pragma once
// Small simulated datasets shared by the model tests.

#include "deepbeat/harness/dataset_io.hpp"
#include "deepbeat/sim.hpp"

namespace testutil {

inline deepbeat::harness::DatasetBundle small_bundle(std::size_t train, std::size_t val, std::size_t test,
                                                     std::uint64_t seed = 3) {
  deepbeat::sim::DatasetRecipe r;
  r.train_count = train;
  r.val_count = val;
  r.test_count = test;
  r.seed = seed;
  return deepbeat::harness::build_dataset(r);
}

}  // namespace testutil
