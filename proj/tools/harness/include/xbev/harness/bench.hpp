// SPDX-License-Identifier: Apache-2.0
//
// Wall-clock timings of the kernels at a few sizes. The google-benchmark
// targets under benchmarks/ are the detailed version; this one backs the
// `bench` subcommand.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace xbev::harness {

struct BenchRow {
  std::string kernel;
  std::uint64_t V = 0;
  std::uint64_t M = 0;
  int repeats = 0;
  double mean_ms = 0.0;
  double min_ms = 0.0;
};

std::vector<BenchRow> run_bench(std::uint64_t seed, int repeats, bool quick);

nlohmann::json bench_json(const std::vector<BenchRow>& rows);
std::string bench_csv(const std::vector<BenchRow>& rows);

}  // namespace xbev::harness
