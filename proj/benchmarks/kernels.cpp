// SPDX-License-Identifier: Apache-2.0
//
// Kernel timings. Scans take the sequence length as argument; the
// cross-attention kernels take V and use M = V / 4 queries.

#include <benchmark/benchmark.h>

#include "xbev/baselines.hpp"
#include "xbev/rng.hpp"
#include "xbev/ssm_core.hpp"
#include "xbev/xqssm.hpp"

namespace {

using namespace xbev;

const SSMDims kDims = SSMDims::kernel(8, 16, 16, 1);

template <typename T>
Matrix<T> random_matrix(std::size_t rows, std::size_t cols, CounterRng& rng) {
  Matrix<T> m(rows, cols);
  for (T& v : m.values()) v = static_cast<T>(rng.normal());
  return m;
}

template <typename T>
SequenceBatch<T> random_sequence(std::size_t L, CounterRng& rng) {
  const auto inner = static_cast<std::size_t>(kDims.inner());
  const auto bc = static_cast<std::size_t>(kDims.bc_width());
  return {random_matrix<T>(L, inner, rng), random_matrix<T>(L, bc, rng),
          random_matrix<T>(L, bc, rng), random_matrix<T>(L, static_cast<std::size_t>(kDims.heads), rng)};
}

XqssmInput random_xqssm(std::size_t V, CounterRng& rng) {
  const std::size_t L = V + V / 4;
  const auto seq = random_sequence<double>(L, rng);
  std::vector<std::uint8_t> mask(L, 1);
  for (std::size_t s = 0; s < L; s += 5) mask[s] = 0;
  return XqssmInput::bidirectional(seq.x, seq.B, seq.C, seq.dt, seq.B, seq.C, seq.dt, mask);
}

template <typename T>
void BM_ScanRecurrent(benchmark::State& state) {
  CounterRng rng(1);
  const auto seq = random_sequence<T>(static_cast<std::size_t>(state.range(0)), rng);
  const auto params = SSMParams<T>::init(kDims.heads, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(scan_recurrent(kDims, seq, params, ScanState<T>::zeros(kDims)));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK_TEMPLATE(BM_ScanRecurrent, double)->RangeMultiplier(4)->Range(64, 4096);
BENCHMARK_TEMPLATE(BM_ScanRecurrent, float)->RangeMultiplier(4)->Range(64, 4096);

void BM_ScanMatrixMixer(benchmark::State& state) {
  CounterRng rng(2);
  const auto seq = random_sequence<double>(static_cast<std::size_t>(state.range(0)), rng);
  const auto params = SSMParams<double>::init(kDims.heads, rng);
  for (auto _ : state) benchmark::DoNotOptimize(scan_matrix_mixer(kDims, seq, params));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ScanMatrixMixer)->RangeMultiplier(4)->Range(64, 1024);

void BM_Hydra(benchmark::State& state) {
  CounterRng rng(3);
  const auto seq = random_sequence<double>(static_cast<std::size_t>(state.range(0)), rng);
  const auto fwd = SSMParams<double>::init(kDims.heads, rng);
  const auto bwd = SSMParams<double>::init(kDims.heads, rng);
  for (auto _ : state) benchmark::DoNotOptimize(hydra_bidirectional(kDims, seq, fwd, bwd));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Hydra)->RangeMultiplier(4)->Range(64, 4096);

void BM_XqssmRecurrent(benchmark::State& state) {
  CounterRng rng(4);
  const auto in = random_xqssm(static_cast<std::size_t>(state.range(0)), rng);
  const auto params = DirectionalParams::init(kDims.heads, rng);
  for (auto _ : state) benchmark::DoNotOptimize(xqssm_recurrent(kDims, in, params));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_XqssmRecurrent)->RangeMultiplier(4)->Range(256, 16384);

void BM_XqssmParallel(benchmark::State& state) {
  CounterRng rng(5);
  const auto in = random_xqssm(static_cast<std::size_t>(state.range(0)), rng);
  const auto params = DirectionalParams::init(kDims.heads, rng);
  for (auto _ : state) benchmark::DoNotOptimize(xqssm_parallel(kDims, in, params));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_XqssmParallel)->RangeMultiplier(4)->Range(64, 1024);

void BM_DotProduct(benchmark::State& state) {
  CounterRng rng(6);
  const auto V = static_cast<std::size_t>(state.range(0));
  const auto inner = static_cast<std::size_t>(kDims.inner());
  const auto Q = random_matrix<double>(V / 4, inner, rng);
  const auto K = random_matrix<double>(V, inner, rng);
  for (auto _ : state) benchmark::DoNotOptimize(dot_product_xattn(Q, K, K));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DotProduct)->RangeMultiplier(4)->Range(256, 16384);

}  // namespace

BENCHMARK_MAIN();
