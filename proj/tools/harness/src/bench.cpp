// SPDX-License-Identifier: Apache-2.0

#include "xbev/harness/bench.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <sstream>

#include "xbev/baselines.hpp"
#include "xbev/rng.hpp"
#include "xbev/ssm_core.hpp"
#include "xbev/xqssm.hpp"

namespace xbev::harness {
namespace {

MatrixD random_matrix(std::size_t rows, std::size_t cols, CounterRng& rng) {
  MatrixD m(rows, cols);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

BenchRow time_it(std::string kernel, std::uint64_t V, std::uint64_t M, int repeats,
                 const std::function<void()>& body) {
  BenchRow row{std::move(kernel), V, M, repeats, 0.0, 0.0};
  double total = 0.0;
  double best = 0.0;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    body();
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    total += ms;
    best = r == 0 ? ms : std::min(best, ms);
  }
  row.mean_ms = total / std::max(repeats, 1);
  row.min_ms = best;
  return row;
}

}  // namespace

std::vector<BenchRow> run_bench(std::uint64_t seed, int repeats, bool quick) {
  CounterRng rng(seed);
  const SSMDims d = SSMDims::kernel(8, 16, 16, 1);
  const auto inner = static_cast<std::size_t>(d.inner());
  const auto bc = static_cast<std::size_t>(d.bc_width());
  const auto H = static_cast<std::size_t>(d.heads);
  const auto params = DirectionalParams::init(d.heads, rng);
  const std::vector<std::uint64_t> Vs = quick ? std::vector<std::uint64_t>{256, 1024}
                                              : std::vector<std::uint64_t>{256, 1024, 4096};
  std::vector<BenchRow> rows;
  for (std::uint64_t V : Vs) {
    const std::uint64_t M = V / 4;
    const std::size_t L = V + M;
    const SequenceBatch<double> seq{random_matrix(L, inner, rng), random_matrix(L, bc, rng),
                                    random_matrix(L, bc, rng), random_matrix(L, H, rng)};
    rows.push_back(time_it("scan_recurrent", V + M, 0, repeats, [&] {
      (void)scan_recurrent(d, seq, params.fwd, ScanState<double>::zeros(d));
    }));

    std::vector<std::uint8_t> mask(L, 1);
    for (std::size_t s = 0; s < L; s += 5) mask[s] = 0;
    const XqssmInput in = XqssmInput::bidirectional(seq.x, seq.B, seq.C, seq.dt, seq.B, seq.C,
                                                    seq.dt, mask);
    rows.push_back(time_it("xqssm_recurrent", in.values(), in.queries(), repeats,
                           [&] { (void)xqssm_recurrent(d, in, params); }));

    const MatrixD Qm = random_matrix(in.queries(), inner, rng);
    const MatrixD K = random_matrix(in.values(), inner, rng);
    rows.push_back(time_it("dot_product_xattn", in.values(), in.queries(), repeats,
                           [&] { (void)dot_product_xattn(Qm, K, K); }));
  }
  return rows;
}

nlohmann::json bench_json(const std::vector<BenchRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"kernel", r.kernel},
                   {"V", r.V},
                   {"M", r.M},
                   {"repeats", r.repeats},
                   {"mean_ms", r.mean_ms},
                   {"min_ms", r.min_ms}});
  }
  return out;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << "kernel,V,M,repeats,mean_ms,min_ms\n";
  for (const auto& r : rows) {
    out << r.kernel << ',' << r.V << ',' << r.M << ',' << r.repeats << ',' << r.mean_ms << ','
        << r.min_ms << '\n';
  }
  return out.str();
}

}  // namespace xbev::harness
