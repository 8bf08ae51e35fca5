// SPDX-License-Identifier: Apache-2.0

#include "xbev/harness/checks.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "xbev/baselines.hpp"
#include "xbev/error.hpp"
#include "xbev/harness/io.hpp"
#include "xbev/harness/json_io.hpp"
#include "xbev/merge.hpp"
#include "xbev/oracles.hpp"
#include "xbev/tolerances.hpp"
#include "xbev/traversal.hpp"
#include "xbev/xqssm.hpp"

namespace xbev::harness {
namespace {

CheckResult finish(std::string name, std::size_t instances, double max_error, double tolerance,
                   std::string detail = {}) {
  return {std::move(name), instances, max_error, tolerance,
          std::isfinite(max_error) && max_error <= tolerance, std::move(detail)};
}

MatrixD random_matrix(std::size_t rows, std::size_t cols, CounterRng& rng, double scale = 1.0) {
  MatrixD m(rows, cols);
  for (double& v : m.values()) v = scale * rng.normal();
  return m;
}

std::size_t random_size(CounterRng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

MatrixD slice_rows(const MatrixD& m, std::size_t first, std::size_t count) {
  MatrixD out(count, m.cols());
  for (std::size_t r = 0; r < count; ++r) {
    std::copy(m.row(first + r).begin(), m.row(first + r).end(), out.row(r).begin());
  }
  return out;
}

SSMDims random_kernel_dims(CounterRng& rng, int max_heads = 8, int max_state = 64) {
  static constexpr int kHeads[] = {1, 2, 4, 8};
  int H = 1;
  do {
    H = kHeads[rng.below(4)];
  } while (H > max_heads);
  const int G = (H % 2 == 0 && rng.uniform01() < 0.5) ? 2 : 1;
  const int P = static_cast<int>(random_size(rng, 1, 4));
  const int N = static_cast<int>(random_size(rng, 1, static_cast<std::size_t>(max_state)));
  return SSMDims::kernel(H, P, N, G);
}

SequenceBatch<double> random_seq(const SSMDims& d, std::size_t L, CounterRng& rng) {
  const auto inner = static_cast<std::size_t>(d.inner());
  const auto bc = static_cast<std::size_t>(d.bc_width());
  return {random_matrix(L, inner, rng), random_matrix(L, bc, rng), random_matrix(L, bc, rng),
          random_matrix(L, static_cast<std::size_t>(d.heads), rng)};
}

SSMParams<double> random_params(int heads, CounterRng& rng) {
  auto p = SSMParams<double>::init(heads, rng);
  for (double& s : p.skip_D) s = rng.normal();
  return p;
}

XqssmInput random_xqssm_input(const SSMDims& d, std::size_t L, double query_prob,
                              CounterRng& rng) {
  const auto inner = static_cast<std::size_t>(d.inner());
  const auto bc = static_cast<std::size_t>(d.bc_width());
  const auto H = static_cast<std::size_t>(d.heads);
  std::vector<std::uint8_t> mask(L);
  for (auto& m : mask) m = rng.uniform01() < query_prob ? 0 : 1;
  return XqssmInput::bidirectional(random_matrix(L, inner, rng), random_matrix(L, bc, rng),
                                   random_matrix(L, bc, rng), random_matrix(L, H, rng),
                                   random_matrix(L, bc, rng), random_matrix(L, bc, rng),
                                   random_matrix(L, H, rng), std::move(mask));
}

bool same_stream(const MergedStream& a, const MergedStream& b) {
  return a.tokens == b.tokens && a.seq.length == b.seq.length && a.seq.s_mask == b.seq.s_mask &&
         a.seq.insert_positions == b.seq.insert_positions &&
         a.seq.extract_index == b.seq.extract_index;
}

}  // namespace

nlohmann::json CheckResult::to_json() const {
  return {{"name", name},     {"instances", instances}, {"max_error", max_error},
          {"tolerance", tolerance}, {"passed", passed}, {"detail", detail}};
}

CheckResult check_scan_duality(std::size_t instances, std::size_t max_len, std::uint64_t seed) {
  CounterRng rng(seed);
  double worst = 0.0;
  double worst_oracle = 0.0;
  for (std::size_t i = 0; i < instances; ++i) {
    const SSMDims d = random_kernel_dims(rng);
    const std::size_t L = random_size(rng, 1, max_len);
    const auto seq = random_seq(d, L, rng);
    const auto params = random_params(d.heads, rng);
    const MatrixD rec = scan_recurrent(d, seq, params, ScanState<double>::zeros(d)).y;
    const MatrixD mix = scan_matrix_mixer(d, seq, params);
    worst = std::max(worst, max_abs_diff(rec, mix));
    worst_oracle = std::max(worst_oracle, max_abs_diff(rec, oracle::ssm_direct_sum(d, seq, params)));
  }
  return finish("scan_duality", instances, std::max(worst, worst_oracle), Tolerances::kScanAbs64,
                "recurrent vs mixer " + std::to_string(worst) + ", recurrent vs direct sum " +
                    std::to_string(worst_oracle));
}

CheckResult check_hydra(std::size_t instances, std::size_t max_len, std::uint64_t seed) {
  CounterRng rng(seed);
  double worst = 0.0;
  for (std::size_t i = 0; i < instances; ++i) {
    const SSMDims d = random_kernel_dims(rng, 4, 16);
    const std::size_t L = random_size(rng, 1, max_len);
    const auto seq = random_seq(d, L, rng);
    const auto fwd = random_params(d.heads, rng);
    const auto bwd = random_params(d.heads, rng);
    worst = std::max(worst, max_abs_diff(hydra_bidirectional(d, seq, fwd, bwd),
                                         oracle::hydra_dense(d, seq, fwd, bwd)));
  }
  return finish("hydra_quasiseparable", instances, worst, Tolerances::kScanAbs64);
}

CheckResult check_dt0_law(std::size_t instances, std::size_t max_len, std::uint64_t seed) {
  CounterRng rng(seed);
  std::size_t violations = 0;
  std::size_t query_events = 0;
  for (std::size_t i = 0; i < instances; ++i) {
    const SSMDims d = random_kernel_dims(rng, 8, 32);
    const std::size_t L = random_size(rng, 1, max_len);
    const XqssmInput in = random_xqssm_input(d, L, 0.4, rng);
    auto params = DirectionalParams::init(d.heads, rng);
    XqssmOptions options;
    options.observer = [&](const TokenEvent& e) {
      if (!e.is_query) return;
      ++query_events;
      if (!std::equal(e.state_before.begin(), e.state_before.end(), e.state_after.begin())) {
        ++violations;
      }
    };
    xqssm_recurrent(d, in, params, options);
  }
  return finish("dt0_state_identity", instances, static_cast<double>(violations), 0.0,
                std::to_string(query_events) + " query tokens observed");
}

CheckResult check_xqssm_oracle(std::size_t instances, std::size_t max_len, std::uint64_t seed) {
  CounterRng rng(seed);
  double worst = 0.0;
  for (std::size_t i = 0; i < instances; ++i) {
    const SSMDims d = random_kernel_dims(rng, 8, 32);
    const std::size_t L = random_size(rng, 1, max_len);
    const XqssmInput in = random_xqssm_input(d, L, 0.3, rng);
    const auto params = DirectionalParams::init(d.heads, rng);
    worst = std::max(worst, max_abs_diff(xqssm_recurrent(d, in, params),
                                         oracle::xqssm_generic_scan(d, in, params)));
  }
  return finish("xqssm_vs_generic_scan", instances, worst, Tolerances::kScanAbs64);
}

CheckResult check_xqssm_parallel(std::size_t instances, std::size_t max_len, std::uint64_t seed) {
  CounterRng rng(seed);
  double worst = 0.0;
  for (std::size_t i = 0; i < instances; ++i) {
    const SSMDims d = random_kernel_dims(rng, 8, 32);
    const std::size_t L = random_size(rng, 1, max_len);
    const XqssmInput in = random_xqssm_input(d, L, 0.3, rng);
    const auto params = DirectionalParams::init(d.heads, rng);
    worst = std::max(worst,
                     max_abs_diff(xqssm_recurrent(d, in, params), xqssm_parallel(d, in, params)));
  }
  return finish("xqssm_parallel_vs_recurrent", instances, worst, Tolerances::kScanAbs64);
}

CheckResult check_flop_formula(const std::vector<std::uint64_t>& V_values,
                               const std::vector<std::uint64_t>& M_values, std::uint64_t seed,
                               std::vector<FlopSample>* samples) {
  const SSMDims d;  // default layer dims
  const auto inner = static_cast<std::uint64_t>(d.inner());
  CounterRng rng(seed);
  double worst = 0.0;
  std::size_t configs = 0;
  std::size_t within = 0;
  for (std::uint64_t V : V_values) {
    for (std::uint64_t M : M_values) {
      const std::size_t L = V + M;
      // Queries spread evenly through the stream.
      std::vector<std::uint8_t> mask(L, 1);
      for (std::uint64_t k = 0; k < M; ++k) mask[static_cast<std::size_t>((k * L) / M)] = 0;
      const auto bc = static_cast<std::size_t>(d.bc_width());
      const auto H = static_cast<std::size_t>(d.heads);
      const XqssmInput in = XqssmInput::bidirectional(
          random_matrix(L, inner, rng), random_matrix(L, bc, rng), random_matrix(L, bc, rng),
          random_matrix(L, H, rng), random_matrix(L, bc, rng), random_matrix(L, bc, rng),
          random_matrix(L, H, rng), mask);
      const auto params = DirectionalParams::init(d.heads, rng);
      XqssmCounters counters;
      XqssmOptions options;
      options.counters = &counters;
      xqssm_recurrent(d, in, params, options);
      const auto formula =
          xqssm_flops(V, M, H, static_cast<std::uint64_t>(d.state_dim), inner).total;
      const double rel = std::abs(static_cast<double>(counters.total()) -
                                  static_cast<double>(formula)) /
                         static_cast<double>(formula);
      worst = std::max(worst, rel);
      ++configs;
      if (rel <= Tolerances::kFlopCounterRel) ++within;
      if (samples != nullptr) samples->push_back({V, M, counters.total(), formula, rel});
    }
  }
  return finish("flop_formula", configs, worst, Tolerances::kFlopCounterRel,
                std::to_string(within) + "/" + std::to_string(configs) +
                    " configs within tolerance");
}

CheckResult check_constant_memory(std::uint64_t seed) {
  CounterRng rng(seed);
  const SSMDims d = SSMDims::kernel(4, 4, 16);
  std::size_t first = 0;
  double spread = 0.0;
  for (std::size_t L : {64u, 256u, 1024u}) {
    const XqssmInput in = random_xqssm_input(d, L, 0.2, rng);
    XqssmCounters counters;
    XqssmOptions options;
    options.counters = &counters;
    xqssm_recurrent(d, in, DirectionalParams::init(d.heads, rng), options);
    if (first == 0) first = counters.peak_aux_bytes;
    spread = std::max(spread, std::abs(static_cast<double>(counters.peak_aux_bytes) -
                                       static_cast<double>(first)));
  }
  return finish("constant_recurrent_memory", 3, spread, 0.0,
                "peak auxiliary bytes " + std::to_string(first));
}

CheckResult check_merge_oracle(std::size_t instances, std::uint64_t seed) {
  CounterRng rng(seed);
  std::size_t failures = 0;
  for (std::size_t i = 0; i < instances; ++i) {
    const std::size_t V = random_size(rng, 1, 64);
    const std::size_t M = random_size(rng, 0, 32);
    const std::size_t width = random_size(rng, 1, 4);
    const MatrixD values = random_matrix(V, width, rng);
    const MatrixD queries = random_matrix(M, width, rng);
    // Draw from a narrow range now and then to force ties.
    const std::size_t range = rng.uniform01() < 0.3 ? std::min<std::size_t>(V, 3) : V;
    std::vector<std::int64_t> r1d(M);
    std::vector<std::int64_t> ids(M);
    for (std::size_t k = 0; k < M; ++k) {
      r1d[k] = static_cast<std::int64_t>(rng.below(range));
      ids[k] = static_cast<std::int64_t>(rng.below(1000));
    }
    const auto positions = index_offset(r1d, static_cast<std::int64_t>(V));
    const MergedStream fast = build_merged(values, queries, positions, ids);
    const MergedStream slow = oracle::naive_insert(values, queries, r1d, ids);
    bool ok = same_stream(fast, slow);
    ok = ok && filter_stream(fast.tokens, fast.seq.s_mask, true) == values;
    // Query rows come back in position order; map them through positions.
    const MatrixD q_back = filter_stream(fast.tokens, fast.seq.s_mask, false);
    std::vector<std::size_t> by_position(M);
    for (std::size_t k = 0; k < M; ++k) by_position[k] = k;
    std::sort(by_position.begin(), by_position.end(),
              [&](std::size_t a, std::size_t b) { return positions[a] < positions[b]; });
    for (std::size_t r = 0; r < M && ok; ++r) {
      const auto got = q_back.row(r);
      const auto want = queries.row(by_position[r]);
      ok = std::equal(got.begin(), got.end(), want.begin());
    }
    // Sorted positions strictly increase; with row-major indices every value
    // token below a copy's index precedes it.
    for (std::size_t r = 1; r < M && ok; ++r) {
      ok = positions[by_position[r]] > positions[by_position[r - 1]];
    }
    for (std::size_t k = 0; k < M && ok; ++k) {
      std::int64_t values_before = 0;
      for (std::int64_t t = 0; t < positions[k]; ++t) values_before += fast.seq.s_mask[static_cast<std::size_t>(t)];
      ok = values_before == r1d[k];
    }
    if (!ok) ++failures;
  }
  return finish("merge_oracle", instances, static_cast<double>(failures), 0.0);
}

CheckResult check_traversals(std::size_t instances, std::uint64_t seed) {
  CounterRng rng(seed);
  static constexpr ScanOrder kScans[] = {ScanOrder::kRowMajor, ScanOrder::kColumnMajor,
                                         ScanOrder::kRowSnake, ScanOrder::kColumnSnake};
  std::size_t failures = 0;
  std::size_t checked = 0;
  for (std::size_t i = 0; i < instances; ++i) {
    const int H = static_cast<int>(random_size(rng, 1, 12));
    const int W = static_cast<int>(random_size(rng, 1, 12));
    std::vector<TraversalOrder> orders{TraversalOrder::row_major(), TraversalOrder::column_major(),
                                       TraversalOrder::row_snake(), TraversalOrder::column_snake()};
    const int ph = static_cast<int>(random_size(rng, 1, static_cast<std::size_t>(H)));
    const int pw = static_cast<int>(random_size(rng, 1, static_cast<std::size_t>(W)));
    if (H % ph == 0 && W % pw == 0) {
      orders.push_back(TraversalOrder::patch(ph, pw, kScans[rng.below(4)], kScans[rng.below(4)]));
    }
    for (const auto& order : orders) {
      ++checked;
      const Permutation p = flatten_permutation(H, W, order);
      const auto n = static_cast<std::size_t>(H * W);
      std::vector<std::uint8_t> seen(n, 0);
      bool ok = p.forward.size() == n && p.inverse.size() == n;
      for (std::size_t k = 0; ok && k < n; ++k) {
        const auto f = p.forward[k];
        ok = f >= 0 && static_cast<std::size_t>(f) < n && !seen[static_cast<std::size_t>(f)] &&
             p.inverse[static_cast<std::size_t>(f)] == static_cast<std::int64_t>(k) &&
             remap_index(static_cast<std::int64_t>(k), H, W, order) == f;
        if (ok) seen[static_cast<std::size_t>(f)] = 1;
      }
      if (!ok) ++failures;
    }
    // Even rows of the row snake coincide with row-major order.
    const Permutation snake = flatten_permutation(H, W, TraversalOrder::row_snake());
    for (int r = 0; r < H; r += 2) {
      for (int c = 0; c < W; ++c) {
        if (snake.forward[static_cast<std::size_t>(r * W + c)] != r * W + c) ++failures;
      }
    }
  }
  return finish("traversal_bijection", checked, static_cast<double>(failures), 0.0);
}

CheckResult check_projection(std::size_t instances, std::uint64_t seed) {
  CounterRng rng(seed);
  double worst = 0.0;
  std::size_t compared = 0;
  for (std::size_t i = 0; i < instances; ++i) {
    const double yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
    const double hfov = rng.uniform(0.3, 2.5);
    const Vec3 pos{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0.5, 2.5)};
    const int w = static_cast<int>(random_size(rng, 64, 1600));
    const int h = static_cast<int>(random_size(rng, 64, 900));
    const CameraModel cam = make_pinhole_camera(yaw, pos, hfov, w, h);
    BEVGridSpec spec;
    spec.H_bev = 6;
    spec.W_bev = 7;
    spec.extent = {-30, 30, -30, 30};
    const auto centers = bev_cell_centers(spec);
    const Projection proj = lift_and_project(centers, spec, cam);
    for (std::size_t q = 0; q < centers.size(); ++q) {
      for (std::size_t z = 0; z < spec.pillars(); ++z) {
        const Vec3 point{centers[q][0], centers[q][1], spec.pillar_z[z]};
        const auto want = oracle::angular_projection(yaw, pos, hfov, w, h, point);
        const std::size_t k = q * spec.pillars() + z;
        if (!want.has_value()) {
          if (proj.valid[k] != 0) worst = std::max(worst, 1.0);
          continue;
        }
        if (proj.valid[k] == 0) {
          worst = std::max(worst, 1.0);
          continue;
        }
        // Compare where the point is within a few image widths of the axis.
        if (std::abs((*want)[0]) > 4.0 || std::abs((*want)[1]) > 4.0) continue;
        ++compared;
        worst = std::max({worst, std::abs(proj.uv[k][0] - (*want)[0]),
                          std::abs(proj.uv[k][1] - (*want)[1])});
      }
    }
  }
  return finish("projection_vs_angular_oracle", instances, worst, 1e-9,
                std::to_string(compared) + " points compared");
}

CheckResult check_disjoint_fov(std::size_t seeds, int cameras, std::uint64_t seed) {
  CounterRng rng(seed);
  BEVGridSpec spec;  // 50 x 50 over +-51.2 m, Z = 4
  const Vec3 position{0.0, 0.0, 1.5};
  const auto centers = bev_cell_centers(spec);
  std::size_t multi = 0;
  std::size_t missed_far = 0;
  std::vector<double> mean_M(static_cast<std::size_t>(cameras), 0.0);
  for (std::size_t s = 0; s < seeds; ++s) {
    const double yaw0 = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const auto rig = make_ring_rig(cameras, yaw0, position, 1600, 900);
    const ReferencePointSet refs = build_reference_points(spec, rig);
    for (std::size_t q = 0; q < refs.queries; ++q) {
      const double range = std::hypot(centers[q][0], centers[q][1]);
      for (std::size_t z = 0; z < refs.pillars; ++z) {
        std::size_t hits = 0;
        for (std::size_t c = 0; c < refs.cameras; ++c) hits += refs.hit(c, q, z) ? 1 : 0;
        if (hits > 1) ++multi;
        if (hits == 0 && range >= 12.0) ++missed_far;
      }
    }
    for (std::size_t c = 0; c < refs.cameras; ++c) {
      mean_M[c] += static_cast<double>(refs.M[c]) / static_cast<double>(seeds);
    }
  }
  const double target = static_cast<double>(spec.pillars() * spec.queries()) / cameras;
  double worst = 0.0;
  for (double m : mean_M) worst = std::max(worst, std::abs(m - target) / target);
  const bool exact = multi == 0 && missed_far == 0;
  CheckResult r = finish("disjoint_fov_hits", seeds, exact ? worst : INFINITY,
                         Tolerances::kHitsPerCameraRel,
                         std::to_string(multi) + " multi-camera points, " +
                             std::to_string(missed_far) + " far points missed, worst per-camera M "
                             "deviation " + std::to_string(worst));
  return r;
}

CheckResult check_softmax(std::size_t instances, std::uint64_t seed) {
  CounterRng rng(seed);
  double worst = 0.0;
  double row_sum = 0.0;
  for (std::size_t i = 0; i < instances; ++i) {
    const std::size_t D = random_size(rng, 1, 16);
    const MatrixD Q = random_matrix(random_size(rng, 1, 8), D, rng);
    const MatrixD K = random_matrix(random_size(rng, 1, 12), D, rng);
    const MatrixD V = random_matrix(K.rows(), random_size(rng, 1, 8), rng);
    worst = std::max(worst, max_abs_diff(dot_product_xattn(Q, K, V), oracle::softmax_attention(Q, K, V)));
    const MatrixD w = attention_weights(Q, K);
    for (std::size_t r = 0; r < w.rows(); ++r) {
      double s = 0.0;
      for (double v : w.row(r)) s += v;
      row_sum = std::max(row_sum, std::abs(s - 1.0));
    }
  }
  CheckResult r = finish("dot_product_vs_softmax_oracle", instances, worst, 1e-10,
                         "max row-sum deviation " + std::to_string(row_sum));
  r.passed = r.passed && row_sum <= 1e-12;
  return r;
}

CheckResult check_naive_mamba(std::size_t instances, std::uint64_t seed) {
  CounterRng rng(seed);
  double worst = 0.0;
  for (std::size_t i = 0; i < instances; ++i) {
    const SSMDims d = random_kernel_dims(rng, 4, 16);
    const std::size_t T = random_size(rng, 1, 48);
    const auto seq = random_seq(d, T, rng);
    const auto params = random_params(d.heads, rng);
    const MatrixD C = random_matrix(random_size(rng, 1, 6), static_cast<std::size_t>(d.bc_width()), rng);
    worst = std::max(worst, max_abs_diff(naive_mamba_xattn(d, seq, params, C),
                                         oracle::naive_mamba_sum(d, seq, params, C)));
  }
  return finish("naive_mamba_vs_sum", instances, worst, Tolerances::kScanAbs64);
}

CheckResult check_deformable(std::size_t instances, std::uint64_t seed) {
  CounterRng rng(seed);
  double worst = 0.0;
  for (std::size_t i = 0; i < instances; ++i) {
    const int H = 8;
    const int W = 8;
    const MatrixD map = random_matrix(64, random_size(rng, 1, 6), rng);
    DeformableSamples s;
    s.queries = random_size(rng, 1, 5);
    s.points = random_size(rng, 1, 4);
    s.offsets = random_size(rng, 1, 4);
    for (std::size_t k = 0; k < s.queries * s.points; ++k) s.refs.push_back({rng.uniform01(), rng.uniform01()});
    for (std::size_t q = 0; q < s.queries; ++q) {
      std::vector<double> w(s.points * s.offsets);
      double total = 0.0;
      for (double& v : w) total += (v = rng.uniform(0.01, 1.0));
      for (double v : w) {
        s.weights.push_back(v / total);
        // Offsets reach past the border to exercise zero padding.
        s.deltas.push_back({rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)});
      }
    }
    worst = std::max(worst, max_abs_diff(deformable_xattn(map, H, W, s),
                                         oracle::deformable_dense(map, H, W, s)));
  }
  return finish("deformable_vs_dense_bilinear", instances, worst, Tolerances::kScanAbs64);
}

CheckResult check_scaling_ratios() {
  const auto rows = scaling_rows();
  std::vector<ComplexityReport> reports;
  for (const auto& c : rows) reports.push_back(complexity_report(c));
  double worst = 0.0;
  std::string detail;
  for (const auto& pub : published_scaling()) {
    const double base = static_cast<double>(reports[0].find(pub.module).flops);
    for (std::size_t r = 1; r < 3; ++r) {
      const double ours = static_cast<double>(reports[r].find(pub.module).flops) / base;
      const double theirs = pub.gflops[r] / pub.gflops[0];
      const double rel = std::abs(ours - theirs) / theirs;
      worst = std::max(worst, rel);
      detail += pub.module + " row" + std::to_string(r) + " " + std::to_string(ours) + " vs " +
                std::to_string(theirs) + "; ";
    }
  }
  return finish("scaling_ratios", 6, worst, Tolerances::kScalingRatioRel, detail);
}

CheckResult check_estimator_monotonicity() {
  std::size_t failures = 0;
  std::size_t probes = 0;
  const ComplexityConfig base;
  const ComplexityReport ref = complexity_report(base);
  // `strict` lists the modules whose estimate depends on the bumped parameter;
  // the others must not decrease.
  auto bump = [&](std::vector<std::string> strict, auto setter) {
    ComplexityConfig c = base;
    setter(c);
    const ComplexityReport r = complexity_report(c);
    for (std::size_t m = 0; m < r.modules.size(); ++m) {
      ++probes;
      const bool must_grow =
          std::find(strict.begin(), strict.end(), r.modules[m].module) != strict.end();
      const auto now = r.modules[m].flops;
      const auto was = ref.modules[m].flops;
      if (must_grow ? now <= was : now < was) ++failures;
    }
  };
  const std::vector<std::string> all = {"xqssm", "deformable", "dot_product"};
  bump(all, [](ComplexityConfig& c) { c.bev_h *= 2; });
  bump(all, [](ComplexityConfig& c) { c.bev_w *= 2; });
  bump(all, [](ComplexityConfig& c) { c.img_w *= 2; });
  bump(all, [](ComplexityConfig& c) { c.img_h *= 2; });
  bump(all, [](ComplexityConfig& c) { c.model_dim *= 2; });
  bump(all, [](ComplexityConfig& c) { c.cameras += 1; });
  bump({"xqssm"}, [](ComplexityConfig& c) { c.state_dim *= 2; });
  bump({"xqssm"}, [](ComplexityConfig& c) { c.heads *= 2; });
  bump({"deformable"}, [](ComplexityConfig& c) { c.offsets *= 2; });
  bump({"deformable"}, [](ComplexityConfig& c) { c.attn_heads *= 2; });

  // Dot-product over XQSSM grows with V at fixed N, H.
  ComplexityConfig small = base;
  ComplexityConfig large = base;
  small.stride = 1;
  small.img_w = 100;
  small.img_h = 100;  // V = 1e4
  large.stride = 1;
  large.img_w = 1000;
  large.img_h = 1000;  // V = 1e6
  auto ratio = [](const ComplexityConfig& c) {
    const auto r = complexity_report(c);
    return static_cast<double>(r.find("dot_product").flops) /
           static_cast<double>(r.find("xqssm").flops);
  };
  ++probes;
  if (!(ratio(large) > ratio(small))) ++failures;
  return finish("estimator_monotonicity", probes, static_cast<double>(failures), 0.0);
}

GenSceneOptions smoke_scene_options(std::uint64_t seed) {
  GenSceneOptions o;
  o.seed = seed;
  o.cameras = 6;
  o.img_w = 192;
  o.img_h = 96;
  o.H_bev = 8;
  o.W_bev = 8;
  o.extent = {-24.0, 24.0, -24.0, 24.0};
  // Pillars well above and below the cameras leave the four center cells
  // outside every vertical field of view, so the scene has zero-hit queries.
  o.pillar_z = {-1.0, 3.0};
  o.levels = {FeatureLevelSpec{3, 6, 8}};
  return o;
}

LayerConfig smoke_layer_config() {
  LayerConfig c;
  c.dims = SSMDims{8, 2.0, 2, 8, 4, 1};
  return c;
}

CheckResult check_residual_guarantee(std::uint64_t seed) {
  LoadedScene scene = generate_scene(smoke_scene_options(seed));
  const LayerConfig config = smoke_layer_config();
  LayerParams params = LayerParams::init(config.dims, config.conv_width, seed);
  for (double& w : params.out_proj.weight.values()) w = 0.0;
  const auto refs = build_reference_points(scene.spec.bev, scene.spec.cameras);

  MatrixD expected(scene.queries.rows(), scene.queries.cols());
  for (std::size_t q = 0; q < expected.rows(); ++q) {
    const auto n = layer_norm(scene.queries.row(q), params.norm_gain, params.norm_bias);
    std::copy(n.begin(), n.end(), expected.row(q).begin());
  }
  double worst = 0.0;
  CounterRng rng(seed ^ 0x5eed);
  for (int trial = 0; trial < 3; ++trial) {
    for (auto& cam : scene.features) {
      for (auto& level : cam) level.values = random_matrix(level.values.rows(), level.values.cols(), rng, 3.0);
    }
    const MatrixD out = spatial_cross_mamba_forward(scene.queries, scene.features, refs, params, config);
    worst = std::max(worst, max_abs_diff(out, expected));
  }
  return finish("residual_guarantee", 3, worst, 0.0);
}

CheckResult check_zero_hit_independence(std::uint64_t seed) {
  LoadedScene scene = generate_scene(smoke_scene_options(seed));
  const LayerConfig config = smoke_layer_config();
  const LayerParams params = LayerParams::init(config.dims, config.conv_width, seed);
  const auto refs = build_reference_points(scene.spec.bev, scene.spec.cameras);
  std::vector<std::size_t> zero_hit;
  for (std::size_t q = 0; q < refs.queries; ++q) {
    if (refs.hits_of_query(q) == 0) zero_hit.push_back(q);
  }
  double worst = 0.0;
  CounterRng rng(seed ^ 0xfeed);
  for (int trial = 0; trial < 3; ++trial) {
    for (auto& cam : scene.features) {
      for (auto& level : cam) level.values = random_matrix(level.values.rows(), level.values.cols(), rng);
    }
    LayerTrace trace;
    spatial_cross_mamba_forward(scene.queries, scene.features, refs, params, config, &trace);
    for (std::size_t q : zero_hit) {
      for (double v : trace.q_y.row(q)) worst = std::max(worst, std::abs(v));
    }
  }
  CheckResult r = finish("zero_hit_independence", 3, worst, 0.0,
                         std::to_string(zero_hit.size()) + " zero-hit queries");
  if (zero_hit.empty()) {
    r.passed = false;
    r.detail = "smoke scene has no zero-hit queries";
  }
  return r;
}

CheckResult check_duplication_invariance(std::uint64_t seed) {
  const LoadedScene scene = generate_scene(smoke_scene_options(seed));
  LayerConfig config = smoke_layer_config();
  config.norm_mode = NormMode::kAverage;
  const LayerParams params = LayerParams::init(config.dims, config.conv_width, seed);
  const auto refs = build_reference_points(scene.spec.bev, scene.spec.cameras);
  const MatrixD base = spatial_cross_mamba_forward(scene.queries, scene.features, refs, params, config);

  double worst = 0.0;
  for (std::size_t k : {2u, 3u}) {
    // Every pillar repeated k times: each hit appears k times.
    ReferencePointSet dup = refs;
    dup.pillars = refs.pillars * k;
    dup.R.assign(refs.cameras * refs.queries * dup.pillars, Vec2{-1.0, -1.0});
    dup.b.assign(dup.R.size(), 0);
    for (std::size_t c = 0; c < refs.cameras; ++c) {
      dup.M[c] = refs.M[c] * k;
      for (std::size_t q = 0; q < refs.queries; ++q) {
        for (std::size_t z = 0; z < refs.pillars; ++z) {
          for (std::size_t r = 0; r < k; ++r) {
            dup.R[dup.index(c, q, z * k + r)] = refs.point(c, q, z);
            dup.b[dup.index(c, q, z * k + r)] = refs.b[refs.index(c, q, z)];
          }
        }
      }
    }
    const MatrixD out = spatial_cross_mamba_forward(scene.queries, scene.features, dup, params, config);
    worst = std::max(worst, max_abs_diff(out, base));
  }
  return finish("average_duplication_invariance", 2, worst, Tolerances::kDuplicationInvariance);
}

CheckResult check_after_conv_isolation(std::uint64_t seed) {
  const LayerConfig config = smoke_layer_config();
  const LayerParams params = LayerParams::init(config.dims, config.conv_width, seed);
  const ProjectionLayout layout(config.dims);
  CounterRng rng(seed);
  double worst = 0.0;
  const int H_f = 4;
  const int W_f = 5;
  for (int trial = 0; trial < 5; ++trial) {
    const MatrixD values = random_matrix(static_cast<std::size_t>(H_f * W_f), layout.token_width(), rng);
    const std::size_t M = random_size(rng, 1, 12);
    const MatrixD queries = random_matrix(M, layout.token_width(), rng);
    std::vector<Vec2> uv(M);
    std::vector<std::int64_t> ids(M);
    for (std::size_t k = 0; k < M; ++k) {
      uv[k] = {rng.uniform01(), rng.uniform01()};
      ids[k] = static_cast<std::int64_t>(k);
    }
    const MergedStream merged = prepare_stream(values, queries, uv, ids, H_f, W_f,
                                               TraversalOrder::row_major(), params, config);
    const MatrixD conv_only = causal_depthwise_conv(slice_cols(values, 0, layout.conv_channels()),
                                                    params.conv_weight, params.conv_bias);
    const MatrixD from_stream = filter_stream(merged.tokens, merged.seq.s_mask, true);
    // x and B slices are untouched by the zero flags on feature rows.
    const std::size_t xb = layout.inner + layout.bc;
    for (std::size_t r = 0; r < conv_only.rows(); ++r) {
      for (std::size_t c = 0; c < xb; ++c) {
        worst = std::max(worst, std::abs(conv_only(r, c) - from_stream(r, c)));
      }
    }
  }
  return finish("after_conv_query_isolation", 5, worst, 0.0);
}

CheckResult check_config_coverage(std::uint64_t seed) {
  const LoadedScene scene = generate_scene(smoke_scene_options(seed));
  const auto refs = build_reference_points(scene.spec.bev, scene.spec.cameras);
  const LayerConfig base = smoke_layer_config();
  const LayerParams params = LayerParams::init(base.dims, base.conv_width, seed);
  struct Zero {
    bool B, C, dt;
  };
  static constexpr Zero kZero[] = {{false, false, false}, {false, false, true}, {true, false, false},
                                   {true, false, true},   {true, true, true}};
  std::size_t runs = 0;
  std::size_t failures = 0;
  std::string first_failure;
  for (auto norm : {NormMode::kAverage, NormMode::kRmsNorm, NormMode::kBoth, NormMode::kNeither}) {
    for (auto ins : {InsertionMode::kProject, InsertionMode::kAppend, InsertionMode::kPrepend}) {
      for (auto merge : {MergeOrder::kBeforeConv, MergeOrder::kAfterConv}) {
        for (auto extract : {ExtractOrder::kBeforeGate, ExtractOrder::kAfterGate}) {
          for (const Zero& z : kZero) {
            LayerConfig c = base;
            c.norm_mode = norm;
            c.insertion_mode = ins;
            c.merge_order = merge;
            c.extract_order = extract;
            c.zero_BQ = z.B;
            c.zero_CV = z.C;
            c.zero_dtQ = z.dt;
            c.traversals = {TraversalOrder::row_snake(), TraversalOrder::column_major()};
            ++runs;
            try {
              const MatrixD out = spatial_cross_mamba_forward(scene.queries, scene.features, refs, params, c);
              if (!all_finite<double>(out.values())) throw Error(ErrorKind::kNumeric, "non-finite output");
            } catch (const Error& e) {
              ++failures;
              if (first_failure.empty()) first_failure = to_json(c).dump() + ": " + e.what();
            }
          }
        }
      }
    }
  }
  return finish("config_coverage", runs, static_cast<double>(failures), 0.0, first_failure);
}

CheckResult check_scene_roundtrip(std::uint64_t seed) {
  CounterRng rng(seed);
  std::size_t failures = 0;
  for (int i = 0; i < 5; ++i) {
    GenSceneOptions o = smoke_scene_options(rng.next_u64());
    o.cameras = static_cast<int>(random_size(rng, 3, 8));
    o.yaw0 = rng.uniform(0.0, 6.0);
    const SceneSpec s = make_scene_spec(o);
    const SceneSpec back = scene_from_json(parse_json_text(to_json(s).dump(), "roundtrip"));
    const SceneSpec again = scene_from_json(to_json(back));
    if (!(s == back) || !(back == again)) ++failures;
  }
  return finish("scene_json_roundtrip", 5, static_cast<double>(failures), 0.0);
}

CheckResult check_tensor_guards(const std::string& scratch_dir) {
  namespace fs = std::filesystem;
  ensure_directory(scratch_dir);
  const fs::path bad = fs::path(scratch_dir) / "bad_magic.xbev";
  const fs::path short_file = fs::path(scratch_dir) / "truncated.xbev";
  const fs::path missing = fs::path(scratch_dir) / "does_not_exist.xbev";
  auto bytes = encode_tensor(Tensor{{2, 3}, {1, 2, 3, 4, 5, 6}});
  auto corrupted = bytes;
  corrupted[0] = 'Y';
  write_bytes(bad, corrupted);
  bytes.resize(bytes.size() - 2);
  write_bytes(short_file, bytes);
  std::size_t failures = 0;
  for (const fs::path& p : {bad, short_file, missing}) {
    try {
      read_tensor(p);
      ++failures;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kIo || e.detail() != p.string() ||
          std::string(e.what()).find(p.filename().string()) == std::string::npos) {
        ++failures;
      }
    }
  }
  return finish("tensor_format_guards", 3, static_cast<double>(failures), 0.0);
}

CheckResult check_ssm_properties(std::size_t instances, std::uint64_t seed) {
  CounterRng rng(seed);
  std::size_t violations = 0;
  double worst_f32 = 0.0;
  double worst_reverse = 0.0;
  for (std::size_t i = 0; i < instances; ++i) {
    const SSMDims d = random_kernel_dims(rng, 8, 32);
    const std::size_t L = random_size(rng, 2, 96);
    const auto seq = random_seq(d, L, rng);
    const auto params = random_params(d.heads, rng);
    const auto zero = ScanState<double>::zeros(d);

    // Decay in (0, 1] and non-increasing in delta.
    const auto disc = discretize(seq.dt, params);
    for (std::size_t t = 0; t < L; ++t) {
      for (std::size_t h = 0; h < static_cast<std::size_t>(d.heads); ++h) {
        const double a = disc.decay(t, h);
        if (!(a > 0.0 && a <= 1.0)) ++violations;
        const double A = params.A(h);
        if (std::exp((disc.delta(t, h) + 0.1) * A) > a) ++violations;
      }
    }

    // Chaining is exact.
    const std::size_t cut = random_size(rng, 1, L - 1);
    auto part = [&](std::size_t from, std::size_t count) {
      return SequenceBatch<double>{slice_rows(seq.x, from, count), slice_rows(seq.B, from, count),
                                   slice_rows(seq.C, from, count), slice_rows(seq.dt, from, count)};
    };
    const auto whole = scan_recurrent(d, seq, params, zero);
    const auto first = scan_recurrent(d, part(0, cut), params, zero);
    const auto second = scan_recurrent(d, part(cut, L - cut), params, first.final_state);
    if (!(slice_rows(whole.y, cut, L - cut) == second.y) || !(whole.final_state == second.final_state)) {
      ++violations;
    }

    // Zero C gives exactly skip * x.
    SequenceBatch<double> no_c = seq;
    no_c.C = MatrixD(L, static_cast<std::size_t>(d.bc_width()));
    const MatrixD y0 = scan_recurrent(d, no_c, params, zero).y;
    for (std::size_t t = 0; t < L; ++t) {
      for (std::size_t c = 0; c < y0.cols(); ++c) {
        const double expect = params.skip_D[c / static_cast<std::size_t>(d.head_dim)] * seq.x(t, c);
        if (y0(t, c) != expect) ++violations;
      }
    }

    // 32-bit scan against the 64-bit mixer, relative to the output scale.
    const auto seq32 = SequenceBatch<float>{cast<float>(seq.x), cast<float>(seq.B),
                                            cast<float>(seq.C), cast<float>(seq.dt)};
    SSMParams<float> p32;
    for (std::size_t h = 0; h < params.heads(); ++h) {
      p32.A_log.push_back(static_cast<float>(params.A_log[h]));
      p32.dt_bias.push_back(static_cast<float>(params.dt_bias[h]));
      p32.skip_D.push_back(static_cast<float>(params.skip_D[h]));
    }
    const MatrixD y32 = cast<double>(scan_recurrent(d, seq32, p32, ScanState<float>::zeros(d)).y);
    const MatrixD y64 = scan_matrix_mixer(d, seq, params);
    double scale = 0.0;
    for (double v : y64.values()) scale = std::max(scale, std::abs(v));
    worst_f32 = std::max(worst_f32, max_abs_diff(y32, y64) / std::max(scale, 1e-30));

    // Reversal symmetry with swapped directions.
    const auto bwd = random_params(d.heads, rng);
    const MatrixD fwd_y = hydra_bidirectional(d, seq, params, bwd);
    const MatrixD rev_y = hydra_bidirectional(d, reverse(seq), bwd, params);
    worst_reverse = std::max(worst_reverse, max_abs_diff(reverse_rows(fwd_y), rev_y));
  }
  CheckResult r = finish("ssm_properties", instances, static_cast<double>(violations), 0.0,
                         "f32 relative error " + std::to_string(worst_f32) +
                             ", hydra reversal error " + std::to_string(worst_reverse));
  r.passed = r.passed && worst_f32 < Tolerances::kScanRel32 && worst_reverse <= 1e-12;
  return r;
}

CheckResult check_xqssm_causality(std::size_t instances, std::uint64_t seed) {
  CounterRng rng(seed);
  std::size_t violations = 0;
  for (std::size_t i = 0; i < instances; ++i) {
    const SSMDims d = random_kernel_dims(rng, 4, 16);
    const std::size_t L = random_size(rng, 2, 64);
    XqssmInput in = random_xqssm_input(d, L, 0.3, rng);
    const auto params = DirectionalParams::init(d.heads, rng);
    // Query ordinal and stream position of one query, if any.
    std::vector<std::size_t> q_pos;
    for (std::size_t s = 0; s < L; ++s) {
      if (in.s_mask[s] == 0) q_pos.push_back(s);
    }
    if (q_pos.empty()) continue;
    const std::size_t pick = static_cast<std::size_t>(rng.below(q_pos.size()));
    const std::size_t at = q_pos[pick];
    for (int dir = 0; dir < 2; ++dir) {
      XqssmOptions only;
      only.forward = dir == 0;
      only.backward = dir == 1;
      const MatrixD before = xqssm_recurrent(d, in, params, only);
      XqssmInput perturbed = in;
      const auto di = static_cast<std::size_t>(dir);
      // Tokens later in this direction's order: forward s > at, backward s < at.
      for (std::size_t s = 0; s < L; ++s) {
        const bool later = dir == 0 ? s > at : s < at;
        if (!later || in.s_mask[s] == 0) continue;
        const std::size_t row = dir == 0 ? s : L - 1 - s;
        for (double& v : perturbed.x[di].row(row)) v += 1.0 + rng.normal();
        for (double& v : perturbed.B[di].row(row)) v += rng.normal();
        for (double& v : perturbed.dt[di].row(row)) v += rng.normal();
      }
      const MatrixD after = xqssm_recurrent(d, perturbed, params, only);
      const auto a = before.row(pick);
      const auto b = after.row(pick);
      if (!std::equal(a.begin(), a.end(), b.begin())) ++violations;
    }
  }
  return finish("xqssm_directional_causality", instances, static_cast<double>(violations), 0.0);
}

CheckResult check_geometry_properties(std::size_t instances, std::uint64_t seed) {
  CounterRng rng(seed);
  std::size_t violations = 0;
  double worst_scale = 0.0;
  for (std::size_t i = 0; i < instances; ++i) {
    const int cams = static_cast<int>(random_size(rng, 3, 8));
    const auto rig = make_ring_rig(cams, rng.uniform(0.0, 6.3), {0.0, 0.0, rng.uniform(0.5, 2.5)},
                                   static_cast<int>(random_size(rng, 64, 1600)),
                                   static_cast<int>(random_size(rng, 64, 900)));
    BEVGridSpec spec;
    spec.H_bev = static_cast<int>(random_size(rng, 1, 20));
    spec.W_bev = static_cast<int>(random_size(rng, 1, 20));
    const ReferencePointSet refs = build_reference_points(spec, rig);
    for (std::size_t c = 0; c < refs.cameras; ++c) {
      if (refs.M[c] > refs.queries * refs.pillars) ++violations;
      for (std::size_t q = 0; q < refs.queries; ++q) {
        for (std::size_t z = 0; z < refs.pillars; ++z) {
          if (!refs.hit(c, q, z)) continue;
          const Vec2& p = refs.point(c, q, z);
          if (!(p[0] >= 0.0 && p[0] <= 1.0 && p[1] >= 0.0 && p[1] <= 1.0)) ++violations;
        }
      }
    }
    // Rescaling the image and the pixel rows leaves normalized uv unchanged.
    const double k = rng.uniform(0.25, 4.0);
    CameraModel scaled = rig.front();
    scaled.img_w = static_cast<int>(std::lround(rig.front().img_w * k));
    const double kx = static_cast<double>(scaled.img_w) / rig.front().img_w;
    scaled.img_h = static_cast<int>(std::lround(rig.front().img_h * kx));
    const double ky = static_cast<double>(scaled.img_h) / rig.front().img_h;
    for (int c = 0; c < 4; ++c) {
      scaled.proj[static_cast<std::size_t>(c)] *= kx;
      scaled.proj[static_cast<std::size_t>(4 + c)] *= ky;
    }
    const auto centers = bev_cell_centers(spec);
    const Projection a = lift_and_project(centers, spec, rig.front());
    const Projection b = lift_and_project(centers, spec, scaled);
    for (std::size_t n = 0; n < a.uv.size(); ++n) {
      if (a.valid[n] != b.valid[n]) ++violations;
      if (!a.valid[n]) continue;
      const double s = std::max({1.0, std::abs(a.uv[n][0]), std::abs(a.uv[n][1])});
      worst_scale = std::max({worst_scale, std::abs(a.uv[n][0] - b.uv[n][0]) / s,
                              std::abs(a.uv[n][1] - b.uv[n][1]) / s});
    }
  }
  CheckResult r = finish("geometry_properties", instances, static_cast<double>(violations), 0.0,
                         "uv scale invariance error " + std::to_string(worst_scale));
  r.passed = r.passed && worst_scale <= Tolerances::kUvScaleInvariance;
  return r;
}

}  // namespace xbev::harness
