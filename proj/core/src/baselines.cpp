// SPDX-License-Identifier: Apache-2.0

#include "xbev/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "xbev/error.hpp"
#include "xbev/tolerances.hpp"
#include "xbev/xqssm.hpp"

namespace xbev {

MatrixD attention_weights(const MatrixD& Q, const MatrixD& K) {
  require(Q.cols() == K.cols(), ErrorKind::kShape, "query and key widths differ");
  require(K.rows() > 0, ErrorKind::kShape, "attention needs at least one key");
  const double scale = 1.0 / std::sqrt(static_cast<double>(Q.cols()));
  MatrixD w(Q.rows(), K.rows());
  for (std::size_t i = 0; i < Q.rows(); ++i) {
    const auto q = Q.row(i);
    auto row = w.row(i);
    for (std::size_t j = 0; j < K.rows(); ++j) {
      const auto k = K.row(j);
      double s = 0.0;
      for (std::size_t c = 0; c < q.size(); ++c) s += q[c] * k[c];
      row[j] = s * scale;
    }
    const double top = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (double& v : row) {
      v = std::exp(v - top);
      total += v;
    }
    for (double& v : row) v /= total;
  }
  return w;
}

MatrixD dot_product_xattn(const MatrixD& Q, const MatrixD& K, const MatrixD& Vv) {
  require(K.rows() == Vv.rows(), ErrorKind::kShape, "key and value counts differ");
  const MatrixD w = attention_weights(Q, K);
  MatrixD out(Q.rows(), Vv.cols());
  for (std::size_t i = 0; i < Q.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t j = 0; j < Vv.rows(); ++j) {
      const double a = w(i, j);
      const auto v = Vv.row(j);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += a * v[c];
    }
  }
  return out;
}

MatrixD naive_mamba_xattn(const SSMDims& dims, const SequenceBatch<double>& values,
                          const SSMParams<double>& params, const MatrixD& C_rows) {
  require(C_rows.cols() == static_cast<std::size_t>(dims.bc_width()), ErrorKind::kShape,
          "C rows must have width state_dim * groups");
  SequenceBatch<double> seq = values;
  seq.C = MatrixD(values.length(), static_cast<std::size_t>(dims.bc_width()));
  const std::vector<double> no_skip(static_cast<std::size_t>(dims.heads), 0.0);
  const auto h = scan_discretized(dims, seq, discretize(seq.dt, params), no_skip,
                                  ScanState<double>::zeros(dims))
                     .final_state.h;

  const auto H = static_cast<std::size_t>(dims.heads);
  const auto P = static_cast<std::size_t>(dims.head_dim);
  const auto N = static_cast<std::size_t>(dims.state_dim);
  MatrixD y(C_rows.rows(), H * P);
  for (std::size_t i = 0; i < C_rows.rows(); ++i) {
    const auto Ci = C_rows.row(i);
    for (std::size_t hd = 0; hd < H; ++hd) {
      const std::size_t g0 = static_cast<std::size_t>(dims.group_of(static_cast<int>(hd))) * N;
      for (std::size_t p = 0; p < P; ++p) {
        const std::size_t c = hd * P + p;
        double acc = 0.0;
        for (std::size_t n = 0; n < N; ++n) acc += Ci[g0 + n] * h[c * N + n];
        y(i, c) = acc;
      }
    }
  }
  return y;
}

std::vector<double> bilinear_sample(const MatrixD& map, int H_f, int W_f, Vec2 uv) {
  require(H_f >= 1 && W_f >= 1 &&
              map.rows() == static_cast<std::size_t>(H_f) * static_cast<std::size_t>(W_f),
          ErrorKind::kShape, "value map must be (H_f * W_f) x D");
  const double x = uv[0] * W_f - 0.5;
  const double y = uv[1] * H_f - 0.5;
  const double x0 = std::floor(x);
  const double y0 = std::floor(y);
  const double fx = x - x0;
  const double fy = y - y0;
  std::vector<double> out(map.cols(), 0.0);
  auto tap = [&](double col, double row, double w) {
    if (w == 0.0 || col < 0.0 || row < 0.0 || col >= W_f || row >= H_f) return;
    const auto r = static_cast<std::size_t>(row) * static_cast<std::size_t>(W_f) +
                   static_cast<std::size_t>(col);
    const auto src = map.row(r);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += w * src[c];
  };
  tap(x0, y0, (1.0 - fx) * (1.0 - fy));
  tap(x0 + 1.0, y0, fx * (1.0 - fy));
  tap(x0, y0 + 1.0, (1.0 - fx) * fy);
  tap(x0 + 1.0, y0 + 1.0, fx * fy);
  return out;
}

MatrixD deformable_xattn(const MatrixD& map, int H_f, int W_f, const DeformableSamples& s) {
  const std::size_t per_query = s.points * s.offsets;
  require(s.refs.size() == s.queries * s.points && s.deltas.size() == s.queries * per_query &&
              s.weights.size() == s.queries * per_query,
          ErrorKind::kShape, "deformable sample arrays inconsistent with counts");
  MatrixD out(s.queries, map.cols());
  for (std::size_t q = 0; q < s.queries; ++q) {
    double total = 0.0;
    for (std::size_t k = 0; k < per_query; ++k) total += s.weights[q * per_query + k];
    require(std::abs(total - 1.0) <= Tolerances::kWeightSum, ErrorKind::kInvalidInput,
            "attention weights of query " + std::to_string(q) + " sum to " +
                std::to_string(total));
    auto dst = out.row(q);
    for (std::size_t p = 0; p < s.points; ++p) {
      const Vec2 ref = s.refs[q * s.points + p];
      for (std::size_t r = 0; r < s.offsets; ++r) {
        const std::size_t k = s.index(q, p, r);
        const Vec2 at{ref[0] + s.deltas[k][0], ref[1] + s.deltas[k][1]};
        const auto sample = bilinear_sample(map, H_f, W_f, at);
        for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += s.weights[k] * sample[c];
      }
    }
  }
  return out;
}

void ComplexityConfig::validate() const {
  for (std::uint64_t v : {bev_h, bev_w, img_w, img_h, stride, cameras, pillars, model_dim, expand,
                          heads, state_dim, groups, conv_width, offsets, attn_heads,
                          bytes_per_value}) {
    require(v > 0, ErrorKind::kInvalidInput, "complexity config fields must be positive");
  }
}

const ModuleCost& ComplexityReport::find(const std::string& name) const {
  for (const auto& m : modules) {
    if (m.module == name) return m;
  }
  fail(ErrorKind::kInvalidInput, "no module named '" + name + "' in report");
}

std::uint64_t xqssm_layer_params(const ComplexityConfig& c) {
  const std::uint64_t D = c.model_dim;
  const std::uint64_t inner = c.expand * D;
  const std::uint64_t bc = c.state_dim * c.groups;
  const std::uint64_t width = 2 * inner + 4 * bc + 2 * c.heads;
  const std::uint64_t conv = (inner + 4 * bc) * (c.conv_width + 1);
  return D * width + width + conv + inner * D + inner + 2 * D + 6 * c.heads;
}

std::uint64_t deformable_params(const ComplexityConfig& c) {
  const std::uint64_t D = c.model_dim;
  const std::uint64_t samples = c.attn_heads * c.pillars * c.offsets;
  // offsets (2 per sample), weights, value and output projections
  return (D + 1) * 2 * samples + (D + 1) * samples + 2 * (D * D + D);
}

std::uint64_t dot_product_params(const ComplexityConfig& c) {
  const std::uint64_t D = c.model_dim;
  return 4 * (D * D + D);
}

ComplexityReport complexity_report(const ComplexityConfig& c) {
  c.validate();
  const std::uint64_t Q = c.queries();
  const std::uint64_t V = c.values();
  const std::uint64_t V_total = c.cameras * V;
  const std::uint64_t M = c.merged_queries();
  const std::uint64_t D = c.model_dim;
  const std::uint64_t inner = c.expand * D;
  const std::uint64_t N = c.state_dim;
  const std::uint64_t H = c.heads;
  const std::uint64_t P = c.pillars;
  const std::uint64_t R = c.offsets;
  const std::uint64_t bytes = c.bytes_per_value;

  ComplexityReport report;
  report.config = c;

  ModuleCost x{"xqssm", Q, V, xqssm_layer_params(c), 0, 0};
  x.flops = c.cameras * xqssm_flops(V, 0, H, N, inner).total + xqssm_flops(0, M, H, N, inner).total;
  const std::uint64_t token_width = inner + 4 * N * c.groups + 2 * H;
  x.est_memory_bytes = bytes * ((V_total + M) * token_width + inner * N);
  report.modules.push_back(x);

  ModuleCost d{"deformable", Q, V, deformable_params(c), 0, 0};
  d.flops = 2 * Q * D * D + std::min(V_total * D * D, Q * P * R * D * D) + 5 * Q * P * R * D +
            3 * Q * c.attn_heads * P * R * D;
  d.est_memory_bytes = bytes * (V_total * D + Q * P * R * (D + 3) + Q * D);
  report.modules.push_back(d);

  ModuleCost a{"dot_product", Q, V, dot_product_params(c), 0, 0};
  a.flops = 2 * Q * V_total * D;
  a.est_memory_bytes = bytes * (Q * V_total + (Q + 2 * V_total) * D);
  report.modules.push_back(a);
  return report;
}

std::vector<ComplexityConfig> scaling_rows(const ComplexityConfig& base) {
  struct Row {
    std::uint64_t bev, w, h;
  };
  std::vector<ComplexityConfig> rows;
  for (const Row& r : {Row{50, 800, 450}, Row{100, 1280, 720}, Row{200, 1600, 900}}) {
    ComplexityConfig c = base;
    c.bev_h = c.bev_w = r.bev;
    c.img_w = r.w;
    c.img_h = r.h;
    rows.push_back(c);
  }
  return rows;
}

std::vector<PublishedScaling> published_scaling() {
  return {{"xqssm", {3.7, 14.0, 51.0}},
          {"deformable", {3.3, 12.8, 49.5}},
          {"dot_product", {23.9, 228.8, 1432.5}}};
}

}  // namespace xbev
