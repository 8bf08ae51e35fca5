// SPDX-License-Identifier: Apache-2.0

#include "xbev/oracles.hpp"

#include <cmath>

namespace xbev::oracle {
namespace {

double plain_softplus(double x) { return std::log(1.0 + std::exp(x)); }

double delta_of(const MatrixD& dt, std::size_t t, std::size_t h, const SSMParams<double>& p) {
  return plain_softplus(dt(t, h) + p.dt_bias[h]);
}

double decay_of(double delta, const SSMParams<double>& p, std::size_t h) {
  return std::exp(delta * -std::exp(p.A_log[h]));
}

double dot_group(std::span<const double> a, std::span<const double> b, std::size_t g0,
                 std::size_t N) {
  double s = 0.0;
  for (std::size_t n = 0; n < N; ++n) s += a[g0 + n] * b[g0 + n];
  return s;
}

}  // namespace

MatrixD ssm_direct_sum(const SSMDims& dims, const SequenceBatch<double>& seq,
                       const SSMParams<double>& params) {
  const std::size_t L = seq.length();
  const auto H = static_cast<std::size_t>(dims.heads);
  const auto P = static_cast<std::size_t>(dims.head_dim);
  const auto N = static_cast<std::size_t>(dims.state_dim);
  MatrixD y(L, H * P);
  for (std::size_t t = 0; t < L; ++t) {
    for (std::size_t h = 0; h < H; ++h) {
      const std::size_t g0 = static_cast<std::size_t>(dims.group_of(static_cast<int>(h))) * N;
      // Walk s = t, t-1, ..., 0 carrying prod_{k in (s, t]} decay_k.
      double carry = 1.0;
      for (std::size_t s = t + 1; s-- > 0;) {
        const double delta = delta_of(seq.dt, s, h, params);
        const double w = dot_group(seq.C.row(t), seq.B.row(s), g0, N) * delta * carry;
        for (std::size_t p = 0; p < P; ++p) y(t, h * P + p) += w * seq.x(s, h * P + p);
        carry *= decay_of(delta, params, h);
      }
      for (std::size_t p = 0; p < P; ++p) y(t, h * P + p) += params.skip_D[h] * seq.x(t, h * P + p);
    }
  }
  return y;
}

MatrixD hydra_dense(const SSMDims& dims, const SequenceBatch<double>& seq,
                    const SSMParams<double>& fwd, const SSMParams<double>& bwd) {
  const std::size_t L = seq.length();
  const auto H = static_cast<std::size_t>(dims.heads);
  const auto P = static_cast<std::size_t>(dims.head_dim);
  const auto N = static_cast<std::size_t>(dims.state_dim);
  MatrixD y(L, H * P);
  for (std::size_t t = 0; t < L; ++t) {
    for (std::size_t h = 0; h < H; ++h) {
      const std::size_t g0 = static_cast<std::size_t>(dims.group_of(static_cast<int>(h))) * N;
      // Strictly lower part: forward scan read at t - 1.
      if (t > 0) {
        double carry = 1.0;
        for (std::size_t s = t; s-- > 0;) {
          const double delta = delta_of(seq.dt, s, h, fwd);
          const double w = dot_group(seq.C.row(t - 1), seq.B.row(s), g0, N) * delta * carry;
          for (std::size_t p = 0; p < P; ++p) y(t, h * P + p) += w * seq.x(s, h * P + p);
          carry *= decay_of(delta, fwd, h);
        }
      }
      // Strictly upper part: backward scan read at t + 1.
      double carry = 1.0;
      for (std::size_t s = t + 1; s < L; ++s) {
        const double delta = delta_of(seq.dt, s, h, bwd);
        const double w = dot_group(seq.C.row(t + 1), seq.B.row(s), g0, N) * delta * carry;
        for (std::size_t p = 0; p < P; ++p) y(t, h * P + p) += w * seq.x(s, h * P + p);
        carry *= decay_of(delta, bwd, h);
      }
      const double skip = 0.5 * (fwd.skip_D[h] + bwd.skip_D[h]);
      for (std::size_t p = 0; p < P; ++p) y(t, h * P + p) += skip * seq.x(t, h * P + p);
    }
  }
  return y;
}

MatrixD xqssm_generic_scan(const SSMDims& dims, const XqssmInput& input,
                           const DirectionalParams& params) {
  const std::size_t L = input.length();
  const auto H = static_cast<std::size_t>(dims.heads);
  MatrixD y(input.queries(), static_cast<std::size_t>(dims.inner()));
  const std::vector<double> no_skip(H, 0.0);
  for (std::size_t d = 0; d < 2; ++d) {
    const auto& p = d == 0 ? params.fwd : params.bwd;
    const SequenceBatch<double> seq{input.x[d], input.B[d], input.C[d], input.dt[d]};
    Discretization<double> disc = discretize(seq.dt, p);
    for (std::size_t t = 0; t < L; ++t) {
      const std::size_t token = d == 0 ? t : L - 1 - t;
      if (input.s_mask[token] != 0) continue;
      for (std::size_t h = 0; h < H; ++h) {
        disc.delta(t, h) = 0.0;
        disc.decay(t, h) = 1.0;
        disc.log_decay(t, h) = 0.0;
      }
    }
    const auto scan = scan_discretized(dims, seq, disc, no_skip, ScanState<double>::zeros(dims));
    std::size_t qi = 0;
    for (std::size_t s = 0; s < L; ++s) {
      if (input.s_mask[s] != 0) continue;
      const auto src = scan.y.row(d == 0 ? s : L - 1 - s);
      auto dst = y.row(qi++);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
    }
  }
  return y;
}

MergedStream naive_insert(const MatrixD& values, const MatrixD& queries,
                          const std::vector<std::int64_t>& r1d,
                          const std::vector<std::int64_t>& extract_ids) {
  const std::size_t V = values.rows();
  const std::size_t M = queries.rows();
  const std::size_t width = V > 0 ? values.cols() : queries.cols();
  MergedStream out{MatrixD(V + M, width), {}};
  out.seq.length = V + M;
  std::size_t s = 0;
  auto push = [&](std::span<const double> row, bool feature) {
    std::copy(row.begin(), row.end(), out.tokens.row(s).begin());
    out.seq.s_mask.push_back(feature ? 1 : 0);
    ++s;
  };
  for (std::size_t j = 0; j < V; ++j) {
    for (std::size_t i = 0; i < M; ++i) {
      if (r1d[i] != static_cast<std::int64_t>(j)) continue;
      out.seq.insert_positions.push_back(static_cast<std::int64_t>(s));
      out.seq.extract_index.push_back(extract_ids[i]);
      push(queries.row(i), false);
    }
    push(values.row(j), true);
  }
  return out;
}

std::vector<double> bilinear_dense(const MatrixD& map, int H_f, int W_f, Vec2 uv) {
  const double x = uv[0] * W_f;
  const double y = uv[1] * H_f;
  std::vector<double> out(map.cols(), 0.0);
  for (int i = 0; i < H_f; ++i) {
    const double wy = std::max(0.0, 1.0 - std::abs(y - (i + 0.5)));
    if (wy == 0.0) continue;
    for (int j = 0; j < W_f; ++j) {
      const double wx = std::max(0.0, 1.0 - std::abs(x - (j + 0.5)));
      if (wx == 0.0) continue;
      const auto src = map.row(static_cast<std::size_t>(i * W_f + j));
      for (std::size_t c = 0; c < out.size(); ++c) out[c] += wx * wy * src[c];
    }
  }
  return out;
}

MatrixD deformable_dense(const MatrixD& map, int H_f, int W_f, const DeformableSamples& s) {
  MatrixD out(s.queries, map.cols());
  for (std::size_t q = 0; q < s.queries; ++q) {
    for (std::size_t p = 0; p < s.points; ++p) {
      for (std::size_t r = 0; r < s.offsets; ++r) {
        const std::size_t k = s.index(q, p, r);
        const Vec2 ref = s.refs[q * s.points + p];
        const auto v = bilinear_dense(map, H_f, W_f, {ref[0] + s.deltas[k][0], ref[1] + s.deltas[k][1]});
        for (std::size_t c = 0; c < v.size(); ++c) out(q, c) += s.weights[k] * v[c];
      }
    }
  }
  return out;
}

MatrixD softmax_attention(const MatrixD& Q, const MatrixD& K, const MatrixD& Vv) {
  MatrixD out(Q.rows(), Vv.cols());
  const long double scale = 1.0L / std::sqrt(static_cast<long double>(Q.cols()));
  for (std::size_t i = 0; i < Q.rows(); ++i) {
    std::vector<long double> e(K.rows());
    long double total = 0.0L;
    for (std::size_t j = 0; j < K.rows(); ++j) {
      long double s = 0.0L;
      for (std::size_t c = 0; c < Q.cols(); ++c) s += static_cast<long double>(Q(i, c)) * K(j, c);
      e[j] = std::exp(s * scale);
      total += e[j];
    }
    for (std::size_t c = 0; c < Vv.cols(); ++c) {
      long double acc = 0.0L;
      for (std::size_t j = 0; j < K.rows(); ++j) acc += e[j] / total * Vv(j, c);
      out(i, c) = static_cast<double>(acc);
    }
  }
  return out;
}

MatrixD naive_mamba_sum(const SSMDims& dims, const SequenceBatch<double>& values,
                        const SSMParams<double>& params, const MatrixD& C_rows) {
  const std::size_t T = values.length();
  const auto H = static_cast<std::size_t>(dims.heads);
  const auto P = static_cast<std::size_t>(dims.head_dim);
  const auto N = static_cast<std::size_t>(dims.state_dim);
  MatrixD y(C_rows.rows(), H * P);
  for (std::size_t i = 0; i < C_rows.rows(); ++i) {
    for (std::size_t h = 0; h < H; ++h) {
      const std::size_t g0 = static_cast<std::size_t>(dims.group_of(static_cast<int>(h))) * N;
      double carry = 1.0;
      for (std::size_t s = T; s-- > 0;) {
        const double delta = delta_of(values.dt, s, h, params);
        const double w = dot_group(C_rows.row(i), values.B.row(s), g0, N) * delta * carry;
        for (std::size_t p = 0; p < P; ++p) y(i, h * P + p) += w * values.x(s, h * P + p);
        carry *= decay_of(delta, params, h);
      }
    }
  }
  return y;
}

std::optional<Vec2> angular_projection(double yaw, const Vec3& position, double hfov, int img_w,
                                       int img_h, const Vec3& point) {
  const double dx = point[0] - position[0];
  const double dy = point[1] - position[1];
  const double dz = point[2] - position[2];
  // Rotate into the camera's yaw frame: depth along the optical axis, lateral
  // offset to the left.
  const double depth = dx * std::cos(yaw) + dy * std::sin(yaw);
  const double left = -dx * std::sin(yaw) + dy * std::cos(yaw);
  if (depth <= 1e-5) return std::nullopt;
  const double azimuth = std::atan2(-left, depth);
  const double elevation_tan = -dz / depth;
  const double half = std::tan(0.5 * hfov);
  const double u = 0.5 + std::tan(azimuth) / (2.0 * half);
  const double focal = 0.5 * img_w / half;
  const double v = 0.5 + elevation_tan * focal / img_h;
  return Vec2{u, v};
}

}  // namespace xbev::oracle
