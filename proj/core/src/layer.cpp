// SPDX-License-Identifier: Apache-2.0

#include "xbev/layer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "xbev/error.hpp"
#include "xbev/tolerances.hpp"

namespace xbev {
namespace {

double silu(double v) { return v / (1.0 + std::exp(-v)); }

void check_finite(const MatrixD& m, const char* stage) {
  if (!all_finite<double>(m.values())) {
    fail(ErrorKind::kNumeric, std::string("non-finite value after stage '") + stage + "'", stage);
  }
}

void zero_cols(MatrixD& m, std::size_t row, std::size_t first, std::size_t count) {
  auto r = m.row(row);
  std::fill_n(r.begin() + static_cast<std::ptrdiff_t>(first), count, 0.0);
}

std::vector<double> uniform_vector(std::size_t n, double bound, CounterRng& rng) {
  std::vector<double> v(n);
  for (auto& e : v) e = rng.uniform(-bound, bound);
  return v;
}

MatrixD uniform_matrix(std::size_t rows, std::size_t cols, double bound, CounterRng& rng) {
  return MatrixD(rows, cols, uniform_vector(rows * cols, bound, rng));
}

// Applies the conv to the leading `conv_channels` columns of a token matrix
// and copies the remaining (dt) columns through.
MatrixD conv_tokens(const MatrixD& tokens, const MatrixD& weight, std::span<const double> bias) {
  const std::size_t channels = weight.rows();
  const MatrixD convolved = causal_depthwise_conv(slice_cols(tokens, 0, channels), weight, bias);
  MatrixD out = tokens;
  for (std::size_t t = 0; t < tokens.rows(); ++t) {
    std::copy(convolved.row(t).begin(), convolved.row(t).end(), out.row(t).begin());
  }
  return out;
}

// Each query row convolved as an isolated length-1 sequence.
MatrixD conv_isolated(const MatrixD& tokens, const MatrixD& weight, std::span<const double> bias) {
  MatrixD out = tokens;
  const std::size_t channels = weight.rows();
  const std::size_t last = weight.cols() - 1;
  for (std::size_t t = 0; t < tokens.rows(); ++t) {
    for (std::size_t c = 0; c < channels; ++c) {
      out(t, c) = silu(bias[c] + weight(c, last) * tokens(t, c));
    }
  }
  return out;
}

MergedStream merge_tokens(const MatrixD& values, const MatrixD& queries,
                          std::span<const Vec2> uv, std::span<const std::int64_t> ids, int H_f,
                          int W_f, const TraversalOrder& order, const LayerConfig& config) {
  switch (config.insertion_mode) {
    case InsertionMode::kProject: {
      const auto r1d = refpoints_to_1d(uv, H_f, W_f, order, config.insert_shift);
      const auto positions = index_offset(r1d, static_cast<std::int64_t>(values.rows()));
      return build_merged(values, queries, positions, ids);
    }
    case InsertionMode::kAppend:
    case InsertionMode::kPrepend:
      return insertion_baselines(values, queries, ids, config.insertion_mode);
  }
  fail(ErrorKind::kConfig, "unknown insertion mode");
}

// Generic bidirectional scan in which query tokens use their own learned dt
// and update the state; outputs are read at query rows without skip.
MatrixD learned_query_dt_scan(const SSMDims& dims, const XqssmInput& in,
                              const DirectionalParams& params) {
  const std::size_t L = in.length();
  const std::size_t M = in.queries();
  MatrixD y(M, static_cast<std::size_t>(dims.inner()));
  const std::vector<double> no_skip(static_cast<std::size_t>(dims.heads), 0.0);
  for (std::size_t d = 0; d < 2; ++d) {
    const SequenceBatch<double> seq{in.x[d], in.B[d], in.C[d], in.dt[d]};
    const auto& p = d == 0 ? params.fwd : params.bwd;
    const auto scan =
        scan_discretized(dims, seq, discretize(seq.dt, p), no_skip, ScanState<double>::zeros(dims));
    std::size_t qi = 0;
    for (std::size_t s = 0; s < L; ++s) {
      if (in.s_mask[s] != 0) continue;
      const std::size_t row = d == 0 ? s : L - 1 - s;
      auto out = y.row(qi++);
      const auto src = scan.y.row(row);
      for (std::size_t c = 0; c < out.size(); ++c) out[c] += src[c];
    }
  }
  return y;
}

}  // namespace

std::string_view to_string(MergeOrder v) {
  return v == MergeOrder::kBeforeConv ? "before_conv" : "after_conv";
}
std::string_view to_string(ExtractOrder v) {
  return v == ExtractOrder::kBeforeGate ? "before_gate" : "after_gate";
}
std::string_view to_string(NormMode v) {
  switch (v) {
    case NormMode::kAverage: return "average";
    case NormMode::kRmsNorm: return "rmsnorm";
    case NormMode::kBoth: return "both";
    case NormMode::kNeither: return "neither";
  }
  return "both";
}
std::string_view to_string(InsertionMode v) {
  switch (v) {
    case InsertionMode::kProject: return "project";
    case InsertionMode::kAppend: return "append";
    case InsertionMode::kPrepend: return "prepend";
  }
  return "project";
}

void LayerConfig::validate() const {
  dims.validate();
  require(!traversals.empty(), ErrorKind::kConfig, "at least one traversal is required");
  require(conv_width >= 1, ErrorKind::kConfig, "conv_width must be >= 1");
  require(dropout >= 0.0 && dropout < 1.0, ErrorKind::kConfig, "dropout must be in [0, 1)");
}

MatrixD Linear::apply(const MatrixD& input) const {
  require(input.cols() == in_features(), ErrorKind::kShape,
          "linear input width " + std::to_string(input.cols()) + " != " +
              std::to_string(in_features()));
  MatrixD out(input.rows(), out_features());
  for (std::size_t r = 0; r < input.rows(); ++r) {
    const auto x = input.row(r);
    for (std::size_t o = 0; o < out_features(); ++o) {
      const auto w = weight.row(o);
      double acc = bias.empty() ? 0.0 : bias[o];
      for (std::size_t i = 0; i < x.size(); ++i) acc += w[i] * x[i];
      out(r, o) = acc;
    }
  }
  return out;
}

Linear Linear::init(std::size_t in, std::size_t out, bool with_bias, CounterRng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Linear l{uniform_matrix(out, in, bound, rng), {}};
  if (with_bias) l.bias = uniform_vector(out, bound, rng);
  return l;
}

ProjectionLayout::ProjectionLayout(const SSMDims& dims)
    : inner(static_cast<std::size_t>(dims.inner())),
      bc(static_cast<std::size_t>(dims.bc_width())),
      heads(static_cast<std::size_t>(dims.heads)) {}

LayerParams LayerParams::init(const SSMDims& dims, int conv_width, std::uint64_t seed) {
  dims.validate();
  const ProjectionLayout layout(dims);
  const auto D = static_cast<std::size_t>(dims.model_dim);
  const CounterRng root(seed);
  auto rng_in = root.fork(1);
  auto rng_conv = root.fork(2);
  auto rng_out = root.fork(3);
  auto rng_ssm = root.fork(4);
  const double conv_bound = 1.0 / std::sqrt(static_cast<double>(conv_width));

  LayerParams p;
  p.in_proj = Linear::init(D, layout.width(), true, rng_in);
  p.conv_weight = uniform_matrix(layout.conv_channels(), static_cast<std::size_t>(conv_width),
                                 conv_bound, rng_conv);
  p.conv_bias = uniform_vector(layout.conv_channels(), conv_bound, rng_conv);
  p.out_proj = Linear::init(layout.inner, D, false, rng_out);
  p.rms_gain.assign(layout.inner, 1.0);
  p.norm_gain.assign(D, 1.0);
  p.norm_bias.assign(D, 0.0);
  p.ssm = DirectionalParams::init(dims.heads, rng_ssm);
  return p;
}

void LayerParams::validate(const SSMDims& dims, int conv_width) const {
  const ProjectionLayout layout(dims);
  const auto D = static_cast<std::size_t>(dims.model_dim);
  require(in_proj.in_features() == D && in_proj.out_features() == layout.width() &&
              (in_proj.bias.empty() || in_proj.bias.size() == layout.width()),
          ErrorKind::kShape, "in_proj must map D -> 2*inner + 4NG + 2H");
  require(conv_weight.rows() == layout.conv_channels() &&
              conv_weight.cols() == static_cast<std::size_t>(conv_width) &&
              conv_bias.size() == layout.conv_channels(),
          ErrorKind::kShape, "conv weights must be (inner + 4NG) x conv_width");
  require(out_proj.in_features() == layout.inner && out_proj.out_features() == D,
          ErrorKind::kShape, "out_proj must map inner -> D");
  require(rms_gain.size() == layout.inner && norm_gain.size() == D && norm_bias.size() == D,
          ErrorKind::kShape, "gain/bias sizes inconsistent with dims");
  ssm.fwd.validate(dims.heads);
  ssm.bwd.validate(dims.heads);
}

ProjectedInputs project_inputs(const MatrixD& q, const MatrixD& v, const LayerParams& params,
                               const LayerConfig& config) {
  const ProjectionLayout layout(config.dims);
  const auto D = static_cast<std::size_t>(config.dims.model_dim);
  require(q.cols() == D && (v.rows() == 0 || v.cols() == D), ErrorKind::kShape,
          "query/value width must equal model_dim");
  const std::size_t tw = layout.token_width();

  ProjectedInputs out{MatrixD(q.rows(), layout.inner), MatrixD(q.rows(), tw),
                      MatrixD(v.rows(), tw)};
  if (q.rows() > 0) {
    const MatrixD full = params.in_proj.apply(q);
    for (std::size_t r = 0; r < q.rows(); ++r) {
      const auto src = full.row(r);
      std::copy_n(src.begin(), layout.inner, out.Q_z.row(r).begin());
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(layout.x()), tw, out.Q_xBCdt.row(r).begin());
      if (config.zero_BQ) {
        zero_cols(out.Q_xBCdt, r, layout.B_fwd() - layout.inner, layout.bc);
        zero_cols(out.Q_xBCdt, r, layout.B_bwd() - layout.inner, layout.bc);
      }
      if (config.zero_dtQ) zero_cols(out.Q_xBCdt, r, layout.dt_fwd() - layout.inner, 2 * layout.heads);
    }
  }
  if (v.rows() > 0) {
    const MatrixD full = params.in_proj.apply(v);
    for (std::size_t r = 0; r < v.rows(); ++r) {
      std::copy_n(full.row(r).begin() + static_cast<std::ptrdiff_t>(layout.x()), tw,
                  out.V_xBCdt.row(r).begin());
      if (config.zero_CV) {
        zero_cols(out.V_xBCdt, r, layout.C_fwd() - layout.inner, layout.bc);
        zero_cols(out.V_xBCdt, r, layout.C_bwd() - layout.inner, layout.bc);
      }
    }
  }
  return out;
}

MatrixD causal_depthwise_conv(const MatrixD& tokens, const MatrixD& weight,
                              std::span<const double> bias) {
  require(weight.rows() == tokens.cols() && bias.size() == tokens.cols(), ErrorKind::kShape,
          "conv channel count mismatch");
  const std::size_t K = weight.cols();
  MatrixD out(tokens.rows(), tokens.cols());
  for (std::size_t t = 0; t < tokens.rows(); ++t) {
    for (std::size_t c = 0; c < tokens.cols(); ++c) {
      double acc = bias[c];
      for (std::size_t k = 0; k < K; ++k) {
        const std::size_t back = K - 1 - k;
        if (t >= back) acc += weight(c, k) * tokens(t - back, c);
      }
      out(t, c) = silu(acc);
    }
  }
  return out;
}

std::vector<double> gated_rms(std::span<const double> y, std::span<const double> z,
                              std::span<const double> gain, bool normalize) {
  require(y.size() == z.size() && y.size() == gain.size(), ErrorKind::kShape,
          "gate width mismatch");
  std::vector<double> g(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) g[i] = y[i] * silu(z[i]);
  double scale = 1.0;
  if (normalize && !g.empty()) {
    double ms = 0.0;
    for (double v : g) ms += v * v;
    scale = 1.0 / std::sqrt(ms / static_cast<double>(g.size()) + Tolerances::kRmsEps);
  }
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = g[i] * scale * gain[i];
  return g;
}

std::vector<double> layer_norm(std::span<const double> x, std::span<const double> gain,
                               std::span<const double> bias) {
  require(x.size() == gain.size() && x.size() == bias.size(), ErrorKind::kShape,
          "layer norm width mismatch");
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double inv = 1.0 / std::sqrt(var / n + Tolerances::kLayerNormEps);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) * inv * gain[i] + bias[i];
  return out;
}

MergedStream insertion_baselines(const MatrixD& values, const MatrixD& queries,
                                 std::span<const std::int64_t> extract_ids, InsertionMode mode) {
  require(mode != InsertionMode::kProject, ErrorKind::kContract,
          "insertion baselines cover append and prepend only");
  const auto V = static_cast<std::int64_t>(values.rows());
  const auto M = static_cast<std::int64_t>(queries.rows());
  std::vector<std::int64_t> positions(static_cast<std::size_t>(M));
  const std::int64_t first = mode == InsertionMode::kAppend ? V : 0;
  std::iota(positions.begin(), positions.end(), first);
  return build_merged(values, queries, positions, extract_ids);
}

MergedStream prepare_stream(const MatrixD& values, const MatrixD& queries,
                            std::span<const Vec2> uv, std::span<const std::int64_t> ids, int H_f,
                            int W_f, const TraversalOrder& order, const LayerParams& params,
                            const LayerConfig& config) {
  const ProjectionLayout layout(config.dims);
  MergedStream merged;
  if (config.merge_order == MergeOrder::kAfterConv) {
    merged = merge_tokens(conv_tokens(values, params.conv_weight, params.conv_bias),
                          conv_isolated(queries, params.conv_weight, params.conv_bias), uv, ids,
                          H_f, W_f, order, config);
  } else {
    merged = merge_tokens(values, queries, uv, ids, H_f, W_f, order, config);
    merged.tokens = conv_tokens(merged.tokens, params.conv_weight, params.conv_bias);
  }
  // The zero flags pin the SSM inputs, so they are re-applied after the conv.
  MatrixD& tokens = merged.tokens;
  for (std::size_t s = 0; s < tokens.rows(); ++s) {
    const bool is_query = merged.seq.s_mask[s] == 0;
    if (is_query && config.zero_BQ) {
      zero_cols(tokens, s, layout.B_fwd() - layout.inner, layout.bc);
      zero_cols(tokens, s, layout.B_bwd() - layout.inner, layout.bc);
    }
    if (!is_query && config.zero_CV) {
      zero_cols(tokens, s, layout.C_fwd() - layout.inner, layout.bc);
      zero_cols(tokens, s, layout.C_bwd() - layout.inner, layout.bc);
    }
    if (is_query && config.zero_dtQ) {
      zero_cols(tokens, s, layout.dt_fwd() - layout.inner, 2 * layout.heads);
    }
  }
  return merged;
}

MatrixD spatial_cross_mamba_forward(const MatrixD& q, const CameraFeatures& features,
                                    const ReferencePointSet& refs, const LayerParams& params,
                                    const LayerConfig& config, LayerTrace* trace) {
  config.validate();
  params.validate(config.dims, config.conv_width);
  const SSMDims& dims = config.dims;
  const ProjectionLayout layout(dims);
  const auto D = static_cast<std::size_t>(dims.model_dim);
  const std::size_t Q = q.rows();
  require(q.cols() == D, ErrorKind::kShape, "query width must equal model_dim");
  require(refs.cameras == features.size() && refs.queries == Q, ErrorKind::kContract,
          "reference points do not match camera count (" + std::to_string(features.size()) +
              ") and query count (" + std::to_string(Q) + ")");

  const ProjectedInputs projected = project_inputs(q, MatrixD(0, D), params, config);
  check_finite(projected.Q_xBCdt, "project");

  const bool rms = config.norm_mode == NormMode::kRmsNorm || config.norm_mode == NormMode::kBoth;
  const bool average =
      config.norm_mode == NormMode::kAverage || config.norm_mode == NormMode::kBoth;

  MatrixD Q_y(Q, layout.inner);
  std::vector<std::size_t> copies(Q, 0);
  XqssmCounters counters;
  std::uint64_t formula_total = 0;
  std::size_t streams = 0;
  double gated_sq = 0.0;
  double projected_sq = 0.0;

  for (std::size_t cam = 0; cam < features.size(); ++cam) {
    // Query copies hitting this camera, in (query, pillar) order.
    struct {
      MatrixD queries;
      std::vector<std::int64_t> ids;
      std::vector<Vec2> uv;
    } base;
    for (std::size_t qi = 0; qi < Q; ++qi) {
      for (std::size_t z = 0; z < refs.pillars; ++z) {
        if (!refs.hit(cam, qi, z)) continue;
        base.ids.push_back(static_cast<std::int64_t>(qi));
        base.uv.push_back(refs.point(cam, qi, z));
      }
    }
    base.queries = MatrixD(base.ids.size(), layout.token_width());
    for (std::size_t k = 0; k < base.ids.size(); ++k) {
      const auto src = projected.Q_xBCdt.row(static_cast<std::size_t>(base.ids[k]));
      std::copy(src.begin(), src.end(), base.queries.row(k).begin());
    }

    for (const FeatureMap& fmap : features[cam]) {
      require(fmap.values.rows() == fmap.cells() && fmap.values.cols() == D, ErrorKind::kShape,
              "feature map must be (H_f * W_f) x model_dim");
      const ProjectedInputs pv = project_inputs(MatrixD(0, D), fmap.values, params, config);
      check_finite(pv.V_xBCdt, "project");
      projected_sq += std::pow(frobenius_norm(pv.V_xBCdt), 2);

      for (const TraversalOrder& order : config.traversals) {
        if (base.ids.empty()) continue;
        const Permutation perm = flatten_permutation(fmap.H_f, fmap.W_f, order);
        MatrixD ordered(fmap.cells(), layout.token_width());
        for (std::size_t cell = 0; cell < fmap.cells(); ++cell) {
          const auto src = pv.V_xBCdt.row(cell);
          std::copy(src.begin(), src.end(),
                    ordered.row(static_cast<std::size_t>(perm.forward[cell])).begin());
        }
        const MergedStream merged = prepare_stream(ordered, base.queries, base.uv, base.ids,
                                                   fmap.H_f, fmap.W_f, order, params, config);
        check_finite(merged.tokens, "conv");

        const MatrixD& tok = merged.tokens;
        const XqssmInput input = XqssmInput::bidirectional(
            slice_cols(tok, 0, layout.inner),
            slice_cols(tok, layout.B_fwd() - layout.inner, layout.bc),
            slice_cols(tok, layout.C_fwd() - layout.inner, layout.bc),
            slice_cols(tok, layout.dt_fwd() - layout.inner, layout.heads),
            slice_cols(tok, layout.B_bwd() - layout.inner, layout.bc),
            slice_cols(tok, layout.C_bwd() - layout.inner, layout.bc),
            slice_cols(tok, layout.dt_bwd() - layout.inner, layout.heads), merged.seq.s_mask);

        XqssmOptions options;
        options.counters = &counters;
        const MatrixD y = config.zero_dtQ ? xqssm_recurrent(dims, input, params.ssm, options)
                                          : learned_query_dt_scan(dims, input, params.ssm);
        check_finite(y, "xqssm");
        formula_total += xqssm_flops(merged.seq.values(), merged.seq.queries(),
                                     layout.heads, static_cast<std::uint64_t>(dims.state_dim),
                                     layout.inner)
                             .total;

        const auto& ids = merged.seq.extract_index;
        MatrixD gated(ids.size(), layout.inner);
        if (config.extract_order == ExtractOrder::kBeforeGate) {
          for (std::size_t k = 0; k < ids.size(); ++k) {
            const auto g = gated_rms(y.row(k), projected.Q_z.row(static_cast<std::size_t>(ids[k])),
                                     params.rms_gain, rms);
            std::copy(g.begin(), g.end(), gated.row(k).begin());
          }
        } else {
          // Gate the whole stream (feature rows carry no output and a masked
          // z), then pick the query rows.
          MatrixD y_stream(merged.seq.length, layout.inner);
          MatrixD z_stream(merged.seq.length, layout.inner);
          for (std::size_t k = 0; k < ids.size(); ++k) {
            const auto s = static_cast<std::size_t>(merged.seq.insert_positions[k]);
            std::copy(y.row(k).begin(), y.row(k).end(), y_stream.row(s).begin());
            const auto z = projected.Q_z.row(static_cast<std::size_t>(ids[k]));
            std::copy(z.begin(), z.end(), z_stream.row(s).begin());
          }
          MatrixD gated_stream(merged.seq.length, layout.inner);
          for (std::size_t s = 0; s < merged.seq.length; ++s) {
            const auto g = gated_rms(y_stream.row(s), z_stream.row(s), params.rms_gain, rms);
            std::copy(g.begin(), g.end(), gated_stream.row(s).begin());
          }
          gated = filter_stream(gated_stream, merged.seq.s_mask, false);
        }
        check_finite(gated, "gate");
        gated_sq += std::pow(frobenius_norm(gated), 2);

        for (std::size_t k = 0; k < ids.size(); ++k) {
          const auto id = static_cast<std::size_t>(ids[k]);
          auto dst = Q_y.row(id);
          const auto src = gated.row(k);
          for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
          ++copies[id];
        }
        ++streams;
      }
    }
  }

  if (average) {
    for (std::size_t qi = 0; qi < Q; ++qi) {
      const double count = std::max(static_cast<double>(copies[qi]), 1.0);
      for (double& v : Q_y.row(qi)) v /= count;
    }
  }
  check_finite(Q_y, "accumulate");

  MatrixD update = params.out_proj.apply(Q_y);
  if (config.dropout > 0.0) {
    CounterRng rng(config.dropout_seed);
    const double keep = 1.0 - config.dropout;
    for (double& v : update.values()) v = rng.uniform01() < config.dropout ? 0.0 : v / keep;
  }
  check_finite(update, "out_proj");

  MatrixD out(Q, D);
  for (std::size_t qi = 0; qi < Q; ++qi) {
    std::vector<double> residual(D);
    for (std::size_t c = 0; c < D; ++c) residual[c] = q(qi, c) + update(qi, c);
    const auto normed = layer_norm(residual, params.norm_gain, params.norm_bias);
    std::copy(normed.begin(), normed.end(), out.row(qi).begin());
  }
  check_finite(out, "residual_norm");

  if (trace != nullptr) {
    trace->streams = streams;
    trace->copies = std::accumulate(copies.begin(), copies.end(), std::size_t{0});
    trace->copies_per_query = copies;
    trace->xqssm_units = counters.total();
    trace->xqssm_formula_total = formula_total;
    trace->norm_projected = std::sqrt(projected_sq);
    trace->norm_gated = std::sqrt(gated_sq);
    trace->norm_accumulated = frobenius_norm(Q_y);
    trace->norm_update = frobenius_norm(update);
    trace->norm_output = frobenius_norm(out);
    trace->q_y = Q_y;
  }
  return out;
}

HydraParams HydraParams::init(const SSMDims& dims, int conv_width, std::uint64_t seed) {
  dims.validate();
  const auto D = static_cast<std::size_t>(dims.model_dim);
  const auto inner = static_cast<std::size_t>(dims.inner());
  const auto bc = static_cast<std::size_t>(dims.bc_width());
  const auto H = static_cast<std::size_t>(dims.heads);
  const CounterRng root(seed);
  auto rng_in = root.fork(11);
  auto rng_conv = root.fork(12);
  auto rng_out = root.fork(13);
  auto rng_fwd = root.fork(14);
  auto rng_bwd = root.fork(15);
  const double conv_bound = 1.0 / std::sqrt(static_cast<double>(conv_width));

  HydraParams p;
  p.in_proj = Linear::init(D, 2 * inner + 2 * bc + H, true, rng_in);
  p.conv_weight = uniform_matrix(inner + 2 * bc, static_cast<std::size_t>(conv_width), conv_bound,
                                 rng_conv);
  p.conv_bias = uniform_vector(inner + 2 * bc, conv_bound, rng_conv);
  p.out_proj = Linear::init(inner, D, false, rng_out);
  p.rms_gain.assign(inner, 1.0);
  p.fwd = SSMParams<double>::init(dims.heads, rng_fwd);
  p.bwd = SSMParams<double>::init(dims.heads, rng_bwd);
  return p;
}

MatrixD hydra_self_attention(const MatrixD& grid, int H_bev, int W_bev, const SSMDims& dims,
                             const HydraParams& params, const TraversalOrder& order) {
  dims.validate();
  const auto D = static_cast<std::size_t>(dims.model_dim);
  const auto inner = static_cast<std::size_t>(dims.inner());
  const auto bc = static_cast<std::size_t>(dims.bc_width());
  const auto H = static_cast<std::size_t>(dims.heads);
  const std::size_t cells = static_cast<std::size_t>(H_bev) * static_cast<std::size_t>(W_bev);
  require(H_bev >= 1 && W_bev >= 1 && grid.rows() == cells && grid.cols() == D, ErrorKind::kShape,
          "BEV grid must be (H_bev * W_bev) x model_dim");
  require(params.in_proj.out_features() == 2 * inner + 2 * bc + H &&
              params.in_proj.in_features() == D && params.conv_weight.rows() == inner + 2 * bc &&
              params.out_proj.in_features() == inner && params.out_proj.out_features() == D,
          ErrorKind::kShape, "Hydra parameters inconsistent with dims");

  const Permutation perm = flatten_permutation(H_bev, W_bev, order);
  MatrixD seq_in(cells, D);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    const auto src = grid.row(cell);
    std::copy(src.begin(), src.end(), seq_in.row(static_cast<std::size_t>(perm.forward[cell])).begin());
  }

  const MatrixD projected = params.in_proj.apply(seq_in);
  const MatrixD z = slice_cols(projected, 0, inner);
  const MatrixD xbc = causal_depthwise_conv(slice_cols(projected, inner, inner + 2 * bc),
                                            params.conv_weight, params.conv_bias);
  const SequenceBatch<double> seq{slice_cols(xbc, 0, inner), slice_cols(xbc, inner, bc),
                                  slice_cols(xbc, inner + bc, bc),
                                  slice_cols(projected, 2 * inner + 2 * bc, H)};
  const MatrixD y = hydra_bidirectional(dims, seq, params.fwd, params.bwd);

  MatrixD gated(cells, inner);
  for (std::size_t t = 0; t < cells; ++t) {
    const auto g = gated_rms(y.row(t), z.row(t), params.rms_gain, true);
    std::copy(g.begin(), g.end(), gated.row(t).begin());
  }
  const MatrixD update = params.out_proj.apply(gated);
  check_finite(update, "hydra");

  MatrixD out(cells, D);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    const auto u = update.row(static_cast<std::size_t>(perm.forward[cell]));
    for (std::size_t c = 0; c < D; ++c) out(cell, c) = grid(cell, c) + u[c];
  }
  return out;
}

}  // namespace xbev
