// SPDX-License-Identifier: Apache-2.0

#include "xbev/xqssm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "xbev/error.hpp"

namespace xbev {

DirectionalParams DirectionalParams::init(int heads, CounterRng& rng) {
  auto fwd_rng = rng.fork(1);
  auto bwd_rng = rng.fork(2);
  return {SSMParams<double>::init(heads, fwd_rng), SSMParams<double>::init(heads, bwd_rng)};
}

std::size_t XqssmInput::queries() const noexcept {
  return static_cast<std::size_t>(std::count(s_mask.begin(), s_mask.end(), std::uint8_t{0}));
}

void XqssmInput::validate(const SSMDims& dims) const {
  const std::size_t L = length();
  for (int d = 0; d < 2; ++d) {
    const auto i = static_cast<std::size_t>(d);
    require(x[i].rows() == L && B[i].rows() == L && C[i].rows() == L && dt[i].rows() == L,
            ErrorKind::kShape,
            "direction " + std::to_string(d) + " length disagrees with s_mask length " +
                std::to_string(L));
    require(x[i].cols() == static_cast<std::size_t>(dims.inner()), ErrorKind::kShape,
            "x width must be heads * head_dim");
    require(B[i].cols() == static_cast<std::size_t>(dims.bc_width()) &&
                C[i].cols() == static_cast<std::size_t>(dims.bc_width()),
            ErrorKind::kShape, "B/C width must be state_dim * groups");
    require(dt[i].cols() == static_cast<std::size_t>(dims.heads), ErrorKind::kShape,
            "dt width must equal heads");
  }
}

XqssmInput XqssmInput::bidirectional(const MatrixD& x, const MatrixD& B_fwd, const MatrixD& C_fwd,
                                     const MatrixD& dt_fwd, const MatrixD& B_bwd,
                                     const MatrixD& C_bwd, const MatrixD& dt_bwd,
                                     std::vector<std::uint8_t> s_mask) {
  XqssmInput in;
  in.x = {x, reverse_rows(x)};
  in.B = {B_fwd, reverse_rows(B_bwd)};
  in.C = {C_fwd, reverse_rows(C_bwd)};
  in.dt = {dt_fwd, reverse_rows(dt_bwd)};
  in.s_mask = std::move(s_mask);
  return in;
}

MatrixD xqssm_recurrent(const SSMDims& dims, const XqssmInput& input,
                        const DirectionalParams& params, const XqssmOptions& options) {
  input.validate(dims);
  params.fwd.validate(dims.heads);
  params.bwd.validate(dims.heads);
  const std::size_t L = input.length();
  const std::size_t M = input.queries();
  const auto H = static_cast<std::size_t>(dims.heads);
  const auto P = static_cast<std::size_t>(dims.head_dim);
  const auto N = static_cast<std::size_t>(dims.state_dim);
  const std::size_t inner = H * P;

  MatrixD y(M, inner);
  std::vector<double> state(inner * N);
  std::vector<double> gain(N);
  std::vector<double> snapshot;
  if (options.observer) snapshot.resize(state.size());

  if (options.counters != nullptr) {
    const std::size_t aux = (state.capacity() + gain.capacity()) * sizeof(double);
    options.counters->peak_aux_bytes = std::max(options.counters->peak_aux_bytes, aux);
  }

  for (int dir = 0; dir < 2; ++dir) {
    if ((dir == 0 && !options.forward) || (dir == 1 && !options.backward)) continue;
    const auto d = static_cast<std::size_t>(dir);
    const SSMParams<double>& p = dir == 0 ? params.fwd : params.bwd;
    std::fill(state.begin(), state.end(), 0.0);
    // Forward visits queries 0..M-1, backward visits them M-1..0.
    std::size_t seen = 0;

    for (std::size_t t = 0; t < L; ++t) {
      const std::size_t token = dir == 0 ? t : L - 1 - t;
      const bool is_query = input.s_mask[token] == 0;
      if (options.observer) std::copy(state.begin(), state.end(), snapshot.begin());
      const auto x = input.x[d].row(t);
      const auto B = input.B[d].row(t);
      const auto C = input.C[d].row(t);

      if (!is_query) {
        for (std::size_t h = 0; h < H; ++h) {
          const double delta = softplus(input.dt[d](t, h) + p.dt_bias[h]);
          const double dA = std::exp(delta * p.A(h));
          const std::size_t g0 = static_cast<std::size_t>(dims.group_of(static_cast<int>(h))) * N;
          for (std::size_t n = 0; n < N; ++n) gain[n] = delta * B[g0 + n];
          for (std::size_t pp = 0; pp < P; ++pp) {
            const std::size_t c = h * P + pp;
            double* hs = state.data() + c * N;
            for (std::size_t n = 0; n < N; ++n) hs[n] = dA * hs[n] + gain[n] * x[c];
          }
        }
        if (options.counters != nullptr) {
          options.counters->discretizations += H;
          options.counters->input_gains += H * N;
          options.counters->state_updates += inner * N;
        }
      } else {
        const std::size_t qi = dir == 0 ? seen : M - 1 - seen;
        ++seen;
        auto out = y.row(qi);
        for (std::size_t h = 0; h < H; ++h) {
          const std::size_t g0 = static_cast<std::size_t>(dims.group_of(static_cast<int>(h))) * N;
          for (std::size_t pp = 0; pp < P; ++pp) {
            const std::size_t c = h * P + pp;
            const double* hs = state.data() + c * N;
            double acc = 0.0;
            for (std::size_t n = 0; n < N; ++n) acc += C[g0 + n] * hs[n];
            out[c] += acc;
          }
        }
        if (options.counters != nullptr) options.counters->readout_macs += inner * N;
      }

      if (options.observer) {
        options.observer(TokenEvent{dir, t, is_query, snapshot, state});
      }
    }
  }
  return y;
}

XqssmMixer xqssm_mixer(const SSMDims& dims, const XqssmInput& input,
                       const DirectionalParams& params) {
  input.validate(dims);
  params.fwd.validate(dims.heads);
  params.bwd.validate(dims.heads);
  const std::size_t L = input.length();
  const auto H = static_cast<std::size_t>(dims.heads);

  XqssmMixer mixer;
  mixer.queries = input.queries();
  mixer.values = L - mixer.queries;
  mixer.heads2 = 2 * H;
  mixer.weights.assign(mixer.queries * mixer.values * mixer.heads2, 0.0);

  // Ordinal of each token among queries / features in forward order.
  std::vector<std::size_t> ordinal(L);
  {
    std::size_t q = 0;
    std::size_t v = 0;
    for (std::size_t s = 0; s < L; ++s) ordinal[s] = input.s_mask[s] == 0 ? q++ : v++;
  }

  for (std::size_t d = 0; d < 2; ++d) {
    const SSMParams<double>& p = d == 0 ? params.fwd : params.bwd;
    for (std::size_t h = 0; h < H; ++h) {
      // cum_log after each feature seen so far; delta of that feature.
      std::vector<double> incl_log;
      std::vector<double> delta;
      std::vector<std::size_t> feature_ordinal;
      double running_log = 0.0;
      for (std::size_t t = 0; t < L; ++t) {
        const std::size_t token = d == 0 ? t : L - 1 - t;
        if (input.s_mask[token] != 0) {
          const double dl = softplus(input.dt[d](t, h) + p.dt_bias[h]);
          running_log += dl * p.A(h);
          incl_log.push_back(running_log);
          delta.push_back(dl);
          feature_ordinal.push_back(ordinal[token]);
        } else {
          const std::size_t qi = ordinal[token];
          for (std::size_t k = 0; k < incl_log.size(); ++k) {
            const double w = delta[k] * std::exp(running_log - incl_log[k]);
            mixer.weights[(qi * mixer.values + feature_ordinal[k]) * mixer.heads2 + d * H + h] = w;
          }
        }
      }
    }
  }
  return mixer;
}

MatrixD xqssm_parallel(const SSMDims& dims, const XqssmInput& input,
                       const DirectionalParams& params) {
  const XqssmMixer mixer = xqssm_mixer(dims, input, params);
  const std::size_t L = input.length();
  const auto H = static_cast<std::size_t>(dims.heads);
  const auto P = static_cast<std::size_t>(dims.head_dim);
  const auto N = static_cast<std::size_t>(dims.state_dim);

  // Row of each query / feature ordinal within each direction's matrices.
  std::vector<std::size_t> query_token;
  std::vector<std::size_t> value_token;
  for (std::size_t s = 0; s < L; ++s) {
    (input.s_mask[s] == 0 ? query_token : value_token).push_back(s);
  }

  MatrixD y(mixer.queries, H * P);
  for (std::size_t d = 0; d < 2; ++d) {
    for (std::size_t i = 0; i < mixer.queries; ++i) {
      const std::size_t qrow = d == 0 ? query_token[i] : L - 1 - query_token[i];
      const auto Cq = input.C[d].row(qrow);
      for (std::size_t j = 0; j < mixer.values; ++j) {
        const std::size_t vrow = d == 0 ? value_token[j] : L - 1 - value_token[j];
        const auto Bv = input.B[d].row(vrow);
        const auto xv = input.x[d].row(vrow);
        for (std::size_t h = 0; h < H; ++h) {
          const double w = mixer(i, j, d * H + h);
          if (w == 0.0) continue;
          const std::size_t g0 = static_cast<std::size_t>(dims.group_of(static_cast<int>(h))) * N;
          double cb = 0.0;
          for (std::size_t n = 0; n < N; ++n) cb += Cq[g0 + n] * Bv[g0 + n];
          const double scale = w * cb;
          for (std::size_t pp = 0; pp < P; ++pp) y(i, h * P + pp) += scale * xv[h * P + pp];
        }
      }
    }
  }
  return y;
}

XqssmFlops xqssm_flops(std::uint64_t V, std::uint64_t M, std::uint64_t H, std::uint64_t N,
                       std::uint64_t inner) {
  XqssmFlops f;
  f.per_query = inner * (N + H + 1);
  f.per_feature = 2 * H * (N + 1) + 2 * inner * N;
  f.total = 2 * V * (H * (N + 1) + inner * N) + M * inner * (N + H + 1);
  f.per_query_unoptimized = 2 * H * (N + 1) + inner * (3 * N + H + 1);
  return f;
}

}  // namespace xbev
