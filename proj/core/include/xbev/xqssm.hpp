// SPDX-License-Identifier: Apache-2.0
//
// Cross quasi-separable SSM. Feature tokens (s_mask = 1) update the state with
// delta = softplus(dt + dt_bias); query tokens (s_mask = 0) read y = C . h and
// pass the state through untouched (delta pinned to exactly 0). The stream is
// scanned forward and backward with independent parameters and the two
// readouts of each query copy are summed.

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "xbev/matrix.hpp"
#include "xbev/ssm_core.hpp"

namespace xbev {

struct DirectionalParams {
  SSMParams<double> fwd;
  SSMParams<double> bwd;

  static DirectionalParams init(int heads, CounterRng& rng);
};

// Direction 0 is the forward stream, direction 1 the same stream reversed
// (row t of direction 1 is token L - 1 - t). s_mask is in forward order.
struct XqssmInput {
  std::array<MatrixD, 2> x;
  std::array<MatrixD, 2> B;
  std::array<MatrixD, 2> C;
  std::array<MatrixD, 2> dt;
  std::vector<std::uint8_t> s_mask;

  std::size_t length() const noexcept { return s_mask.size(); }
  std::size_t queries() const noexcept;
  std::size_t values() const noexcept { return length() - queries(); }
  void validate(const SSMDims& dims) const;

  // Builds the backward copy by reversing the forward rows.
  static XqssmInput bidirectional(const MatrixD& x, const MatrixD& B_fwd, const MatrixD& C_fwd,
                                  const MatrixD& dt_fwd, const MatrixD& B_bwd,
                                  const MatrixD& C_bwd, const MatrixD& dt_bwd,
                                  std::vector<std::uint8_t> s_mask);
};

// Events reported by the instrumented recurrent kernel. Counting convention:
// one unit per head discretization (softplus and exp of one head), one unit
// per delta * B_n product, one unit per fused state update
// h <- dA * h + (delta B_n) * x, and one unit per multiply-add of a readout
// contraction C . h.
struct XqssmCounters {
  std::uint64_t discretizations = 0;
  std::uint64_t input_gains = 0;
  std::uint64_t state_updates = 0;
  std::uint64_t readout_macs = 0;
  std::size_t peak_aux_bytes = 0;

  std::uint64_t total() const noexcept {
    return discretizations + input_gains + state_updates + readout_macs;
  }
};

struct TokenEvent {
  int direction = 0;
  std::size_t position = 0;  // position in that direction's order
  bool is_query = false;
  std::span<const double> state_before;
  std::span<const double> state_after;
};

struct XqssmOptions {
  bool forward = true;
  bool backward = true;
  XqssmCounters* counters = nullptr;
  std::function<void(const TokenEvent&)> observer;
};

// M x (H*P), rows ordered by query occurrence in the forward stream.
MatrixD xqssm_recurrent(const SSMDims& dims, const XqssmInput& input,
                        const DirectionalParams& params, const XqssmOptions& options = {});

// Query-by-feature mixer of shape M x V x 2H (direction-major in the last
// axis: index dir * H + h). Entry (i, j, dir*H+h) is the weight of feature j
// on query i for that head, excluding the C . B contraction and x:
//   delta_j * prod of decays of features strictly between j and i.
struct XqssmMixer {
  std::size_t queries = 0;
  std::size_t values = 0;
  std::size_t heads2 = 0;
  std::vector<double> weights;

  double operator()(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return weights[(i * values + j) * heads2 + k];
  }
};

XqssmMixer xqssm_mixer(const SSMDims& dims, const XqssmInput& input,
                       const DirectionalParams& params);

MatrixD xqssm_parallel(const SSMDims& dims, const XqssmInput& input,
                       const DirectionalParams& params);

struct XqssmFlops {
  std::uint64_t per_query = 0;              // inner * (N + H + 1)
  std::uint64_t per_feature = 0;            // 2H(N + 1) + 2 * inner * N
  std::uint64_t total = 0;                  // 2V(H(N+1) + inner*N) + M * inner * (N + H + 1)
  std::uint64_t per_query_unoptimized = 0;  // 2H(N + 1) + inner * (3N + H + 1)
};

XqssmFlops xqssm_flops(std::uint64_t V, std::uint64_t M, std::uint64_t H, std::uint64_t N,
                       std::uint64_t inner);

}  // namespace xbev
