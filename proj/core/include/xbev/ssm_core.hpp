// SPDX-License-Identifier: Apache-2.0
//
// Selective state space model primitives: discretization, the recurrent scan,
// its dual lower-triangular (semiseparable) matrix-mixer form, and the
// bidirectional quasiseparable mixer built from two shifted causal scans.
//
// Layout conventions (all row-major, rows = time):
//   x      L x (H*P)   channel c belongs to head c / P
//   B, C   L x (N*G)   group g owns columns [g*N, (g+1)*N)
//   dt     L x H
//   state  H x P x N   flattened as (h*P + p)*N + n
// Head h reads the B/C columns of group h / (H/G).

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "xbev/matrix.hpp"
#include "xbev/rng.hpp"

namespace xbev {

struct SSMDims {
  int model_dim = 32;
  double expand = 4.0;
  int heads = 8;
  int head_dim = 16;
  int state_dim = 32;
  int groups = 1;

  int inner() const noexcept { return heads * head_dim; }
  int bc_width() const noexcept { return state_dim * groups; }
  int heads_per_group() const noexcept { return heads / groups; }
  int group_of(int head) const noexcept { return head / heads_per_group(); }

  // Throws kInvalidSpec unless expand * model_dim == heads * head_dim exactly,
  // heads % groups == 0, and every field is positive.
  void validate() const;

  // Dims for kernel-level work where model_dim is irrelevant (expand = 1).
  static SSMDims kernel(int heads, int head_dim, int state_dim, int groups = 1);

  bool operator==(const SSMDims&) const = default;
};

template <typename T>
struct SSMParams {
  std::vector<T> A_log;    // A = -exp(A_log) < 0
  std::vector<T> dt_bias;
  std::vector<T> skip_D;   // one skip scalar per head

  std::size_t heads() const noexcept { return A_log.size(); }
  T A(std::size_t head) const;

  void validate(int heads) const;

  // A_log uniform over [log 1, log 16]; dt_bias chosen so that
  // softplus(dt_bias) is log-uniform in [1e-3, 1e-1]; skip_D = 1.
  static SSMParams init(int heads, CounterRng& rng);
};

template <typename T>
struct SequenceBatch {
  Matrix<T> x;
  Matrix<T> B;
  Matrix<T> C;
  Matrix<T> dt;

  std::size_t length() const noexcept { return x.rows(); }
  void validate(const SSMDims& dims) const;
};

template <typename T>
struct ScanState {
  std::vector<T> h;

  static ScanState zeros(const SSMDims& dims) {
    return {std::vector<T>(static_cast<std::size_t>(dims.inner()) * dims.state_dim, T{})};
  }
  bool operator==(const ScanState&) const = default;
};

template <typename T>
struct Discretization {
  Matrix<T> delta;      // L x H, softplus(dt + dt_bias) >= 0
  Matrix<T> decay;      // L x H, exp(delta * A) in (0, 1]
  Matrix<T> log_decay;  // L x H, delta * A, kept for log-space products
};

template <typename T>
struct ScanResult {
  Matrix<T> y;
  ScanState<T> final_state;
};

template <typename T>
T softplus(T x) noexcept;

template <typename T>
Discretization<T> discretize(const Matrix<T>& dt, const SSMParams<T>& params);

// Zero-order-hold input gain (exp(dA) - 1) / A * B for scalar A. Reference
// only: the scans use the Euler gain delta * B.
template <typename T>
T zoh_input_gain(T delta, T A, T B) noexcept;

template <typename T>
ScanResult<T> scan_recurrent(const SSMDims& dims, const SequenceBatch<T>& seq,
                             const SSMParams<T>& params, const ScanState<T>& init);

// Scan with an explicit discretization, used wherever delta is pinned by the
// caller rather than derived from dt (query bypass, oracles).
template <typename T>
ScanResult<T> scan_discretized(const SSMDims& dims, const SequenceBatch<T>& seq,
                               const Discretization<T>& disc, const std::vector<T>& skip_D,
                               const ScanState<T>& init);

// Materializes the L x L causal mixer of one head:
//   M[i][j] = (C_i . B_j) * delta_j * prod_{k=j+1..i} decay_k,  j <= i.
template <typename T>
Matrix<T> semiseparable_mixer(const SSMDims& dims, const SequenceBatch<T>& seq,
                              const Discretization<T>& disc, int head);

template <typename T>
Matrix<T> scan_matrix_mixer(const SSMDims& dims, const SequenceBatch<T>& seq,
                            const SSMParams<T>& params);

// y = shift(scan_fwd(seq)) + flip(shift(scan_bwd(flip(seq)))) + skip * x,
// where shift delays by one token with zero fill and the skip scalar is the
// mean of the two directions' skip_D (equal to either when they match).
template <typename T>
Matrix<T> hydra_bidirectional(const SSMDims& dims, const SequenceBatch<T>& seq,
                              const SSMParams<T>& fwd, const SSMParams<T>& bwd);

template <typename T>
SequenceBatch<T> reverse(const SequenceBatch<T>& seq);

}  // namespace xbev
