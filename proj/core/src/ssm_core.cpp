// SPDX-License-Identifier: Apache-2.0

#include "xbev/ssm_core.hpp"

#include <cmath>
#include <string>

#include "xbev/tolerances.hpp"

namespace xbev {

void SSMDims::validate() const {
  require(model_dim >= 1 && heads >= 1 && head_dim >= 1 && state_dim >= 1 && groups >= 1,
          ErrorKind::kInvalidSpec, "SSM dims must all be >= 1");
  require(expand > 0.0, ErrorKind::kInvalidSpec, "expand must be positive");
  require(heads % groups == 0, ErrorKind::kInvalidSpec, "heads must be divisible by groups");
  const double inner_from_expand = expand * model_dim;
  require(inner_from_expand == static_cast<double>(inner()), ErrorKind::kInvalidSpec,
          "expand * model_dim (" + std::to_string(inner_from_expand) +
              ") must equal heads * head_dim (" + std::to_string(inner()) + ")");
}

SSMDims SSMDims::kernel(int heads, int head_dim, int state_dim, int groups) {
  SSMDims d{heads * head_dim, 1.0, heads, head_dim, state_dim, groups};
  d.validate();
  return d;
}

template <typename T>
T SSMParams<T>::A(std::size_t head) const {
  return -std::exp(A_log[head]);
}

template <typename T>
void SSMParams<T>::validate(int heads) const {
  const auto n = static_cast<std::size_t>(heads);
  require(A_log.size() == n && dt_bias.size() == n && skip_D.size() == n, ErrorKind::kShape,
          "SSM params must have one entry per head (" + std::to_string(heads) + ")");
  require(all_finite<T>(A_log) && all_finite<T>(dt_bias) && all_finite<T>(skip_D),
          ErrorKind::kInvalidInput, "SSM params must be finite");
}

template <typename T>
SSMParams<T> SSMParams<T>::init(int heads, CounterRng& rng) {
  SSMParams p;
  for (int h = 0; h < heads; ++h) {
    p.A_log.push_back(static_cast<T>(rng.uniform(0.0, std::log(16.0))));
    const double dt = std::exp(rng.uniform(std::log(1e-3), std::log(1e-1)));
    p.dt_bias.push_back(static_cast<T>(std::log(std::expm1(dt))));
    p.skip_D.push_back(T{1});
  }
  return p;
}

template <typename T>
void SequenceBatch<T>::validate(const SSMDims& dims) const {
  const std::size_t L = x.rows();
  require(x.cols() == static_cast<std::size_t>(dims.inner()), ErrorKind::kShape,
          "x width " + std::to_string(x.cols()) + " != heads * head_dim " +
              std::to_string(dims.inner()));
  require(B.rows() == L && C.rows() == L && dt.rows() == L, ErrorKind::kShape,
          "sequence fields disagree on length");
  require(B.cols() == static_cast<std::size_t>(dims.bc_width()) &&
              C.cols() == static_cast<std::size_t>(dims.bc_width()),
          ErrorKind::kShape, "B/C width must be state_dim * groups");
  require(dt.cols() == static_cast<std::size_t>(dims.heads), ErrorKind::kShape,
          "dt width must equal heads");
}

template <typename T>
T softplus(T x) noexcept {
  // log(1 + e^x) = max(x, 0) + log1p(e^-|x|)
  return std::max(x, T{0}) + std::log1p(std::exp(-std::abs(x)));
}

template <typename T>
Discretization<T> discretize(const Matrix<T>& dt, const SSMParams<T>& params) {
  require(dt.cols() == params.heads(), ErrorKind::kShape, "dt width must equal heads");
  require(all_finite<T>(dt.values()), ErrorKind::kInvalidInput, "dt must be finite");
  params.validate(static_cast<int>(params.heads()));
  Discretization<T> d{Matrix<T>(dt.rows(), dt.cols()), Matrix<T>(dt.rows(), dt.cols()),
                      Matrix<T>(dt.rows(), dt.cols())};
  for (std::size_t t = 0; t < dt.rows(); ++t) {
    for (std::size_t h = 0; h < dt.cols(); ++h) {
      const T delta = softplus(dt(t, h) + params.dt_bias[h]);
      d.delta(t, h) = delta;
      d.log_decay(t, h) = delta * params.A(h);
      d.decay(t, h) = std::exp(d.log_decay(t, h));
    }
  }
  return d;
}

template <typename T>
T zoh_input_gain(T delta, T A, T B) noexcept {
  return std::expm1(delta * A) / A * B;
}

template <typename T>
ScanResult<T> scan_discretized(const SSMDims& dims, const SequenceBatch<T>& seq,
                               const Discretization<T>& disc, const std::vector<T>& skip_D,
                               const ScanState<T>& init) {
  seq.validate(dims);
  const std::size_t L = seq.length();
  const auto H = static_cast<std::size_t>(dims.heads);
  const auto P = static_cast<std::size_t>(dims.head_dim);
  const auto N = static_cast<std::size_t>(dims.state_dim);
  require(disc.delta.rows() == L && disc.delta.cols() == H && disc.decay.rows() == L &&
              disc.decay.cols() == H,
          ErrorKind::kShape, "discretization shape mismatch");
  require(skip_D.size() == H, ErrorKind::kShape, "skip_D must have one entry per head");
  require(init.h.size() == H * P * N, ErrorKind::kShape, "initial state must be H x P x N");

  ScanResult<T> out{Matrix<T>(L, H * P), init};
  auto& state = out.final_state.h;
  for (std::size_t t = 0; t < L; ++t) {
    const auto x = seq.x.row(t);
    const auto B = seq.B.row(t);
    const auto C = seq.C.row(t);
    auto y = out.y.row(t);
    for (std::size_t h = 0; h < H; ++h) {
      const T dA = disc.decay(t, h);
      const T delta = disc.delta(t, h);
      const std::size_t g0 = static_cast<std::size_t>(dims.group_of(static_cast<int>(h))) * N;
      for (std::size_t p = 0; p < P; ++p) {
        const std::size_t c = h * P + p;
        T* hs = state.data() + c * N;
        T acc{};
        for (std::size_t n = 0; n < N; ++n) {
          hs[n] = dA * hs[n] + delta * B[g0 + n] * x[c];
          acc += C[g0 + n] * hs[n];
        }
        y[c] = acc + skip_D[h] * x[c];
      }
    }
  }
  return out;
}

template <typename T>
ScanResult<T> scan_recurrent(const SSMDims& dims, const SequenceBatch<T>& seq,
                             const SSMParams<T>& params, const ScanState<T>& init) {
  seq.validate(dims);
  params.validate(dims.heads);
  return scan_discretized(dims, seq, discretize(seq.dt, params), params.skip_D, init);
}

template <typename T>
Matrix<T> semiseparable_mixer(const SSMDims& dims, const SequenceBatch<T>& seq,
                              const Discretization<T>& disc, int head) {
  const std::size_t L = seq.length();
  const auto N = static_cast<std::size_t>(dims.state_dim);
  const auto h = static_cast<std::size_t>(head);
  const std::size_t g0 = static_cast<std::size_t>(dims.group_of(head)) * N;
  Matrix<T> M(L, L);
  const bool log_space = L > Tolerances::kLogSpaceMinLength;

  std::vector<T> cum_log(L + 1, T{});
  for (std::size_t t = 0; t < L; ++t) cum_log[t + 1] = cum_log[t] + disc.log_decay(t, h);

  for (std::size_t i = 0; i < L; ++i) {
    const auto Ci = seq.C.row(i);
    T running{1};  // prod_{k=j+1..i} decay_k, built as j walks down from i
    for (std::size_t jj = i + 1; jj-- > 0;) {
      const auto Bj = seq.B.row(jj);
      T cb{};
      for (std::size_t n = 0; n < N; ++n) cb += Ci[g0 + n] * Bj[g0 + n];
      const T decay = log_space ? std::exp(cum_log[i + 1] - cum_log[jj + 1]) : running;
      M(i, jj) = cb * disc.delta(jj, h) * decay;
      running *= disc.decay(jj, h);
    }
  }
  return M;
}

template <typename T>
Matrix<T> scan_matrix_mixer(const SSMDims& dims, const SequenceBatch<T>& seq,
                            const SSMParams<T>& params) {
  seq.validate(dims);
  params.validate(dims.heads);
  const std::size_t L = seq.length();
  const auto P = static_cast<std::size_t>(dims.head_dim);
  const auto disc = discretize(seq.dt, params);
  Matrix<T> y(L, static_cast<std::size_t>(dims.inner()));
  for (int head = 0; head < dims.heads; ++head) {
    const Matrix<T> M = semiseparable_mixer(dims, seq, disc, head);
    const auto h = static_cast<std::size_t>(head);
    for (std::size_t i = 0; i < L; ++i) {
      for (std::size_t p = 0; p < P; ++p) {
        const std::size_t c = h * P + p;
        T acc{};
        for (std::size_t j = 0; j <= i; ++j) acc += M(i, j) * seq.x(j, c);
        y(i, c) = acc + params.skip_D[h] * seq.x(i, c);
      }
    }
  }
  return y;
}

template <typename T>
SequenceBatch<T> reverse(const SequenceBatch<T>& seq) {
  return {reverse_rows(seq.x), reverse_rows(seq.B), reverse_rows(seq.C), reverse_rows(seq.dt)};
}

namespace {

template <typename T>
Matrix<T> shift_forward(const Matrix<T>& m) {
  Matrix<T> out(m.rows(), m.cols());
  for (std::size_t r = 1; r < m.rows(); ++r) {
    auto src = m.row(r - 1);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

}  // namespace

template <typename T>
Matrix<T> hydra_bidirectional(const SSMDims& dims, const SequenceBatch<T>& seq,
                              const SSMParams<T>& fwd, const SSMParams<T>& bwd) {
  seq.validate(dims);
  fwd.validate(dims.heads);
  bwd.validate(dims.heads);
  const std::vector<T> no_skip(static_cast<std::size_t>(dims.heads), T{});
  const auto zero = ScanState<T>::zeros(dims);

  const auto fwd_scan =
      scan_discretized(dims, seq, discretize(seq.dt, fwd), no_skip, zero).y;
  const auto rev = reverse(seq);
  const auto bwd_scan = scan_discretized(dims, rev, discretize(rev.dt, bwd), no_skip, zero).y;

  const Matrix<T> lower = shift_forward(fwd_scan);
  const Matrix<T> upper = reverse_rows(shift_forward(bwd_scan));

  const auto P = static_cast<std::size_t>(dims.head_dim);
  Matrix<T> y(seq.length(), static_cast<std::size_t>(dims.inner()));
  for (std::size_t t = 0; t < y.rows(); ++t) {
    for (std::size_t c = 0; c < y.cols(); ++c) {
      const std::size_t h = c / P;
      const T skip = (fwd.skip_D[h] + bwd.skip_D[h]) / T{2};
      y(t, c) = lower(t, c) + upper(t, c) + skip * seq.x(t, c);
    }
  }
  return y;
}

#define XBEV_INSTANTIATE_SSM(T)                                                               \
  template struct SSMParams<T>;                                                               \
  template struct SequenceBatch<T>;                                                           \
  template T softplus<T>(T) noexcept;                                                         \
  template Discretization<T> discretize<T>(const Matrix<T>&, const SSMParams<T>&);            \
  template T zoh_input_gain<T>(T, T, T) noexcept;                                             \
  template ScanResult<T> scan_recurrent<T>(const SSMDims&, const SequenceBatch<T>&,           \
                                           const SSMParams<T>&, const ScanState<T>&);         \
  template ScanResult<T> scan_discretized<T>(const SSMDims&, const SequenceBatch<T>&,         \
                                             const Discretization<T>&, const std::vector<T>&, \
                                             const ScanState<T>&);                            \
  template Matrix<T> semiseparable_mixer<T>(const SSMDims&, const SequenceBatch<T>&,          \
                                            const Discretization<T>&, int);                   \
  template Matrix<T> scan_matrix_mixer<T>(const SSMDims&, const SequenceBatch<T>&,            \
                                          const SSMParams<T>&);                               \
  template Matrix<T> hydra_bidirectional<T>(const SSMDims&, const SequenceBatch<T>&,          \
                                            const SSMParams<T>&, const SSMParams<T>&);        \
  template SequenceBatch<T> reverse<T>(const SequenceBatch<T>&);

XBEV_INSTANTIATE_SSM(float)
XBEV_INSTANTIATE_SSM(double)

#undef XBEV_INSTANTIATE_SSM

}  // namespace xbev
