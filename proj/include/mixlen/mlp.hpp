#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "error.hpp"
#include "fastmath.hpp"
#include "rng.hpp"

namespace mixlen {

enum class act_kind { softplus, relu, tanh_act };

inline act_kind parse_activation(const std::string& name) {
  if (name == "softplus") return act_kind::softplus;
  if (name == "relu") return act_kind::relu;
  if (name == "tanh") return act_kind::tanh_act;
  throw usage_error("unknown activation '" + name + "' (softplus, relu, tanh)");
}

struct mlp_config {
  std::vector<int> hidden_layers = {128, 128, 128};
  std::string activation = "softplus";
  int time_embedding = 32;

  void validate() const {
    if (hidden_layers.empty()) throw usage_error("network needs at least one hidden layer");
    for (int h : hidden_layers)
      if (h < 1) throw usage_error("hidden layer sizes must be positive");
    parse_activation(activation);
    if (time_embedding < 2 || time_embedding % 2 != 0)
      throw usage_error("time_embedding must be a positive even number");
  }
};

// sin/cos features of s = t/T at geometrically spaced frequencies 1..1000
inline void sinusoidal_embedding(double s, int dim, double* out) {
  const int half = dim / 2;
  for (int k = 0; k < half; ++k) {
    const double freq =
        half > 1 ? std::exp(static_cast<double>(k) * std::log(1000.0) / (half - 1)) : 1.0;
    out[k] = std::sin(freq * s);
    out[half + k] = std::cos(freq * s);
  }
}

// Plain feed-forward net with a scalar output.  All parameters live in one
// flat vector (per layer: row-major W[in][out], then bias) so the optimizer
// and the finite-difference tests can treat the model as theta in R^n.
class mlp {
 public:
  mlp() = default;

  mlp(int input_dim, const std::vector<int>& hidden, act_kind act, rng& r)
      : input_dim_(input_dim), act_(act) {
    if (input_dim < 1) throw usage_error("network input dimension must be positive");
    dims_.push_back(input_dim);
    for (int h : hidden) dims_.push_back(h);
    dims_.push_back(1);
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      w_off_.push_back(total);
      total += static_cast<std::size_t>(dims_[l]) * static_cast<std::size_t>(dims_[l + 1]);
      b_off_.push_back(total);
      total += static_cast<std::size_t>(dims_[l + 1]);
    }
    theta_.assign(total, 0.0);
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      const double limit = std::sqrt(6.0 / (dims_[l] + dims_[l + 1]));
      double* w = theta_.data() + w_off_[l];
      const std::size_t nw =
          static_cast<std::size_t>(dims_[l]) * static_cast<std::size_t>(dims_[l + 1]);
      for (std::size_t i = 0; i < nw; ++i) w[i] = r.uniform(-limit, limit);
      // biases start at zero
    }
  }

  int input_dim() const { return input_dim_; }
  int n_layers() const { return static_cast<int>(dims_.size()) - 1; }
  int in_dim(int l) const { return dims_[static_cast<std::size_t>(l)]; }
  int out_dim(int l) const { return dims_[static_cast<std::size_t>(l) + 1]; }
  act_kind activation() const { return act_; }
  const std::vector<int>& dims() const { return dims_; }

  std::size_t n_params() const { return theta_.size(); }
  std::vector<double>& params() { return theta_; }
  const std::vector<double>& params() const { return theta_; }
  const double* w(int l) const { return theta_.data() + w_off_[static_cast<std::size_t>(l)]; }
  const double* b(int l) const { return theta_.data() + b_off_[static_cast<std::size_t>(l)]; }

  struct workspace {
    std::vector<std::vector<double>> z;  // preactivations, one buffer per layer
    std::vector<std::vector<double>> a;  // activations for hidden layers
    std::vector<double> delta_a, delta_b;
  };

  // out[r] = net(X row r); X is row-major n x input_dim
  void forward(const double* X, std::size_t n, double* out, workspace& ws) const {
    prepare(ws, n);
    const double* cur = X;
    const int L = n_layers();
    for (int l = 0; l < L; ++l) {
      double* z = ws.z[static_cast<std::size_t>(l)].data();
      affine(cur, n, in_dim(l), w(l), b(l), out_dim(l), z);
      if (l + 1 == L) {
        for (std::size_t r = 0; r < n; ++r) out[r] = z[r];
      } else {
        double* a = ws.a[static_cast<std::size_t>(l)].data();
        activate(z, n * static_cast<std::size_t>(out_dim(l)), a);
        cur = a;
      }
    }
  }

  // Completes the net given the first hidden layer's preactivation (z1 is
  // n x out_dim(0)); callers that can assemble z1 from cached pieces skip
  // the full input matmul.  No workspace caching for backward here.
  void forward_tail(const double* z1, std::size_t n, double* out, workspace& ws) const {
    prepare(ws, n);
    const int L = n_layers();
    double* a = ws.a[0].data();
    activate(z1, n * static_cast<std::size_t>(out_dim(0)), a);
    const double* cur = a;
    for (int l = 1; l < L; ++l) {
      double* z = ws.z[static_cast<std::size_t>(l)].data();
      affine(cur, n, in_dim(l), w(l), b(l), out_dim(l), z);
      if (l + 1 == L) {
        for (std::size_t r = 0; r < n; ++r) out[r] = z[r];
      } else {
        double* al = ws.a[static_cast<std::size_t>(l)].data();
        activate(z, n * static_cast<std::size_t>(out_dim(l)), al);
        cur = al;
      }
    }
  }

  // Accumulates d(sum_r dout[r]*out[r])/dtheta into grad (size n_params).
  // Requires the workspace from the matching forward call.
  void backward(const double* X, std::size_t n, const double* dout, const workspace& ws,
                std::vector<double>& grad) const {
    const int L = n_layers();
    auto& dz = const_cast<workspace&>(ws).delta_a;
    auto& dz_prev = const_cast<workspace&>(ws).delta_b;
    dz.assign(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) dz[r] = dout[r];
    for (int l = L - 1; l >= 0; --l) {
      const int din = in_dim(l);
      const int dout_l = out_dim(l);
      const double* a_prev = l == 0 ? X : ws.a[static_cast<std::size_t>(l) - 1].data();
      double* gw = grad.data() + w_off_[static_cast<std::size_t>(l)];
      double* gb = grad.data() + b_off_[static_cast<std::size_t>(l)];
      for (std::size_t r = 0; r < n; ++r) {
        const double* ar = a_prev + r * static_cast<std::size_t>(din);
        const double* dzr = dz.data() + r * static_cast<std::size_t>(dout_l);
        for (int j = 0; j < dout_l; ++j) gb[j] += dzr[j];
        for (int i = 0; i < din; ++i) {
          const double ai = ar[i];
          double* gwi = gw + static_cast<std::size_t>(i) * static_cast<std::size_t>(dout_l);
          for (int j = 0; j < dout_l; ++j) gwi[j] += ai * dzr[j];
        }
      }
      if (l == 0) break;
      dz_prev.assign(n * static_cast<std::size_t>(din), 0.0);
      const double* wl = w(l);
      const double* z_prev = ws.z[static_cast<std::size_t>(l) - 1].data();
      for (std::size_t r = 0; r < n; ++r) {
        const double* dzr = dz.data() + r * static_cast<std::size_t>(dout_l);
        double* dpr = dz_prev.data() + r * static_cast<std::size_t>(din);
        const double* zr = z_prev + r * static_cast<std::size_t>(din);
        for (int i = 0; i < din; ++i) {
          const double* wi = wl + static_cast<std::size_t>(i) * static_cast<std::size_t>(dout_l);
          double s = 0.0;
          for (int j = 0; j < dout_l; ++j) s += dzr[j] * wi[j];
          dpr[i] = s * act_grad(zr[i]);
        }
      }
      std::swap(dz, dz_prev);
    }
  }

 private:
  void prepare(workspace& ws, std::size_t n) const {
    const auto L = static_cast<std::size_t>(n_layers());
    ws.z.resize(L);
    ws.a.resize(L > 0 ? L - 1 : 0);
    for (std::size_t l = 0; l < L; ++l) {
      ws.z[l].resize(n * static_cast<std::size_t>(out_dim(static_cast<int>(l))));
      if (l + 1 < L) ws.a[l].resize(ws.z[l].size());
    }
  }

  // Four rows share each weight-row load; the j loops vectorize.
  static void affine(const double* X, std::size_t n, int din, const double* W, const double* B,
                     int dout, double* Z) {
    const auto dinu = static_cast<std::size_t>(din);
    const auto doutu = static_cast<std::size_t>(dout);
    std::size_t r = 0;
    for (; r + 4 <= n; r += 4) {
      const double* x0 = X + r * dinu;
      const double* x1 = x0 + dinu;
      const double* x2 = x1 + dinu;
      const double* x3 = x2 + dinu;
      double* z0 = Z + r * doutu;
      double* z1 = z0 + doutu;
      double* z2 = z1 + doutu;
      double* z3 = z2 + doutu;
      for (int j = 0; j < dout; ++j) z0[j] = z1[j] = z2[j] = z3[j] = B[j];
      for (int i = 0; i < din; ++i) {
        const double a0 = x0[i], a1 = x1[i], a2 = x2[i], a3 = x3[i];
        const double* wi = W + static_cast<std::size_t>(i) * doutu;
        for (int j = 0; j < dout; ++j) {
          const double wj = wi[j];
          z0[j] += a0 * wj;
          z1[j] += a1 * wj;
          z2[j] += a2 * wj;
          z3[j] += a3 * wj;
        }
      }
    }
    for (; r < n; ++r) {
      const double* xr = X + r * dinu;
      double* zr = Z + r * doutu;
      for (int j = 0; j < dout; ++j) zr[j] = B[j];
      for (int i = 0; i < din; ++i) {
        const double xi = xr[i];
        const double* wi = W + static_cast<std::size_t>(i) * doutu;
        for (int j = 0; j < dout; ++j) zr[j] += xi * wi[j];
      }
    }
  }

  void activate(const double* z, std::size_t n, double* a) const {
    switch (act_) {
      case act_kind::softplus:
        for (std::size_t i = 0; i < n; ++i) a[i] = softplus(z[i]);
        break;
      case act_kind::relu:
        for (std::size_t i = 0; i < n; ++i) a[i] = z[i] > 0.0 ? z[i] : 0.0;
        break;
      case act_kind::tanh_act:
        for (std::size_t i = 0; i < n; ++i) a[i] = std::tanh(z[i]);
        break;
    }
  }

  double act_grad(double z) const {
    switch (act_) {
      case act_kind::softplus:
        return sigmoid(z);
      case act_kind::relu:
        return z > 0.0 ? 1.0 : 0.0;
      case act_kind::tanh_act: {
        const double t = std::tanh(z);
        return 1.0 - t * t;
      }
    }
    return 0.0;
  }

  int input_dim_ = 0;
  act_kind act_ = act_kind::softplus;
  std::vector<int> dims_;
  std::vector<std::size_t> w_off_, b_off_;
  std::vector<double> theta_;

  friend struct mlp_io;
};

struct adam_config {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const {
    if (!(learning_rate > 0.0)) throw usage_error("adam: learning_rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
      throw usage_error("adam: beta moments must be in [0, 1)");
    if (!(eps > 0.0)) throw usage_error("adam: eps must be positive");
  }
};

class adam {
 public:
  adam() = default;
  adam(adam_config cfg, std::size_t n_params) : cfg_(cfg), m_(n_params, 0.0), v_(n_params, 0.0) {
    cfg_.validate();
  }

  // lr overrides the configured step size when >= 0 (for decay schedules)
  void step(std::vector<double>& theta, const std::vector<double>& grad, double lr = -1.0) {
    if (theta.size() != m_.size() || grad.size() != m_.size())
      throw usage_error("adam: parameter/gradient size mismatch");
    const double a = lr >= 0.0 ? lr : cfg_.learning_rate;
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
      const double mhat = m_[i] / c1;
      const double vhat = v_[i] / c2;
      theta[i] -= a * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }

 private:
  adam_config cfg_;
  std::vector<double> m_, v_;
  long long t_ = 0;
};

}  // namespace mixlen
