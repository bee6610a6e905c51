#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <string>
#include <thread>
#include <vector>

#include "error.hpp"
#include "mlp.hpp"
#include "numeric.hpp"
#include "pretrain.hpp"
#include "rng.hpp"

namespace mixlen {

// ------------------------------------------------------------------
// noise schedule

struct diffusion_schedule {
  int T = 0;
  double beta_start = 0.0;
  double beta_end = 0.0;
  // index 0 is the t = 0 convention slot: alpha_bar[0] = 1, beta_tilde[1] = 0
  std::vector<double> beta, alpha, alpha_bar, beta_tilde;
  std::vector<double> sqrt_alpha, sqrt_alpha_bar, sqrt_one_minus_ab, sqrt_beta_tilde;

  void check_t(int t) const {
    if (t < 1 || t > T) throw usage_error("timestep out of range: t = " + std::to_string(t));
  }
};

inline diffusion_schedule make_schedule(int T = 1000, double beta1 = 1e-5,
                                        double betaT = 2e-3) {
  if (T < 2) throw usage_error("schedule needs T >= 2");
  if (!(beta1 > 0.0) || !(beta1 <= betaT) || !(betaT < 1.0))
    throw usage_error("schedule needs 0 < beta1 <= betaT < 1");
  diffusion_schedule s;
  s.T = T;
  s.beta_start = beta1;
  s.beta_end = betaT;
  const auto n = static_cast<std::size_t>(T) + 1;
  s.beta.assign(n, 0.0);
  s.alpha.assign(n, 1.0);
  s.alpha_bar.assign(n, 1.0);
  s.beta_tilde.assign(n, 0.0);
  s.sqrt_alpha.assign(n, 1.0);
  s.sqrt_alpha_bar.assign(n, 1.0);
  s.sqrt_one_minus_ab.assign(n, 0.0);
  s.sqrt_beta_tilde.assign(n, 0.0);
  for (int t = 1; t <= T; ++t) {
    const auto i = static_cast<std::size_t>(t);
    s.beta[i] = beta1 + (t - 1) * (betaT - beta1) / (T - 1);
    s.alpha[i] = 1.0 - s.beta[i];
    s.alpha_bar[i] = s.alpha_bar[i - 1] * s.alpha[i];
    s.beta_tilde[i] = (1.0 - s.alpha_bar[i - 1]) / (1.0 - s.alpha_bar[i]) * s.beta[i];
    s.sqrt_alpha[i] = std::sqrt(s.alpha[i]);
    s.sqrt_alpha_bar[i] = std::sqrt(s.alpha_bar[i]);
    s.sqrt_one_minus_ab[i] = std::sqrt(1.0 - s.alpha_bar[i]);
    s.sqrt_beta_tilde[i] = std::sqrt(s.beta_tilde[i]);
    if (s.alpha_bar[i] >= s.alpha_bar[i - 1])
      throw usage_error("schedule invariant violated: alpha_bar must decrease");
  }
  return s;
}

// y_t = sqrt(abar_t) y0 + (1 - sqrt(abar_t)) fx + sqrt(1 - abar_t) eps
inline double forward_sample(double y0, double fx, int t, const diffusion_schedule& s,
                             double eps) {
  s.check_t(t);
  const auto i = static_cast<std::size_t>(t);
  return s.sqrt_alpha_bar[i] * y0 + (1.0 - s.sqrt_alpha_bar[i]) * fx +
         s.sqrt_one_minus_ab[i] * eps;
}

// algebraic inversion of forward_sample given the (predicted) noise
inline double predict_y0_value(double y_t, double fx, double eps_hat, int t,
                               const diffusion_schedule& s) {
  s.check_t(t);
  const auto i = static_cast<std::size_t>(t);
  return (y_t - (1.0 - s.sqrt_alpha_bar[i]) * fx - s.sqrt_one_minus_ab[i] * eps_hat) /
         s.sqrt_alpha_bar[i];
}

// conditional reverse-step mean; the three coefficients sum to 1
inline double posterior_mean(double y0_hat, double y_t, double fx, int t,
                             const diffusion_schedule& s) {
  s.check_t(t);
  const auto i = static_cast<std::size_t>(t);
  const double om = 1.0 - s.alpha_bar[i];
  const double c0 = s.beta[i] * s.sqrt_alpha_bar[i - 1] / om;
  const double ct = (1.0 - s.alpha_bar[i - 1]) * s.sqrt_alpha[i] / om;
  const double cf =
      1.0 + (s.sqrt_alpha_bar[i] - 1.0) * (s.sqrt_alpha[i] + s.sqrt_alpha_bar[i - 1]) / om;
  return c0 * y0_hat + ct * y_t + cf * fx;
}

// ------------------------------------------------------------------
// training problem on the standardized scale

namespace detail {

// network input row: [x (d), y_t, fx, time embedding]
inline void fill_input_row(double* row, const double* xs, int d, double y_t, double fx,
                           int t, int T, int emb_dim) {
  for (int i = 0; i < d; ++i) row[i] = xs[i];
  row[d] = y_t;
  row[d + 1] = fx;
  sinusoidal_embedding(static_cast<double>(t) / static_cast<double>(T), emb_dim,
                       row + d + 2);
}

}  // namespace detail

// Mean squared noise-prediction error on a batch with caller-fixed draws.
// xs is row-major n x d; ys and fxs are the standardized targets and
// conditioner outputs; ts/eps hold one (timestep, noise) pair per row.
inline double diffusion_loss_fixed(const double* xs, std::size_t n, int d, const double* ys,
                                   const double* fxs, const std::vector<int>& ts,
                                   const std::vector<double>& eps, const mlp& net,
                                   const diffusion_schedule& s, int emb_dim,
                                   mlp::workspace& ws, std::vector<double>* grad = nullptr) {
  if (n == 0) throw usage_error("loss needs a non-empty batch");
  const int width = d + 2 + emb_dim;
  std::vector<double> inputs(n * static_cast<std::size_t>(width));
  for (std::size_t r = 0; r < n; ++r) {
    const double y_t = forward_sample(ys[r], fxs[r], ts[r], s, eps[r]);
    detail::fill_input_row(inputs.data() + r * static_cast<std::size_t>(width),
                           xs + r * static_cast<std::size_t>(d), d, y_t, fxs[r], ts[r], s.T,
                           emb_dim);
  }
  std::vector<double> out(n);
  net.forward(inputs.data(), n, out.data(), ws);
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double diff = out[r] - eps[r];
    loss += diff * diff;
  }
  loss /= static_cast<double>(n);
  if (grad) {
    std::vector<double> dout(n);
    for (std::size_t r = 0; r < n; ++r)
      dout[r] = 2.0 * (out[r] - eps[r]) / static_cast<double>(n);
    net.backward(inputs.data(), n, dout.data(), ws, *grad);
  }
  return loss;
}

// Draws one fresh (t, eps) pair per row — t first, then eps — and returns the
// noise-prediction MSE for the batch.
inline double diffusion_loss(const double* xs, std::size_t n, int d, const double* ys,
                             const double* fxs, const mlp& net, const diffusion_schedule& s,
                             int emb_dim, rng& r) {
  std::vector<int> ts(n);
  std::vector<double> eps(n);
  for (std::size_t i = 0; i < n; ++i) {
    ts[i] = static_cast<int>(r.uniform_int(1, s.T));
    eps[i] = r.normal();
  }
  mlp::workspace ws;
  return diffusion_loss_fixed(xs, n, d, ys, fxs, ts, eps, net, s, emb_dim, ws);
}

// ------------------------------------------------------------------
// trained model

struct diffusion_config {
  mlp_config net;
  adam_config opt;
  int epochs = 800;
  int batch_size = 256;
  bool cosine_decay = true;  // step size anneals to zero over the run
  int T = 1000;
  double beta_start = 1e-5;
  double beta_end = 2e-3;

  void validate() const {
    net.validate();
    opt.validate();
    if (epochs < 0) throw usage_error("epochs must be >= 0");
    if (batch_size < 1) throw usage_error("batch_size must be >= 1");
  }
};

struct trained_diffusion {
  diffusion_schedule sched;
  mlp net;
  gbdt_ensemble conditioner;
  std::vector<standardizer> x_std;
  standardizer y_std;  // also rescales the conditioner output
  int emb_dim = 32;
  std::string activation = "softplus";

  void require_trained() const {
    if (net.n_params() == 0 || conditioner.members.empty())
      throw usage_error("model is not trained");
  }

  int x_dim() const { return static_cast<int>(x_std.size()); }

  std::vector<double> standardize_x(const std::vector<double>& x) const {
    if (x.size() != x_std.size())
      throw usage_error("feature vector has wrong dimension");
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x_std[i].apply(x[i]);
    return out;
  }

  // conditioner output mapped onto the standardized residual scale
  double fx_standardized(const std::vector<double>& x) const {
    return y_std.apply(conditioner.predict(x));
  }

  // predicted noise for a raw feature vector and a standardized y_t
  double eps_hat(const std::vector<double>& x, double y_t, int t) const {
    require_trained();
    sched.check_t(t);
    const auto xs = standardize_x(x);
    const int d = x_dim();
    std::vector<double> row(static_cast<std::size_t>(d) + 2 +
                            static_cast<std::size_t>(emb_dim));
    detail::fill_input_row(row.data(), xs.data(), d, y_t, fx_standardized(x), t, sched.T,
                           emb_dim);
    double out = 0.0;
    mlp::workspace ws;
    net.forward(row.data(), 1, &out, ws);
    return out;
  }

  // denoised estimate of y0 (standardized scale) from y_t via the net
  double predict_y0(const std::vector<double>& x, double y_t, int t) const {
    return predict_y0_value(y_t, fx_standardized(x), eps_hat(x, y_t, t), t, sched);
  }
};

inline trained_diffusion train_diffusion(const std::vector<std::vector<double>>& X,
                                         const std::vector<double>& y,
                                         gbdt_ensemble conditioner, diffusion_config cfg,
                                         std::uint64_t seed,
                                         std::vector<double>* epoch_losses = nullptr) {
  cfg.validate();
  if (X.empty() || X.size() != y.size())
    throw usage_error("train: empty or misaligned training data");
  const std::size_t n = X.size();
  const int d = static_cast<int>(X[0].size());
  if (d < 1) throw usage_error("train: need at least one feature");

  trained_diffusion model;
  model.sched = make_schedule(cfg.T, cfg.beta_start, cfg.beta_end);
  model.conditioner = std::move(conditioner);
  model.emb_dim = cfg.net.time_embedding;
  model.activation = cfg.net.activation;

  // standardization constants come from the training split only
  model.x_std.resize(static_cast<std::size_t>(d));
  std::vector<double> col(n);
  for (int j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < n; ++i) col[i] = X[i][static_cast<std::size_t>(j)];
    model.x_std[static_cast<std::size_t>(j)].fit(col);
  }
  model.y_std.fit(y);

  std::vector<double> xs(n * static_cast<std::size_t>(d));
  std::vector<double> ys(n), fxs(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j)
      xs[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)] =
          model.x_std[static_cast<std::size_t>(j)].apply(X[i][static_cast<std::size_t>(j)]);
    ys[i] = model.y_std.apply(y[i]);
    fxs[i] = model.y_std.apply(model.conditioner.predict(X[i]));
  }

  rng init_rng(derive_seed(seed, 0xd1f1));
  const int width = d + 2 + cfg.net.time_embedding;
  model.net = mlp(width, cfg.net.hidden_layers, parse_activation(cfg.net.activation),
                  init_rng);
  if (cfg.epochs == 0) return model;

  rng train_rng(derive_seed(seed, 0xd1f2));
  adam opt(cfg.opt, model.net.n_params());
  mlp::workspace ws;
  std::vector<double> grad(model.net.n_params());
  std::vector<double> bx, by, bf;
  std::vector<int> ts;
  std::vector<double> eps;
  const auto bs = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.cosine_decay
                          ? 0.5 * cfg.opt.learning_rate *
                                (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) /
                                                static_cast<double>(cfg.epochs)))
                          : cfg.opt.learning_rate;
    const auto perm = train_rng.permutation(n);
    double epoch_sse = 0.0;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t b = std::min(bs, n - start);
      bx.assign(b * static_cast<std::size_t>(d), 0.0);
      by.assign(b, 0.0);
      bf.assign(b, 0.0);
      ts.assign(b, 1);
      eps.assign(b, 0.0);
      for (std::size_t k = 0; k < b; ++k) {
        const auto src = perm[start + k];
        for (int j = 0; j < d; ++j)
          bx[k * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)] =
              xs[src * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)];
        by[k] = ys[src];
        bf[k] = fxs[src];
        ts[k] = static_cast<int>(train_rng.uniform_int(1, model.sched.T));
        eps[k] = train_rng.normal();
      }
      std::fill(grad.begin(), grad.end(), 0.0);
      const double batch_loss = diffusion_loss_fixed(bx.data(), b, d, by.data(), bf.data(),
                                                     ts, eps, model.net, model.sched,
                                                     cfg.net.time_embedding, ws, &grad);
      if (!std::isfinite(batch_loss))
        throw train_error("training diverged at epoch " + std::to_string(epoch + 1));
      epoch_sse += batch_loss * static_cast<double>(b);
      opt.step(model.net.params(), grad, lr);
    }
    if (epoch_losses) epoch_losses->push_back(epoch_sse / static_cast<double>(n));
  }
  return model;
}

// ------------------------------------------------------------------
// generation: reverse chains, batched across (row, chain) pairs

namespace detail {

constexpr std::size_t kGenBlock = 2048;

}  // namespace detail

// Returns, for every row of X, N de-standardized pseudo residual samples.
// Chain (r, c) uses its own random stream derived from (seed, r, c), so
// results do not depend on batching or thread count and are bit-reproducible.
inline std::vector<std::vector<double>> generate_many(
    const std::vector<std::vector<double>>& X, const trained_diffusion& model, int N,
    std::uint64_t seed, int n_threads = 1) {
  model.require_trained();
  if (N < 1) throw usage_error("generate: need N >= 1");
  if (X.empty()) return {};
  const auto& s = model.sched;
  const int d = model.x_dim();
  const int emb = model.emb_dim;
  const int h1 = model.net.out_dim(0);
  const auto h1u = static_cast<std::size_t>(h1);
  const std::size_t n_rows = X.size();

  // per-row standardized features and conditioner outputs
  std::vector<double> fxs(n_rows);
  // first-layer preactivation contribution that is constant per row:
  // bias + x columns + fx column
  std::vector<double> row_const(n_rows * h1u);
  const double* W0 = model.net.w(0);
  const double* B0 = model.net.b(0);
  const double* Wy = W0 + static_cast<std::size_t>(d) * h1u;
  const double* Wfx = W0 + static_cast<std::size_t>(d + 1) * h1u;
  for (std::size_t r = 0; r < n_rows; ++r) {
    const auto xsr = model.standardize_x(X[r]);
    fxs[r] = model.y_std.apply(model.conditioner.predict(X[r]));
    double* rc = row_const.data() + r * h1u;
    for (int j = 0; j < h1; ++j) rc[j] = B0[j];
    for (int i = 0; i < d; ++i) {
      const double xi = xsr[static_cast<std::size_t>(i)];
      const double* wi = W0 + static_cast<std::size_t>(i) * h1u;
      for (int j = 0; j < h1; ++j) rc[j] += xi * wi[j];
    }
    for (int j = 0; j < h1; ++j) rc[j] += fxs[r] * Wfx[j];
  }

  // first-layer contribution of the time embedding, one vector per t
  std::vector<double> emb_bias(static_cast<std::size_t>(s.T + 1) * h1u, 0.0);
  {
    std::vector<double> e(static_cast<std::size_t>(emb));
    const double* Wemb = W0 + static_cast<std::size_t>(d + 2) * h1u;
    for (int t = 1; t <= s.T; ++t) {
      sinusoidal_embedding(static_cast<double>(t) / static_cast<double>(s.T), emb, e.data());
      double* eb = emb_bias.data() + static_cast<std::size_t>(t) * h1u;
      for (int k = 0; k < emb; ++k) {
        const double ek = e[static_cast<std::size_t>(k)];
        const double* wk = Wemb + static_cast<std::size_t>(k) * h1u;
        for (int j = 0; j < h1; ++j) eb[j] += ek * wk[j];
      }
    }
  }

  std::vector<std::vector<double>> out(n_rows,
                                       std::vector<double>(static_cast<std::size_t>(N)));

  const std::size_t total = n_rows * static_cast<std::size_t>(N);
  const std::size_t n_blocks = (total + detail::kGenBlock - 1) / detail::kGenBlock;

  // every (row, chain) pair belongs to exactly one block and writes its own
  // output slot, so any partition of the blocks gives identical results
  auto run_blocks = [&](std::size_t block_lo, std::size_t block_hi) {
    std::vector<rng> streams;
    std::vector<double> yv, z1, eps_hat;
    std::vector<std::size_t> row_of;
    mlp::workspace ws;
    for (std::size_t blk = block_lo; blk < block_hi; ++blk) {
      const std::size_t start = blk * detail::kGenBlock;
      const std::size_t b = std::min(detail::kGenBlock, total - start);
      streams.clear();
      streams.reserve(b);
      yv.assign(b, 0.0);
      row_of.assign(b, 0);
      for (std::size_t k = 0; k < b; ++k) {
        const std::size_t m = start + k;
        const std::size_t r = m / static_cast<std::size_t>(N);
        const std::size_t c = m % static_cast<std::size_t>(N);
        row_of[k] = r;
        streams.emplace_back(derive_seed(seed, r, c));
        yv[k] = fxs[r] + streams.back().normal();  // prior draw, Normal(fx, 1)
      }
      z1.assign(b * h1u, 0.0);
      eps_hat.assign(b, 0.0);
      for (int t = s.T; t >= 1; --t) {
        const auto ti = static_cast<std::size_t>(t);
        const double* eb = emb_bias.data() + ti * h1u;
        for (std::size_t k = 0; k < b; ++k) {
          const double* rc = row_const.data() + row_of[k] * h1u;
          const double yk = yv[k];
          double* zk = z1.data() + k * h1u;
          for (int j = 0; j < h1; ++j) zk[j] = rc[j] + yk * Wy[j] + eb[j];
        }
        model.net.forward_tail(z1.data(), b, eps_hat.data(), ws);
        const double inv_sab = 1.0 / s.sqrt_alpha_bar[ti];
        const double om_sab = 1.0 - s.sqrt_alpha_bar[ti];
        const double s1mab = s.sqrt_one_minus_ab[ti];
        const double om = 1.0 - s.alpha_bar[ti];
        const double c0 = s.beta[ti] * s.sqrt_alpha_bar[ti - 1] / om;
        const double ct = (1.0 - s.alpha_bar[ti - 1]) * s.sqrt_alpha[ti] / om;
        const double cf = 1.0 + (s.sqrt_alpha_bar[ti] - 1.0) *
                                    (s.sqrt_alpha[ti] + s.sqrt_alpha_bar[ti - 1]) / om;
        const double sbt = s.sqrt_beta_tilde[ti];
        for (std::size_t k = 0; k < b; ++k) {
          const double fk = fxs[row_of[k]];
          const double y0_hat = inv_sab * (yv[k] - om_sab * fk - s1mab * eps_hat[k]);
          const double mu = c0 * y0_hat + ct * yv[k] + cf * fk;
          yv[k] = t > 1 ? mu + sbt * streams[k].normal() : mu;  // last step is noiseless
        }
      }
      for (std::size_t k = 0; k < b; ++k) {
        const std::size_t m = start + k;
        out[row_of[k]][m % static_cast<std::size_t>(N)] = model.y_std.invert(yv[k]);
      }
    }
  };

  if (n_threads <= 1 || n_blocks <= 1) {
    run_blocks(0, n_blocks);
  } else {
    const auto nt = std::min<std::size_t>(static_cast<std::size_t>(n_threads), n_blocks);
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(nt);
    for (std::size_t i = 0; i < nt; ++i) {
      const std::size_t lo = n_blocks * i / nt;
      const std::size_t hi = n_blocks * (i + 1) / nt;
      pool.emplace_back([&, lo, hi, i]() {
        try {
          run_blocks(lo, hi);
        } catch (...) {
          errs[i] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errs)
      if (e) std::rethrow_exception(e);
  }
  return out;
}

inline std::vector<double> generate(const std::vector<double>& x,
                                    const trained_diffusion& model, int N,
                                    std::uint64_t seed) {
  return generate_many({x}, model, N, seed)[0];
}

// ------------------------------------------------------------------
// persistence: versioned text, reload reproduces generation bit-exactly

inline void write_diffusion(std::ostream& out, const trained_diffusion& m) {
  m.require_trained();
  out << "mixlen-diffusion v1\n";
  out << "schedule " << m.sched.T << ' ' << format_double(m.sched.beta_start) << ' '
      << format_double(m.sched.beta_end) << '\n';
  out << "activation " << m.activation << '\n';
  out << "emb_dim " << m.emb_dim << '\n';
  out << "x_dim " << m.x_std.size() << '\n';
  for (const auto& st : m.x_std)
    out << "x_norm " << format_double(st.mu) << ' ' << format_double(st.sd) << '\n';
  out << "y_norm " << format_double(m.y_std.mu) << ' ' << format_double(m.y_std.sd) << '\n';
  const auto& dims = m.net.dims();
  out << "dims " << dims.size();
  for (int v : dims) out << ' ' << v;
  out << '\n';
  const auto& theta = m.net.params();
  out << "params " << theta.size() << '\n';
  for (std::size_t i = 0; i < theta.size(); ++i)
    out << format_double(theta[i]) << ((i + 1) % 8 == 0 || i + 1 == theta.size() ? '\n' : ' ');
  out << "conditioner\n";
  write_gbdt(out, m.conditioner);
}

inline trained_diffusion read_diffusion(std::istream& in) {
  trained_diffusion m;
  detail::expect_literal(in, "mixlen-diffusion");
  detail::expect_literal(in, "v1");
  detail::expect_literal(in, "schedule");
  const auto T = parse_int(detail::expect_token(in, "T"), "T");
  const auto b1 = parse_double(detail::expect_token(in, "beta_start"), "beta_start");
  const auto bT = parse_double(detail::expect_token(in, "beta_end"), "beta_end");
  m.sched = make_schedule(static_cast<int>(T), b1, bT);
  detail::expect_literal(in, "activation");
  m.activation = detail::expect_token(in, "activation name");
  detail::expect_literal(in, "emb_dim");
  m.emb_dim = static_cast<int>(parse_int(detail::expect_token(in, "emb_dim"), "emb_dim"));
  detail::expect_literal(in, "x_dim");
  const auto xd = parse_int(detail::expect_token(in, "x_dim"), "x_dim");
  if (xd < 1) throw data_error("model file: bad x_dim");
  m.x_std.resize(static_cast<std::size_t>(xd));
  for (auto& st : m.x_std) {
    detail::expect_literal(in, "x_norm");
    st.mu = parse_double(detail::expect_token(in, "x mu"), "x mu");
    st.sd = parse_double(detail::expect_token(in, "x sd"), "x sd");
  }
  detail::expect_literal(in, "y_norm");
  m.y_std.mu = parse_double(detail::expect_token(in, "y mu"), "y mu");
  m.y_std.sd = parse_double(detail::expect_token(in, "y sd"), "y sd");
  detail::expect_literal(in, "dims");
  const auto nd = parse_int(detail::expect_token(in, "dims count"), "dims");
  if (nd < 3) throw data_error("model file: bad layer count");
  std::vector<int> dims(static_cast<std::size_t>(nd));
  for (auto& v : dims)
    v = static_cast<int>(parse_int(detail::expect_token(in, "dim"), "dim"));
  if (dims.back() != 1) throw data_error("model file: output dimension must be 1");
  std::vector<int> hidden(dims.begin() + 1, dims.end() - 1);
  rng dummy(0);
  m.net = mlp(dims[0], hidden, parse_activation(m.activation), dummy);
  detail::expect_literal(in, "params");
  const auto np = parse_int(detail::expect_token(in, "param count"), "params");
  if (static_cast<std::size_t>(np) != m.net.n_params())
    throw data_error("model file: parameter count does not match layer shapes");
  for (std::size_t i = 0; i < m.net.n_params(); ++i)
    m.net.params()[i] = parse_double(detail::expect_token(in, "weight"), "weight");
  detail::expect_literal(in, "conditioner");
  m.conditioner = read_gbdt(in);
  return m;
}

inline void save_diffusion(const std::string& path, const trained_diffusion& m) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path);
  write_diffusion(out, m);
  if (!out) throw io_error("write failed for " + path);
}

inline trained_diffusion load_diffusion(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path);
  return read_diffusion(in);
}

}  // namespace mixlen
