// mixlen: mixed-oil length estimation toolkit.
//
// Subcommands wire the study pipeline end to end: ap-calc (mechanistic
// formula), gen (synthetic data), train (conditioner + diffusion), evaluate
// (pseudo-samples -> intervals -> metrics), compare (interval baselines).

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mixlen/baselines.hpp"
#include "mixlen/dataio.hpp"
#include "mixlen/diffusion.hpp"
#include "mixlen/error.hpp"
#include "mixlen/intervals.hpp"
#include "mixlen/mechanistic.hpp"
#include "mixlen/mlp.hpp"
#include "mixlen/numeric.hpp"
#include "mixlen/pretrain.hpp"
#include "mixlen/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Resolves an output file under out_dir.  Refuses to clobber existing files
// unless --force, and never touches a path that is also an input.
std::string output_file(const std::string& out_dir, const std::string& name, bool force,
                        const std::vector<std::string>& inputs = {}) {
  fs::create_directories(out_dir);
  const fs::path p = fs::path(out_dir) / name;
  for (const auto& in : inputs) {
    std::error_code ec;
    if (!in.empty() && fs::exists(p, ec) && fs::equivalent(p, fs::path(in), ec))
      throw mixlen::usage_error("refusing to overwrite input file " + p.string());
  }
  if (!force && fs::exists(p))
    throw mixlen::usage_error("output file exists: " + p.string() + " (use --force)");
  return p.string();
}

std::vector<int> parse_hidden(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ','))
    out.push_back(static_cast<int>(mixlen::parse_int(tok, "hidden layer size")));
  if (out.empty()) throw mixlen::usage_error("--hidden needs at least one layer size");
  return out;
}

void check_alphas(const std::vector<double>& alphas) {
  if (alphas.empty()) throw mixlen::usage_error("need at least one --alpha level");
  for (double a : alphas)
    if (!(a > 0.0 && a < 1.0))
      throw mixlen::usage_error("alpha must be in (0, 1), got " + mixlen::format_double(a));
}

json report_to_json(const mixlen::evaluation_report& r) {
  json j;
  j["coverage"] = r.coverage;
  j["average_radius"] = r.average_radius;
  j["average_length"] = r.average_length;
  j["underestimation_prob_point"] = r.underestimation_prob_point;
  j["underestimation_prob_upper"] = r.underestimation_prob_upper;
  j["rmse"] = r.rmse;
  j["r2"] = r.r2;
  j["mae"] = r.mae;
  j["n"] = r.n;
  return j;
}

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw mixlen::io_error("cannot write " + path);
  out << body;
  if (!out) throw mixlen::io_error("write failed for " + path);
}

// ------------------------------------------------------------------
// shared option bundles

struct train_options {
  std::string train_path;
  bool toy = false;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  bool force = false;
  double filter_threshold = 0.20;
  double split_fraction = 0.7;
  // conditioner (-1 = pick per mode)
  int gbdt_trees = -1;
  int gbdt_depth = -1;
  double gbdt_lr = -1.0;
  int gbdt_min_leaf = -1;
  double gbdt_subsample = 0.9;
  int gbdt_members = 5;
  // network / optimizer / schedule
  std::string hidden = "128,128,128";
  std::string activation = "softplus";
  int emb_dim = 32;
  double lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int T = 1000;
  double beta_start = 1e-5;
  double beta_end = 2e-3;
  int epochs = 800;
  int batch_size = 256;
  bool no_cosine_decay = false;

  mixlen::gbdt_params conditioner_params() const {
    mixlen::gbdt_params p;
    p.n_trees = gbdt_trees > 0 ? gbdt_trees : (toy ? 2000 : 200);
    p.max_depth = gbdt_depth > 0 ? gbdt_depth : (toy ? 1 : 3);
    p.learning_rate = gbdt_lr > 0.0 ? gbdt_lr : (toy ? 0.02 : 0.1);
    p.min_samples_leaf = gbdt_min_leaf > 0 ? gbdt_min_leaf : (toy ? 20 : 5);
    p.subsample = gbdt_subsample;
    return p;
  }

  mixlen::diffusion_config diffusion_params() const {
    mixlen::diffusion_config c;
    c.net.hidden_layers = parse_hidden(hidden);
    c.net.activation = activation;
    c.net.time_embedding = emb_dim;
    c.opt.learning_rate = lr;
    c.opt.beta1 = adam_beta1;
    c.opt.beta2 = adam_beta2;
    c.opt.eps = adam_eps;
    c.T = T;
    c.beta_start = beta_start;
    c.beta_end = beta_end;
    c.epochs = epochs;
    c.batch_size = batch_size;
    c.cosine_decay = !no_cosine_decay;
    return c;
  }
};

void add_model_options(CLI::App* cmd, train_options& o) {
  cmd->add_option("--gbdt-trees", o.gbdt_trees, "conditioner trees per member");
  cmd->add_option("--gbdt-depth", o.gbdt_depth, "conditioner tree depth");
  cmd->add_option("--gbdt-lr", o.gbdt_lr, "conditioner learning rate");
  cmd->add_option("--gbdt-min-leaf", o.gbdt_min_leaf, "conditioner min samples per leaf");
  cmd->add_option("--gbdt-subsample", o.gbdt_subsample, "conditioner row subsample rate");
  cmd->add_option("--gbdt-members", o.gbdt_members, "conditioner ensemble size");
  cmd->add_option("--hidden", o.hidden, "hidden layer sizes, comma separated");
  cmd->add_option("--activation", o.activation, "network nonlinearity");
  cmd->add_option("--emb-dim", o.emb_dim, "time embedding dimension");
  cmd->add_option("--lr", o.lr, "optimizer step size");
  cmd->add_option("--adam-beta1", o.adam_beta1, "optimizer first-moment decay");
  cmd->add_option("--adam-beta2", o.adam_beta2, "optimizer second-moment decay");
  cmd->add_option("--adam-eps", o.adam_eps, "optimizer stabilizer");
  cmd->add_option("--T", o.T, "diffusion steps");
  cmd->add_option("--beta-start", o.beta_start, "noise schedule start");
  cmd->add_option("--beta-end", o.beta_end, "noise schedule end");
  cmd->add_option("--epochs", o.epochs, "training epochs");
  cmd->add_option("--batch-size", o.batch_size, "minibatch size");
  cmd->add_flag("--no-cosine-decay", o.no_cosine_decay, "keep the step size constant");
}

// ------------------------------------------------------------------
// subcommand bodies

void run_train(const train_options& o) {
  if (o.gbdt_members < 1) throw mixlen::usage_error("--gbdt-members must be >= 1");
  std::vector<std::vector<double>> X;
  std::vector<double> y;
  std::size_t n_raw = 0, n_outliers = 0, n_holdout = 0;

  if (o.toy) {
    const auto td = mixlen::load_toy_csv(o.train_path);
    n_raw = td.size();
    X.reserve(td.size());
    for (double xv : td.x) X.push_back({xv});
    y = td.y;
  } else {
    const auto ds = mixlen::load_csv(o.train_path);
    n_raw = ds.size();
    auto [kept, removed] = mixlen::filter_outliers(ds, o.filter_threshold);
    n_outliers = removed.size();
    if (kept.size() < 2)
      throw mixlen::data_error("too few records survive the outlier filter");
    auto [train, holdout] =
        mixlen::split(kept, o.split_fraction, mixlen::derive_seed(o.seed, 0x5911));
    n_holdout = holdout.size();
    const auto holdout_path =
        output_file(o.out_dir, "holdout.csv", o.force, {o.train_path});
    mixlen::write_csv(holdout_path, holdout);
    X = train.feature_matrix();
    y = train.targets;
  }

  const auto cond_path = output_file(o.out_dir, "conditioner.model", o.force, {o.train_path});
  const auto diff_path = output_file(o.out_dir, "diffusion.model", o.force, {o.train_path});
  const auto loss_path = output_file(o.out_dir, "losses.json", o.force, {o.train_path});

  auto conditioner =
      mixlen::fit_gbdt(X, y, o.conditioner_params(),
                       static_cast<std::size_t>(o.gbdt_members),
                       mixlen::derive_seed(o.seed, 0xc0de));
  mixlen::save_gbdt(cond_path, conditioner);

  std::vector<double> losses;
  const auto model = mixlen::train_diffusion(X, y, std::move(conditioner),
                                             o.diffusion_params(),
                                             mixlen::derive_seed(o.seed, 0xd1ff), &losses);
  mixlen::save_diffusion(diff_path, model);

  json log;
  log["epochs"] = losses.size();
  log["losses"] = losses;
  write_file(loss_path, log.dump(2) + "\n");

  std::cout << "loaded " << n_raw << " rows from " << o.train_path << '\n';
  if (!o.toy)
    std::cout << "removed " << n_outliers << " outlier(s); trained on " << X.size()
              << " rows, held out " << n_holdout << '\n';
  if (!losses.empty())
    std::cout << "final epoch loss " << mixlen::format_double(losses.back()) << '\n';
  std::cout << "wrote " << cond_path << ", " << diff_path << ", " << loss_path << '\n';
}

void run_evaluate(const std::string& model_path, const std::string& test_path, bool toy,
                  int n_pseudo, const std::vector<double>& alphas, std::uint64_t seed,
                  int threads, const std::string& out_dir, bool force) {
  check_alphas(alphas);
  if (n_pseudo < 1) throw mixlen::usage_error("--n-pseudo must be >= 1");
  if (threads < 1) throw mixlen::usage_error("--threads must be >= 1");

  const auto model = mixlen::load_diffusion(model_path);
  std::vector<std::vector<double>> X;
  std::vector<double> truths, offsets;
  if (toy) {
    const auto td = mixlen::load_toy_csv(test_path);
    for (double xv : td.x) X.push_back({xv});
    truths = td.y;
    offsets.assign(td.size(), 0.0);
  } else {
    const auto ds = mixlen::load_csv(test_path);
    X = ds.feature_matrix();
    truths.resize(ds.size());
    offsets.resize(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
      truths[i] = ds.records[i].c_ac;
      offsets[i] = ds.features[i].c_ap;  // pseudo-samples are residuals
    }
  }
  if (X.empty()) throw mixlen::data_error("test set is empty");

  auto samples = mixlen::generate_many(X, model, n_pseudo, seed, threads);
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (auto& v : samples[i]) v += offsets[i];

  json report;
  report["n_test"] = X.size();
  report["n_pseudo"] = n_pseudo;
  report["seed"] = seed;
  json alphas_json = json::array();
  json reports;
  for (double alpha : alphas) {
    std::vector<mixlen::interval_estimate> iv;
    iv.reserve(samples.size());
    for (const auto& s : samples) iv.push_back(mixlen::make_interval(s, alpha));
    const auto rep = mixlen::build_report(iv, truths);
    const auto key = mixlen::format_double(alpha);
    alphas_json.push_back(alpha);
    reports[key] = report_to_json(rep);
    const auto csv_path =
        output_file(out_dir, "intervals_" + key + ".csv", force, {test_path, model_path});
    mixlen::write_intervals_csv(csv_path, iv, truths);
    std::cout << "alpha=" << key << " coverage=" << mixlen::format_double(rep.coverage)
              << " avg_radius=" << mixlen::format_double(rep.average_radius)
              << " under_upper=" << mixlen::format_double(rep.underestimation_prob_upper)
              << " rmse=" << mixlen::format_double(rep.rmse)
              << " r2=" << mixlen::format_double(rep.r2) << '\n';
  }
  report["alphas"] = alphas_json;
  report["reports"] = reports;
  const auto report_path =
      output_file(out_dir, "report.json", force, {test_path, model_path});
  write_file(report_path, report.dump(2) + "\n");
  std::cout << "wrote " << report_path << '\n';
}

void run_compare(const std::string& data_path, const std::vector<double>& alphas,
                 std::uint64_t seed, const train_options& model_opts, int n_pseudo,
                 int qf_trees, int qf_min_leaf, int qr_steps, const std::string& out_dir,
                 bool force) {
  check_alphas(alphas);
  const auto ds = mixlen::load_csv(data_path);
  auto [train, rest] = mixlen::split(ds, 0.6, mixlen::derive_seed(seed, 0x60));
  auto [calib, test] = mixlen::split(rest, 0.5, mixlen::derive_seed(seed, 0x61));

  mixlen::compare_config cfg;
  cfg.conditioner = model_opts.conditioner_params();
  cfg.diffusion = model_opts.diffusion_params();
  cfg.n_pseudo = n_pseudo;
  cfg.qr_steps = qr_steps;
  cfg.forest.n_trees = qf_trees;
  cfg.forest.min_samples_leaf = qf_min_leaf;
  cfg.seed = mixlen::derive_seed(seed, 0xc3);

  std::vector<double> truths(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) truths[i] = test.records[i].c_ac;

  std::vector<mixlen::compare_row> all_rows;
  for (double alpha : alphas) {
    std::map<std::string, std::vector<mixlen::interval_estimate>> per_method;
    auto rows = mixlen::compare_methods(train, calib, test, alpha, cfg, &per_method,
                                        &std::cerr);
    for (const auto& [method, iv] : per_method) {
      const auto csv_path =
          output_file(out_dir, "intervals_" + method + "_" + mixlen::format_double(alpha) +
                                   ".csv",
                      force, {data_path});
      mixlen::write_intervals_csv(csv_path, iv, truths);
    }
    for (auto& r : rows) all_rows.push_back(std::move(r));
  }

  const auto table_path = output_file(out_dir, "comparison.csv", force, {data_path});
  std::ofstream table(table_path);
  if (!table) throw mixlen::io_error("cannot write " + table_path);
  mixlen::write_compare_csv(table, all_rows);

  std::cout << "method,alpha,coverage,avg_length,avg_radius,underestimation_prob_upper\n";
  for (const auto& r : all_rows) {
    if (r.failed) {
      std::cout << r.method << ',' << mixlen::format_double(r.alpha) << ",failed: " << r.error
                << '\n';
      continue;
    }
    std::cout << r.method << ',' << mixlen::format_double(r.alpha) << ','
              << mixlen::format_double(r.coverage) << ','
              << mixlen::format_double(r.avg_length) << ','
              << mixlen::format_double(r.avg_radius) << ','
              << mixlen::format_double(r.underestimation_prob_upper) << '\n';
  }
  std::cout << "wrote " << table_path << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mixed-oil length estimation toolkit"};
  app.require_subcommand(1);

  // ---- ap-calc
  auto* ap = app.add_subcommand("ap-calc", "mechanistic mixed-oil length for one geometry");
  double ap_L = 0.0, ap_d = 0.0, ap_Re = 0.0, ap_C0 = 0.0;
  ap->add_option("--L", ap_L, "transport distance, m")->required();
  ap->add_option("--d", ap_d, "pipe inner diameter, m")->required();
  ap->add_option("--Re", ap_Re, "Reynolds number")->required();
  ap->add_option("--C0", ap_C0, "initial mixed-oil length, m");
  ap->callback([&]() {
    const mixlen::pipeline_geometry g{ap_L, ap_d, ap_Re, ap_C0};
    const auto res = mixlen::austin_palfrey(g);
    std::cout << std::fixed << std::setprecision(3) << res.c_ap << " ("
              << mixlen::regime_name(res.regime) << ")\n";
  });

  // ---- gen
  auto* gen = app.add_subcommand("gen", "generate synthetic datasets");
  bool gen_toy = false, gen_pipeline = false, gen_force = false;
  long long gen_n = 0;
  std::string gen_profile = "train", gen_out_dir = ".", gen_name;
  std::uint64_t gen_seed = 0;
  gen->add_flag("--toy", gen_toy, "scalar toy law");
  gen->add_flag("--pipeline", gen_pipeline, "synthetic pipeline records");
  gen->add_option("--n", gen_n, "number of rows")->required();
  gen->add_option("--profile", gen_profile, "pipeline noise profile (train|test)");
  gen->add_option("--seed", gen_seed, "random seed")->envname("MIXLEN_SEED");
  gen->add_option("--out-dir", gen_out_dir, "output directory");
  gen->add_option("--out", gen_name, "output file name");
  gen->add_flag("--force", gen_force, "overwrite existing outputs");
  gen->set_config("--config");
  gen->callback([&]() {
    if (gen_toy == gen_pipeline)
      throw mixlen::usage_error("choose exactly one of --toy / --pipeline");
    if (gen_n < 1) throw mixlen::usage_error("--n must be >= 1");
    if (gen_toy) {
      const auto path = output_file(
          gen_out_dir, gen_name.empty() ? std::string("toy.csv") : gen_name, gen_force);
      mixlen::write_toy_csv(path, mixlen::gen_toy(static_cast<std::size_t>(gen_n), gen_seed));
      std::cout << "wrote " << gen_n << " toy rows to " << path << '\n';
    } else {
      const auto profile = mixlen::parse_profile(gen_profile);
      const auto path = output_file(
          gen_out_dir,
          gen_name.empty() ? "pipeline_" + gen_profile + ".csv" : gen_name, gen_force);
      mixlen::write_csv(path, mixlen::gen_synthetic_pipeline(
                                  static_cast<std::size_t>(gen_n), gen_seed, profile));
      std::cout << "wrote " << gen_n << " pipeline rows (" << gen_profile << " profile) to "
                << path << '\n';
    }
  });

  // ---- train
  auto* tr = app.add_subcommand("train", "fit the conditioner and the diffusion model");
  train_options to;
  tr->add_option("--train", to.train_path, "training CSV")->required();
  tr->add_flag("--toy", to.toy, "x,y schema instead of pipeline records");
  tr->add_option("--seed", to.seed, "random seed")->envname("MIXLEN_SEED");
  tr->add_option("--out-dir", to.out_dir, "output directory");
  tr->add_flag("--force", to.force, "overwrite existing outputs");
  tr->add_option("--filter-threshold", to.filter_threshold, "relative residual outlier cut");
  tr->add_option("--split-fraction", to.split_fraction, "train share of the 70/30 split");
  add_model_options(tr, to);
  tr->set_config("--config");
  tr->callback([&]() { run_train(to); });

  // ---- evaluate
  auto* ev = app.add_subcommand("evaluate", "pseudo-sample a trained model and score it");
  std::string ev_model, ev_test, ev_out_dir = ".";
  bool ev_toy = false, ev_force = false;
  int ev_n_pseudo = 200, ev_threads = 1;
  std::vector<double> ev_alphas{0.90, 0.95};
  std::uint64_t ev_seed = 0;
  ev->add_option("--model", ev_model, "diffusion model file")->required();
  ev->add_option("--test", ev_test, "test CSV")->required();
  ev->add_flag("--toy", ev_toy, "x,y schema instead of pipeline records");
  ev->add_option("--n-pseudo", ev_n_pseudo, "pseudo-samples per test row");
  ev->add_option("--alpha", ev_alphas, "interval levels (repeatable)");
  ev->add_option("--seed", ev_seed, "random seed")->envname("MIXLEN_SEED");
  ev->add_option("--threads", ev_threads, "generation threads");
  ev->add_option("--out-dir", ev_out_dir, "output directory");
  ev->add_flag("--force", ev_force, "overwrite existing outputs");
  ev->set_config("--config");
  ev->callback([&]() {
    run_evaluate(ev_model, ev_test, ev_toy, ev_n_pseudo, ev_alphas, ev_seed, ev_threads,
                 ev_out_dir, ev_force);
  });

  // ---- compare
  auto* cp = app.add_subcommand("compare", "interval baselines on a 60/20/20 split");
  std::string cp_data, cp_out_dir = ".";
  bool cp_force = false;
  std::vector<double> cp_alphas{0.90, 0.95};
  std::uint64_t cp_seed = 0;
  int cp_n_pseudo = 200, cp_qf_trees = 100, cp_qf_min_leaf = 5, cp_qr_steps = 10000;
  train_options cp_model;  // hyperparameters for the diffusion rows
  cp->add_option("--data", cp_data, "pipeline CSV to split 60/20/20")->required();
  cp->add_option("--alpha", cp_alphas, "interval levels (repeatable)");
  cp->add_option("--seed", cp_seed, "random seed")->envname("MIXLEN_SEED");
  cp->add_option("--n-pseudo", cp_n_pseudo, "pseudo-samples per test row");
  cp->add_option("--qf-trees", cp_qf_trees, "quantile forest size");
  cp->add_option("--qf-min-leaf", cp_qf_min_leaf, "quantile forest min samples per leaf");
  cp->add_option("--qr-steps", cp_qr_steps, "linear quantile regression steps");
  cp->add_option("--out-dir", cp_out_dir, "output directory");
  cp->add_flag("--force", cp_force, "overwrite existing outputs");
  add_model_options(cp, cp_model);
  cp->set_config("--config");
  cp->callback([&]() {
    run_compare(cp_data, cp_alphas, cp_seed, cp_model, cp_n_pseudo, cp_qf_trees,
                cp_qf_min_leaf, cp_qr_steps, cp_out_dir, cp_force);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const mixlen::usage_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const mixlen::error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
