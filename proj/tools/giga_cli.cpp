// Command-line front end: BER sweeps, convergence traces, the per-iteration
// cost table, small-instance oracle checks, and channel-file import.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "giga/giga.hpp"

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file '" + path + "'");
  out << text;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
  } else {
    write_text(path, text);
  }
}

giga::ProjectionMode parse_projection(const std::string& name) {
  if (name == "approximate") return giga::ProjectionMode::approximate;
  if (name == "exact") return giga::ProjectionMode::exact_oracle;
  throw CLI::ValidationError("--projection", "must be 'approximate' or 'exact'");
}

struct CheckOutcome {
  bool ok = true;
  void report(const std::string& name, double err, double tol) {
    const bool pass = err < tol;
    ok = ok && pass;
    std::printf("%-4s %-38s max err %.3e (tol %.1e)\n", pass ? "ok" : "FAIL",
                name.c_str(), err, tol);
  }
};

// Random small system drawn from dedicated check streams.
giga::RealSystem random_small_system(std::uint64_t seed, int instance, int num_users,
                                     int n_r, double snr_db) {
  giga::SimConfig cfg;
  cfg.n_r = n_r;
  cfg.num_users = num_users;
  cfg.mod_order = 4;
  cfg.seed = seed;
  const giga::TrialRealization real = giga::make_realization(cfg, nullptr, instance);
  const giga::Alphabet alphabet = giga::make_alphabet(cfg.mod_order);
  Eigen::VectorXcd s(num_users);
  for (int k = 0; k < num_users; ++k) {
    s[k] = {alphabet.points[real.symbol_indices[k]],
            alphabet.points[real.symbol_indices[num_users + k]]};
  }
  giga::ComplexSystem cs;
  cs.channel = real.channel;
  cs.noise_var = giga::noise_var_from_snr(snr_db, num_users);
  cs.received = real.channel * s + std::sqrt(cs.noise_var) * real.unit_noise;
  cs.mod_order = cfg.mod_order;
  return giga::lift_to_real(cs);
}

int run_oracle_checks(std::uint64_t seed, int instances) {
  CheckOutcome outcome;

  // Exact projection of the whole posterior vs. exhaustive enumeration.
  {
    double max_err = 0.0;
    for (int i = 0; i < instances; ++i) {
      giga::CounterRng rng(seed, i, 901);
      const int num_users = 1 + rng.next_index(2);
      const int n_r = 1 + rng.next_index(3);
      const double snr_db = 2.0 + 10.0 * rng.next_double();
      const giga::RealSystem sys = random_small_system(seed, i, num_users, n_r, snr_db);
      giga::GigaConfig gc;
      gc.num_groups = 1;
      gc.damping = 1.0;
      gc.max_iters = 1;
      gc.mode = giga::ProjectionMode::exact_oracle;
      const giga::GigaOutput run = giga::run_giga(sys, gc);
      const giga::ExactPosterior oracle = giga::exact_posterior(sys);
      max_err = std::max(max_err,
                         (run.result.marginals - oracle.marginals).cwiseAbs().maxCoeff());
    }
    outcome.report("exact-projection equivalence", max_err, 1e-9);
  }

  // Surrogate moments vs. the enumerated interference-plus-noise mixture.
  {
    double max_err = 0.0;
    for (int i = 0; i < instances; ++i) {
      giga::CounterRng rng(seed, i, 902);
      const int num_users = 1 + rng.next_index(2);
      const int group_rows = 1 + rng.next_index(4);
      const int n = 2 * num_users;
      const giga::Alphabet alphabet = giga::make_alphabet(4);
      giga::GroupContext ctx;
      ctx.alphabet = alphabet;
      ctx.noise_var = 0.2 + rng.next_double();
      ctx.d = Eigen::MatrixXd::Zero(n, 1);
      ctx.G_u.resize(group_rows, n);
      for (int r = 0; r < group_rows; ++r) {
        for (int c = 0; c < n; ++c) ctx.G_u(r, c) = rng.next_gaussian();
      }
      ctx.y_u.resize(group_rows);
      for (int r = 0; r < group_rows; ++r) ctx.y_u[r] = rng.next_gaussian();
      Eigen::MatrixXd theta(n, 1);
      for (int r = 0; r < n; ++r) theta(r, 0) = 4.0 * rng.next_double() - 2.0;

      const auto [theta0, ws] = giga::approx_projection(ctx, theta);
      const Eigen::MatrixXd probs = giga::theta_to_marginals(theta, ctx.d);
      for (int k = 0; k < n; ++k) {
        const int fixed_idx = rng.next_index(alphabet.size());
        const double fixed_val = alphabet.points[fixed_idx];
        // Enumerate the mixture over the other symbols.
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(group_rows);
        Eigen::MatrixXd second = Eigen::MatrixXd::Zero(group_rows, group_rows);
        std::vector<int> idx(n - 1, 0);
        const std::int64_t states =
            giga::detail::joint_state_count(alphabet.size(), n - 1);
        for (std::int64_t t = 0; t < states; ++t) {
          Eigen::VectorXd s(n);
          double prob = 1.0;
          int pos = 0;
          for (int j = 0; j < n; ++j) {
            if (j == k) {
              s[j] = fixed_val;
            } else {
              s[j] = alphabet.points[idx[pos]];
              prob *= probs(j, idx[pos]);
              ++pos;
            }
          }
          const Eigen::VectorXd gs = ctx.G_u * s;
          mean += prob * gs;
          second += prob * (gs * gs.transpose());
          for (int j = static_cast<int>(idx.size()) - 1; j >= 0; --j) {
            if (++idx[j] < alphabet.size()) break;
            idx[j] = 0;
          }
        }
        Eigen::MatrixXd cov = second - mean * mean.transpose();
        cov.diagonal().array() += ctx.noise_var;

        Eigen::VectorXd mean_formula =
            ctx.G_u * ws.moments.mean - ctx.G_u.col(k) * ws.moments.mean[k] +
            ctx.G_u.col(k) * fixed_val;
        Eigen::MatrixXd cov_formula =
            ctx.G_u * ws.moments.var.asDiagonal() * ctx.G_u.transpose() -
            ws.moments.var[k] * (ctx.G_u.col(k) * ctx.G_u.col(k).transpose());
        cov_formula.diagonal().array() += ctx.noise_var;

        max_err = std::max(max_err, (mean - mean_formula).cwiseAbs().maxCoeff());
        max_err = std::max(max_err, (cov - cov_formula).cwiseAbs().maxCoeff());
      }
    }
    outcome.report("surrogate moment exactness", max_err, 1e-10);
  }

  // Rank-one downdate and Woodbury identities on random SPD instances.
  {
    double max_err = 0.0;
    for (int i = 0; i < instances; ++i) {
      giga::CounterRng rng(seed, i, 903);
      const int rows = 2 + rng.next_index(7);
      const int n = 2 * (1 + rng.next_index(4));
      Eigen::MatrixXd g(rows, n);
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < n; ++c) g(r, c) = rng.next_gaussian();
      }
      Eigen::VectorXd v(n);
      for (int c = 0; c < n; ++c) v[c] = 0.05 + rng.next_double();
      const double noise_var = 0.1 + rng.next_double();

      const Eigen::MatrixXd direct = giga::shared_inverse_direct(g, v, noise_var);
      const Eigen::MatrixXd wood = giga::shared_inverse_woodbury(g, v, noise_var);
      max_err = std::max(max_err, (direct - wood).cwiseAbs().maxCoeff() /
                                      direct.cwiseAbs().maxCoeff());

      const int k = rng.next_index(n);
      const Eigen::MatrixXd sm = giga::sherman_morrison_inverse(direct, g.col(k), v[k]);
      Eigen::MatrixXd downdated = g * v.asDiagonal() * g.transpose() -
                                  v[k] * (g.col(k) * g.col(k).transpose());
      downdated.diagonal().array() += noise_var;
      const Eigen::MatrixXd residual =
          sm * downdated - Eigen::MatrixXd::Identity(rows, rows);
      max_err = std::max(max_err, residual.cwiseAbs().maxCoeff());
    }
    outcome.report("rank-one / woodbury identities", max_err, 1e-8);
  }

  std::printf("%s\n", outcome.ok ? "all checks passed" : "CHECKS FAILED");
  return outcome.ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grouped iterative MIMO detection: Monte Carlo BER harness"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "Config file; sweep options live under a [sweep] section as "
                 "key=value lines");

  // sweep
  giga::SimConfig cfg;
  cfg.group_counts = {4};
  std::vector<std::string> detector_names{"giga", "lmmse"};
  std::string projection = "approximate";
  std::string source = "iid-gaussian";
  std::string out_path;
  std::string plot_path;

  CLI::App* sweep = app.add_subcommand("sweep", "Run a BER grid and emit CSV");
  sweep->fallthrough();  // lets --config appear after the subcommand name
  sweep->add_option("--nr", cfg.n_r, "Receive antennas");
  sweep->add_option("--users", cfg.num_users, "Single-antenna users");
  sweep->add_option("--mod-order", cfg.mod_order, "Square QAM order (4, 16, 64, ...)");
  sweep->add_option("--groups", cfg.group_counts, "Group counts (each must divide 2*nr)");
  sweep->add_option("--snr", cfg.snr_db, "SNR grid in dB");
  sweep->add_option("--trials", cfg.trials, "Trials per grid point");
  sweep->add_option("--seed", cfg.seed, "Base RNG seed")->required();
  sweep->add_option("--damping", cfg.damping, "Damping factor in (0, 1]");
  sweep->add_option("--max-iters", cfg.max_iters, "Iteration budget");
  sweep->add_option("--tol", cfg.tol, "Convergence tolerance (sup-norm)");
  sweep->add_option("--detectors", detector_names, "Any of: giga lmmse exact-oracle");
  sweep->add_option("--projection", projection, "giga projection: approximate|exact");
  sweep->add_option("--channel-source", source, "iid-gaussian|file");
  sweep->add_option("--channel-file", cfg.channel_file, "Channel file for source=file");
  sweep->add_flag("--normalize-columns", cfg.normalize_channel_columns,
                  "Normalize imported channel columns to unit norm");
  sweep->add_option("--workers", cfg.workers, "Worker threads");
  sweep->add_flag("--timing", cfg.timing,
                  "Measure wall time per grid point (off keeps output reproducible)");
  sweep->add_option("-o,--out", out_path, "CSV output path (default stdout)");
  sweep->add_option("--plot", plot_path, "Also write a plot-data TSV");
  sweep->callback([&]() {
    cfg.detectors.clear();
    for (const std::string& name : detector_names) {
      giga::DetectorKind kind;
      if (!giga::parse_detector(name, kind)) {
        throw CLI::ValidationError("--detectors", "unknown detector '" + name + "'");
      }
      cfg.detectors.push_back(kind);
    }
    cfg.giga_projection = parse_projection(projection);
    if (source == "iid-gaussian") {
      cfg.source = giga::ChannelSource::iid_gaussian;
    } else if (source == "file") {
      cfg.source = giga::ChannelSource::file;
    } else {
      throw CLI::ValidationError("--channel-source", "must be 'iid-gaussian' or 'file'");
    }
    const giga::BerReport report = giga::sweep(cfg);
    emit(out_path, report.to_csv());
    if (!plot_path.empty()) write_text(plot_path, report.to_plot_tsv());
    if (report.total_flagged() > 0) {
      std::fprintf(stderr, "warning: %lld flagged (diverged) trials excluded from BER\n",
                   static_cast<long long>(report.total_flagged()));
    }
  });

  // trace
  struct {
    int n_r = 8, num_users = 4, mod_order = 4, num_groups = 4, trial = 0;
    int max_iters = 50;
    double snr_db = 10.0, damping = 0.3, tol = 1e-6;
    std::uint64_t seed = 1;
    std::string projection = "approximate", out;
  } tr;
  CLI::App* trace = app.add_subcommand("trace", "Convergence trace of one instance");
  trace->add_option("--nr", tr.n_r, "Receive antennas");
  trace->add_option("--users", tr.num_users, "Single-antenna users");
  trace->add_option("--mod-order", tr.mod_order, "Square QAM order");
  trace->add_option("--group-count", tr.num_groups, "Group count (divides 2*nr)");
  trace->add_option("--snr", tr.snr_db, "SNR in dB");
  trace->add_option("--trial", tr.trial, "Trial index within the seed");
  trace->add_option("--seed", tr.seed, "Base RNG seed")->required();
  trace->add_option("--damping", tr.damping, "Damping factor");
  trace->add_option("--max-iters", tr.max_iters, "Iteration budget");
  trace->add_option("--tol", tr.tol, "Convergence tolerance");
  trace->add_option("--projection", tr.projection, "approximate|exact");
  trace->add_option("-o,--out", tr.out, "CSV output path (default stdout)");
  trace->callback([&]() {
    giga::SimConfig sim;
    sim.n_r = tr.n_r;
    sim.num_users = tr.num_users;
    sim.mod_order = tr.mod_order;
    sim.seed = tr.seed;
    const giga::TrialRealization real = giga::make_realization(sim, nullptr, tr.trial);
    const giga::Alphabet alphabet = giga::make_alphabet(tr.mod_order);
    Eigen::VectorXcd s(tr.num_users);
    for (int k = 0; k < tr.num_users; ++k) {
      s[k] = {alphabet.points[real.symbol_indices[k]],
              alphabet.points[real.symbol_indices[tr.num_users + k]]};
    }
    giga::ComplexSystem cs;
    cs.channel = real.channel;
    cs.noise_var = giga::noise_var_from_snr(tr.snr_db, tr.num_users);
    cs.received = real.channel * s + std::sqrt(cs.noise_var) * real.unit_noise;
    cs.mod_order = tr.mod_order;
    giga::GigaConfig gc;
    gc.num_groups = tr.num_groups;
    gc.damping = tr.damping;
    gc.max_iters = tr.max_iters;
    gc.tol = tr.tol;
    gc.mode = parse_projection(tr.projection);
    const giga::GigaOutput run = giga::run_giga(giga::lift_to_real(cs), gc);
    std::string csv = "iter,delta_sup,converged\n";
    char buf[64];
    for (std::size_t i = 0; i < run.state.trace.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%zu,%.9e,%d\n", i + 1, run.state.trace[i],
                    run.state.trace[i] < tr.tol ? 1 : 0);
      csv += buf;
    }
    emit(tr.out, csv);
  });

  // complexity
  struct {
    int num_users = 240, n_r = 1024, mod_order = 64;
    std::vector<int> groups{16, 128, 512, 2048};
    std::string out;
  } cx;
  CLI::App* complexity = app.add_subcommand("complexity", "Per-iteration cost table");
  complexity->add_option("--users", cx.num_users, "Single-antenna users");
  complexity->add_option("--nr", cx.n_r, "Receive antennas");
  complexity->add_option("--mod-order", cx.mod_order, "Square QAM order");
  complexity->add_option("--groups", cx.groups, "Group counts (each divides 2*nr)");
  complexity->add_option("-o,--out", cx.out, "CSV output path (default stdout)");
  complexity->callback([&]() {
    const int side = giga::make_alphabet(cx.mod_order).size();
    const giga::ComplexityReport report =
        giga::complexity_table(cx.num_users, cx.n_r, side, cx.groups);
    emit(cx.out, report.to_csv());
  });

  // oracle-check
  struct {
    std::uint64_t seed = 7;
    int instances = 25;
  } oc;
  CLI::App* oracle = app.add_subcommand("oracle-check", "Small-instance equivalence suite");
  oracle->add_option("--seed", oc.seed, "RNG seed");
  oracle->add_option("--instances", oc.instances, "Instances per check");
  oracle->callback([&]() {
    if (run_oracle_checks(oc.seed, oc.instances) != 0) {
      throw CLI::RuntimeError(1);
    }
  });

  // import-channel
  struct {
    std::string path, out;
    bool normalize = false;
  } ic;
  CLI::App* import_channel = app.add_subcommand("import-channel", "Validate a channel file");
  import_channel->add_option("file", ic.path, "Channel file to import")->required();
  import_channel->add_flag("--normalize-columns", ic.normalize,
                           "Normalize columns to unit norm before re-export");
  import_channel->add_option("-o,--out", ic.out, "Re-export in canonical row-major order");
  import_channel->callback([&]() {
    Eigen::MatrixXcd channel = giga::load_channel_file(ic.path);
    if (ic.normalize) channel.colwise().normalize();
    std::printf("nr=%ld k=%ld frobenius=%.6g\n", static_cast<long>(channel.rows()),
                static_cast<long>(channel.cols()), channel.norm());
    if (!ic.out.empty()) {
      std::ofstream out(ic.out, std::ios::binary);
      if (!out) throw std::runtime_error("cannot open output file '" + ic.out + "'");
      giga::write_channel(out, channel);
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
