#pragma once

// Monte Carlo BER experiments: seeded channel/symbol/noise generation, paired
// detector comparisons over an SNR grid, a per-iteration multiplication-count
// model, and CSV/TSV emission.
//
// Reproducibility contract: every trial draws from counter-based streams
// addressed by (seed, trial, purpose), and per-trial results are reduced in
// trial order, so a sweep's statistical output is byte-identical for any
// worker count. Wall-time measurement is opt-in because measured times are
// inherently not reproducible; with timing off the wall_ms column is 0.

#include <Eigen/Dense>

#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "giga/channel_io.hpp"
#include "giga/detector.hpp"
#include "giga/errors.hpp"
#include "giga/exp_family.hpp"
#include "giga/lmmse.hpp"
#include "giga/m_projection.hpp"
#include "giga/rng.hpp"
#include "giga/system_model.hpp"

namespace giga {

enum class DetectorKind { giga, lmmse, exact_oracle };
enum class ChannelSource { iid_gaussian, file };

inline const char* detector_name(DetectorKind k) {
  switch (k) {
    case DetectorKind::giga: return "giga";
    case DetectorKind::lmmse: return "lmmse";
    case DetectorKind::exact_oracle: return "exact-oracle";
  }
  return "?";
}

inline bool parse_detector(const std::string& name, DetectorKind& out) {
  if (name == "giga") out = DetectorKind::giga;
  else if (name == "lmmse") out = DetectorKind::lmmse;
  else if (name == "exact-oracle") out = DetectorKind::exact_oracle;
  else return false;
  return true;
}

// Stream purposes for (seed, trial, purpose) addressing.
inline constexpr std::uint64_t kStreamChannel = 1;
inline constexpr std::uint64_t kStreamSymbols = 2;
inline constexpr std::uint64_t kStreamNoise = 3;

struct SimConfig {
  int n_r = 8;
  int num_users = 4;
  int mod_order = 4;
  std::vector<int> group_counts{4};  // one giga series per entry
  std::vector<double> snr_db{10.0};
  int trials = 100;
  std::uint64_t seed = 1;
  double damping = 0.3;
  int max_iters = 50;
  double tol = 1e-6;
  std::vector<DetectorKind> detectors{DetectorKind::giga, DetectorKind::lmmse};
  ProjectionMode giga_projection = ProjectionMode::approximate;
  ChannelSource source = ChannelSource::iid_gaussian;
  std::string channel_file;
  bool normalize_channel_columns = false;
  int workers = 1;
  bool timing = false;
};

// Noise variance of the complex model for SNR = num_users / noise_var.
inline double noise_var_from_snr(double snr_db, int num_users) {
  if (num_users < 1) {
    throw std::invalid_argument("noise_var_from_snr: need at least one user");
  }
  return num_users / std::pow(10.0, snr_db / 10.0);
}

// i.i.d. circular complex Gaussian entries with variance 1/n_r, so columns
// have unit expected norm. Entries are drawn row by row.
inline Eigen::MatrixXcd gen_channel_iid(int n_r, int num_users, CounterRng& rng) {
  if (n_r < 1 || num_users < 1) {
    throw std::invalid_argument("gen_channel_iid: dimensions must be positive");
  }
  Eigen::MatrixXcd h(n_r, num_users);
  const double entry_var = 1.0 / n_r;
  for (int r = 0; r < n_r; ++r) {
    for (int c = 0; c < num_users; ++c) {
      h(r, c) = rng.next_complex_gaussian(entry_var);
    }
  }
  return h;
}

inline unsigned gray_code(unsigned i) { return i ^ (i >> 1); }

inline int gray_bit_errors(int truth, int decided) {
  return std::popcount(gray_code(static_cast<unsigned>(truth)) ^
                       gray_code(static_cast<unsigned>(decided)));
}

// Bits carried by one real component under Gray labelling.
inline int bits_per_component(int alphabet_size) {
  const auto u = static_cast<unsigned>(alphabet_size);
  if (alphabet_size < 2 || (u & (u - 1)) != 0) {
    throw std::invalid_argument("bits_per_component: alphabet size must be a power of two");
  }
  return std::countr_zero(u);
}

// One (detector series, SNR grid) row of a report in the fixed emission order.
struct SeriesKey {
  DetectorKind kind = DetectorKind::giga;
  int num_groups = 0;  // 0 for detectors without grouping

  std::string label() const {
    std::string s = detector_name(kind);
    if (kind == DetectorKind::giga) s += "-U" + std::to_string(num_groups);
    return s;
  }
};

inline std::vector<SeriesKey> report_series(const SimConfig& cfg) {
  std::vector<SeriesKey> out;
  for (DetectorKind kind : cfg.detectors) {
    if (kind == DetectorKind::giga) {
      for (int u : cfg.group_counts) out.push_back({kind, u});
    } else {
      out.push_back({kind, 0});
    }
  }
  return out;
}

inline void validate_config(const SimConfig& cfg) {
  if (cfg.n_r < 1 || cfg.num_users < 1) {
    throw std::invalid_argument("sim config: dimensions must be positive");
  }
  const Alphabet alphabet = make_alphabet(cfg.mod_order);
  bits_per_component(alphabet.size());  // Gray labelling needs a power of two
  if (cfg.trials < 1) {
    throw std::invalid_argument("sim config: trials must be >= 1");
  }
  if (cfg.snr_db.empty()) {
    throw std::invalid_argument("sim config: SNR grid must be non-empty");
  }
  if (!(cfg.damping > 0.0 && cfg.damping <= 1.0)) {
    throw std::invalid_argument("sim config: damping must lie in (0, 1]");
  }
  if (cfg.max_iters < 1 || !(cfg.tol > 0.0)) {
    throw std::invalid_argument("sim config: invalid iteration controls");
  }
  if (cfg.workers < 1) {
    throw std::invalid_argument("sim config: workers must be >= 1");
  }
  if (cfg.detectors.empty()) {
    throw std::invalid_argument("sim config: detector set must be non-empty");
  }
  bool has_giga = false;
  bool has_oracle = false;
  for (DetectorKind kind : cfg.detectors) {
    has_giga = has_giga || kind == DetectorKind::giga;
    has_oracle = has_oracle || kind == DetectorKind::exact_oracle;
  }
  if (has_giga) {
    if (cfg.group_counts.empty()) {
      throw std::invalid_argument("sim config: giga requires at least one group count");
    }
    for (int u : cfg.group_counts) {
      if (u < 1 || (2 * cfg.n_r) % u != 0) {
        throw std::invalid_argument(
            "sim config: every group count must divide 2*n_r");
      }
    }
  }
  const bool needs_enumeration =
      has_oracle || (has_giga && cfg.giga_projection == ProjectionMode::exact_oracle);
  if (needs_enumeration &&
      detail::joint_state_count(alphabet.size(), 2 * cfg.num_users) < 0) {
    throw std::invalid_argument(
        "sim config: exact enumeration exceeds the state cap at this size");
  }
  if (cfg.source == ChannelSource::file && cfg.channel_file.empty()) {
    throw std::invalid_argument("sim config: file channel source needs a path");
  }
}

// Everything detectors see in one trial; identical across the detector set.
struct TrialRealization {
  Eigen::MatrixXcd channel;
  std::vector<int> symbol_indices;  // 2K true alphabet indices
  Eigen::VectorXcd unit_noise;      // scaled per SNR point
};

inline TrialRealization make_realization(const SimConfig& cfg,
                                         const Eigen::MatrixXcd* fixed_channel,
                                         int trial) {
  TrialRealization out;
  if (fixed_channel != nullptr) {
    out.channel = *fixed_channel;
  } else {
    CounterRng rng(cfg.seed, static_cast<std::uint64_t>(trial), kStreamChannel);
    out.channel = gen_channel_iid(cfg.n_r, cfg.num_users, rng);
  }
  const int num_points = make_alphabet(cfg.mod_order).size();
  const int n = 2 * cfg.num_users;
  CounterRng sym_rng(cfg.seed, static_cast<std::uint64_t>(trial), kStreamSymbols);
  out.symbol_indices.resize(n);
  for (int j = 0; j < n; ++j) out.symbol_indices[j] = sym_rng.next_index(num_points);
  CounterRng noise_rng(cfg.seed, static_cast<std::uint64_t>(trial), kStreamNoise);
  out.unit_noise.resize(cfg.n_r);
  for (int i = 0; i < cfg.n_r; ++i) out.unit_noise[i] = noise_rng.next_complex_gaussian(1.0);
  return out;
}

struct TrialCell {
  std::int64_t bits = 0;
  std::int64_t errors = 0;
  std::int64_t iterations = 0;
  bool converged = false;
  bool flagged = false;
  double wall_ms = 0.0;
};

// Cells in series-major order: cell index = series * |snr grid| + snr index.
using TrialResult = std::vector<TrialCell>;

inline TrialResult run_trial(const SimConfig& cfg,
                             const Eigen::MatrixXcd* fixed_channel, int trial) {
  const Alphabet alphabet = make_alphabet(cfg.mod_order);
  const int num_points = alphabet.size();
  const int n = 2 * cfg.num_users;
  const int bits_per_trial = n * bits_per_component(num_points);
  const std::vector<SeriesKey> series = report_series(cfg);

  const TrialRealization real = make_realization(cfg, fixed_channel, trial);
  Eigen::VectorXd s_real(n);
  for (int j = 0; j < n; ++j) s_real[j] = alphabet.points[real.symbol_indices[j]];
  Eigen::VectorXcd s_complex(cfg.num_users);
  for (int k = 0; k < cfg.num_users; ++k) {
    s_complex[k] = {s_real[k], s_real[cfg.num_users + k]};
  }
  const Eigen::VectorXcd signal = real.channel * s_complex;

  TrialResult out(series.size() * cfg.snr_db.size());
  for (std::size_t si = 0; si < cfg.snr_db.size(); ++si) {
    const double noise_var = noise_var_from_snr(cfg.snr_db[si], cfg.num_users);
    ComplexSystem cs;
    cs.channel = real.channel;
    cs.received = signal + std::sqrt(noise_var) * real.unit_noise;
    cs.noise_var = noise_var;
    cs.mod_order = cfg.mod_order;
    const RealSystem rs = lift_to_real(cs);

    for (std::size_t ri = 0; ri < series.size(); ++ri) {
      TrialCell cell;
      const auto start = std::chrono::steady_clock::now();
      try {
        Eigen::VectorXd decisions;
        switch (series[ri].kind) {
          case DetectorKind::giga: {
            GigaConfig gc;
            gc.num_groups = series[ri].num_groups;
            gc.damping = cfg.damping;
            gc.max_iters = cfg.max_iters;
            gc.tol = cfg.tol;
            gc.mode = cfg.giga_projection;
            const GigaOutput run = run_giga(rs, gc);
            decisions = run.result.real_decisions;
            cell.iterations = run.result.iterations_used;
            cell.converged = run.result.converged;
            break;
          }
          case DetectorKind::lmmse:
            decisions = lmmse_detect(rs).real_decisions;
            cell.converged = true;
            break;
          case DetectorKind::exact_oracle:
            decisions = mpm_decide(exact_posterior(rs).marginals, alphabet);
            cell.converged = true;
            break;
        }
        cell.bits = bits_per_trial;
        for (int j = 0; j < n; ++j) {
          const int decided = alphabet.nearest_index(decisions[j]);
          cell.errors += gray_bit_errors(real.symbol_indices[j], decided);
        }
      } catch (const NumericalError&) {
        cell = TrialCell{};
        cell.flagged = true;
      }
      if (cfg.timing) {
        cell.wall_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - start)
                           .count();
      }
      out[ri * cfg.snr_db.size() + si] = cell;
    }
  }
  return out;
}

inline TrialResult run_trial(const SimConfig& cfg, int trial) {
  if (cfg.source == ChannelSource::file) {
    Eigen::MatrixXcd channel = load_channel_file(cfg.channel_file);
    if (cfg.normalize_channel_columns) channel.colwise().normalize();
    return run_trial(cfg, &channel, trial);
  }
  return run_trial(cfg, nullptr, trial);
}

struct BerRow {
  SeriesKey series;
  double snr_db = 0.0;
  std::int64_t bits = 0;
  std::int64_t errors = 0;
  std::int64_t iterations_sum = 0;
  std::int64_t ok_trials = 0;
  std::int64_t converged_trials = 0;
  std::int64_t flagged_trials = 0;
  double wall_ms = 0.0;

  double ber() const { return bits > 0 ? static_cast<double>(errors) / bits : 0.0; }
  double mean_iterations() const {
    return ok_trials > 0 ? static_cast<double>(iterations_sum) / ok_trials : 0.0;
  }
};

struct BerReport {
  std::vector<BerRow> rows;       // series-major, SNR grid order within a series
  std::vector<double> snr_grid;

  std::int64_t total_flagged() const {
    std::int64_t n = 0;
    for (const BerRow& r : rows) n += r.flagged_trials;
    return n;
  }

  std::string to_csv() const {
    std::string out = "detector,U,snr_db,bits,errors,ber,mean_iters,wall_ms\n";
    char buf[256];
    for (const BerRow& r : rows) {
      std::snprintf(buf, sizeof(buf), "%s,%d,%g,%lld,%lld,%.6e,%.4f,%.3f\n",
                    detector_name(r.series.kind), r.series.num_groups, r.snr_db,
                    static_cast<long long>(r.bits), static_cast<long long>(r.errors),
                    r.ber(), r.mean_iterations(), r.wall_ms);
      out += buf;
    }
    return out;
  }

  // One column of BER values per series, one row per SNR point.
  std::string to_plot_tsv() const {
    const std::size_t num_snr = snr_grid.size();
    const std::size_t num_series = num_snr == 0 ? 0 : rows.size() / num_snr;
    std::string out = "snr_db";
    for (std::size_t ri = 0; ri < num_series; ++ri) {
      out += "\t" + rows[ri * num_snr].series.label();
    }
    out += "\n";
    char buf[64];
    for (std::size_t si = 0; si < num_snr; ++si) {
      std::snprintf(buf, sizeof(buf), "%g", snr_grid[si]);
      out += buf;
      for (std::size_t ri = 0; ri < num_series; ++ri) {
        std::snprintf(buf, sizeof(buf), "\t%.6e", rows[ri * num_snr + si].ber());
        out += buf;
      }
      out += "\n";
    }
    return out;
  }
};

// Runs the full grid. Trials are distributed over workers and reduced in
// trial order, so the report is independent of scheduling.
inline BerReport sweep(const SimConfig& cfg) {
  validate_config(cfg);
  Eigen::MatrixXcd file_channel;
  const Eigen::MatrixXcd* fixed = nullptr;
  if (cfg.source == ChannelSource::file) {
    file_channel = load_channel_file(cfg.channel_file);
    if (file_channel.rows() != cfg.n_r || file_channel.cols() != cfg.num_users) {
      throw std::invalid_argument("sweep: channel file dimensions do not match config");
    }
    if (cfg.normalize_channel_columns) file_channel.colwise().normalize();
    fixed = &file_channel;
  }

  std::vector<TrialResult> per_trial(cfg.trials);
  const int workers = std::min(cfg.workers, cfg.trials);
  if (workers <= 1) {
    for (int t = 0; t < cfg.trials; ++t) per_trial[t] = run_trial(cfg, fixed, t);
  } else {
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        while (!failed.load(std::memory_order_relaxed)) {
          const int t = next.fetch_add(1);
          if (t >= cfg.trials) break;
          try {
            per_trial[t] = run_trial(cfg, fixed, t);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!error) error = std::current_exception();
            failed.store(true);
          }
        }
      });
    }
    for (std::thread& th : pool) th.join();
    if (error) std::rethrow_exception(error);
  }

  const std::vector<SeriesKey> series = report_series(cfg);
  BerReport report;
  report.snr_grid = cfg.snr_db;
  report.rows.resize(series.size() * cfg.snr_db.size());
  for (std::size_t ri = 0; ri < series.size(); ++ri) {
    for (std::size_t si = 0; si < cfg.snr_db.size(); ++si) {
      BerRow& row = report.rows[ri * cfg.snr_db.size() + si];
      row.series = series[ri];
      row.snr_db = cfg.snr_db[si];
    }
  }
  for (int t = 0; t < cfg.trials; ++t) {
    for (std::size_t c = 0; c < report.rows.size(); ++c) {
      const TrialCell& cell = per_trial[t][c];
      BerRow& row = report.rows[c];
      if (cell.flagged) {
        ++row.flagged_trials;
      } else {
        row.bits += cell.bits;
        row.errors += cell.errors;
        row.iterations_sum += cell.iterations;
        ++row.ok_trials;
        if (cell.converged) ++row.converged_trials;
      }
      row.wall_ms += cell.wall_ms;
    }
  }
  return report;
}

// Per-iteration real-multiplication model of the grouped detector.
struct ComplexityRow {
  int num_groups = 0;
  std::int64_t direct_mults = 0;
  std::int64_t woodbury_mults = 0;
  std::int64_t per_iteration_mults = 0;
};

struct ComplexityReport {
  std::vector<ComplexityRow> rows;

  std::string to_csv() const {
    std::string out = "U,direct_mults,woodbury_mults,per_iteration_mults\n";
    char buf[128];
    for (const ComplexityRow& r : rows) {
      std::snprintf(buf, sizeof(buf), "%d,%lld,%lld,%lld\n", r.num_groups,
                    static_cast<long long>(r.direct_mults),
                    static_cast<long long>(r.woodbury_mults),
                    static_cast<long long>(r.per_iteration_mults));
      out += buf;
    }
    return out;
  }
};

// Exact integer evaluation; 24 K N_r^2 / U is computed as 6 K N_u^2 U so no
// division ever rounds.
inline ComplexityReport complexity_table(int num_users, int n_r, int alphabet_size,
                                         const std::vector<int>& group_counts) {
  if (num_users < 1 || n_r < 1 || alphabet_size < 2) {
    throw std::invalid_argument("complexity_table: invalid dimensions");
  }
  ComplexityReport report;
  for (int u : group_counts) {
    if (u < 1 || (2 * n_r) % u != 0) {
      throw std::invalid_argument("complexity_table: group count must divide 2*n_r");
    }
    const std::int64_t nu = 2LL * n_r / u;
    const ComplexityEstimate cost = inversion_cost(num_users, nu);
    ComplexityRow row;
    row.num_groups = u;
    row.direct_mults = cost.direct_mults;
    row.woodbury_mults = cost.woodbury_mults;
    const std::int64_t k = num_users;
    row.per_iteration_mults = u * std::min(cost.direct_mults, cost.woodbury_mults) +
                              6 * k * nu * nu * u + 4 * k * u * alphabet_size;
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace giga
