// The wpansim subcommands. Each returns a process exit code: 0 on success,
// 2 on a configuration error, 1 on anything else.
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "wpan/csv.hpp"
#include "wpan/scenario.hpp"
#include "wpan/sim.hpp"
#include "wpan/sync_energy.hpp"

namespace wpan::cli {

inline constexpr int kOk = 0;
inline constexpr int kInternal = 1;
inline constexpr int kConfig = 2;

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError(p.string(), "cannot be read");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Write-then-rename so readers never see a partial file.
inline void write_file(const std::filesystem::path& p, const std::string& data) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  auto tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << data;
  }
  std::filesystem::rename(tmp, p);
}

inline nlohmann::json parse_json(const std::string& text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(what, std::string("not valid JSON (") + e.what() + ")");
  }
}

template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInternal;
  }
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string trace;
};

struct RunFiles {
  std::string csv;
  std::string trace;
};

/// Runs one scenario document; the hash covers the document text as given.
inline RunFiles simulate_text(const std::string& text, std::optional<std::uint64_t> seed_override, bool want_trace) {
  const auto doc = parse_json(text, "scenario");
  std::uint64_t seed = 1;
  if (seed_override)
    seed = *seed_override;
  else if (doc.is_object() && doc.contains("seed") && doc["seed"].is_number_unsigned())
    seed = doc["seed"].get<std::uint64_t>();
  const Scenario sc = parse_scenario(doc, seed);
  const auto out = run(sc, seed, want_trace);
  return {metrics_csv(out.metrics, sc.phy, seed, fnv1a(text)), out.trace};
}

inline int cmd_simulate(const SimulateOptions& o, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    const auto files = simulate_text(read_file(o.scenario), o.seed, !o.trace.empty());
    write_file(o.out, files.csv);
    if (!o.trace.empty()) write_file(o.trace, files.trace);
    return kOk;
  });
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeOptions {
  std::string params;
  std::string bo = "0..14";
  std::string so = "0..0";
  std::string rates;
  std::string rate_unit = "bps";  // or "Bps" (bytes per second)
  std::string out;
};

inline OrderRange parse_order_range(const std::string& s, const std::string& key) {
  const auto dots = s.find("..");
  try {
    std::size_t used = 0;
    if (dots == std::string::npos) {
      const int v = std::stoi(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      if (v < 0 || v > kMaxOrder) throw ConfigError(key, "must lie in 0..14");
      return {v, v};
    }
    const int lo = std::stoi(s.substr(0, dots), &used);
    if (used != dots) throw std::invalid_argument(s);
    const auto rest = s.substr(dots + 2);
    const int hi = std::stoi(rest, &used);
    if (used != rest.size()) throw std::invalid_argument(s);
    if (lo < 0 || hi > kMaxOrder || lo > hi) throw ConfigError(key, "range must satisfy 0 <= lo <= hi <= 14");
    return {lo, hi};
  } catch (const std::logic_error&) {
    throw ConfigError(key, "expected N or A..B");
  }
}

inline std::vector<double> parse_rates(const std::string& s, double scale) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), ::isspace), item.end());
    if (item.empty()) continue;
    double v = 0;
    auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (res.ec != std::errc{} || res.ptr != item.data() + item.size() || v < 0)
      throw ConfigError("rates", "expected a comma-separated list of non-negative numbers");
    out.push_back(v * scale);
  }
  return out;
}

/// Model parameters from JSON. Currents in mA, durations in microseconds,
/// packet size in bits (k_bits) or bytes (k_bytes).
inline SyncEnergyParams parse_sync_params(const nlohmann::json& doc) {
  static const std::set<std::string> keys{"p_t_ma", "p_r_ma", "p_i_ma", "t_b_us", "t_d_us", "t_a_us",
                                          "t_i_us", "k_bits", "k_bytes", "strict_paper_formula"};
  detail::reject_unknown(doc, keys, "");
  SyncEnergyParams s;
  auto num = [&](const char* key, double& dst) { dst = detail::get<double>(doc, key, "", dst); };
  num("p_t_ma", s.p_t);
  num("p_r_ma", s.p_r);
  num("p_i_ma", s.p_i);
  num("t_b_us", s.t_b_us);
  num("t_d_us", s.t_d_us);
  num("t_a_us", s.t_a_us);
  num("t_i_us", s.t_i_us);
  if (doc.contains("k_bits") && doc.contains("k_bytes")) throw ConfigError("k_bytes", "give k_bits or k_bytes, not both");
  num("k_bits", s.k_bits);
  if (doc.contains("k_bytes")) s.k_bits = detail::get<double>(doc, "k_bytes", "", 0.0) * 8.0;
  s.strict_paper_formula = detail::get<bool>(doc, "strict_paper_formula", "", false);
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("params", e.what());
  }
  return s;
}

inline int cmd_analyze(const AnalyzeOptions& o, std::ostream& err = std::cerr) {
  return guarded(err, [&] {
    const auto params = parse_sync_params(parse_json(read_file(o.params), "params"));
    double scale = 1.0;
    if (o.rate_unit == "Bps")
      scale = 8.0;
    else if (o.rate_unit != "bps")
      throw ConfigError("rate-unit", "must be bps or Bps");
    const auto rows =
        sweep(params, parse_order_range(o.bo, "bo"), parse_order_range(o.so, "so"), parse_rates(o.rates, scale));
    write_file(o.out, analysis_csv(rows));
    return kOk;
  });
}

// ---------------------------------------------------------------------------
// sweep

struct SweepOptions {
  std::string scenario;
  std::vector<std::string> vary;
  int seeds = 1;
  std::string out;
  unsigned jobs = 0;  // 0: hardware concurrency
};

struct VaryAxis {
  std::string key;  // dotted path into the scenario document
  std::vector<nlohmann::json> values;
};

inline std::string value_label(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

inline VaryAxis parse_vary(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError(spec, "expected KEY=RANGE");
  VaryAxis axis;
  axis.key = spec.substr(0, eq);
  const auto top = axis.key.substr(0, axis.key.find('.'));
  if (!scenario_keys().count(top)) throw ConfigError(axis.key, "unknown key");
  const auto range = spec.substr(eq + 1);
  const auto dots = range.find("..");
  if (dots != std::string::npos) {
    try {
      std::size_t a = 0, b = 0;
      const auto lo = std::stoll(range.substr(0, dots), &a);
      const auto rest = range.substr(dots + 2);
      const auto hi = std::stoll(rest, &b);
      if (a != dots || b != rest.size() || lo > hi) throw std::invalid_argument(range);
      for (auto v = lo; v <= hi; ++v) axis.values.emplace_back(v);
    } catch (const std::logic_error&) {
      throw ConfigError(axis.key, "expected an integer range A..B");
    }
  } else {
    std::stringstream ss(range);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      const auto parsed = nlohmann::json::parse(item, nullptr, false);
      axis.values.push_back(parsed.is_discarded() ? nlohmann::json(item) : parsed);
    }
  }
  if (axis.values.empty()) throw ConfigError(axis.key, "empty range");
  return axis;
}

inline void set_path(nlohmann::json& doc, const std::string& dotted, const nlohmann::json& value) {
  std::string pointer;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) pointer += "/" + part;
  doc[nlohmann::json::json_pointer(pointer)] = value;
}

inline unsigned env_jobs(unsigned fallback) {
  if (const char* j = std::getenv("WPANSIM_JOBS")) {
    const int v = std::atoi(j);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return fallback;
}

inline int cmd_sweep(const SweepOptions& o, std::ostream& err = std::cerr) {
  return guarded(err, [&]() -> int {
    if (o.seeds < 1) throw ConfigError("seeds", "must be >= 1");
    const std::string base_text = read_file(o.scenario);
    const auto base = parse_json(base_text, "scenario");
    std::vector<VaryAxis> axes;
    for (const auto& v : o.vary) axes.push_back(parse_vary(v));

    std::uint64_t first_seed = 1;
    if (base.is_object() && base.contains("seed") && base["seed"].is_number_unsigned())
      first_seed = base["seed"].get<std::uint64_t>();

    // Cartesian product of the axes, first axis varying slowest.
    struct Point {
      std::string label;
      std::vector<std::string> values;
      std::string text;
    };
    std::vector<Point> points;
    std::size_t total = 1;
    for (const auto& a : axes) total *= a.values.size();
    for (std::size_t i = 0; i < total; ++i) {
      Point p;
      auto doc = base;
      std::size_t rem = i;
      std::vector<std::size_t> idx(axes.size());
      for (std::size_t a = axes.size(); a-- > 0;) {
        idx[a] = rem % axes[a].values.size();
        rem /= axes[a].values.size();
      }
      for (std::size_t a = 0; a < axes.size(); ++a) {
        const auto& v = axes[a].values[idx[a]];
        set_path(doc, axes[a].key, v);
        p.values.push_back(value_label(v));
        p.label += axes[a].key + "=" + value_label(v) + "_";
      }
      p.text = doc.dump(2);
      parse_scenario(doc, first_seed);  // reject bad points before running anything
      points.push_back(std::move(p));
    }

    struct Job {
      std::size_t point;
      std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (std::size_t p = 0; p < points.size(); ++p)
      for (int s = 0; s < o.seeds; ++s) jobs.push_back({p, first_seed + static_cast<std::uint64_t>(s)});

    std::filesystem::path dir = o.out;
    if (dir.empty())
      if (const char* d = std::getenv("WPANSIM_OUT_DIR")) dir = d;
    if (dir.empty()) throw ConfigError("out", "output directory required");
    std::filesystem::create_directories(dir);

    const PhyProfile phy = parse_scenario(base, first_seed).phy;
    std::vector<std::vector<double>> results(jobs.size());
    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::string failure;
    auto worker = [&] {
      for (std::size_t i = next++; i < jobs.size(); i = next++) {
        try {
          const auto& job = jobs[i];
          const auto doc = nlohmann::json::parse(points[job.point].text);
          const Scenario sc = parse_scenario(doc, job.seed);
          const auto out = run(sc, job.seed, false);
          write_file(dir / (points[job.point].label + "seed=" + std::to_string(job.seed) + ".csv"),
                     metrics_csv(out.metrics, sc.phy, job.seed, fnv1a(points[job.point].text)));
          results[i] = summary_values(out.metrics, phy);
        } catch (const std::exception& e) {
          std::lock_guard lock(err_mu);
          if (failure.empty()) failure = e.what();
        }
      }
    };
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned n_threads = std::max(1u, std::min<unsigned>(env_jobs(o.jobs ? o.jobs : hw), jobs.size()));
    {
      std::vector<std::jthread> pool;
      for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    }
    if (!failure.empty()) throw std::runtime_error(failure);

    // Aggregate: mean and sample standard deviation per summary metric.
    std::string agg = "# tool=" + std::string(kToolVersion) + "\n# seeds=" + std::to_string(first_seed) + ".." +
                      std::to_string(first_seed + static_cast<std::uint64_t>(o.seeds) - 1) +
                      "\n# scenario_hash=" + hex64(fnv1a(base_text)) + "\n";
    for (const auto& a : axes) agg += a.key + ",";
    agg += "runs";
    for (const auto& c : summary_columns()) agg += ",mean_" + c + ",std_" + c;
    agg += '\n';
    const std::size_t m = summary_columns().size();
    for (std::size_t p = 0; p < points.size(); ++p) {
      for (const auto& v : points[p].values) agg += v + ",";
      agg += std::to_string(o.seeds);
      for (std::size_t c = 0; c < m; ++c) {
        double sum = 0.0;
        for (int s = 0; s < o.seeds; ++s) sum += results[p * o.seeds + s][c];
        const double mean = sum / o.seeds;
        double ss = 0.0;
        for (int s = 0; s < o.seeds; ++s) {
          const double d = results[p * o.seeds + s][c] - mean;
          ss += d * d;
        }
        const double sd = o.seeds > 1 ? std::sqrt(ss / (o.seeds - 1)) : 0.0;
        agg += ',' + fmt(mean) + ',' + fmt(sd);
      }
      agg += '\n';
    }
    write_file(dir / "aggregate.csv", agg);
    return kOk;
  });
}

}  // namespace wpan::cli
