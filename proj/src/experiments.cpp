#include "msggan/experiments.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "msggan/training.hpp"

namespace msggan {

namespace fs = std::filesystem;

namespace {

void run_child(const ExperimentConfig& config, RunRow& row, bool verbose) {
  try {
    TrainOptions options;
    options.verbose = verbose;
    const auto result = train(config, options);
    row.final_fid_proxy = result.final_fid_proxy;
    row.ok = !result.diverged;
    if (result.diverged) row.error = result.divergence_message;
  } catch (const std::exception& e) {
    row.ok = false;
    row.error = e.what();
    std::cerr << "msggan: run " << row.label << " failed: " << e.what() << "\n";
  }
}

std::string lr_label(double lr) {
  std::ostringstream s;
  s << lr;
  return "lr_" + s.str();
}

}  // namespace

std::vector<RunRow> lr_sweep(const ExperimentConfig& base, const std::vector<double>& lrs, const fs::path& out_root,
                             bool verbose) {
  if (lrs.empty()) throw std::invalid_argument("lr_sweep needs at least one learning rate");
  std::vector<RunRow> rows;
  for (double lr : lrs) {
    RunRow row;
    row.label = lr_label(lr);
    row.lr = lr;
    row.mode = base.connection_mode;
    row.seed = base.seed;
    row.out_dir = out_root / row.label;
    ExperimentConfig c = base;
    c.lr = lr;
    c.out_dir = row.out_dir.string();
    run_child(c, row, verbose);
    rows.push_back(row);
  }
  return rows;
}

std::vector<RunRow> ablate(const ExperimentConfig& base, const std::vector<ConnectionMode>& modes, const fs::path& out_root,
                           std::vector<uint64_t> seeds, bool verbose) {
  if (modes.empty()) throw std::invalid_argument("ablate needs at least one connection mode");
  std::vector<ConnectionMode> unique;
  for (auto m : modes) {
    if (std::find(unique.begin(), unique.end(), m) != unique.end()) {
      std::cerr << "msggan: warning: duplicate mode '" << to_string(m) << "' ignored\n";
      continue;
    }
    unique.push_back(m);
  }
  if (seeds.empty()) seeds.push_back(base.seed);
  std::vector<RunRow> rows;
  for (auto m : unique) {
    for (uint64_t seed : seeds) {
      RunRow row;
      row.label = std::string(to_string(m)) + "_seed" + std::to_string(seed);
      row.lr = base.lr;
      row.mode = m;
      row.seed = seed;
      row.out_dir = out_root / row.label;
      ExperimentConfig c = base;
      c.connection_mode = m;
      c.seed = seed;
      c.out_dir = row.out_dir.string();
      run_child(c, row, verbose);
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<std::pair<ConnectionMode, std::optional<double>>> median_by_mode(const std::vector<RunRow>& rows) {
  std::vector<std::pair<ConnectionMode, std::optional<double>>> out;
  for (const auto& row : rows) {
    if (std::none_of(out.begin(), out.end(), [&](const auto& p) { return p.first == row.mode; })) {
      out.emplace_back(row.mode, std::nullopt);
    }
  }
  for (auto& [mode, median] : out) {
    std::vector<double> v;
    for (const auto& row : rows) {
      if (row.mode == mode && row.ok && row.final_fid_proxy) v.push_back(*row.final_fid_proxy);
    }
    if (v.empty()) continue;
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  }
  return out;
}

void write_rows_csv(const std::vector<RunRow>& rows, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "label,lr,mode,seed,status,final_fid_proxy,error\n";
  for (const auto& r : rows) {
    std::string error = r.error;
    std::replace(error.begin(), error.end(), ',', ';');
    std::replace(error.begin(), error.end(), '\n', ' ');
    out << r.label << "," << r.lr << "," << to_string(r.mode) << "," << r.seed << "," << (r.ok ? "ok" : "failed")
        << ",";
    if (r.final_fid_proxy) out << *r.final_fid_proxy;
    out << "," << error << "\n";
  }
}

std::string format_rows_table(const std::vector<RunRow>& rows) {
  std::ostringstream s;
  s << std::left << std::setw(24) << "run" << std::setw(10) << "lr" << std::setw(8) << "mode" << std::setw(8)
    << "seed" << std::setw(8) << "status" << "fid_proxy\n";
  for (const auto& r : rows) {
    std::ostringstream lr;
    lr << r.lr;
    s << std::left << std::setw(24) << r.label << std::setw(10) << lr.str() << std::setw(8) << to_string(r.mode)
      << std::setw(8) << r.seed << std::setw(8) << (r.ok ? "ok" : "failed");
    if (r.final_fid_proxy) {
      s << std::fixed << std::setprecision(4) << *r.final_fid_proxy << std::defaultfloat;
    } else {
      s << "-";
    }
    if (!r.error.empty()) s << "  (" << r.error << ")";
    s << "\n";
  }
  return s.str();
}

}  // namespace msggan
