#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "msggan/config.hpp"

namespace msggan {

/// One child run of a sweep or ablation.
struct RunRow {
  std::string label;
  double lr = 0.0;
  ConnectionMode mode = ConnectionMode::all;
  uint64_t seed = 0;
  std::filesystem::path out_dir;
  bool ok = false;
  std::optional<double> final_fid_proxy;
  std::string error;
};

/// Independent runs sharing the base seed, one per learning rate, each in
/// <out_root>/lr_<value>. A failing run is recorded and the rest continue.
/// Throws std::invalid_argument for an empty list.
std::vector<RunRow> lr_sweep(const ExperimentConfig& base, const std::vector<double>& lrs,
                             const std::filesystem::path& out_root, bool verbose = false);

/// One run per (mode, seed) in <out_root>/<mode>_seed<seed>. Duplicate modes
/// are dropped with a warning on stderr. An empty seed list means the base
/// seed only.
std::vector<RunRow> ablate(const ExperimentConfig& base, const std::vector<ConnectionMode>& modes,
                           const std::filesystem::path& out_root, std::vector<uint64_t> seeds = {},
                           bool verbose = false);

/// Median final FID-proxy per mode over its successful runs.
std::vector<std::pair<ConnectionMode, std::optional<double>>> median_by_mode(const std::vector<RunRow>& rows);

/// `label,lr,mode,seed,status,final_fid_proxy,error` rows.
void write_rows_csv(const std::vector<RunRow>& rows, const std::filesystem::path& path);
std::string format_rows_table(const std::vector<RunRow>& rows);

}  // namespace msggan
