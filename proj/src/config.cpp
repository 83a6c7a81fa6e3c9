#include "msggan/config.hpp"

#include <fstream>
#include <functional>
#include <map>

#include "msggan/errors.hpp"

namespace msggan {

using nlohmann::json;

std::string_view to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::synthetic:
      return "synthetic";
    case DatasetKind::image_folder:
      return "image_folder";
    case DatasetKind::cifar10_archive:
      return "cifar10_archive";
  }
  return "?";
}

DatasetKind parse_dataset_kind(std::string_view text, std::string_view field) {
  if (text == "synthetic") return DatasetKind::synthetic;
  if (text == "image_folder") return DatasetKind::image_folder;
  if (text == "cifar10_archive") return DatasetKind::cifar10_archive;
  throw ConfigError("invalid value '" + std::string(text) + "' for field '" + std::string(field) +
                    "' (expected one of: synthetic, image_folder, cifar10_archive)");
}

namespace {

std::string_view to_string(RealPenalty p) {
  return p == RealPenalty::zero_centered ? "zero_centered" : "one_sided";
}

RealPenalty parse_real_penalty(std::string_view text, std::string_view field) {
  if (text == "zero_centered") return RealPenalty::zero_centered;
  if (text == "one_sided") return RealPenalty::one_sided;
  throw ConfigError("invalid value '" + std::string(text) + "' for field '" + std::string(field) +
                    "' (expected one of: zero_centered, one_sided)");
}

[[noreturn]] void type_error(const std::string& key, const char* expected) {
  throw ConfigError("field '" + key + "' must be " + expected);
}

int64_t as_int(const json& v, const std::string& key) {
  if (!v.is_number_integer()) type_error(key, "an integer");
  return v.get<int64_t>();
}
uint64_t as_uint(const json& v, const std::string& key) {
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<int64_t>() < 0)) {
    type_error(key, "a non-negative integer");
  }
  return v.get<uint64_t>();
}
double as_double(const json& v, const std::string& key) {
  if (!v.is_number()) type_error(key, "a number");
  return v.get<double>();
}
bool as_bool(const json& v, const std::string& key) {
  if (!v.is_boolean()) type_error(key, "a boolean");
  return v.get<bool>();
}
std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string()) type_error(key, "a string");
  return v.get<std::string>();
}

using Setter = std::function<void(const json&, ExperimentConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"dataset", [](const json& v, ExperimentConfig& c, const std::string& k) { c.dataset = parse_dataset_kind(as_string(v, k), k); }},
      {"dataset_root", [](const json& v, ExperimentConfig& c, const std::string& k) { c.dataset_root = as_string(v, k); }},
      {"dataset_size", [](const json& v, ExperimentConfig& c, const std::string& k) { c.dataset_size = as_int(v, k); }},
      {"dataset_seed", [](const json& v, ExperimentConfig& c, const std::string& k) { c.dataset_seed = as_uint(v, k); }},
      {"final_resolution", [](const json& v, ExperimentConfig& c, const std::string& k) { c.final_resolution = as_int(v, k); }},
      {"latent_dim", [](const json& v, ExperimentConfig& c, const std::string& k) { c.latent_dim = as_int(v, k); }},
      {"width_divisor", [](const json& v, ExperimentConfig& c, const std::string& k) { c.width_divisor = as_int(v, k); }},
      {"combine_kind", [](const json& v, ExperimentConfig& c, const std::string& k) { c.combine_kind = parse_combine_kind(as_string(v, k), k); }},
      {"connection_mode", [](const json& v, ExperimentConfig& c, const std::string& k) { c.connection_mode = parse_connection_mode(as_string(v, k), k); }},
      {"loss_kind", [](const json& v, ExperimentConfig& c, const std::string& k) { c.loss_kind = parse_loss_kind(as_string(v, k), k); }},
      {"equalized_lr", [](const json& v, ExperimentConfig& c, const std::string& k) { c.equalized_lr = as_bool(v, k); }},
      {"lr", [](const json& v, ExperimentConfig& c, const std::string& k) { c.lr = as_double(v, k); }},
      {"rmsprop_alpha", [](const json& v, ExperimentConfig& c, const std::string& k) { c.rmsprop_alpha = as_double(v, k); }},
      {"rmsprop_eps", [](const json& v, ExperimentConfig& c, const std::string& k) { c.rmsprop_eps = as_double(v, k); }},
      {"batch_size", [](const json& v, ExperimentConfig& c, const std::string& k) { c.batch_size = as_int(v, k); }},
      {"budget", [](const json& v, ExperimentConfig& c, const std::string& k) { c.budget = as_int(v, k); }},
      {"seed", [](const json& v, ExperimentConfig& c, const std::string& k) { c.seed = as_uint(v, k); }},
      {"gp_lambda", [](const json& v, ExperimentConfig& c, const std::string& k) { c.gp_lambda = as_double(v, k); }},
      {"drift", [](const json& v, ExperimentConfig& c, const std::string& k) { c.drift = as_double(v, k); }},
      {"per_scale_alpha", [](const json& v, ExperimentConfig& c, const std::string& k) { c.per_scale_alpha = as_bool(v, k); }},
      {"r1_gamma", [](const json& v, ExperimentConfig& c, const std::string& k) { c.r1_gamma = as_double(v, k); }},
      {"real_penalty", [](const json& v, ExperimentConfig& c, const std::string& k) { c.real_penalty = parse_real_penalty(as_string(v, k), k); }},
      {"ema_beta", [](const json& v, ExperimentConfig& c, const std::string& k) { c.ema_beta = as_double(v, k); }},
      {"out_dir", [](const json& v, ExperimentConfig& c, const std::string& k) { c.out_dir = as_string(v, k); }},
      {"extractor", [](const json& v, ExperimentConfig& c, const std::string& k) { c.extractor = as_string(v, k); }},
      {"fid_samples", [](const json& v, ExperimentConfig& c, const std::string& k) { c.fid_samples = as_int(v, k); }},
      {"fid_every_epochs", [](const json& v, ExperimentConfig& c, const std::string& k) { c.fid_every_epochs = as_int(v, k); }},
      {"checkpoint_every", [](const json& v, ExperimentConfig& c, const std::string& k) { c.checkpoint_every = as_int(v, k); }},
      {"grid_every_epochs", [](const json& v, ExperimentConfig& c, const std::string& k) { c.grid_every_epochs = as_int(v, k); }},
      {"eval_latents", [](const json& v, ExperimentConfig& c, const std::string& k) { c.eval_latents = as_int(v, k); }},
  };
  return table;
}

void require(bool ok, const std::string& field, const std::string& message) {
  if (!ok) throw ConfigError("field '" + field + "' " + message);
}

}  // namespace

ArchitectureOptions ExperimentConfig::architecture() const {
  ArchitectureOptions a;
  a.final_resolution = final_resolution;
  a.latent_dim = latent_dim;
  a.combine_kind = combine_kind;
  a.connection_mode = connection_mode;
  a.loss_kind = loss_kind;
  a.width_divisor = width_divisor;
  return a;
}

void ExperimentConfig::validate() const {
  require(latent_dim >= 1, "latent_dim", "must be >= 1");
  require(width_divisor >= 1, "width_divisor", "must be >= 1");
  require(batch_size >= 1, "batch_size", "must be >= 1");
  require(budget >= 0, "budget", "must be >= 0");
  require(lr >= 0.0, "lr", "must be >= 0");
  require(rmsprop_alpha >= 0.0 && rmsprop_alpha < 1.0, "rmsprop_alpha", "must lie in [0, 1)");
  require(rmsprop_eps > 0.0, "rmsprop_eps", "must be > 0");
  require(gp_lambda >= 0.0, "gp_lambda", "must be >= 0");
  require(drift >= 0.0, "drift", "must be >= 0");
  require(r1_gamma >= 0.0, "r1_gamma", "must be >= 0");
  require(ema_beta >= 0.0 && ema_beta < 1.0, "ema_beta", "must lie in [0, 1)");
  require(dataset_size >= 0, "dataset_size", "must be >= 0");
  require(dataset != DatasetKind::synthetic || dataset_size >= 1, "dataset_size",
          "must be >= 1 for a synthetic dataset");
  require(dataset == DatasetKind::synthetic || !dataset_root.empty(), "dataset_root",
          "is required for " + std::string(to_string(dataset)) + " datasets");
  require(dataset != DatasetKind::synthetic || final_resolution <= 128, "final_resolution",
          "must be <= 128 for synthetic datasets");
  require(fid_samples >= 0, "fid_samples", "must be >= 0");
  require(fid_samples != 1, "fid_samples", "must be 0 or >= 2");
  require(fid_every_epochs >= 1, "fid_every_epochs", "must be >= 1");
  require(checkpoint_every >= 0, "checkpoint_every", "must be >= 0");
  require(grid_every_epochs >= 0, "grid_every_epochs", "must be >= 0");
  require(eval_latents >= 1, "eval_latents", "must be >= 1");
  require(extractor == "random_projection", "extractor",
          "must be 'random_projection' (the bundled FID-proxy extractor)");
  require(!out_dir.empty(), "out_dir", "must not be empty");
  try {
    resolve_architecture(architecture());
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("architecture: ") + e.what());
  }
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["dataset"] = std::string(to_string(c.dataset));
  j["dataset_root"] = c.dataset_root;
  j["dataset_size"] = c.dataset_size;
  j["dataset_seed"] = c.dataset_seed;
  j["final_resolution"] = c.final_resolution;
  j["latent_dim"] = c.latent_dim;
  j["width_divisor"] = c.width_divisor;
  j["combine_kind"] = std::string(to_string(c.combine_kind));
  j["connection_mode"] = std::string(to_string(c.connection_mode));
  j["loss_kind"] = std::string(to_string(c.loss_kind));
  j["equalized_lr"] = c.equalized_lr;
  j["lr"] = c.lr;
  j["rmsprop_alpha"] = c.rmsprop_alpha;
  j["rmsprop_eps"] = c.rmsprop_eps;
  j["batch_size"] = c.batch_size;
  j["budget"] = c.budget;
  j["seed"] = c.seed;
  j["gp_lambda"] = c.gp_lambda;
  j["drift"] = c.drift;
  j["per_scale_alpha"] = c.per_scale_alpha;
  j["r1_gamma"] = c.r1_gamma;
  j["real_penalty"] = std::string(to_string(c.real_penalty));
  j["ema_beta"] = c.ema_beta;
  j["out_dir"] = c.out_dir;
  j["extractor"] = c.extractor;
  j["fid_samples"] = c.fid_samples;
  j["fid_every_epochs"] = c.fid_every_epochs;
  j["checkpoint_every"] = c.checkpoint_every;
  j["grid_every_epochs"] = c.grid_every_epochs;
  j["eval_latents"] = c.eval_latents;
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  const auto& table = setters();
  for (const auto& [key, value] : j.items()) {
    auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config field '" + key + "'");
    it->second(value, c, key);
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

void save_config(const ExperimentConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json(config).dump(2) << "\n";
}

uint64_t config_hash(const ExperimentConfig& config) {
  const std::string text = to_json(config).dump();
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace msggan
