// Command-line entry point: train, sample, evaluate, stability, sweep, ablate.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "msggan/checkpoint.hpp"
#include "msggan/config.hpp"
#include "msggan/errors.hpp"
#include "msggan/evaluation.hpp"
#include "msggan/experiments.hpp"
#include "msggan/metrics.hpp"
#include "msggan/training.hpp"

namespace fs = std::filesystem;
using namespace msggan;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kVersion = 3, kDiverged = 4 };

void check_device() {
  const char* device = std::getenv("MSGGAN_DEVICE");
  if (device && std::string(device) != "cpu" && std::string(device) != "") {
    throw ConfigError(std::string("MSGGAN_DEVICE='") + device + "' is not available; this build supports only 'cpu'");
  }
}

struct Common {
  std::string config;
  std::optional<uint64_t> seed;
  std::string out;
};

ExperimentConfig load_with_overrides(const Common& c) {
  ExperimentConfig config = load_config(c.config);
  if (c.seed) config.seed = *c.seed;
  if (!c.out.empty()) config.out_dir = c.out;
  config.validate();
  return config;
}

void print_fid(const char* label, const std::optional<double>& v) {
  std::cout << label << ": ";
  if (v) {
    std::cout << *v << "\n";
  } else {
    std::cout << "-\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-scale gradient GAN: training and evaluation"};
  app.require_subcommand(1);

  Common train_args;
  bool resume = false;
  bool verbose = false;
  auto* train_cmd = app.add_subcommand("train", "train from a config file");
  train_cmd->add_option("--config", train_args.config, "config JSON")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--seed", train_args.seed, "override the config seed");
  train_cmd->add_option("--out", train_args.out, "override the output directory");
  train_cmd->add_flag("--resume", resume, "continue from <out>/checkpoints/latest.ckpt");
  train_cmd->add_flag("-v,--verbose", verbose, "print one line per epoch");

  std::string sample_ckpt, sample_out = "samples";
  int64_t sample_n = 36;
  uint64_t sample_seed = 0;
  bool use_fixed = false;
  auto* sample_cmd = app.add_subcommand("sample", "write sample grids from a checkpoint");
  sample_cmd->add_option("--checkpoint", sample_ckpt)->required()->check(CLI::ExistingFile);
  sample_cmd->add_option("-n,--n", sample_n, "number of latents")->check(CLI::PositiveNumber);
  sample_cmd->add_option("--seed", sample_seed, "latent seed");
  sample_cmd->add_option("--out", sample_out, "output directory");
  sample_cmd->add_flag("--fixed-latents", use_fixed, "use the run's fixed evaluation latents");

  std::string eval_ckpt, eval_config, eval_out;
  int64_t eval_n = 512;
  uint64_t eval_seed = 0;
  auto* eval_cmd = app.add_subcommand("evaluate", "FID-proxy and IS-proxy of a checkpoint against a dataset");
  eval_cmd->add_option("--checkpoint", eval_ckpt)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--config", eval_config, "take the dataset from this config instead of the checkpoint's");
  eval_cmd->add_option("-n,--n", eval_n, "images per side")->check(CLI::Range(int64_t{2}, int64_t{1} << 30));
  eval_cmd->add_option("--seed", eval_seed, "latent seed");
  eval_cmd->add_option("--out", eval_out, "write evaluation.json into this directory");

  std::string stab_run, stab_out;
  auto* stab_cmd = app.add_subcommand("stability", "stability curve from a run's epoch snapshots");
  stab_cmd->add_option("--run", stab_run, "run directory")->required()->check(CLI::ExistingDirectory);
  stab_cmd->add_option("--out", stab_out, "output directory (default <run>_stability)");

  Common sweep_args;
  std::vector<double> lrs;
  auto* sweep_cmd = app.add_subcommand("sweep", "learning-rate sweep");
  sweep_cmd->add_option("--config", sweep_args.config)->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--seed", sweep_args.seed);
  sweep_cmd->add_option("--out", sweep_args.out, "root directory for the child runs");
  sweep_cmd->add_option("--lrs", lrs, "learning rates")->delimiter(',')->required();
  sweep_cmd->add_flag("-v,--verbose", verbose);

  Common ablate_args;
  std::vector<std::string> modes;
  std::vector<uint64_t> seeds;
  auto* ablate_cmd = app.add_subcommand("ablate", "connection-mode ablation");
  ablate_cmd->add_option("--config", ablate_args.config)->required()->check(CLI::ExistingFile);
  ablate_cmd->add_option("--seed", ablate_args.seed);
  ablate_cmd->add_option("--out", ablate_args.out, "root directory for the child runs");
  ablate_cmd->add_option("--modes", modes, "subset of none,coarse,middle,fine,all")->delimiter(',')->required();
  ablate_cmd->add_option("--seeds", seeds, "seeds to repeat every mode with")->delimiter(',');
  ablate_cmd->add_flag("-v,--verbose", verbose);

  CLI11_PARSE(app, argc, argv);

  try {
    check_device();

    if (*train_cmd) {
      const auto config = load_with_overrides(train_args);
      TrainOptions options;
      options.resume = resume;
      options.verbose = verbose;
      const auto result = train(config, options);
      std::cout << "steps: " << result.step << "\nreal_images_shown: " << result.real_images_shown << "\n";
      print_fid("initial_fid_proxy", result.initial_fid_proxy);
      print_fid("final_fid_proxy", result.final_fid_proxy);
      std::cout << "checkpoint: " << result.final_checkpoint.string() << "\n";
      if (result.diverged) {
        std::cerr << "msggan: " << result.divergence_message << "\n";
        return kDiverged;
      }
      return kOk;
    }

    if (*sample_cmd) {
      auto state = load_checkpoint(sample_ckpt);
      torch::Tensor latents;
      if (use_fixed) {
        latents = state.fixed_eval_latents.slice(0, 0, std::min(sample_n, state.fixed_eval_latents.size(0)));
      } else {
        auto gen = at::detail::createCPUGenerator(sample_seed);
        latents = sample_latent(sample_n, state.spec.latent_dim, gen);
      }
      write_grids(state.eval_generator(), latents, sample_out, "samples");
      std::cout << "wrote " << (fs::path(sample_out) / "samples_scales.png").string() << " and "
                << (fs::path(sample_out) / "samples_top.png").string() << "\n";
      return kOk;
    }

    if (*eval_cmd) {
      auto state = load_checkpoint(eval_ckpt);
      ExperimentConfig data_config = eval_config.empty() ? state.config : load_config(eval_config);
      data_config.final_resolution = state.spec.final_resolution;
      const ImageDataset dataset = materialize(dataset_source(data_config));
      const RandomProjectionExtractor extractor;
      const double fid = fid_proxy(state.eval_generator(), dataset, extractor, eval_n, eval_seed);
      auto gen = at::detail::createCPUGenerator(eval_seed);
      auto fake = generate(state.eval_generator(), sample_latent(eval_n, state.spec.latent_dim, gen)).top();
      const auto probs = to_eigen(extractor.probabilities(fake.clamp(-1.0, 1.0)));
      const auto is = inception_score(probs, std::min<int64_t>(10, eval_n));
      nlohmann::json j;
      j["fid_proxy"] = fid;
      j["is_proxy_mean"] = is.mean;
      j["is_proxy_std"] = is.stddev;
      j["samples"] = eval_n;
      j["step"] = state.step;
      j["real_images_shown"] = state.real_images_shown;
      j["note"] = "random-projection extractor; not comparable to published FID or IS";
      std::cout << j.dump(2) << "\n";
      if (!eval_out.empty()) {
        fs::create_directories(eval_out);
        std::ofstream(fs::path(eval_out) / "evaluation.json") << j.dump(2) << "\n";
      }
      return kOk;
    }

    if (*stab_cmd) {
      const fs::path run = fs::path(stab_run).lexically_normal();
      const auto curve = stability_curve(run / "snapshots");
      fs::path out = stab_out.empty() ? fs::path(run.string() + "_stability") : fs::path(stab_out);
      write_stability_outputs(curve, out);
      for (const auto& [r, slope] : final_third_slopes(curve)) {
        std::cout << "scale " << r << ": final-third slope " << slope << "\n";
      }
      std::cout << "wrote " << (out / "stability.csv").string() << "\n";
      return kOk;
    }

    if (*sweep_cmd) {
      const auto config = load_with_overrides(sweep_args);
      const fs::path root = sweep_args.out.empty() ? fs::path(config.out_dir) : fs::path(sweep_args.out);
      const auto rows = lr_sweep(config, lrs, root, verbose);
      write_rows_csv(rows, root / "sweep.csv");
      const auto table = format_rows_table(rows);
      std::ofstream(root / "sweep.txt") << table;
      std::cout << table;
      return std::all_of(rows.begin(), rows.end(), [](const RunRow& r) { return r.ok; }) ? kOk : kFailure;
    }

    if (*ablate_cmd) {
      const auto config = load_with_overrides(ablate_args);
      std::vector<ConnectionMode> parsed;
      for (const auto& m : modes) parsed.push_back(parse_connection_mode(m, "modes"));
      const fs::path root = ablate_args.out.empty() ? fs::path(config.out_dir) : fs::path(ablate_args.out);
      const auto rows = ablate(config, parsed, root, seeds, verbose);
      write_rows_csv(rows, root / "ablation.csv");
      std::string table = format_rows_table(rows);
      table += "\nmedian fid_proxy by mode\n";
      for (const auto& [mode, median] : median_by_mode(rows)) {
        table += "  " + std::string(to_string(mode)) + ": " + (median ? std::to_string(*median) : "-") + "\n";
      }
      std::ofstream(root / "ablation.txt") << table;
      std::cout << table;
      return std::all_of(rows.begin(), rows.end(), [](const RunRow& r) { return r.ok; }) ? kOk : kFailure;
    }
  } catch (const ConfigError& e) {
    std::cerr << "msggan: configuration error: " << e.what() << "\n";
    return kConfig;
  } catch (const CheckpointVersionError& e) {
    std::cerr << "msggan: incompatible checkpoint: " << e.what() << "\n";
    return kVersion;
  } catch (const std::exception& e) {
    std::cerr << "msggan: error: " << e.what() << "\n";
    return kFailure;
  }
  return kOk;
}
