#include "msggan/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "msggan/checkpoint.hpp"
#include "msggan/errors.hpp"
#include "msggan/evaluation.hpp"
#include "msggan/image_io.hpp"
#include "msggan/metrics.hpp"

namespace msggan {

namespace fs = std::filesystem;

namespace {

constexpr uint64_t kInitStream = 0x494e4954;   // "INIT"
constexpr uint64_t kEvalStream = 0x4556414c;   // "EVAL"
constexpr uint64_t kStepStream = 0x53544550;   // "STEP"
constexpr uint64_t kDataStream = 0x44415441;   // "DATA"
constexpr uint64_t kFidStream = 0x464944;      // "FID"

std::vector<std::pair<std::string, torch::Tensor>> named_params(const torch::nn::Module& m) {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& item : m.named_parameters()) out.emplace_back(item.key(), item.value());
  return out;
}

RmsPropOptions optimizer_options(const ExperimentConfig& c) { return {c.lr, c.rmsprop_alpha, c.rmsprop_eps}; }

void copy_parameters(const torch::nn::Module& from, torch::nn::Module& to) {
  torch::NoGradGuard no_grad;
  auto src = from.named_parameters();
  for (auto& item : to.named_parameters()) item.value().copy_(src[item.key()]);
}

void set_requires_grad(torch::nn::Module& m, bool flag) {
  for (auto& p : m.parameters()) p.set_requires_grad(flag);
}

bool finite(const torch::Tensor& t) { return std::isfinite(t.item<double>()); }

}  // namespace

std::map<std::string, torch::Tensor> TrainingState::named_tensors() const {
  std::map<std::string, torch::Tensor> out;
  for (const auto& [k, v] : named_params(*generator)) out["gen." + k] = v;
  for (const auto& [k, v] : named_params(*discriminator)) out["disc." + k] = v;
  for (const auto& [k, v] : gen_optimizer->moments()) out["gen_opt." + k] = v;
  for (const auto& [k, v] : disc_optimizer->moments()) out["disc_opt." + k] = v;
  if (ema) {
    for (const auto& [k, v] : named_params(*ema)) out["ema." + k] = v;
  }
  out["fixed_eval_latents"] = fixed_eval_latents;
  return out;
}

TrainingState make_training_state(const ExperimentConfig& config) {
  config.validate();
  TrainingState s;
  s.config = config;
  s.spec = resolve_architecture(config.architecture());
  s.generator = Generator(s.spec, config.equalized_lr);
  s.discriminator = Discriminator(s.spec, config.equalized_lr);
  s.gen_optimizer = std::make_unique<RmsProp>(named_params(*s.generator), optimizer_options(config));
  s.disc_optimizer = std::make_unique<RmsProp>(named_params(*s.discriminator), optimizer_options(config));
  if (config.ema_beta > 0.0) {
    s.ema = Generator(s.spec, config.equalized_lr);
    set_requires_grad(*s.ema, false);
  }
  s.fixed_eval_latents = torch::zeros({config.eval_latents, config.latent_dim});
  return s;
}

TrainingState init_training(const ExperimentConfig& config, std::optional<uint64_t> seed) {
  ExperimentConfig c = config;
  if (seed) c.seed = *seed;
  TrainingState s = make_training_state(c);
  auto gen_rng = at::detail::createCPUGenerator(derive_seed(c.seed, kInitStream, 0));
  auto disc_rng = at::detail::createCPUGenerator(derive_seed(c.seed, kInitStream, 1));
  s.generator->reset_parameters(gen_rng);
  s.discriminator->reset_parameters(disc_rng);
  if (s.ema) copy_parameters(*s.generator, *s.ema);
  auto eval_rng = at::detail::createCPUGenerator(derive_seed(c.seed, kEvalStream));
  s.fixed_eval_latents = sample_latent(c.eval_latents, c.latent_dim, eval_rng);
  return s;
}

StepReport train_step(TrainingState& state, const RealBatch& real) {
  const auto& spec = state.spec;
  const int64_t top = spec.final_resolution;
  if (real.images.dim() != 4 || real.images.size(1) != 3 || real.images.size(2) != top ||
      real.images.size(3) != top) {
    throw std::invalid_argument("train_step: real batch must be N x 3 x " + std::to_string(top) + " x " +
                                std::to_string(top));
  }
  for (int64_t r : spec.connection_mask) {
    if (!real.pyramid.contains(r)) {
      throw std::invalid_argument("train_step: real pyramid lacks resolution " + std::to_string(r));
    }
  }
  const int64_t batch = real.images.size(0);
  if (real.pyramid.batch_size() != batch) throw std::invalid_argument("train_step: pyramid batch differs");

  auto rng = at::detail::createCPUGenerator(derive_seed(state.config.seed, kStepStream, state.step));
  auto& gen = state.generator;
  auto& disc = state.discriminator;
  Critic critic = [&disc](const MultiScaleImageSet& x) { return disc->forward(x); };
  const bool wgan = spec.loss_kind == LossKind::wgan_gp;

  StepReport report;
  // Only the scales the critic reads enter the losses and the penalty average.
  const auto real_inputs = real.pyramid.restricted_to(spec.connection_mask);

  // Discriminator update. Parameters and moments are kept so a divergent
  // generator loss can roll the step back.
  std::map<std::string, torch::Tensor> disc_backup;
  {
    MultiScaleImageSet fake;
    {
      torch::NoGradGuard no_grad;
      fake = gen->forward(sample_latent(batch, spec.latent_dim, rng)).restricted_to(spec.connection_mask);
    }
    DiscriminatorLoss loss;
    if (wgan) {
      WganGpOptions o{state.config.gp_lambda, state.config.drift, state.config.per_scale_alpha};
      loss = wgan_gp_disc_loss(critic, real_inputs, fake, o, rng);
    } else {
      NonSatOptions o{state.config.r1_gamma, state.config.real_penalty};
      loss = nonsat_disc_loss(critic, real_inputs, fake, o);
    }
    if (!finite(loss.total)) throw TrainingDivergence(state.step, "non-finite discriminator loss");
    state.disc_optimizer->zero_grad();
    loss.total.backward();
    for (const auto& [k, v] : named_params(*disc)) disc_backup["p." + k] = v.detach().clone();
    for (const auto& [k, v] : state.disc_optimizer->moments()) disc_backup["m." + k] = v.clone();
    state.disc_optimizer->step();
    report.losses = loss.report;
  }

  // Generator update with the critic frozen.
  set_requires_grad(*disc, false);
  torch::Tensor gen_loss;
  try {
    auto fake = gen->forward(sample_latent(batch, spec.latent_dim, rng)).restricted_to(spec.connection_mask);
    gen_loss = wgan ? wgan_gen_loss(critic, fake) : nonsat_gen_loss(critic, fake);
  } catch (...) {
    set_requires_grad(*disc, true);
    throw;
  }
  set_requires_grad(*disc, true);
  if (!finite(gen_loss)) {
    torch::NoGradGuard no_grad;
    for (auto& [k, v] : named_params(*disc)) v.copy_(disc_backup.at("p." + k));
    std::map<std::string, torch::Tensor> moments;
    for (const auto& [k, v] : state.disc_optimizer->moments()) moments[k] = disc_backup.at("m." + k);
    state.disc_optimizer->load_moments(moments);
    throw TrainingDivergence(state.step, "non-finite generator loss");
  }
  state.gen_optimizer->zero_grad();
  gen_loss.backward();
  for (int64_t r : spec.resolutions()) {
    double sq = 0.0;
    for (const auto& p : gen->to_rgb_parameters(r)) {
      if (p.grad().defined()) sq += p.grad().to(torch::kFloat64).pow(2).sum().item<double>();
    }
    report.to_rgb_grad_norms[r] = std::sqrt(sq);
  }
  state.gen_optimizer->step();
  report.losses.gen_loss = gen_loss.item<double>();

  if (state.ema) {
    torch::NoGradGuard no_grad;
    const double beta = state.config.ema_beta;
    auto src = gen->named_parameters();
    for (auto& item : state.ema->named_parameters()) item.value().mul_(beta).add_(src[item.key()], 1.0 - beta);
  }

  ++state.step;
  state.real_images_shown += batch;
  return report;
}

fs::path latest_checkpoint_path(const fs::path& out_dir) { return out_dir / "checkpoints" / "latest.ckpt"; }

namespace {

std::string epoch_name(int64_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "epoch_%06lld", static_cast<long long>(epoch));
  return buf;
}

std::string format_double(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

// Keeps the header and the rows whose leading step field is <= max_step.
void truncate_csv(const fs::path& path, int64_t max_step, const std::string& header) {
  std::vector<std::string> kept;
  if (fs::exists(path)) {
    std::ifstream in(path);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (first) {
        first = false;
        continue;
      }
      if (line.empty()) continue;
      const auto comma = line.find(',');
      if (std::stoll(line.substr(0, comma)) <= max_step) kept.push_back(line);
    }
  }
  std::ofstream out(path, std::ios::trunc);
  out << header << "\n";
  for (const auto& l : kept) out << l << "\n";
}

bool holds_run(const fs::path& dir) {
  return fs::exists(dir / "config.json") || fs::exists(dir / "checkpoints") || fs::exists(dir / "metrics.csv");
}

nlohmann::json comparable(const ExperimentConfig& c) {
  auto j = to_json(c);
  j.erase("budget");
  return j;
}

}  // namespace

TrainResult train(const ExperimentConfig& config, const TrainOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  config.validate();
  const fs::path out = config.out_dir;
  const std::string metrics_header = "step,real_images_shown,gen_loss,disc_loss,penalty,fid_proxy";
  const std::string grad_header = "step,scale,to_rgb_grad_norm";

  TrainingState state;
  if (options.resume) {
    const auto path = latest_checkpoint_path(out);
    if (!fs::exists(path)) throw std::runtime_error("nothing to resume: " + path.string() + " does not exist");
    state = load_checkpoint(path);
    if (comparable(state.config) != comparable(config)) {
      throw ConfigError("resume: configuration differs from the one stored in " + path.string() +
                        " (only budget may change)");
    }
    state.config.budget = config.budget;
    truncate_csv(out / "metrics.csv", state.step, metrics_header);
    truncate_csv(out / "grad_norms.csv", state.step, grad_header);
  } else {
    if (holds_run(out)) {
      throw ConfigError("out_dir '" + out.string() +
                        "' already holds a run; resume it or choose another output directory");
    }
    fs::create_directories(out);
    state = init_training(config);
    std::ofstream(out / "metrics.csv", std::ios::trunc) << metrics_header << "\n";
    std::ofstream(out / "grad_norms.csv", std::ios::trunc) << grad_header << "\n";
  }
  save_config(state.config, out / "config.json");
  fs::create_directories(out / "checkpoints");
  fs::create_directories(out / "snapshots");
  fs::create_directories(out / "grids");

  auto dataset = std::make_shared<const ImageDataset>(materialize(dataset_source(state.config)));
  if (dataset->resolution() != state.spec.final_resolution) {
    throw ConfigError("dataset resolution " + std::to_string(dataset->resolution()) +
                      " does not match final_resolution");
  }
  BatchLoader loader(dataset, state.config.batch_size, derive_seed(state.config.seed, kDataStream),
                     state.spec.resolutions());
  loader.seek(state.step);
  const int64_t per_epoch = loader.batches_per_epoch();
  const RandomProjectionExtractor extractor;
  const uint64_t fid_seed = derive_seed(state.config.seed, kFidStream);
  const int64_t fid_n = state.config.fid_samples;

  TrainResult result;
  result.out_dir = out;
  if (fid_n > 0) {
    TrainingState initial = init_training(state.config);
    result.initial_fid_proxy = fid_proxy(initial.eval_generator(), *dataset, extractor, fid_n, fid_seed);
  }

  std::ofstream metrics(out / "metrics.csv", std::ios::app);
  std::ofstream grads(out / "grad_norms.csv", std::ios::app);
  const uint64_t latent_digest = tensor_digest(state.fixed_eval_latents);

  auto snapshot_epoch_start = [&]() {
    if (state.step % per_epoch != 0) return;
    const int64_t epoch = state.step / per_epoch;
    Snapshot snap;
    snap.epoch = epoch;
    snap.latent_digest = latent_digest;
    auto images = generate(state.eval_generator(), state.fixed_eval_latents);
    for (const auto& [r, t] : images) snap.images.set(r, to_unit_range(t).clamp(0.0, 1.0));
    write_snapshot(out / "snapshots" / (epoch_name(epoch) + ".snap"), snap);
    const int64_t every = state.config.grid_every_epochs;
    if (every > 0 && epoch % every == 0) write_grids(state.eval_generator(), state.fixed_eval_latents, out / "grids", epoch_name(epoch));
  };

  auto write_row = [&](bool with_fid) {
    const auto& sums = state.epoch_sums;
    MetricRow row;
    row.step = state.step;
    row.real_images_shown = state.real_images_shown;
    const double n = static_cast<double>(std::max<int64_t>(1, sums.steps));
    row.gen_loss = sums.gen_loss / n;
    row.disc_loss = sums.disc_loss / n;
    row.penalty = sums.penalty / n;
    if (with_fid && fid_n > 0) {
      row.fid_proxy = fid_proxy(state.eval_generator(), *dataset, extractor, fid_n, fid_seed);
      result.final_fid_proxy = row.fid_proxy;
    }
    metrics << row.step << "," << row.real_images_shown << "," << format_double(row.gen_loss) << ","
            << format_double(row.disc_loss) << "," << format_double(row.penalty) << ","
            << (row.fid_proxy ? format_double(*row.fid_proxy) : std::string()) << "\n";
    metrics.flush();
    result.rows.push_back(row);
    state.epoch_sums = {};
  };

  const int64_t budget = state.config.budget;
  const int64_t ckpt_every = state.config.checkpoint_every;
  int64_t last_row_step = result.rows.empty() ? -1 : result.rows.back().step;
  while (state.real_images_shown < budget) {
    if (options.stop_after_images >= 0 && state.real_images_shown >= options.stop_after_images) {
      result.interrupted = true;
      break;
    }
    snapshot_epoch_start();
    const auto real = loader.next();
    StepReport report;
    try {
      report = train_step(state, real);
    } catch (const TrainingDivergence& e) {
      result.diverged = true;
      result.divergence_message = e.what();
      save_checkpoint(state, out / "checkpoints" / "diverged.ckpt");
      std::cerr << "msggan: " << e.what() << "\n";
      break;
    }
    state.epoch_sums.gen_loss += report.losses.gen_loss;
    state.epoch_sums.disc_loss += report.losses.disc_loss;
    state.epoch_sums.penalty += report.losses.penalty;
    ++state.epoch_sums.steps;

    if (state.step % per_epoch == 0) {
      const int64_t epochs_done = state.step / per_epoch;
      const bool final_step = state.real_images_shown >= budget;
      for (const auto& [r, norm] : report.to_rgb_grad_norms) {
        grads << state.step << "," << r << "," << format_double(norm) << "\n";
      }
      grads.flush();
      write_row(final_step || epochs_done % state.config.fid_every_epochs == 0);
      last_row_step = state.step;
      if (options.verbose) {
        const auto& row = result.rows.back();
        std::cerr << "epoch " << epochs_done << " images " << row.real_images_shown << " D " << row.disc_loss
                  << " G " << row.gen_loss;
        if (row.fid_proxy) std::cerr << " fid_proxy " << *row.fid_proxy;
        std::cerr << "\n";
      }
    }
    if (ckpt_every > 0 &&
        state.real_images_shown / ckpt_every != (state.real_images_shown - real.images.size(0)) / ckpt_every) {
      char name[48];
      std::snprintf(name, sizeof(name), "images_%010lld.ckpt", static_cast<long long>(state.real_images_shown));
      save_checkpoint(state, out / "checkpoints" / name);
      save_checkpoint(state, latest_checkpoint_path(out));
    }
  }

  if (!result.diverged && !result.interrupted && state.step > 0) {
    if (last_row_step != state.step) {
      write_row(true);
    } else if (!result.final_fid_proxy && fid_n > 0) {
      result.final_fid_proxy = fid_proxy(state.eval_generator(), *dataset, extractor, fid_n, fid_seed);
    }
    write_grids(state.eval_generator(), state.fixed_eval_latents, out / "grids", "final");
  }

  // Stability over everything snapshotted so far.
  const auto snapshots = read_snapshots(out / "snapshots");
  if (snapshots.size() >= 2) write_stability_outputs(stability_curve(std::span<const Snapshot>(snapshots)), out);

  const fs::path final_path =
      result.interrupted ? latest_checkpoint_path(out) : out / "checkpoints" / "final.ckpt";
  if (!result.diverged) save_checkpoint(state, final_path);
  save_checkpoint(state, latest_checkpoint_path(out));
  result.final_checkpoint = result.diverged ? out / "checkpoints" / "diverged.ckpt" : final_path;
  result.step = state.step;
  result.real_images_shown = state.real_images_shown;
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  nlohmann::json summary;
  summary["step"] = result.step;
  summary["real_images_shown"] = result.real_images_shown;
  summary["seconds"] = result.seconds;
  summary["diverged"] = result.diverged;
  summary["interrupted"] = result.interrupted;
  if (result.diverged) summary["divergence"] = result.divergence_message;
  summary["initial_fid_proxy"] = result.initial_fid_proxy ? nlohmann::json(*result.initial_fid_proxy) : nlohmann::json();
  summary["final_fid_proxy"] = result.final_fid_proxy ? nlohmann::json(*result.final_fid_proxy) : nlohmann::json();
  summary["fid_proxy_note"] = "random-projection features; not comparable to published FID";
  std::ofstream(out / "run_summary.json", std::ios::trunc) << summary.dump(2) << "\n";
  return result;
}

}  // namespace msggan
