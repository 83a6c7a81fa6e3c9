#include "msggan/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "msggan/errors.hpp"

namespace msggan {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

constexpr char kMagic[8] = {'M', 'S', 'G', 'G', 'A', 'N', 'C', 'K'};

template <typename T>
void append_le(std::vector<uint8_t>& out, T value) {
  const auto* p = reinterpret_cast<const uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T take_le(const std::vector<uint8_t>& in, size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw std::runtime_error("checkpoint is truncated");
  T value;
  std::memcpy(&value, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

json spec_json(const ArchitectureSpec& spec) {
  json j;
  j["final_resolution"] = spec.final_resolution;
  j["latent_dim"] = spec.latent_dim;
  j["width_divisor"] = spec.width_divisor;
  j["combine_kind"] = std::string(to_string(spec.combine_kind));
  j["connection_mode"] = std::string(to_string(spec.connection_mode));
  j["loss_kind"] = std::string(to_string(spec.loss_kind));
  j["connection_mask"] = std::vector<int64_t>(spec.connection_mask.begin(), spec.connection_mask.end());
  json gen = json::array();
  for (const auto& b : spec.gen_channels) gen.push_back({b.resolution, b.in_channels, b.out_channels});
  j["generator_channels"] = gen;
  json disc = json::array();
  for (const auto& b : spec.disc_channels) {
    disc.push_back({b.resolution, b.path_channels, b.combined_channels, b.conv1_out, b.conv2_out});
  }
  j["discriminator_channels"] = disc;
  return j;
}

std::string hex64(uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

}  // namespace

std::vector<uint8_t> serialize_checkpoint(const TrainingState& state) {
  const auto tensors = state.named_tensors();
  json index = json::array();
  uint64_t offset = 0;
  std::vector<torch::Tensor> blocks;
  for (const auto& [name, t] : tensors) {
    auto c = t.detach().to(torch::kFloat32).contiguous();
    index.push_back({{"name", name}, {"shape", c.sizes().vec()}, {"offset", offset}});
    offset += static_cast<uint64_t>(c.numel()) * sizeof(float);
    blocks.push_back(c);
  }
  json manifest;
  manifest["format_version"] = kCheckpointFormatVersion;
  manifest["config"] = to_json(state.config);
  manifest["config_hash"] = hex64(config_hash(state.config));
  manifest["spec"] = spec_json(state.spec);
  manifest["counters"] = {{"step", state.step},
                          {"real_images_shown", state.real_images_shown},
                          {"epoch_gen_loss_sum", state.epoch_sums.gen_loss},
                          {"epoch_disc_loss_sum", state.epoch_sums.disc_loss},
                          {"epoch_penalty_sum", state.epoch_sums.penalty},
                          {"epoch_steps", state.epoch_sums.steps}};
  manifest["rng"] = {{"seed", state.config.seed}, {"step", state.step}};
  manifest["tensors"] = index;
  manifest["payload_bytes"] = offset;
  const std::string text = manifest.dump();

  std::vector<uint8_t> out;
  out.reserve(sizeof(kMagic) + 12 + text.size() + offset);
  out.insert(out.end(), kMagic, kMagic + sizeof(kMagic));
  append_le<uint32_t>(out, kCheckpointFormatVersion);
  append_le<uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& c : blocks) {
    const float* data = c.data_ptr<float>();
    for (int64_t i = 0; i < c.numel(); ++i) append_le<uint32_t>(out, std::bit_cast<uint32_t>(data[i]));
  }
  return out;
}

TrainingState deserialize_checkpoint(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not a checkpoint file (bad magic)");
  }
  size_t pos = sizeof(kMagic);
  const auto version = take_le<uint32_t>(bytes, pos);
  if (version != kCheckpointFormatVersion) {
    throw CheckpointVersionError("checkpoint format version " + std::to_string(version) +
                                 " is incompatible with this build (expects " +
                                 std::to_string(kCheckpointFormatVersion) + ")");
  }
  const auto length = take_le<uint64_t>(bytes, pos);
  if (pos + length > bytes.size()) throw std::runtime_error("checkpoint manifest is truncated");
  const json manifest = json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                    bytes.begin() + static_cast<std::ptrdiff_t>(pos + length));
  pos += length;
  if (manifest.at("format_version").get<uint32_t>() != version) {
    throw CheckpointVersionError("checkpoint header and manifest versions disagree");
  }

  const auto config = config_from_json(manifest.at("config"));
  if (manifest.at("config_hash").get<std::string>() != hex64(config_hash(config))) {
    throw std::runtime_error("checkpoint config hash does not match its config");
  }
  TrainingState state = make_training_state(config);
  if (spec_json(state.spec) != manifest.at("spec")) {
    throw std::runtime_error("checkpoint architecture does not match the one its config resolves to");
  }
  state.step = manifest.at("counters").at("step").get<int64_t>();
  const auto& counters = manifest.at("counters");
  state.real_images_shown = counters.at("real_images_shown").get<int64_t>();
  state.epoch_sums.gen_loss = counters.at("epoch_gen_loss_sum").get<double>();
  state.epoch_sums.disc_loss = counters.at("epoch_disc_loss_sum").get<double>();
  state.epoch_sums.penalty = counters.at("epoch_penalty_sum").get<double>();
  state.epoch_sums.steps = counters.at("epoch_steps").get<int64_t>();

  const size_t payload = pos;
  if (payload + manifest.at("payload_bytes").get<uint64_t>() != bytes.size()) {
    throw std::runtime_error("checkpoint payload size does not match its manifest");
  }
  auto targets = state.named_tensors();
  const auto& index = manifest.at("tensors");
  if (index.size() != targets.size()) {
    throw std::runtime_error("checkpoint holds " + std::to_string(index.size()) + " tensors, expected " +
                             std::to_string(targets.size()));
  }
  torch::NoGradGuard no_grad;
  for (const auto& entry : index) {
    const auto name = entry.at("name").get<std::string>();
    auto it = targets.find(name);
    if (it == targets.end()) throw std::runtime_error("unexpected tensor '" + name + "' in checkpoint");
    const auto shape = entry.at("shape").get<std::vector<int64_t>>();
    if (it->second.sizes().vec() != shape) throw std::runtime_error("tensor '" + name + "' has the wrong shape");
    size_t at = payload + entry.at("offset").get<uint64_t>();
    auto block = torch::empty(shape, torch::kFloat32);
    float* data = block.data_ptr<float>();
    for (int64_t i = 0; i < block.numel(); ++i) data[i] = std::bit_cast<float>(take_le<uint32_t>(bytes, at));
    it->second.copy_(block);
  }
  return state;
}

std::vector<uint8_t> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void save_checkpoint(const TrainingState& state, const fs::path& path) {
  const auto bytes = serialize_checkpoint(state);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

TrainingState load_checkpoint(const fs::path& path) { return deserialize_checkpoint(read_file_bytes(path)); }

}  // namespace msggan
