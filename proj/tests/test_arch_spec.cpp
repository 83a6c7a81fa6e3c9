#include <doctest.h>

#include <random>

#include "msggan/arch_spec.hpp"
#include "msggan/discriminator.hpp"
#include "msggan/errors.hpp"
#include "msggan/generator.hpp"

using namespace msggan;

namespace {

int64_t module_numel(const torch::nn::Module& m) {
  int64_t n = 0;
  for (const auto& p : m.parameters()) n += p.numel();
  return n;
}

ArchitectureSpec spec_for(int64_t final_res, CombineKind combine = CombineKind::simple,
                          ConnectionMode mode = ConnectionMode::all, int64_t divisor = 1,
                          int64_t latent = 512) {
  ArchitectureOptions o;
  o.final_resolution = final_res;
  o.latent_dim = latent;
  o.combine_kind = combine;
  o.connection_mode = mode;
  o.width_divisor = divisor;
  return resolve_architecture(o);
}

}  // namespace

TEST_CASE("resolution schedule doubles from 4") {
  CHECK(resolution_schedule(4) == std::vector<int64_t>{4});
  CHECK(resolution_schedule(32) == std::vector<int64_t>{4, 8, 16, 32});
  CHECK(resolution_schedule(1024).size() == 9);
  CHECK_THROWS_AS(resolution_schedule(48), ConfigError);
  CHECK_THROWS_AS(resolution_schedule(2), ConfigError);
  CHECK_THROWS_AS(resolution_schedule(2048), ConfigError);
}

TEST_CASE("generator widths per block") {
  const std::vector<int64_t> expected = {512, 512, 512, 512, 256, 128, 64, 32, 16};
  const auto blocks = generator_channel_schedule(1024);
  REQUIRE(blocks.size() == expected.size());
  int64_t in = 512;
  for (size_t i = 0; i < blocks.size(); ++i) {
    CHECK(blocks[i].resolution == (int64_t{4} << i));
    CHECK(blocks[i].out_channels == expected[i]);
    CHECK(blocks[i].in_channels == in);
    in = expected[i];
  }
  const auto small = generator_channel_schedule(32);
  REQUIRE(small.size() == 4);
  CHECK(small.back().out_channels == 512);
}

TEST_CASE("discriminator widths per block") {
  // (resolution, combined width, conv1 out, conv2 out) rows for phi_simple.
  struct Row {
    int64_t r, combined, conv1, conv2;
  };
  const std::vector<Row> rows = {{1024, 16, 16, 32},  {512, 35, 32, 64},    {256, 67, 64, 128},
                                 {128, 131, 128, 256}, {64, 259, 256, 512},  {32, 515, 512, 512},
                                 {16, 515, 512, 512},  {8, 515, 512, 512},   {4, 515, 512, 512}};
  const auto spec = spec_for(1024);
  REQUIRE(spec.disc_channels.size() == rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    const auto& b = spec.disc_channels[i];
    CAPTURE(b.resolution);
    CHECK(b.resolution == rows[i].r);
    CHECK(b.combined_channels == rows[i].combined);
    CHECK(b.conv1_in() == rows[i].combined + 1);
    CHECK(b.conv1_out == rows[i].conv1);
    CHECK(b.conv2_out == rows[i].conv2);
  }
  CHECK(spec.disc_channels.front().is_top);
  CHECK(spec.disc_channels.back().is_final);
}

TEST_CASE("lin_cat at block 3 yields 32 + 64 channels") {
  const auto spec = spec_for(1024, CombineKind::lin_cat);
  const auto& b = spec.disc_channels[2];
  CHECK(b.resolution == 256);
  CHECK(b.projection_channels == 32);
  CHECK(b.combined_channels == 96);
}

TEST_CASE("combine widths hold for random valid specs") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> final_log(2, 10), divisor_log(0, 6), kind(0, 2), mode(0, 4);
  for (int trial = 0; trial < 200; ++trial) {
    const int64_t final_res = int64_t{1} << final_log(rng);
    const auto combine = static_cast<CombineKind>(kind(rng));
    auto connection = static_cast<ConnectionMode>(mode(rng));
    const int64_t divisor = int64_t{1} << divisor_log(rng);
    ArchitectureSpec spec;
    try {
      spec = spec_for(final_res, combine, connection, divisor);
    } catch (const ConfigError&) {
      // coarse/middle/fine need their resolutions in the schedule
      CHECK(connection != ConnectionMode::none);
      CHECK(connection != ConnectionMode::all);
      continue;
    }
    for (const auto& b : spec.disc_channels) {
      CAPTURE(final_res);
      CAPTURE(b.resolution);
      if (!b.merges_image) {
        CHECK(b.combined_channels == b.path_channels);
        continue;
      }
      switch (combine) {
        case CombineKind::simple:
          CHECK(b.combined_channels == b.path_channels + 3);
          break;
        case CombineKind::lin_cat:
          CHECK(b.combined_channels == b.path_channels + std::max<int64_t>(1, b.path_channels / 2));
          break;
        case CombineKind::cat_lin:
          CHECK(b.combined_channels == b.path_channels);
          break;
      }
      // The module agrees with the schedule.
      Combine phi(combine, b.path_channels);
      auto out = phi->forward(torch::zeros({2, 3, 4, 4}), torch::zeros({2, b.path_channels, 4, 4}));
      CHECK(out.size(1) == b.combined_channels);
      CHECK(phi->output_channels() == b.combined_channels);
    }
  }
}

TEST_CASE("connection masks per ablation mode") {
  const auto schedule = resolution_schedule(1024);
  CHECK(connection_mask(ConnectionMode::none, schedule) == std::set<int64_t>{1024});
  CHECK(connection_mask(ConnectionMode::coarse, schedule) == std::set<int64_t>{4, 8, 1024});
  CHECK(connection_mask(ConnectionMode::middle, schedule) == std::set<int64_t>{16, 32, 1024});
  CHECK(connection_mask(ConnectionMode::fine, schedule) == std::set<int64_t>{64, 128, 256, 512, 1024});
  CHECK(connection_mask(ConnectionMode::all, schedule).size() == 9);
  const auto s32 = resolution_schedule(32);
  CHECK(connection_mask(ConnectionMode::coarse, s32) == std::set<int64_t>{4, 8, 32});
  CHECK_THROWS_AS(connection_mask(ConnectionMode::fine, s32), ConfigError);
}

TEST_CASE("parsers name the field and list the choices") {
  CHECK(parse_combine_kind("lin_cat") == CombineKind::lin_cat);
  CHECK(parse_connection_mode("coarse") == ConnectionMode::coarse);
  CHECK(parse_loss_kind("nonsat_gp") == LossKind::nonsat_gp);
  try {
    parse_combine_kind("concat");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    CHECK(what.find("combine_kind") != std::string::npos);
    CHECK(what.find("lin_cat") != std::string::npos);
  }
}

TEST_CASE("parameter counts: closed form, hand count and modules agree") {
  // 8x8, phi_simple: hand count from the layer list.
  const int64_t c = 512, l = 512;
  const int64_t gen_hand = (l * c * 16 + c) + (c * c * 9 + c) + (c * 3 + 3)  // block 4
                           + 2 * (c * c * 9 + c) + (c * 3 + 3);              // block 8
  const int64_t disc_hand = (3 * c + c)                                    // from_rgb
                            + ((c + 1) * c * 9 + c) + (c * c * 9 + c)      // block 8
                            + ((c + 4) * c * 9 + c) + (c * c * 16 + c)     // block 4
                            + (c + 1);                                     // critic
  const auto spec = spec_for(8);
  const auto count = parameter_count(spec);
  CHECK(count.generator == gen_hand);
  CHECK(count.discriminator == disc_hand);

  for (auto combine : {CombineKind::simple, CombineKind::lin_cat, CombineKind::cat_lin}) {
    for (auto mode : {ConnectionMode::none, ConnectionMode::all}) {
      const auto s = spec_for(32, combine, mode, 8, 64);
      Generator g(s);
      Discriminator d(s);
      const auto n = parameter_count(s);
      CHECK(module_numel(*g) == n.generator);
      CHECK(module_numel(*d) == n.discriminator);
    }
  }
}

TEST_CASE("width divisor scales every width with a floor of one") {
  const auto spec = spec_for(1024, CombineKind::simple, ConnectionMode::all, 32);
  CHECK(spec.gen_channels.front().out_channels == 16);
  CHECK(spec.gen_channels.back().out_channels == 1);
  CHECK(spec.disc_channels.front().path_channels == 1);
  CHECK_THROWS_AS(spec_for(32, CombineKind::simple, ConnectionMode::all, 0), ConfigError);
}

TEST_CASE("architecture summary lists every block") {
  const auto text = architecture_summary(spec_for(32));
  for (const char* r : {"4", "8", "16", "32"}) CHECK(text.find(r) != std::string::npos);
}
