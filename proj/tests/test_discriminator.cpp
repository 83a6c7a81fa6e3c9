#include <doctest.h>

#include "msggan/data.hpp"
#include "msggan/discriminator.hpp"
#include "msggan/generator.hpp"

using namespace msggan;

namespace {

ArchitectureSpec spec_for(int64_t final_res, CombineKind combine = CombineKind::simple,
                          ConnectionMode mode = ConnectionMode::all, int64_t divisor = 1) {
  ArchitectureOptions o;
  o.final_resolution = final_res;
  o.width_divisor = divisor;
  o.combine_kind = combine;
  o.connection_mode = mode;
  return resolve_architecture(o);
}

MultiScaleImageSet random_set(const ArchitectureSpec& spec, int64_t batch) {
  return build_pyramid(torch::randn({batch, 3, spec.final_resolution, spec.final_resolution}),
                       spec.resolutions());
}

}  // namespace

TEST_CASE("discriminator trace at 32x32 matches the last four table blocks") {
  const auto spec = spec_for(32);
  Discriminator d(spec);
  auto gen = at::detail::createCPUGenerator(0);
  d->reset_parameters(gen);
  ShapeTrace trace;
  auto scores = d->forward(random_set(spec, 2), &trace);
  CHECK(scores.sizes() == torch::IntArrayRef({2}));

  // The 32x32 network's top block reads from_rgb straight into the 512-wide path.
  const ShapeTrace expected = {
      {"raw_rgb", {3, 32, 32}},      {"from_rgb", {512, 32, 32}},   {"minbatch_std", {513, 32, 32}},
      {"conv3x3", {512, 32, 32}},    {"conv3x3", {512, 32, 32}},    {"avgpool", {512, 16, 16}},
      {"raw_rgb", {3, 16, 16}},      {"combine", {515, 16, 16}},    {"minbatch_std", {516, 16, 16}},
      {"conv3x3", {512, 16, 16}},    {"conv3x3", {512, 16, 16}},    {"avgpool", {512, 8, 8}},
      {"raw_rgb", {3, 8, 8}},        {"combine", {515, 8, 8}},      {"minbatch_std", {516, 8, 8}},
      {"conv3x3", {512, 8, 8}},      {"conv3x3", {512, 8, 8}},      {"avgpool", {512, 4, 4}},
      {"raw_rgb", {3, 4, 4}},        {"combine", {515, 4, 4}},      {"minbatch_std", {516, 4, 4}},
      {"conv3x3", {512, 4, 4}},      {"conv4x4", {512, 1, 1}},      {"fc", {1, 1, 1}}};
  CHECK(trace == expected);
}

TEST_CASE("combine variants") {
  auto rgb = torch::randn({2, 3, 8, 8});
  auto a = torch::randn({2, 64, 8, 8});
  Combine simple(CombineKind::simple, 64);
  auto s = simple->forward(rgb, a);
  CHECK(s.size(1) == 67);
  CHECK(torch::equal(s.slice(1, 0, 3), rgb));
  CHECK(torch::equal(s.slice(1, 3), a));

  Combine lin_cat(CombineKind::lin_cat, 64);
  auto gen = at::detail::createCPUGenerator(0);
  lin_cat->reset(gen);
  auto lc = lin_cat->forward(rgb, a);
  CHECK(lc.size(1) == 96);
  CHECK(torch::equal(lc.slice(1, 32), a));

  Combine cat_lin(CombineKind::cat_lin, 64);
  cat_lin->reset(gen);
  CHECK(cat_lin->forward(rgb, a).size(1) == 64);

  CHECK_THROWS_AS(simple->forward(torch::randn({2, 3, 4, 4}), a), std::invalid_argument);
  CHECK_THROWS_AS(simple->forward(torch::randn({3, 3, 8, 8}), a), std::invalid_argument);
}

TEST_CASE("missing connected scale is rejected, extra scales are ignored") {
  const auto spec = spec_for(16, CombineKind::simple, ConnectionMode::none, 32);
  Discriminator d(spec);
  auto gen = at::detail::createCPUGenerator(0);
  d->reset_parameters(gen);
  auto full = random_set(spec, 2);
  auto top_only = full.restricted_to({16});
  CHECK(torch::equal(d->forward(full), d->forward(top_only)));

  const auto all_spec = spec_for(16, CombineKind::simple, ConnectionMode::all, 32);
  Discriminator d_all(all_spec);
  CHECK_THROWS_AS(d_all->forward(top_only), std::invalid_argument);
  auto bad = full;
  bad.set(8, torch::randn({2, 3, 7, 7}));
  CHECK_THROWS_AS(d_all->forward(bad), std::invalid_argument);
}

TEST_CASE("mode none disconnects the coarse images") {
  const auto spec = spec_for(16, CombineKind::simple, ConnectionMode::none, 32);
  Discriminator d(spec);
  auto gen = at::detail::createCPUGenerator(2);
  d->reset_parameters(gen);
  auto set = random_set(spec, 2);
  MultiScaleImageSet leaves;
  for (const auto& [r, t] : set) leaves.set(r, t.clone().requires_grad_(true));
  d->forward(leaves).sum().backward();
  CHECK(leaves.at(16).grad().defined());
  CHECK(!leaves.at(8).grad().defined());
  CHECK(!leaves.at(4).grad().defined());
}

TEST_CASE("scores are unbounded reals, one per sample") {
  for (auto combine : {CombineKind::simple, CombineKind::lin_cat, CombineKind::cat_lin}) {
    const auto spec = spec_for(16, combine, ConnectionMode::all, 16);
    Discriminator d(spec);
    auto gen = at::detail::createCPUGenerator(3);
    d->reset_parameters(gen);
    auto s = d->forward(random_set(spec, 5));
    CHECK(s.sizes() == torch::IntArrayRef({5}));
    CHECK(torch::isfinite(s).all().item<bool>());
  }
}
