#include <benchmark/benchmark.h>

#include "sahnet/prep/brain_mask.hpp"
#include "sahnet/prep/phantom.hpp"
#include "sahnet/prep/registration.hpp"

using namespace sahnet;

namespace {

void BM_ExtractBrain(benchmark::State& st) {
  prep::HeadPhantomParams p;
  const auto n = std::size_t(st.range(0));
  p.shape = {n, n, n};
  p.noise_hu = 3.0;
  const auto v = prep::head_phantom(p);
  for (auto _ : st) benchmark::DoNotOptimize(prep::extract_brain(v).grid.data());
  st.SetItemsProcessed(std::int64_t(st.iterations() * n * n * n));
}

void BM_CloseBall(benchmark::State& st) {
  const volio::Shape3 s{48, 48, 48};
  std::vector<std::uint8_t> g(s.size(), 0);
  for (std::size_t i = 0; i < g.size(); i += 7) g[i] = 1;
  for (auto _ : st) benchmark::DoNotOptimize(prep::close_ball(g, s, int(st.range(0))).data());
}

void BM_RegisterAffine(benchmark::State& st) {
  const auto fixed = prep::smooth_blobs({32, 32, 32}, 2.0);
  auto moving = fixed;
  auto aff = moving.affine();
  aff(0, 3) += 3.0;
  moving = volio::Volume(moving.shape(), aff, std::vector<float>(fixed.data().begin(), fixed.data().end()),
                         fixed.unit());
  for (auto _ : st) benchmark::DoNotOptimize(prep::register_affine(moving, fixed));
}

}  // namespace

BENCHMARK(BM_ExtractBrain)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CloseBall)->Arg(1)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RegisterAffine)->Unit(benchmark::kMillisecond);
