#include <benchmark/benchmark.h>

#include "sahnet/prep/phantom.hpp"
#include "sahnet/volio/nifti.hpp"

using namespace sahnet;

namespace {

std::vector<std::uint8_t> encoded(std::size_t edge, bool gz) {
  prep::HeadPhantomParams p;
  p.shape = {edge, edge, edge};
  p.noise_hu = 5.0;
  auto bytes = volio::write_nifti(prep::head_phantom(p));
  return gz ? volio::gzip_compress(bytes) : bytes;
}

void BM_ReadNifti(benchmark::State& st) {
  const auto bytes = encoded(std::size_t(st.range(0)), st.range(1) != 0);
  for (auto _ : st) benchmark::DoNotOptimize(volio::read_nifti(bytes).data().data());
  st.SetBytesProcessed(std::int64_t(st.iterations() * bytes.size()));
}

void BM_WriteNifti(benchmark::State& st) {
  prep::HeadPhantomParams p;
  p.shape = {std::size_t(st.range(0)), std::size_t(st.range(0)), std::size_t(st.range(0))};
  const auto v = prep::head_phantom(p);
  for (auto _ : st) benchmark::DoNotOptimize(volio::write_nifti(v).data());
}

void BM_ParseHeader(benchmark::State& st) {
  const auto bytes = encoded(16, false);
  for (auto _ : st) benchmark::DoNotOptimize(volio::parse_header(bytes));
}

}  // namespace

BENCHMARK(BM_ReadNifti)->ArgsProduct({{32, 96}, {0, 1}})->ArgNames({"edge", "gz"});
BENCHMARK(BM_WriteNifti)->Arg(32)->Arg(96);
BENCHMARK(BM_ParseHeader);
