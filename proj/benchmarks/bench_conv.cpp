#include <benchmark/benchmark.h>

#include "sahnet/random.hpp"
#include "sahnet/tensor/ops.hpp"
#include "sahnet/tensor/tape.hpp"

using namespace sahnet;
using namespace sahnet::tensor;

namespace {

Tensor noise(Shape s, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(std::move(s));
  for (double& v : t.data()) v = normal(rng);
  return t;
}

// args: algorithm, edge, channels in, channels out, kernel
void BM_Conv3d(benchmark::State& st) {
  const auto algo = static_cast<ConvAlgo>(st.range(0));
  const auto n = std::size_t(st.range(1)), ci = std::size_t(st.range(2)), co = std::size_t(st.range(3)),
             k = std::size_t(st.range(4));
  const auto x = noise({1, ci, n, n, n}, 1);
  const auto w = noise({co, ci, k, k, k}, 2);
  for (auto _ : st) {
    auto tape = Tape::inference();
    benchmark::DoNotOptimize(conv_nd(tape, x, w, Tensor{}, {1}, {k / 2}, algo).data().data());
  }
  st.SetItemsProcessed(std::int64_t(st.iterations() * n * n * n * ci * co * k * k * k));
}

void conv_args(benchmark::internal::Benchmark* b) {
  for (int algo : {0, 1, 2}) {
    b->Args({algo, 16, 8, 16, 1});
    b->Args({algo, 16, 16, 4, 3});
    b->Args({algo, 32, 1, 8, 7});
  }
  b->ArgNames({"algo", "edge", "ci", "co", "k"})->Unit(benchmark::kMillisecond);
}

void BM_Conv3dBackward(benchmark::State& st) {
  const auto x = noise({2, 16, 16, 16, 16}, 3);
  Tensor w = noise({4, 16, 3, 3, 3}, 4);
  w.set_requires_grad(true);
  for (auto _ : st) {
    w.zero_grad();
    Tape tape;
    const auto y = conv_nd(tape, x, w, Tensor{}, {1}, {1});
    tape.backward(sum(tape, y));
    benchmark::DoNotOptimize(std::as_const(w).grad().data());
  }
}

}  // namespace

BENCHMARK(BM_Conv3d)->Apply(conv_args);
BENCHMARK(BM_Conv3dBackward)->Unit(benchmark::kMillisecond);
