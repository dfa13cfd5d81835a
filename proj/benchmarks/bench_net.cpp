#include <benchmark/benchmark.h>

#include "sahnet/net/densenet.hpp"
#include "sahnet/random.hpp"
#include "sahnet/train/loss.hpp"

using namespace sahnet;

namespace {

tensor::Tensor batch_of(std::size_t n) {
  Rng rng(1);
  tensor::Tensor t({n, 1, 32, 32, 32});
  for (double& v : t.data()) v = uniform01(rng);
  return t;
}

void BM_TinyForward(benchmark::State& st) {
  const auto m = net::build(net::DenseNetConfig::tiny(), 0);
  const auto x = batch_of(std::size_t(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(net::predict(m, x).data().data());
}

void BM_TinyTrainStep(benchmark::State& st) {
  auto m = net::build(net::DenseNetConfig::tiny(), 0);
  const auto n = std::size_t(st.range(0));
  const auto x = batch_of(n);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = int(i % 2);
  m.set_trainable(m.parameter_names(), true);
  for (auto _ : st) {
    tensor::Tape tape;
    net::ForwardOptions o;
    o.mode = tensor::NormMode::Train;
    const auto out = net::forward(m, tape, x, {}, o);
    tape.backward(train::focal_loss(tape, out.probs, labels, {0.7, 1.4}, 2.0));
  }
}

}  // namespace

BENCHMARK(BM_TinyForward)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TinyTrainStep)->Arg(8)->Unit(benchmark::kMillisecond);
