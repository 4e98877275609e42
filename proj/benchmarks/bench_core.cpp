#include <benchmark/benchmark.h>

#include "mummi/agent/replay_buffer.hpp"
#include "mummi/dist/diag_gaussian.hpp"
#include "mummi/losses/losses.hpp"

using namespace mummi;

namespace {

mssm::MssmConfig bench_config() {
  mssm::MssmConfig cfg;
  cfg.h_dim = 64;
  cfg.c_dim = 16;
  cfg.f_dim = 32;
  cfg.hidden = {64, 64};
  cfg.modalities = {{"position", {2}, {32, 32}}, {"camera", {16, 16}, {64, 64}}};
  return cfg;
}

mssm::Batch bench_batch(const mssm::MssmConfig& cfg, diff::Index b, diff::Index t) {
  diff::Rng rng(3);
  mssm::Batch batch;
  batch.batch_size = b;
  batch.seq_len = t;
  for (const auto& m : cfg.modalities) {
    std::vector<diff::Tensor> obs, masks;
    for (diff::Index i = 0; i < t; ++i) {
      obs.push_back(diff::Tensor::from_values(
          {b, m.flat_dim()}, rng.uniform_vector(static_cast<std::size_t>(b * m.flat_dim()), -1, 1)));
      masks.push_back(diff::Tensor::ones({b, 1}));
    }
    batch.observations.emplace_back(std::move(obs));
    batch.masks.push_back(std::move(masks));
  }
  for (diff::Index i = 0; i < t; ++i) {
    batch.actions.push_back(diff::Tensor::from_values(
        {b, cfg.action_dim}, rng.uniform_vector(static_cast<std::size_t>(b * cfg.action_dim), -1, 1)));
    batch.rewards.push_back(
        diff::Tensor::from_values({b, 1}, rng.uniform_vector(static_cast<std::size_t>(b), -1, 1)));
  }
  return batch;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = state.range(0);
  diff::Rng rng(1);
  const auto a = diff::Tensor::from_values({n, n}, rng.normal_vector(static_cast<std::size_t>(n * n)));
  const auto b = diff::Tensor::from_values({n, n}, rng.normal_vector(static_cast<std::size_t>(n * n)));
  for (auto _ : state) {
    auto c = diff::matmul(a, b);
    benchmark::DoNotOptimize(c);
  }
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_PoeFuse(benchmark::State& state) {
  diff::Rng rng(2);
  std::vector<dist::DiagGaussian> experts;
  for (int k = 0; k < 3; ++k)
    experts.emplace_back(diff::Tensor::from_values({64, 32}, rng.normal_vector(2048)),
                         diff::Tensor::full({64, 32}, 0.7));
  for (auto _ : state) {
    auto fused = dist::poe_fuse(experts);
    benchmark::DoNotOptimize(fused);
  }
}
BENCHMARK(BM_PoeFuse);

void BM_FilterSequence(benchmark::State& state) {
  const auto cfg = bench_config();
  diff::Rng init(5);
  const mssm::MssmModel model(cfg, init);
  const auto batch = bench_batch(cfg, 8, 25);
  for (auto _ : state) {
    diff::Rng noise(7);
    auto out = model.filter_sequence(batch, noise);
    benchmark::DoNotOptimize(out);
  }
}
BENCHMARK(BM_FilterSequence);

void BM_MummiLossForwardBackward(benchmark::State& state) {
  const auto cfg = bench_config();
  diff::Rng init(5);
  mssm::MssmModel model(cfg, init);
  const auto batch = bench_batch(cfg, 8, 25);
  for (auto _ : state) {
    diff::Rng noise(7);
    diff::Tape tape;
    diff::TapeScope scope(tape);
    auto lb = losses::mummi_total(model, batch, {}, noise);
    tape.backward(lb.total);
    model.params().zero_grad_all();
    benchmark::DoNotOptimize(lb);
  }
}
BENCHMARK(BM_MummiLossForwardBackward);

void BM_ElboLossForwardBackward(benchmark::State& state) {
  const auto cfg = bench_config();
  diff::Rng init(5);
  mssm::MssmModel model(cfg, init);
  const auto batch = bench_batch(cfg, 8, 25);
  for (auto _ : state) {
    diff::Rng noise(7);
    diff::Tape tape;
    diff::TapeScope scope(tape);
    auto lb = losses::multimodal_elbo(model, batch, noise);
    tape.backward(lb.total);
    model.params().zero_grad_all();
    benchmark::DoNotOptimize(lb);
  }
}
BENCHMARK(BM_ElboLossForwardBackward);

}  // namespace

BENCHMARK_MAIN();
