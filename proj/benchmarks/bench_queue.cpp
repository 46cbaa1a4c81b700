#include <thread>

#include <benchmark/benchmark.h>

#include "streamgauge/queue.hpp"

namespace {

using streamgauge::DriverQueue;
using streamgauge::Event;

Event make_event(std::uint64_t seq) {
  Event e;
  e.seq = seq;
  e.user_id = seq * 31;
  e.gem_pack_id = seq % 1024;
  e.price_cents = 99;
  e.event_time = static_cast<streamgauge::TimeNs>(seq);
  return e;
}

void BM_QueueOfferTake(benchmark::State& state) {
  DriverQueue q;
  const std::size_t batch = static_cast<std::size_t>(state.range(0));
  std::vector<Event> out(batch);
  std::uint64_t seq = 0;
  for (auto _ : state) {
    for (std::size_t i = 0; i < batch; ++i) q.offer(make_event(seq++));
    benchmark::DoNotOptimize(q.take_batch(out.data(), batch));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(seq));
}
BENCHMARK(BM_QueueOfferTake)->Arg(1)->Arg(64)->Arg(1024);

void BM_QueueSpsc(benchmark::State& state) {
  constexpr std::uint64_t kPerIteration = 200'000;
  std::uint64_t moved = 0;
  for (auto _ : state) {
    DriverQueue q;
    std::thread producer([&q] {
      for (std::uint64_t i = 0; i < kPerIteration; ++i) q.offer(make_event(i));
      q.close();
    });
    std::vector<Event> out(1024);
    std::uint64_t got = 0;
    while (!q.exhausted()) got += q.take_batch(out.data(), out.size());
    producer.join();
    moved += got;
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(moved));
}
BENCHMARK(BM_QueueSpsc)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
