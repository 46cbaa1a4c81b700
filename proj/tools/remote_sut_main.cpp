// Runs the reference engine as an out-of-process SUT: listens for the
// driver, pulls events over the framed TCP protocol and reports outputs
// back. One process per SUT; the driver connects to --listen.

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "streamgauge/engine.hpp"
#include "streamgauge/remote.hpp"

int main(int argc, char** argv) {
  CLI::App app{"streamgauge-remote-sut: reference engine behind the wire protocol"};

  std::uint16_t port = 7450;
  std::uint16_t sources = 2;
  std::string query = "agg";
  double range_ms = 8000.0;
  double slide_ms = 4000.0;
  std::string semantics = "event_time";
  double service_cap = 0.0;
  double partition_cap = 0.0;
  std::size_t buffer_size = 8192;
  double accept_timeout_s = 60.0;

  app.add_option("--listen", port, "TCP port to listen on (0 = ephemeral)");
  app.add_option("--sources", sources, "source count; must match the driver's queue count");
  app.add_option("--query", query, "agg or join")->check(CLI::IsMember({"agg", "join"}));
  app.add_option("--range-ms", range_ms, "window range in milliseconds");
  app.add_option("--slide-ms", slide_ms, "window slide in milliseconds");
  app.add_option("--semantics", semantics, "event_time or processing_time")
      ->check(CLI::IsMember({"event_time", "processing_time"}));
  app.add_option("--service-cap", service_cap, "ingest throttle, events/s (0 = uncapped)");
  app.add_option("--partition-cap", partition_cap,
                 "per-partition throttle, events/s (0 = uncapped)");
  app.add_option("--buffer-size", buffer_size, "inter-operator buffer capacity");
  app.add_option("--accept-timeout-s", accept_timeout_s, "how long to wait for the driver");

  CLI11_PARSE(app, argc, argv);

  try {
    streamgauge::RemoteSutEndpoint endpoint(port, sources);
    std::printf("listening on 127.0.0.1:%u\n", endpoint.port());
    std::fflush(stdout);

    streamgauge::EngineConfig cfg;
    cfg.query = query == "agg" ? streamgauge::QueryKind::agg : streamgauge::QueryKind::join;
    cfg.window.range = streamgauge::millis_ns(range_ms);
    cfg.window.slide = streamgauge::millis_ns(slide_ms);
    cfg.window.semantics = semantics == "event_time"
                               ? streamgauge::TimeSemantics::event_time
                               : streamgauge::TimeSemantics::processing_time;
    if (service_cap > 0.0) cfg.service_rate_cap = service_cap;
    if (partition_cap > 0.0) cfg.partition_rate_cap = partition_cap;
    cfg.buffer_size = buffer_size;

    // Outputs go back over the wire; the driver stamps emission on receipt.
    class WireSink final : public streamgauge::OutputSink {
     public:
      explicit WireSink(streamgauge::RemoteSutEndpoint& ep) : ep_(ep) {}
      void emit(const streamgauge::OutputRecord& rec) override { ep_.emit(rec); }

     private:
      streamgauge::RemoteSutEndpoint& ep_;
    };

    // The driver reconnects for every probe and run; serve sessions until
    // nobody shows up within the accept timeout.
    std::uint64_t session = 0;
    while (true) {
      try {
        endpoint.accept(streamgauge::seconds_ns(accept_timeout_s));
      } catch (const std::exception&) {
        break;  // accept timed out; the experiment is over
      }
      std::vector<std::unique_ptr<streamgauge::RemoteSource>> adapters;
      std::vector<streamgauge::EventSource*> source_ptrs;
      for (std::uint16_t i = 0; i < sources; ++i) {
        adapters.push_back(std::make_unique<streamgauge::RemoteSource>(endpoint, i));
        source_ptrs.push_back(adapters.back().get());
      }
      WireSink sink(endpoint);
      streamgauge::ReferenceEngine engine(cfg);
      const streamgauge::EngineReport report = engine.run(source_ptrs, sink);
      if (endpoint.connection_ok()) endpoint.bye();
      std::printf("session %llu: processed %llu events, closed %llu windows\n",
                  static_cast<unsigned long long>(++session),
                  static_cast<unsigned long long>(report.events_processed),
                  static_cast<unsigned long long>(report.windows_closed));
      std::fflush(stdout);
      endpoint.reset();
    }
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "remote sut error: %s\n", e.what());
    return 2;
  }
}
