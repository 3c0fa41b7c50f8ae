#include <gtest/gtest.h>

#include <chrono>
#include <fstream>

#include <boost/beast/http.hpp>

#include "occlusim/net/client.hpp"
#include "occlusim/net/server.hpp"
#include "support/test_support.hpp"

using namespace occlusim;
using namespace occlusim::protocol;
using occlusim::testing::TempDir;
namespace http = boost::beast::http;

namespace {

net::ServerOptions local_options() {
  net::ServerOptions opts;
  opts.address = "127.0.0.1";
  opts.port = 0;
  return opts;
}

ClientCommand cmd(CommandAction action, std::optional<double> speed = std::nullopt) {
  return ClientCommand{action, speed, std::nullopt, std::nullopt, std::nullopt};
}

// Reads until a telemetry frame satisfies `pred`; returns it.
Telemetry read_until(net::HeadlessClient& c, auto pred) {
  for (;;) {
    const auto m = c.receive();
    if (const auto* t = std::get_if<Telemetry>(&m.payload); t && pred(*t)) return *t;
  }
}

}  // namespace

TEST(Server, DrivesFullSessionAndPersists) {
  TempDir tmp;
  auto opts = local_options();
  opts.record_dir = tmp.path();
  opts.session.seed = 21;
  net::Server server(opts);
  server.start();

  net::HeadlessClient client("127.0.0.1", server.port());
  client.send(cmd(CommandAction::Advance, 10.0));
  read_until(client, [](const Telemetry& t) { return t.sample.displacement >= 40.0; });
  client.send(cmd(CommandAction::Retract, 8.0));
  const auto deepest = read_until(client, [](const Telemetry& t) { return t.phase != DeploymentPhase::Navigation; });
  EXPECT_EQ(deepest.phase, DeploymentPhase::LobeDeployment);
  read_until(client, [](const Telemetry& t) { return t.sample.displacement <= 0.0; });
  client.send(cmd(CommandAction::Detach));

  std::optional<TrialMetrics> wire;
  std::uint64_t last_seq = 0;
  bool first = true;
  while (!wire) {
    const auto m = client.receive();
    if (!first) {
      EXPECT_EQ(m.seq, last_seq + 1);
    }
    first = false;
    last_seq = m.seq;
    if (const auto* metrics = std::get_if<Metrics>(&m.payload)) wire = metrics->metrics;
  }
  const auto persisted = read_record(tmp / "session-0-0");
  EXPECT_EQ(trial_metrics(persisted), *wire);
  EXPECT_NE(find_event(persisted.detected_events, EventKind::Detached), nullptr);
}

TEST(Server, TicksAtFortyHertz) {
  net::Server server(local_options());
  server.start();
  net::HeadlessClient client("127.0.0.1", server.port());
  read_until(client, [](const Telemetry& t) { return t.sample.t >= 0.25; });
  const auto t0 = std::chrono::steady_clock::now();
  read_until(client, [](const Telemetry& t) { return t.sample.t >= 2.25 - 1e-9; });
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double rate = 80.0 / elapsed;
  EXPECT_NEAR(rate, 40.0, 4.0);
}

TEST(Server, ConnectionsAreIsolated) {
  net::Server server(local_options());
  server.start();
  net::HeadlessClient a("127.0.0.1", server.port());
  net::HeadlessClient b("127.0.0.1", server.port());
  a.send(cmd(CommandAction::Advance, 10.0));
  const auto ta = read_until(a, [](const Telemetry& t) { return t.sample.displacement > 1.0; });
  const auto tb = read_until(b, [&](const Telemetry& t) { return t.sample.t >= ta.sample.t; });
  EXPECT_EQ(tb.sample.displacement, 0.0);
}

TEST(Server, RejectsBadCommandsOnTheWire) {
  net::Server server(local_options());
  server.start();
  net::HeadlessClient client("127.0.0.1", server.port());
  client.send_text(R"({"type":"cmd","action":"advance","speed_mm_s":-3})");
  for (;;) {
    const auto m = client.receive();
    if (const auto* err = std::get_if<ErrorReply>(&m.payload)) {
      EXPECT_EQ(err->code, codes::kBadCmd);
      break;
    }
  }
}

namespace {

http::response<http::string_body> http_get(unsigned short port, const std::string& target) {
  boost::asio::io_context ioc;
  boost::asio::ip::tcp::resolver resolver(ioc);
  boost::beast::tcp_stream stream(ioc);
  stream.connect(resolver.resolve("127.0.0.1", std::to_string(port)));
  http::request<http::empty_body> req{http::verb::get, target, 11};
  req.set(http::field::host, "127.0.0.1");
  http::write(stream, req);
  boost::beast::flat_buffer buffer;
  http::response<http::string_body> res;
  http::read(stream, buffer, res);
  return res;
}

}  // namespace

TEST(Server, ServesStaticFiles) {
  TempDir tmp;
  std::ofstream(tmp / "index.html") << "<html>console</html>";
  auto opts = local_options();
  opts.static_dir = tmp.path();
  net::Server server(opts);
  server.start();
  const auto index = http_get(server.port(), "/");
  EXPECT_EQ(index.result(), http::status::ok);
  EXPECT_EQ(index.body(), "<html>console</html>");
  EXPECT_EQ(index[http::field::content_type], "text/html");
  EXPECT_EQ(http_get(server.port(), "/missing.js").result(), http::status::not_found);
  EXPECT_EQ(http_get(server.port(), "/../etc/passwd").result(), http::status::not_found);
}

TEST(Server, PortFromEnvironment) {
  ::setenv(net::kPortEnvVar, "9123", 1);
  EXPECT_EQ(net::default_port(), 9123);
  ::unsetenv(net::kPortEnvVar);
  EXPECT_EQ(net::default_port(), net::kDefaultPort);
}
