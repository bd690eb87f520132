#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>
#include <json.hpp>

#include "pqp/http_oracle.hpp"
#include "pqp/png_io.hpp"
#include "pqp/synthetic.hpp"
#include "pqp/toy_oracle.hpp"

using namespace pqp;
using nlohmann::json;

namespace {

const std::filesystem::path kProtocol = std::filesystem::path(PQP_FIXTURES) / "protocol";

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// In-process server on an ephemeral port; routes are registered by each
// test before start().
class TestServer {
 public:
  httplib::Server server;

  void start() {
    port_ = server.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~TestServer() {
    server.stop();
    if (thread_.joinable()) thread_.join();
  }
  std::string url(const std::string& prefix = "") const {
    return "http://127.0.0.1:" + std::to_string(port_) + prefix;
  }

 private:
  int port_ = 0;
  std::thread thread_;
};

void reply(httplib::Response& res, int status, const std::string& body) {
  res.status = status;
  res.set_content(body, "application/json");
}

// Serves a toy model under /v1/classify or /v1/features like the reference
// server does, remembering the last decoded image.
void serve_toy(TestServer& s, const ToyModelSpec& spec, std::mutex& mu, std::optional<Image>& last) {
  s.server.Post(oracle_route(spec.mode), [&, spec](const httplib::Request& req,
                                                  httplib::Response& res) {
    if (req.get_header_value("Content-Type") != "image/png") {
      reply(res, 400, format_oracle_error("expected image/png"));
      return;
    }
    try {
      const std::vector<std::uint8_t> bytes(req.body.begin(), req.body.end());
      const Image x = decode_png(bytes);
      if (x.height() != spec.height || x.width() != spec.width) {
        reply(res, 400, format_oracle_error("expected a 4x5 PNG image"));
        return;
      }
      {
        std::lock_guard lock(mu);
        last = x;
      }
      reply(res, 200, format_oracle_response(evaluate_toy_model(spec, x)));
    } catch (const std::exception& e) {
      reply(res, 400, format_oracle_error(e.what()));
    }
  });
}

}  // namespace

TEST(HttpOracle, EchoIsBitIdentical) {
  TestServer s;
  const std::vector<double> values = {0.1, 0.2, 0.30000000000000004, 0.39999999999999997};
  s.server.Post("/echo/v1/classify", [&](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, format_oracle_response({values, OutputKind::confidence}));
  });
  s.start();
  HttpOracle o(s.url("/echo"), OutputKind::confidence, {3, 3});
  const OutputVector y = o.query(uniform_noise(1, 3, 3));
  EXPECT_EQ(y.values, values);
  EXPECT_EQ(o.queries(), 1u);
}

TEST(HttpOracle, ConfidencesMustSumToOne) {
  TestServer s;
  s.server.Post("/v1/classify", [](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, R"({"values": [0.5, 0.2], "kind": "confidence"})");
  });
  s.start();
  HttpOracle o(s.url(), OutputKind::confidence, {2, 2});
  EXPECT_THROW(o.query(Image(2, 2)), ProtocolError);
  EXPECT_EQ(o.queries(), 0u);
}

TEST(HttpOracle, ErrorStatusCarriesMessage) {
  TestServer s;
  s.server.Post("/v1/features", [](const httplib::Request&, httplib::Response& res) {
    reply(res, 500, format_oracle_error("model crashed"));
  });
  s.server.Post("/v1/classify", [](const httplib::Request&, httplib::Response& res) {
    reply(res, 400, format_oracle_error("bad image"));
  });
  s.start();
  HttpOracle f(s.url(), OutputKind::feature, {2, 2});
  try {
    f.query(Image(2, 2));
    FAIL() << "expected ProtocolError";
  } catch (const ProtocolError& e) {
    EXPECT_NE(std::string(e.what()).find("model crashed"), std::string::npos);
  }
  HttpOracle c(s.url(), OutputKind::confidence, {2, 2});
  EXPECT_THROW(c.query(Image(2, 2)), ProtocolError);
  EXPECT_EQ(f.queries() + c.queries(), 0u);
}

TEST(HttpOracle, MalformedBodies) {
  TestServer s;
  std::atomic<int> calls{0};
  s.server.Post("/v1/features", [&](const httplib::Request&, httplib::Response& res) {
    switch (calls++) {
      case 0: reply(res, 200, "not json"); break;
      case 1: reply(res, 200, R"({"values": [1, "x"], "kind": "feature"})"); break;
      case 2: reply(res, 200, R"({"values": [1, 0], "kind": "confidence"})"); break;
      case 3: reply(res, 200, R"({"values": [0.6, 0.8], "kind": "feature"})"); break;
      default: reply(res, 200, R"({"values": [0.6, 0.8, 0.0], "kind": "feature"})"); break;
    }
  });
  s.start();
  HttpOracle o(s.url(), OutputKind::feature, {2, 2});
  const Image x(2, 2);
  EXPECT_THROW(o.query(x), ProtocolError);
  EXPECT_THROW(o.query(x), ProtocolError);
  EXPECT_THROW(o.query(x), ProtocolError);  // kind mismatch
  EXPECT_NO_THROW(o.query(x));
  EXPECT_THROW(o.query(x), ProtocolError);  // length changed
  EXPECT_EQ(o.queries(), 1u);
}

TEST(HttpOracle, SubmittedBytesDecodeToTheImage) {
  TestServer s;
  std::mutex mu;
  std::optional<Image> last;
  const ToyModelSpec spec = load_toy_spec(kProtocol / "toy_confidence.json");
  serve_toy(s, spec, mu, last);
  s.start();
  HttpOracle o(s.url(), OutputKind::confidence, {4, 5});
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Image x = uniform_noise(seed, 4, 5);
    o.query(x);
    std::lock_guard lock(mu);
    ASSERT_TRUE(last.has_value());
    EXPECT_EQ(*last, x);
  }
}

TEST(HttpOracle, MatchesInProcessToyModel) {
  TestServer s;
  std::mutex mu;
  std::optional<Image> last;
  const ToyModelSpec spec = gen_toy_spec(21, 4, 5, 7, OutputKind::confidence, false,
                                         ToyGenOptions::responsive());
  serve_toy(s, spec, mu, last);
  s.start();
  HttpOracle remote(s.url(), OutputKind::confidence, {4, 5});
  ToyOracle local(spec);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Image x = synthetic_scene(seed, 4, 5);
    const OutputVector a = remote.query(x);
    const OutputVector b = local.query(x);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.values[i], b.values[i], 1e-6);
  }
  EXPECT_EQ(remote.queries(), 20u);
}

TEST(HttpOracle, GoldenExchange) {
  TestServer s;
  std::mutex mu;
  std::optional<Image> last;
  serve_toy(s, load_toy_spec(kProtocol / "toy_confidence.json"), mu, last);
  serve_toy(s, load_toy_spec(kProtocol / "toy_feature.json"), mu, last);
  s.start();
  const Image request = load_png(kProtocol / "request.png");

  for (const auto& [mode, file] : {std::pair{OutputKind::confidence, "response_classify.json"},
                                   std::pair{OutputKind::feature, "response_features.json"}}) {
    const OutputVector golden = parse_oracle_response(read_text(kProtocol / file), mode);
    HttpOracle o(s.url(), mode, {4, 5});
    const OutputVector y = o.query(request);
    ASSERT_EQ(y.size(), golden.size());
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y.values[i], golden.values[i], 1e-6);
  }

  // Wrong size: the server answers 400 with the documented body.
  httplib::Client raw(s.url());
  const auto png = encode_png(Image(3, 3));
  auto res = raw.Post("/v1/classify", std::string(png.begin(), png.end()), "image/png");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(json::parse(res->body), json::parse(read_text(kProtocol / "error_400.json")));
}

TEST(HttpOracle, UnreachableServerIsTransportError) {
  int port;
  {
    // Grab a free port, then release it so nothing listens there.
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  HttpOracleOptions opts;
  opts.max_retries = 2;
  opts.timeout = std::chrono::milliseconds(500);
  HttpOracle o("http://127.0.0.1:" + std::to_string(port), OutputKind::confidence, {2, 2}, opts);
  EXPECT_THROW(o.query(Image(2, 2)), TransportError);
  EXPECT_EQ(o.attempts(), 3u);
  EXPECT_EQ(o.queries(), 0u);
}

// A response that arrives after the client gave up is retried; only the
// vector finally returned is counted.
TEST(HttpOracle, RetryCountsOneQuery) {
  TestServer s;
  std::atomic<int> calls{0};
  s.server.Post("/v1/classify", [&](const httplib::Request&, httplib::Response& res) {
    if (calls++ == 0) std::this_thread::sleep_for(std::chrono::milliseconds(700));
    reply(res, 200, R"({"values": [0.25, 0.75], "kind": "confidence"})");
  });
  s.start();
  HttpOracleOptions opts;
  opts.timeout = std::chrono::milliseconds(300);
  HttpOracle o(s.url(), OutputKind::confidence, {2, 2}, opts);
  const OutputVector y = o.query(Image(2, 2));
  EXPECT_EQ(y.values, (std::vector<double>{0.25, 0.75}));
  EXPECT_EQ(o.attempts(), 2u);
  EXPECT_EQ(o.queries(), 1u);
}

TEST(HttpOracle, RejectsBadUrls) {
  EXPECT_THROW(HttpOracle("ftp://x", OutputKind::confidence, {1, 1}), std::invalid_argument);
  EXPECT_THROW(HttpOracle("https://x", OutputKind::confidence, {1, 1}), std::invalid_argument);
}
