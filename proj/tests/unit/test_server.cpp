// Copyright 2026 The TimbreLab Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <boost/asio.hpp>
#include <boost/beast.hpp>
#include <boost/beast/websocket.hpp>
#include <chrono>
#include <thread>

#include "doctest.h"
#include "timbrelab/error.hpp"
#include "timbrelab/server.hpp"

using namespace timbrelab;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;

namespace {

std::shared_ptr<const model::Autoencoder> test_model() {
  model::ModelConfig c;
  c.encoder_widths = {16, 8};
  return std::make_shared<const model::Autoencoder>(model::Autoencoder::build(c, 3));
}

class Client {
 public:
  explicit Client(std::uint16_t port) : ws_(ioc_) {
    tcp::resolver resolver(ioc_);
    net::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
    ws_.handshake("127.0.0.1:" + std::to_string(port), "/");
  }
  ~Client() {
    beast::error_code ec;
    ws_.close(websocket::close_code::normal, ec);
  }

  void send(const json& j) { ws_.write(net::buffer(j.dump())); }
  json receive() {
    beast::flat_buffer buffer;
    ws_.read(buffer);
    return json::parse(beast::buffers_to_string(buffer.data()));
  }
  /// Skips broadcasts until a reply of `type` arrives.
  json receive(const std::string& type) {
    for (;;) {
      auto j = receive();
      if (j["type"] == type) return j;
    }
  }

 private:
  net::io_context ioc_;
  websocket::stream<tcp::socket> ws_;
};

http::response<http::string_body> http_get(std::uint16_t port, const std::string& target) {
  net::io_context ioc;
  tcp::socket socket(ioc);
  tcp::resolver resolver(ioc);
  net::connect(socket, resolver.resolve("127.0.0.1", std::to_string(port)));
  http::request<http::empty_body> req(http::verb::get, target, 11);
  req.set(http::field::host, "127.0.0.1");
  req.keep_alive(false);
  http::write(socket, req);
  beast::flat_buffer buffer;
  http::response<http::string_body> res;
  http::read(socket, buffer, res);
  return res;
}

server::ServerOptions quiet_options() {
  server::ServerOptions o;
  o.port = 0;
  o.status_hz = 0.2;  // keep broadcasts out of the request/reply tests
  return o;
}

}  // namespace

TEST_CASE("message handling without a network") {
  synth::Engine engine(test_model(), {});
  const auto before = engine.control().current();

  auto reply = server::handle_message(engine, R"({"type":"set_latent","values":[0.1,0.2,0.3]})");
  CHECK(reply["type"] == "error");
  CHECK(reply["message"].get<std::string>().find("expected 2") != std::string::npos);
  for (const char* bad : {"not json", "[1,2]", R"({"type":"dance"})", R"({"type":"set_chroma","class":12})",
                          R"({"type":"set_chroma","class":"A"})", R"({"type":"set_chroma"})",
                          R"({"type":"set_gain","value":-1})", R"({"type":"set_latent","values":[0.1,"x"]})",
                          R"({"values":[0.1,0.2]})"}) {
    CAPTURE(bad);
    CHECK(server::handle_message(engine, bad)["type"] == "error");
  }
  CHECK(engine.control().current().generation == before.generation);

  CHECK(server::handle_message(engine, R"({"type":"set_chroma","class":9})").is_null());
  auto status = server::handle_message(engine, R"({"type":"get_status"})");
  CHECK(status["type"] == "status");
  CHECK(status["chroma"] == 9);
  CHECK(status["spectrum"].size() == synth::kSpectrumBins);
  CHECK(status["model"]["bottleneck"] == 2);
  CHECK(status["model"]["skip"] == true);
  CHECK(status["underruns"] == 0);

  server::handle_message(engine, R"({"type":"set_chroma","class":null})");
  server::handle_message(engine, R"({"type":"set_gain","value":0.25})");
  server::handle_message(engine, R"({"type":"set_latent","values":[1.5,0.25]})");
  status = server::handle_message(engine, R"({"type":"get_status"})");
  CHECK(status["chroma"].is_null());
  CHECK(status["gain"] == 0.25);
  CHECK(status["latent"] == json::array({1.0, 0.25}));  // sigmoid latents clamp to [0, 1]
  CHECK(status["generation"] == before.generation + 4);
}

TEST_CASE("websocket protocol") {
  synth::Engine engine(test_model(), {});
  server::ControlServer srv(engine, quiet_options());
  srv.start();
  Client client(srv.port());

  client.send({{"type", "set_latent"}, {"values", {0.5, 0.5, 0.5}}});
  auto reply = client.receive("error");
  CHECK(reply["message"].get<std::string>().find("expected 2") != std::string::npos);

  client.send({{"type", "set_chroma"}, {"class", 9}});
  client.send({{"type", "get_status"}});
  auto status = client.receive("status");
  CHECK(status["chroma"] == 9);

  // Two rapid updates: the final state is the last message.
  client.send({{"type", "set_latent"}, {"values", {0.125, 0.25}}});
  client.send({{"type", "set_latent"}, {"values", {0.75, 0.875}}});
  client.send({{"type", "get_status"}});
  status = client.receive("status");
  CHECK(status["latent"] == json::array({0.75, 0.875}));
  CHECK(status["chroma"] == 9);
  CHECK(engine.control().current().latent[0] == 0.75f);
}

TEST_CASE("concurrent clients never lose each other's fields") {
  synth::Engine engine(test_model(), {});
  server::ControlServer srv(engine, quiet_options());
  srv.start();
  Client a(srv.port()), b(srv.port());
  for (int i = 0; i < 200; ++i) {
    a.send({{"type", "set_chroma"}, {"class", i % 12}});
    b.send({{"type", "set_gain"}, {"value", i / 1000.0}});
  }
  a.send({{"type", "set_chroma"}, {"class", 5}});
  b.send({{"type", "set_gain"}, {"value", 0.5}});
  json status;
  for (int tries = 0; tries < 100; ++tries) {
    a.send({{"type", "get_status"}});
    status = a.receive("status");
    if (status["generation"] == 402) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  // Every update was applied once, and neither client's last field was
  // overwritten by a stale copy from the other.
  CHECK(status["generation"] == 402);
  CHECK(status["chroma"] == 5);
  CHECK(status["gain"] == 0.5);
}

TEST_CASE("status broadcasts arrive unrequested at the configured rate") {
  synth::Engine engine(test_model(), {});
  auto o = quiet_options();
  o.status_hz = 20.0;
  server::ControlServer srv(engine, o);
  srv.start();
  Client client(srv.port());
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 6; ++i) CHECK(client.receive()["type"] == "status");
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(seconds >= 5 / 20.0 - 0.02);  // no faster than 20 Hz
}

TEST_CASE("http serves the control page") {
  synth::Engine engine(test_model(), {});
  server::ControlServer srv(engine, quiet_options());
  srv.start();
  const auto page = http_get(srv.port(), "/");
  CHECK(page.result() == http::status::ok);
  CHECK(page[http::field::content_type].find("text/html") == 0);
  CHECK(page.body().find("<html>") != std::string::npos);
  CHECK(page.body().find("set_latent") != std::string::npos);
  CHECK(http_get(srv.port(), "/missing").result() == http::status::not_found);
}

TEST_CASE("bind failures and option checks") {
  synth::Engine engine(test_model(), {});
  server::ControlServer first(engine, quiet_options());
  auto taken = quiet_options();
  taken.port = first.port();
  try {
    server::ControlServer second(engine, taken);
    FAIL("expected a bind error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDevice);
  }
  auto fast = quiet_options();
  fast.status_hz = 50.0;
  CHECK_THROWS_AS(server::ControlServer(engine, fast), Error);
}
