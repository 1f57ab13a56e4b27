// Copyright 2026 The TimbreLab Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "timbrelab/server.hpp"

#include <boost/asio.hpp>
#include <boost/beast.hpp>
#include <boost/beast/websocket.hpp>
#include <cmath>
#include <deque>
#include <thread>
#include <vector>

#include "timbrelab/error.hpp"

namespace timbrelab::server {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

nlohmann::json error_reply(const std::string& message) {
  return {{"type", "error"}, {"message", message}};
}

constexpr std::string_view kPage = R"html(<!doctype html>
<html><head><meta charset="utf-8"><title>TimbreLab</title>
<style>
body{font-family:sans-serif;margin:2em;max-width:40em}
.row{margin:.4em 0}input[type=range]{width:20em}
#chroma label{margin-right:.6em}.warn{color:#b00}
canvas{border:1px solid #ccc}
</style></head><body>
<h1>TimbreLab</h1>
<div id="conn">connecting...</div>
<div id="sliders"></div>
<div class="row" id="chroma"></div>
<div class="row">gain <input id="gain" type="range" min="0" max="1" step="0.01"></div>
<canvas id="spec" width="512" height="120"></canvas>
<div id="stats"></div>
<script>
const names=["C","C#","D","D#","E","F","F#","G","G#","A","A#","B"];
const ws=new WebSocket("ws://"+location.host+"/");
let built=false;
function send(m){if(ws.readyState===1)ws.send(JSON.stringify(m));}
function latent(){return [...document.querySelectorAll(".z")].map(e=>parseFloat(e.value));}
function build(s){
  const box=document.getElementById("sliders");
  s.latent.forEach((v,i)=>{
    const d=document.createElement("div");d.className="row";
    d.innerHTML="z"+i+" <input class='z' type='range' min='0' max='1' step='0.001' value='"+v+"'>";
    d.querySelector("input").oninput=()=>send({type:"set_latent",values:latent()});
    box.appendChild(d);
  });
  const c=document.getElementById("chroma");
  ["none"].concat(names).forEach((n,i)=>{
    const l=document.createElement("label");
    l.innerHTML="<input type='radio' name='c' value='"+(i-1)+"'>"+n;
    l.querySelector("input").onchange=e=>{const k=parseInt(e.target.value);send({type:"set_chroma",class:k<0?null:k});};
    c.appendChild(l);
  });
  const g=document.getElementById("gain");g.value=s.gain;
  g.oninput=()=>send({type:"set_gain",value:parseFloat(g.value)});
  built=true;
}
ws.onopen=()=>{document.getElementById("conn").textContent="connected";send({type:"get_status"});};
ws.onclose=()=>{document.getElementById("conn").textContent="disconnected";};
ws.onmessage=e=>{
  const s=JSON.parse(e.data);
  if(s.type!=="status")return;
  if(!built)build(s);
  const r=document.querySelector("input[name=c][value='"+(s.chroma===null?-1:s.chroma)+"']");if(r)r.checked=true;
  const st=document.getElementById("stats");
  st.textContent="underruns "+s.underruns+"  chroma "+(s.chroma===null?"none":names[s.chroma]);
  st.className=s.underruns>0?"warn":"";
  const cv=document.getElementById("spec").getContext("2d");
  cv.clearRect(0,0,512,120);
  const m=Math.max(1e-9,...s.spectrum);
  s.spectrum.forEach((v,i)=>cv.fillRect(i*8,120-110*v/m,7,110*v/m));
};
</script></body></html>
)html";

}  // namespace

std::string_view control_page() { return kPage; }

nlohmann::json status_message(const synth::Engine& engine, const synth::ControlState& state) {
  const auto& model = engine.model();
  const auto mags = model.decode(state.values(), state.chroma());
  const auto spectrum = synth::display_spectrum({mags.data(), static_cast<std::size_t>(mags.size())});
  const auto stats = engine.stats();
  return {
      {"type", "status"},
      {"latent", std::vector<float>(state.values().begin(), state.values().end())},
      {"chroma", state.chroma_class < 0 ? nlohmann::json(nullptr) : nlohmann::json(state.chroma_class)},
      {"gain", state.gain},
      {"generation", state.generation},
      {"underruns", stats.underruns},
      {"clipped", stats.clipped_samples},
      {"spectrum", std::vector<float>(spectrum.begin(), spectrum.end())},
      {"model",
       {{"bottleneck", model.config().bottleneck_width}, {"skip", model.config().use_chroma_skip}}},
      {"phase_seed", engine.config().render.phase_seed},
  };
}

nlohmann::json handle_message(synth::Engine& engine, std::string_view text) {
  nlohmann::json msg;
  try {
    msg = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    return error_reply("message is not valid JSON");
  }
  if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
    return error_reply("message needs a string \"type\"");
  }
  const auto type = msg["type"].get<std::string>();
  const auto& model = engine.model();
  try {
    if (type == "get_status") {
      return status_message(engine, engine.control().current());
    }
    if (type == "set_latent") {
      const int d = model.config().bottleneck_width;
      if (!msg.contains("values") || !msg["values"].is_array()) {
        return error_reply("set_latent needs \"values\": an array of " + std::to_string(d) + " numbers");
      }
      const auto& values = msg["values"];
      if (values.size() != static_cast<std::size_t>(d)) {
        return error_reply("set_latent: expected " + std::to_string(d) + " values, got " +
                           std::to_string(values.size()));
      }
      std::vector<float> z;
      for (const auto& v : values) {
        if (!v.is_number()) return error_reply("set_latent: values must be numbers");
        float x = v.get<float>();
        if (model.config().bottleneck_activation == nn::Activation::kSigmoid) x = std::clamp(x, 0.0f, 1.0f);
        z.push_back(x);
      }
      engine.control().update([&](synth::ControlState& s) {
        s.set_latent(z);
        synth::validate_state(model, s);
      });
      return nullptr;
    }
    if (type == "set_chroma") {
      if (!msg.contains("class")) return error_reply("set_chroma needs \"class\": 0-11 or null");
      const auto& c = msg["class"];
      int cls = -1;
      if (!c.is_null()) {
        if (!c.is_number_integer() || c.get<int>() < 0 || c.get<int>() > 11) {
          return error_reply("set_chroma: class must be 0-11 or null");
        }
        cls = c.get<int>();
      }
      engine.control().update([&](synth::ControlState& s) { s.chroma_class = cls; });
      return nullptr;
    }
    if (type == "set_gain") {
      if (!msg.contains("value") || !msg["value"].is_number()) {
        return error_reply("set_gain needs a numeric \"value\"");
      }
      const float g = msg["value"].get<float>();
      if (!std::isfinite(g) || g < 0.0f) return error_reply("set_gain: value must be >= 0");
      engine.control().update([&](synth::ControlState& s) { s.gain = g; });
      return nullptr;
    }
  } catch (const Error& e) {
    return error_reply(e.what());
  }
  return error_reply("unknown message type '" + type + "'");
}

namespace {

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket&& socket, synth::Engine& engine) : ws_(std::move(socket)), engine_(engine) {}

  void run(http::request<http::string_body> request, std::function<void(std::weak_ptr<WsSession>)> on_open) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(request, [self = shared_from_this(), on_open](beast::error_code ec) {
      if (ec) return;
      on_open(self);
      self->read();
    });
  }

  void send(std::string text) {
    // A stalled client drops status frames rather than growing the queue.
    if (queue_.size() >= 32) return;
    queue_.push_back(std::move(text));
    if (queue_.size() == 1) write();
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return;
      const auto text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      const auto reply = handle_message(self->engine_, text);
      if (!reply.is_null()) self->send(reply.dump());
      self->read();
    });
  }

  void write() {
    ws_.text(true);
    ws_.async_write(net::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return;
      self->queue_.pop_front();
      if (!self->queue_.empty()) self->write();
    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  synth::Engine& engine_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket&& socket, synth::Engine& engine,
              std::function<void(std::weak_ptr<WsSession>)> on_open)
      : stream_(std::move(socket)), engine_(engine), on_open_(std::move(on_open)) {}

  void read() {
    request_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, request_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return;
      self->dispatch();
    });
  }

 private:
  void dispatch() {
    if (websocket::is_upgrade(request_)) {
      stream_.expires_never();
      std::make_shared<WsSession>(stream_.release_socket(), engine_)->run(std::move(request_), on_open_);
      return;
    }
    auto response = std::make_shared<http::response<http::string_body>>();
    response->version(request_.version());
    response->keep_alive(request_.keep_alive());
    response->set(http::field::server, "timbrelab");
    const auto target = request_.target();
    if ((request_.method() == http::verb::get || request_.method() == http::verb::head) &&
        (target == "/" || target == "/index.html")) {
      response->result(http::status::ok);
      response->set(http::field::content_type, "text/html; charset=utf-8");
      if (request_.method() == http::verb::get) response->body() = std::string(kPage);
      response->content_length(kPage.size());
    } else {
      response->result(http::status::not_found);
      response->set(http::field::content_type, "text/plain");
      response->body() = "not found\n";
      response->prepare_payload();
    }
    http::async_write(stream_, *response, [self = shared_from_this(), response](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (!response->keep_alive()) {
        beast::error_code ignored;
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        return;
      }
      self->read();
    });
  }

  beast::tcp_stream stream_;
  synth::Engine& engine_;
  std::function<void(std::weak_ptr<WsSession>)> on_open_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> request_;
};

}  // namespace

struct ControlServer::Impl {
  Impl(synth::Engine& e, ServerOptions o) : engine(e), options(std::move(o)), acceptor(ioc), timer(ioc) {}

  void accept() {
    acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      std::make_shared<HttpSession>(std::move(socket), engine, [this](std::weak_ptr<WsSession> s) {
        sessions.push_back(std::move(s));
      })->read();
      accept();
    });
  }

  void tick() {
    const auto period = std::chrono::duration<double>(1.0 / options.status_hz);
    timer.expires_after(std::chrono::duration_cast<std::chrono::steady_clock::duration>(period));
    timer.async_wait([this](beast::error_code ec) {
      if (ec) return;
      std::erase_if(sessions, [](const auto& w) { return w.expired(); });
      if (!sessions.empty()) {
        const auto text = status_message(engine, engine.control().current()).dump();
        for (auto& w : sessions) {
          if (auto s = w.lock()) s->send(text);
        }
      }
      tick();
    });
  }

  synth::Engine& engine;
  ServerOptions options;
  net::io_context ioc{1};
  tcp::acceptor acceptor;
  net::steady_timer timer;
  std::vector<std::weak_ptr<WsSession>> sessions;
  std::uint16_t bound_port = 0;
  std::thread thread;
};

ControlServer::ControlServer(synth::Engine& engine, ServerOptions options)
    : impl_(std::make_unique<Impl>(engine, std::move(options))) {
  if (!(impl_->options.status_hz > 0.0 && impl_->options.status_hz <= 20.0)) {
    throw Error(ErrorKind::kInvalidArgument, "status rate must be in (0, 20] Hz");
  }
  beast::error_code ec;
  const auto address = net::ip::make_address(impl_->options.address, ec);
  if (ec) throw Error(ErrorKind::kInvalidArgument, "bad bind address '" + impl_->options.address + "'");
  const tcp::endpoint endpoint(address, impl_->options.port);
  auto& a = impl_->acceptor;
  a.open(endpoint.protocol(), ec);
  if (!ec) a.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) a.bind(endpoint, ec);
  if (!ec) a.listen(net::socket_base::max_listen_connections, ec);
  if (ec) {
    throw Error(ErrorKind::kDevice, "cannot listen on " + impl_->options.address + ":" +
                                        std::to_string(impl_->options.port) + ": " + ec.message());
  }
  impl_->bound_port = a.local_endpoint().port();
}

ControlServer::~ControlServer() { stop(); }

std::uint16_t ControlServer::port() const { return impl_->bound_port; }

void ControlServer::start() {
  if (impl_->thread.joinable()) return;
  impl_->accept();
  impl_->tick();
  impl_->thread = std::thread([this] { impl_->ioc.run(); });
}

void ControlServer::stop() {
  if (!impl_ || !impl_->thread.joinable()) return;
  // Pending handlers (and the sessions they own) go with the io_context.
  impl_->ioc.stop();
  impl_->thread.join();
}

}  // namespace timbrelab::server
