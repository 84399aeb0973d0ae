/*
 *  Copyright 2026 The OBGE Authors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */

#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "obge/oram_tree.hpp"
#include "obge/protocol.hpp"
#include "obge/wire.hpp"

// Storage server, in-process controller boundary, transports and the TCP
// daemon.
namespace obge {

inline ErrorCode error_code_for(const std::exception& e) {
  if (dynamic_cast<const UnknownMessageType*>(&e)) return ErrorCode::UnknownType;
  if (dynamic_cast<const SessionAuthError*>(&e)) return ErrorCode::Session;
  if (dynamic_cast<const RangeError*>(&e)) return ErrorCode::Range;
  if (dynamic_cast<const IntegrityError*>(&e)) return ErrorCode::Integrity;
  if (dynamic_cast<const CapacityError*>(&e)) return ErrorCode::Capacity;
  if (dynamic_cast<const ProtocolError*>(&e)) return ErrorCode::Malformed;
  return ErrorCode::Internal;
}

[[noreturn]] inline void throw_remote(const ErrorReply& e) {
  const auto what = "server: " + e.detail;
  switch (e.code) {
    case ErrorCode::Range: throw RangeError(what);
    case ErrorCode::Integrity: throw IntegrityError(what);
    case ErrorCode::Session: throw SessionAuthError(what);
    case ErrorCode::Capacity: throw CapacityError(what);
    default: throw ProtocolError(what);
  }
}

class Transport {
 public:
  virtual ~Transport() = default;
  // One request frame in, one response frame out.
  virtual Bytes roundtrip(ByteSpan frame) = 0;
};

// Calls a frame handler in the same process; still encodes and decodes.
class LoopbackTransport : public Transport {
 public:
  using Handler = std::function<Bytes(ByteSpan)>;
  explicit LoopbackTransport(Handler h) : handler_(std::move(h)) {}
  Bytes roundtrip(ByteSpan frame) override { return handler_(frame); }

 private:
  Handler handler_;
};

// Sends a message and decodes the reply; server errors become exceptions.
inline Message call(Transport& t, const Message& request) {
  auto reply = decode_message(t.roundtrip(encode_message(request)));
  if (auto* err = std::get_if<ErrorReply>(&reply)) throw_remote(*err);
  return reply;
}

template <class T>
T expect(Message m) {
  if (auto* v = std::get_if<T>(&m)) return std::move(*v);
  throw ProtocolError(std::string("unexpected reply ") + to_string(type_of(m)));
}

// PathStorage over a transport.
class RemoteStorage : public PathStorage {
 public:
  explicit RemoteStorage(Transport& t) : t_(&t) {}

  Bytes read_path(TreeId tree, Leaf leaf) override {
    return expect<PathData>(call(*t_, ReadPath{tree, leaf})).buckets;
  }
  void write_path(TreeId tree, Leaf leaf, ByteSpan buckets) override {
    expect<Ack>(call(*t_, WritePath{tree, leaf, Bytes(buckets.begin(), buckets.end())}));
  }
  void upload_tree(TreeId tree, const OramTree& image) override {
    expect<Ack>(call(*t_, UploadTree{tree, image.serialize()}));
  }

 private:
  Transport* t_;
};

// The untrusted server. Tree storage is driven by ReadPath/WritePath/
// UploadTree messages. In enhanced mode it also hosts the controller, which
// reaches the storage only through frames on an internal loopback, so the
// trace holds exactly what the server process observes.
class StorageServer {
 public:
  explicit StorageServer(std::shared_ptr<AccessTrace> trace = std::make_shared<AccessTrace>())
      : store_(std::move(trace)),
        internal_([this](ByteSpan f) { return handle_frame(f); }),
        controller_storage_(internal_) {}

  StorageServer(const StorageServer&) = delete;
  StorageServer& operator=(const StorageServer&) = delete;

  TreeStore& store() { return store_; }
  AccessTrace& trace() { return store_.trace(); }

  // Storage handle for a controller living behind the internal boundary.
  PathStorage& controller_storage() { return controller_storage_; }

  void install_controller(Controller c) {
    std::lock_guard lock(controller_mu_);
    controller_.emplace(std::move(c));
  }
  bool has_controller() const { return controller_.has_value(); }

  // Runs `fn` with exclusive access to the controller.
  template <class Fn>
  auto with_controller(Fn&& fn) {
    std::lock_guard lock(controller_mu_);
    if (!controller_) throw ConfigError("no controller installed");
    return fn(*controller_);
  }

  Bytes handle_frame(ByteSpan data) {
    Frame frame;
    try {
      frame = decode_frame(data);
    } catch (const std::exception& e) {
      return reply_error(ErrorCode::Malformed, e.what());
    }
    return handle(frame);
  }

  Bytes handle(const Frame& frame) {
    try {
      auto reply = dispatch(from_frame(frame));
      return encode_message(reply);
    } catch (const std::exception& e) {
      return reply_error(error_code_for(e), e.what());
    }
  }

 private:
  Message dispatch(const Message& m) {
    if (auto* r = std::get_if<ReadPath>(&m)) return PathData{store_.read_path(r->tree, r->leaf)};
    if (auto* w = std::get_if<WritePath>(&m)) {
      store_.write_path(w->tree, w->leaf, w->buckets);
      return Ack{};
    }
    if (auto* u = std::get_if<UploadTree>(&m)) {
      store_.upload_tree(u->tree, OramTree::parse(u->image));
      return Ack{};
    }
    if (auto* q = std::get_if<EnclaveRequest>(&m)) {
      store_.trace().record(MsgType::EnclaveRequest, std::nullopt, std::nullopt, q->ct.size());
      std::lock_guard lock(controller_mu_);
      if (!controller_) throw ProtocolError("no controller on this server");
      auto sealed = controller_->handle(q->ct);
      store_.trace().record(MsgType::EnclaveResponse, std::nullopt, std::nullopt, sealed.size());
      return EnclaveResponse{std::move(sealed)};
    }
    throw ProtocolError(std::string("unexpected request ") + to_string(type_of(m)));
  }

  Bytes reply_error(ErrorCode code, const std::string& detail) {
    auto out = encode_message(ErrorReply{code, detail});
    store_.trace().record(MsgType::Error, std::nullopt, std::nullopt, out.size() - kFrameHeaderBytes);
    return out;
  }

  TreeStore store_;
  LoopbackTransport internal_;
  RemoteStorage controller_storage_;
  std::mutex controller_mu_;
  std::optional<Controller> controller_;
};

// ---------------------------------------------------------------------------
// TCP

namespace detail {

inline void write_all(int fd, ByteSpan data) {
  std::size_t done = 0;
  while (done < data.size()) {
    auto n = ::send(fd, data.data() + done, data.size() - done, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw ProtocolError(std::string("send: ") + std::strerror(errno));
    done += static_cast<std::size_t>(n);
  }
}

// False on clean EOF before the first byte.
inline bool read_exact(int fd, MutableByteSpan out) {
  std::size_t done = 0;
  while (done < out.size()) {
    auto n = ::recv(fd, out.data() + done, out.size() - done, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n == 0 && done == 0) return false;
    if (n <= 0) throw ProtocolError("connection closed mid-frame");
    done += static_cast<std::size_t>(n);
  }
  return true;
}

// Whole frame (header + payload), nullopt on clean EOF.
inline std::optional<Bytes> read_frame(int fd) {
  Bytes buf(kFrameHeaderBytes);
  if (!read_exact(fd, buf)) return std::nullopt;
  auto h = parse_frame_header(buf);
  buf.resize(kFrameHeaderBytes + h.payload_len);
  if (h.payload_len > 0 && !read_exact(fd, MutableByteSpan(buf).subspan(kFrameHeaderBytes))) {
    throw ProtocolError("connection closed mid-frame");
  }
  return buf;
}

inline std::pair<std::string, std::uint16_t> split_host_port(const std::string& addr) {
  auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw ConfigError("address must be host:port, got " + addr);
  int port = 0;
  try {
    port = std::stoi(addr.substr(colon + 1));
  } catch (const std::exception&) {
    throw ConfigError("bad port in " + addr);
  }
  if (port < 0 || port > 65535) throw ConfigError("bad port in " + addr);
  return {addr.substr(0, colon), static_cast<std::uint16_t>(port)};
}

}  // namespace detail

class TcpTransport : public Transport {
 public:
  explicit TcpTransport(const std::string& host_port) {
    auto [host, port] = detail::split_host_port(host_port);
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res) {
      throw ConfigError("cannot resolve " + host);
    }
    fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd_ < 0 || ::connect(fd_, res->ai_addr, res->ai_addrlen) != 0) {
      ::freeaddrinfo(res);
      if (fd_ >= 0) ::close(fd_);
      throw ConfigError("cannot connect to " + host_port);
    }
    ::freeaddrinfo(res);
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  }

  ~TcpTransport() override {
    if (fd_ >= 0) ::close(fd_);
  }
  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;

  Bytes roundtrip(ByteSpan frame) override {
    detail::write_all(fd_, frame);
    auto reply = detail::read_frame(fd_);
    if (!reply) throw ProtocolError("server closed the connection");
    return std::move(*reply);
  }

 private:
  int fd_ = -1;
};

// Accepts connections and feeds frames to a StorageServer. One thread per
// connection; the server serializes storage and controller access.
class Daemon {
 public:
  Daemon(StorageServer& server, const std::string& listen_addr) : server_(&server) {
    auto [host, port] = detail::split_host_port(listen_addr);
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw ConfigError("socket failed");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(port);
    if (::inet_pton(AF_INET, host == "localhost" ? "127.0.0.1" : host.c_str(), &sa.sin_addr) != 1) {
      ::close(listen_fd_);
      throw ConfigError("bad listen address " + host);
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0 ||
        ::listen(listen_fd_, 16) != 0) {
      ::close(listen_fd_);
      throw ConfigError("cannot bind " + listen_addr + ": " + std::strerror(errno));
    }
    socklen_t len = sizeof sa;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&sa), &len);
    port_ = ntohs(sa.sin_port);
    acceptor_ = std::thread([this] { accept_loop(); });
  }

  ~Daemon() { stop(); }
  Daemon(const Daemon&) = delete;
  Daemon& operator=(const Daemon&) = delete;

  std::uint16_t port() const { return port_; }

  // Stops accepting, closes client connections and waits for in-flight
  // requests to finish.
  void stop() {
    if (stopping_.exchange(true)) return;
    if (acceptor_.joinable()) acceptor_.join();
    ::close(listen_fd_);
    {
      std::lock_guard lock(mu_);
      for (int fd : client_fds_) ::shutdown(fd, SHUT_RDWR);
    }
    for (auto& t : workers_) {
      if (t.joinable()) t.join();
    }
  }

 private:
  void accept_loop() {
    while (!stopping_) {
      pollfd p{listen_fd_, POLLIN, 0};
      if (::poll(&p, 1, 50) <= 0) continue;
      int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) continue;
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      std::lock_guard lock(mu_);
      client_fds_.push_back(fd);
      workers_.emplace_back([this, fd] { serve_connection(fd); });
    }
  }

  void serve_connection(int fd) {
    try {
      while (!stopping_) {
        std::optional<Bytes> frame;
        try {
          frame = detail::read_frame(fd);
        } catch (const ProtocolError& e) {
          // Framing is lost; answer once and drop the connection.
          detail::write_all(fd, encode_message(ErrorReply{ErrorCode::Malformed, e.what()}));
          break;
        }
        if (!frame) break;
        detail::write_all(fd, server_->handle_frame(*frame));
      }
    } catch (const std::exception&) {
    }
    std::lock_guard lock(mu_);
    ::close(fd);
    std::erase(client_fds_, fd);
  }

  StorageServer* server_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex mu_;
  std::vector<int> client_fds_;
  std::vector<std::thread> workers_;
};

// ---------------------------------------------------------------------------
// Config and persisted server state

// key=value text; `#` starts a comment.
struct ServerConfig {
  Mode mode = Mode::trivial;
  std::filesystem::path tree_path;
  std::filesystem::path controller_path;
  std::string listen_addr = "127.0.0.1:7878";
  std::size_t budget_bytes = 0;
  std::uint32_t bucket_size = 5;
  std::size_t stash_max = 128;
  std::filesystem::path trace_path;

  static ServerConfig parse(std::istream& in, const std::filesystem::path& base = {}) {
    ServerConfig c;
    std::string line;
    std::size_t lineno = 0;
    auto resolve = [&](const std::string& v) {
      std::filesystem::path p(v);
      return p.is_relative() && !base.empty() ? base / p : p;
    };
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      auto eq = line.find('=');
      if (eq == std::string::npos) throw ParseError(lineno, "expected key=value");
      auto trim = [](std::string s) {
        auto b = s.find_first_not_of(" \t\r");
        auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
      };
      auto key = trim(line.substr(0, eq));
      auto value = trim(line.substr(eq + 1));
      try {
        if (key == "mode") {
          c.mode = parse_mode(value);
        } else if (key == "tree_path") {
          c.tree_path = resolve(value);
        } else if (key == "controller_path") {
          c.controller_path = resolve(value);
        } else if (key == "listen_addr") {
          c.listen_addr = value;
        } else if (key == "budget_bytes") {
          c.budget_bytes = std::stoull(value);
        } else if (key == "Z") {
          c.bucket_size = static_cast<std::uint32_t>(std::stoul(value));
        } else if (key == "stash_max") {
          c.stash_max = std::stoull(value);
        } else if (key == "trace_path") {
          c.trace_path = resolve(value);
        } else {
          throw ParseError(lineno, "unknown key '" + key + "'");
        }
      } catch (const std::logic_error&) {
        throw ParseError(lineno, "bad value for " + key);
      }
    }
    if (c.tree_path.empty()) throw ConfigError("config: tree_path is required");
    if (c.mode == Mode::enhanced && c.controller_path.empty()) {
      throw ConfigError("config: controller_path is required in enhanced mode");
    }
    return c;
  }

  static ServerConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    return parse(in, path.parent_path());
  }

  std::string to_text() const {
    std::ostringstream os;
    os << "mode=" << to_string(mode) << "\n"
       << "tree_path=" << tree_path.string() << "\n";
    if (!controller_path.empty()) os << "controller_path=" << controller_path.string() << "\n";
    os << "listen_addr=" << listen_addr << "\n"
       << "budget_bytes=" << budget_bytes << "\n"
       << "Z=" << bucket_size << "\n"
       << "stash_max=" << stash_max << "\n";
    if (!trace_path.empty()) os << "trace_path=" << trace_path.string() << "\n";
    return os.str();
  }
};

// Tree 0 lives at tree_path, level tree k at tree_path + ".level<k>".
inline std::filesystem::path tree_file(const std::filesystem::path& base, TreeId id) {
  if (id == kDataTree) return base;
  auto p = base;
  p += ".level" + std::to_string(id);
  return p;
}

inline void save_trees(TreeStore& store, const std::filesystem::path& base) {
  for (auto id : store.tree_ids()) store.snapshot(id).save(tree_file(base, id));
}

// Loads tree 0 and consecutive level trees until one is missing.
inline void load_trees(TreeStore& store, const std::filesystem::path& base,
                       std::uint32_t bucket_size) {
  for (TreeId id = kDataTree;; ++id) {
    auto path = tree_file(base, id);
    if (!std::filesystem::exists(path)) {
      if (id == kDataTree) throw ConfigError("missing tree file " + path.string());
      break;
    }
    auto tree = OramTree::load(path);
    if (tree.bucket_size() != bucket_size) {
      throw ConfigError("tree " + path.string() + " has Z=" + std::to_string(tree.bucket_size()) +
                        ", config says " + std::to_string(bucket_size));
    }
    store.install(id, std::move(tree));
  }
}

// Server-side state from a config: trees, plus the controller in enhanced mode.
inline void load_server_state(StorageServer& server, const ServerConfig& cfg) {
  load_trees(server.store(), cfg.tree_path, cfg.bucket_size);
  if (cfg.mode == Mode::enhanced) {
    server.install_controller(Controller::restore(read_file(cfg.controller_path),
                                                  server.controller_storage(), Drbg::from_os()));
  }
}

inline void save_server_state(StorageServer& server, const ServerConfig& cfg) {
  save_trees(server.store(), cfg.tree_path);
  if (cfg.mode == Mode::enhanced) {
    auto state = server.with_controller([](Controller& c) { return c.serialize_state(); });
    write_file_atomic(cfg.controller_path, state);
  }
  if (!cfg.trace_path.empty()) server.trace().save(cfg.trace_path);
}

// ---------------------------------------------------------------------------
// Clients

// Enhanced-mode client: one EnclaveRequest per query.
class SessionQueryClient {
 public:
  SessionQueryClient(const ClientKeys& keys, Transport& t, Drbg rng)
      : session_(keys, std::move(rng)), t_(&t) {}

  EncryptedPath query(Vertex u, Vertex v) {
    auto reply = expect<EnclaveResponse>(call(*t_, EnclaveRequest{session_.request(u, v)}));
    return session_.response(reply.ct);
  }

 private:
  SessionClient session_;
  Transport* t_;
};

// Server and client in one process, talking through encoded frames. Trivial
// mode keeps the ORAM client state here; enhanced mode installs the
// controller in the server.
class LocalDeployment {
 public:
  LocalDeployment(const Graph& g, const SetupOptions& opts, Drbg& rng)
      : link_([this](ByteSpan f) { return server_.handle_frame(f); }), storage_(link_) {
    if (opts.mode == Mode::trivial) {
      auto res = setup(g, opts, storage_, rng);
      keys_ = res.client;
      data_params_ = res.data_params;
      spdx_size_ = res.spdx_size;
      trivial_.emplace(std::move(*res.trivial));
    } else {
      auto res = setup(g, opts, server_.controller_storage(), rng);
      keys_ = res.client;
      data_params_ = res.data_params;
      spdx_size_ = res.spdx_size;
      server_.install_controller(std::move(*res.controller));
      session_.emplace(keys_, link_, rng.fork());
    }
  }

  LocalDeployment(const LocalDeployment&) = delete;
  LocalDeployment& operator=(const LocalDeployment&) = delete;

  EncryptedPath query(Vertex u, Vertex v) {
    return trivial_ ? trivial_->query(u, v) : session_->query(u, v);
  }

  std::optional<PlainPath> path(Vertex u, Vertex v) {
    return reveal(query(u, v), u, v, keys_.keys.k1);
  }

  const ClientKeys& keys() const { return keys_; }
  const OramParams& data_params() const { return data_params_; }
  std::uint64_t spdx_size() const { return spdx_size_; }
  StorageServer& server() { return server_; }
  AccessTrace& trace() { return server_.trace(); }
  TrivialClient* trivial() { return trivial_ ? &*trivial_ : nullptr; }
  Transport& link() { return link_; }

 private:
  StorageServer server_;
  LoopbackTransport link_;
  RemoteStorage storage_;
  ClientKeys keys_;
  OramParams data_params_;
  std::uint64_t spdx_size_ = 0;
  std::optional<TrivialClient> trivial_;
  std::optional<SessionQueryClient> session_;
};

}  // namespace obge
