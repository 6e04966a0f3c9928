// Copyright 2026 The archgen Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "archgen/external.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

#include "archgen/errors.hpp"
#include "archgen/parallel.hpp"
#include "archgen/serialize.hpp"

extern char** environ;

namespace archgen {

const char* to_string(TrainableScope s) {
  switch (s) {
    case TrainableScope::kPredictedOnly: return "predicted_only";
    case TrainableScope::kBnOnly: return "bn_only";
    case TrainableScope::kFull: return "full";
  }
  return "?";
}

TrainableScope trainable_scope_from_string(const std::string& s) {
  if (s == "predicted_only") return TrainableScope::kPredictedOnly;
  if (s == "bn_only") return TrainableScope::kBnOnly;
  if (s == "full") return TrainableScope::kFull;
  throw ProtocolError("unknown trainable scope '" + s + "'");
}

TrainableScope choose_scope(const Architecture& arch, const ReconstructionTrace* trace) {
  if (trace && !trace->empty()) return TrainableScope::kPredictedOnly;
  for (const auto& b : arch.blocks)
    for (const auto& l : b.layers)
      if (l.category == LayerCategory::kOther && l.name == "batchnorm") return TrainableScope::kBnOnly;
  return TrainableScope::kFull;
}

void TrainRequest::check() const {
  if (protocol_version != kProtocolVersion) throw ProtocolError("protocol version mismatch");
  if (trainable_scope == TrainableScope::kPredictedOnly && predicted_indices.empty())
    throw ProtocolError("predicted_only scope needs predicted block indices");
  if (epochs < 1 || batch_size < 1) throw ProtocolError("epochs and batch_size must be positive");
}

Json hello_message() { return Json{{"type", "hello"}, {"protocol_version", kProtocolVersion}}; }

Json request_to_json(const TrainRequest& r) {
  return Json{{"type", "evaluate"},
              {"protocol_version", r.protocol_version},
              {"id", r.id},
              {"arch", architecture_to_json(r.arch)},
              {"dataset", r.dataset},
              {"epochs", r.epochs},
              {"batch_size", r.batch_size},
              {"lr_target", r.lr_target},
              {"trainable_scope", to_string(r.trainable_scope)},
              {"predicted_indices", r.predicted_indices},
              {"train_head", r.train_head},
              {"seed", r.seed}};
}

TrainRequest request_from_json(const Json& j) {
  try {
    if (j.at("type") != "evaluate") throw ProtocolError("expected an evaluate message");
    TrainRequest r;
    r.protocol_version = j.at("protocol_version").get<int>();
    r.id = j.at("id").get<std::uint64_t>();
    r.arch = architecture_from_json(j.at("arch"));
    r.dataset = j.at("dataset").get<std::string>();
    r.epochs = j.at("epochs").get<int>();
    r.batch_size = j.at("batch_size").get<int>();
    r.lr_target = j.at("lr_target").get<double>();
    r.trainable_scope = trainable_scope_from_string(j.at("trainable_scope").get<std::string>());
    r.predicted_indices = j.at("predicted_indices").get<std::vector<std::size_t>>();
    r.train_head = j.value("train_head", true);
    r.seed = j.at("seed").get<std::uint64_t>();
    r.check();
    return r;
  } catch (const Json::exception& e) {
    throw ProtocolError(std::string("malformed evaluate message: ") + e.what());
  } catch (const DataError& e) {
    throw ProtocolError(std::string("malformed architecture: ") + e.what());
  }
}

Json response_to_json(const TrainResponse& r) {
  if (r.error_code)
    return Json{{"type", "error"}, {"id", r.id}, {"code", *r.error_code}, {"message", r.error_message}};
  return Json{{"type", "result"},
              {"id", r.id},
              {"accuracy", r.accuracy},
              {"param_count", r.param_count},
              {"wall_ms", r.wall_ms}};
}

TrainResponse response_from_json(const Json& j) {
  try {
    TrainResponse r;
    const auto type = j.at("type").get<std::string>();
    r.id = j.at("id").get<std::uint64_t>();
    if (type == "error") {
      r.error_code = j.at("code").get<std::string>();
      r.error_message = j.value("message", "");
      return r;
    }
    if (type != "result") throw ProtocolError("unexpected message type '" + type + "'");
    r.accuracy = j.at("accuracy").get<double>();
    if (!(r.accuracy >= 0.0 && r.accuracy <= 1.0)) throw ProtocolError("accuracy outside [0, 1]");
    r.param_count = j.value("param_count", std::int64_t{0});
    r.wall_ms = j.value("wall_ms", 0.0);
    return r;
  } catch (const Json::exception& e) {
    throw ProtocolError(std::string("malformed response: ") + e.what());
  }
}

// ---------------------------------------------------------------- channels

namespace {

class FdChannel : public WorkerChannel {
 public:
  FdChannel(int read_fd, int write_fd) : read_fd_(read_fd), write_fd_(write_fd) {}
  ~FdChannel() override { close_fds(); }

  void send_line(const std::string& line) override {
    std::string data = line + '\n';
    const char* p = data.data();
    std::size_t left = data.size();
    while (left > 0) {
      const ssize_t n = ::write(write_fd_, p, left);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw EvalError(EvalError::Code::kWorkerCrash, std::string("write to worker failed: ") + std::strerror(errno));
      }
      p += n;
      left -= static_cast<std::size_t>(n);
    }
  }

  std::optional<std::string> read_line(std::chrono::milliseconds timeout) override {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      if (auto pos = buf_.find('\n'); pos != std::string::npos) {
        std::string line = buf_.substr(0, pos);
        buf_.erase(0, pos + 1);
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) return std::nullopt;
      pollfd pfd{read_fd_, POLLIN, 0};
      const int rc = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(left.count(), 1 << 30)));
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw EvalError(EvalError::Code::kWorkerCrash, std::string("poll failed: ") + std::strerror(errno));
      }
      if (rc == 0) return std::nullopt;
      char chunk[4096];
      const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        throw EvalError(EvalError::Code::kWorkerCrash, std::string("read failed: ") + std::strerror(errno));
      }
      if (n == 0) throw EvalError(EvalError::Code::kWorkerCrash, "worker closed the stream");
      buf_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 protected:
  void close_fds() {
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
    read_fd_ = write_fd_ = -1;
  }

 private:
  int read_fd_;
  int write_fd_;
  std::string buf_;
};

class ProcessChannel final : public FdChannel {
 public:
  ProcessChannel(int read_fd, int write_fd, pid_t pid) : FdChannel(read_fd, write_fd), pid_(pid) {}
  ~ProcessChannel() override {
    close_fds();
    for (int i = 0; i < 20; ++i) {
      if (::waitpid(pid_, nullptr, WNOHANG) == pid_) return;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
  }

 private:
  pid_t pid_;
};

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

}  // namespace

std::unique_ptr<WorkerChannel> spawn_stdio_worker(const std::vector<std::string>& argv) {
  if (argv.empty()) throw ConfigError("external worker command is empty");
  ignore_sigpipe();
  int to_child[2], from_child[2];
  if (::pipe2(to_child, O_CLOEXEC) != 0) throw EvalError(EvalError::Code::kWorkerCrash, "pipe failed");
  if (::pipe2(from_child, O_CLOEXEC) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw EvalError(EvalError::Code::kWorkerCrash, "pipe failed");
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);
  pid_t pid = 0;
  const int rc = ::posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(to_child[0]);
  ::close(from_child[1]);
  if (rc != 0) {
    ::close(to_child[1]);
    ::close(from_child[0]);
    throw EvalError(EvalError::Code::kWorkerCrash, "cannot start worker '" + argv[0] + "': " + std::strerror(rc));
  }
  return std::make_unique<ProcessChannel>(from_child[0], to_child[1], pid);
}

std::unique_ptr<WorkerChannel> connect_socket_worker(const std::string& path) {
  ignore_sigpipe();
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  if (path.size() >= sizeof addr.sun_path) throw ConfigError("socket path too long");
  std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
  const int fd = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) throw EvalError(EvalError::Code::kWorkerCrash, "socket failed");
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    const int err = errno;
    ::close(fd);
    throw EvalError(EvalError::Code::kWorkerCrash, "cannot connect to " + path + ": " + std::strerror(err));
  }
  return std::make_unique<FdChannel>(fd, fd);
}

// ---------------------------------------------------------------- evaluator

void ExternalConfig::check() const {
  if (command.empty() && socket_path.empty())
    throw ConfigError("external evaluator needs a worker command or a socket path");
  if (pool_size < 1) throw ConfigError("pool_size must be >= 1");
  if (handshake_timeout.count() <= 0 || eval_timeout.count() <= 0)
    throw ConfigError("timeouts must be positive");
  if (epochs < 1 || batch_size < 1) throw ConfigError("epochs and batch_size must be positive");
}

Json external_config_to_json(const ExternalConfig& c) {
  return Json{{"command", c.command},
              {"socket_path", c.socket_path},
              {"pool_size", c.pool_size},
              {"handshake_timeout_ms", c.handshake_timeout.count()},
              {"eval_timeout_ms", c.eval_timeout.count()},
              {"dataset", c.dataset},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"lr_target", c.lr_target},
              {"train_head", c.train_head}};
}

ExternalConfig external_config_from_json(const Json& j, ExternalConfig c) {
  if (!j.is_object()) throw ConfigError("external config must be an object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "command") c.command = v.get<std::vector<std::string>>();
      else if (key == "socket_path") c.socket_path = v.get<std::string>();
      else if (key == "pool_size") c.pool_size = v.get<int>();
      else if (key == "handshake_timeout_ms") c.handshake_timeout = std::chrono::milliseconds(v.get<long long>());
      else if (key == "eval_timeout_ms") c.eval_timeout = std::chrono::milliseconds(v.get<long long>());
      else if (key == "dataset") c.dataset = v.get<std::string>();
      else if (key == "epochs") c.epochs = v.get<int>();
      else if (key == "batch_size") c.batch_size = v.get<int>();
      else if (key == "lr_target") c.lr_target = v.get<double>();
      else if (key == "train_head") c.train_head = v.get<bool>();
      else throw ConfigError("unknown external key '" + key + "'");
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("bad external config: ") + e.what());
  }
  return c;
}

struct ExternalEvaluator::Slot {
  std::unique_ptr<WorkerChannel> channel;
};

ExternalEvaluator::ExternalEvaluator(ExternalConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.check();
  for (int i = 0; i < cfg_.pool_size; ++i) slots_.push_back(std::make_unique<Slot>());
}

ExternalEvaluator::~ExternalEvaluator() = default;

void ExternalEvaluator::connect(Slot& slot) {
  slot.channel = cfg_.socket_path.empty() ? spawn_stdio_worker(cfg_.command)
                                          : connect_socket_worker(cfg_.socket_path);
  slot.channel->send_line(hello_message().dump());
  const auto line = slot.channel->read_line(cfg_.handshake_timeout);
  if (!line) {
    slot.channel.reset();
    throw EvalError(EvalError::Code::kTimeout, "worker handshake timed out");
  }
  Json reply;
  try {
    reply = Json::parse(*line);
  } catch (const Json::exception&) {
    slot.channel.reset();
    throw ProtocolError("unparseable handshake reply");
  }
  const int version = reply.value("protocol_version", -1);
  if (reply.value("type", "") != "hello" || version != kProtocolVersion) {
    slot.channel.reset();
    throw ProtocolError("worker protocol version " + std::to_string(version) + ", expected " +
                        std::to_string(kProtocolVersion));
  }
}

TrainRequest ExternalEvaluator::make_request(const EvalRequest& request, std::uint64_t id) const {
  TrainRequest r;
  r.id = id;
  r.arch = *request.arch;
  r.dataset = cfg_.dataset;
  r.epochs = cfg_.epochs;
  r.batch_size = cfg_.batch_size;
  r.lr_target = cfg_.lr_target;
  r.trainable_scope = choose_scope(*request.arch, request.trace);
  if (r.trainable_scope == TrainableScope::kPredictedOnly) r.predicted_indices = request.trace->eliminated;
  r.train_head = cfg_.train_head;
  r.seed = request.seed;
  return r;
}

FitnessRecord ExternalEvaluator::run_on(Slot& slot, const EvalRequest& request) {
  const auto start = std::chrono::steady_clock::now();
  std::uint64_t id;
  {
    std::lock_guard lock(id_mutex_);
    id = next_id_++;
  }
  const auto req = make_request(request, id);
  FitnessRecord rec;
  rec.provenance = Provenance::kExternal;
  rec.key = architecture_hash(*request.arch);
  rec.param_count = param_count(*request.arch);
  rec.mode = "e" + std::to_string(req.epochs) + "/" + to_string(req.trainable_scope);
  auto fail = [&](const std::string& what, bool drop_worker) {
    if (drop_worker) slot.channel.reset();
    rec.fitness = 0.0;
    rec.error = true;
    rec.error_message = what;
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return rec;
  };
  try {
    if (!slot.channel) connect(slot);
    slot.channel->send_line(request_to_json(req).dump());
    const auto line = slot.channel->read_line(cfg_.eval_timeout);
    if (!line) return fail("evaluation timed out", true);
    TrainResponse resp;
    try {
      resp = response_from_json(Json::parse(*line));
    } catch (const Json::exception& e) {
      return fail(std::string("malformed response: ") + e.what(), true);
    }
    if (resp.id != id) return fail("response id mismatch", true);
    if (resp.error_code) return fail(*resp.error_code + ": " + resp.error_message, false);
    rec.fitness = resp.accuracy;
    if (resp.param_count > 0) rec.param_count = resp.param_count;
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return rec;
  } catch (const ProtocolError& e) {
    if (slot.channel) return fail(e.what(), true);
    throw;  // handshake version mismatch is fatal
  } catch (const EvalError& e) {
    return fail(e.what(), true);
  }
}

FitnessRecord ExternalEvaluator::evaluate(const EvalRequest& request) {
  return run_on(*slots_.front(), request);
}

std::vector<FitnessRecord> ExternalEvaluator::evaluate_batch(std::span<const EvalRequest> requests) {
  std::vector<FitnessRecord> out(requests.size());
  const std::size_t n_slots = slots_.size();
  // Slot s handles requests s, s + n_slots, ... in order.
  parallel_for(std::min(n_slots, requests.size()), static_cast<int>(n_slots), [&](std::size_t s) {
    for (std::size_t i = s; i < requests.size(); i += n_slots) out[i] = run_on(*slots_[s], requests[i]);
  });
  return out;
}

}  // namespace archgen
