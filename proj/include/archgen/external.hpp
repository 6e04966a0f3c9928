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

#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "archgen/evaluation.hpp"

namespace archgen {

inline constexpr int kProtocolVersion = 1;

enum class TrainableScope { kPredictedOnly, kBnOnly, kFull };

const char* to_string(TrainableScope s);
TrainableScope trainable_scope_from_string(const std::string& s);

/// predicted_only when the trace replaced something, else bn_only when the
/// architecture has normalization layers, else full.
TrainableScope choose_scope(const Architecture& arch, const ReconstructionTrace* trace);

struct TrainRequest {
  int protocol_version = kProtocolVersion;
  std::uint64_t id = 0;
  Architecture arch;
  std::string dataset = "cifar10-subset-2k";
  int epochs = 6;
  int batch_size = 512;
  double lr_target = 0.01;
  TrainableScope trainable_scope = TrainableScope::kFull;
  std::vector<std::size_t> predicted_indices;
  bool train_head = true;
  std::uint64_t seed = 0;

  /// Throws ProtocolError when predicted_only has no indices.
  void check() const;
};

struct TrainResponse {
  std::uint64_t id = 0;
  double accuracy = 0.0;
  std::int64_t param_count = 0;
  double wall_ms = 0.0;
  std::optional<std::string> error_code;
  std::string error_message;
};

/// Wire messages, one JSON object per line.
Json hello_message();
Json request_to_json(const TrainRequest& r);
TrainRequest request_from_json(const Json& j);
Json response_to_json(const TrainResponse& r);
/// Parses a "result" or "error" line. Throws ProtocolError on anything else.
TrainResponse response_from_json(const Json& j);

/// Bidirectional line channel to one worker.
class WorkerChannel {
 public:
  virtual ~WorkerChannel() = default;
  virtual void send_line(const std::string& line) = 0;
  /// nullopt on timeout. Throws EvalError(kWorkerCrash) on end of stream.
  virtual std::optional<std::string> read_line(std::chrono::milliseconds timeout) = 0;
};

/// Worker process speaking over its stdin/stdout.
std::unique_ptr<WorkerChannel> spawn_stdio_worker(const std::vector<std::string>& argv);
/// Worker listening on a Unix domain socket.
std::unique_ptr<WorkerChannel> connect_socket_worker(const std::string& path);

struct ExternalConfig {
  std::vector<std::string> command;  // stdio transport
  std::string socket_path;           // socket transport when non-empty
  int pool_size = 1;
  std::chrono::milliseconds handshake_timeout{10'000};
  std::chrono::milliseconds eval_timeout{600'000};
  std::string dataset = "cifar10-subset-2k";
  int epochs = 6;
  int batch_size = 512;
  double lr_target = 0.01;
  bool train_head = true;

  void check() const;
};

Json external_config_to_json(const ExternalConfig& c);
ExternalConfig external_config_from_json(const Json& j, ExternalConfig base = {});

/// Client side of the trainer protocol. Each pool slot owns one worker
/// with at most one request in flight. Malformed, late or failed replies
/// yield an error-flagged record; the slot's worker is then restarted. A
/// protocol version mismatch during the handshake throws ProtocolError.
class ExternalEvaluator final : public Evaluator {
 public:
  explicit ExternalEvaluator(ExternalConfig cfg);
  ~ExternalEvaluator() override;

  using Evaluator::evaluate;
  FitnessRecord evaluate(const EvalRequest& request) override;
  std::vector<FitnessRecord> evaluate_batch(std::span<const EvalRequest> requests) override;
  bool batched() const override { return true; }
  std::string name() const override { return "external"; }

  TrainRequest make_request(const EvalRequest& request, std::uint64_t id) const;

 private:
  struct Slot;
  FitnessRecord run_on(Slot& slot, const EvalRequest& request);
  void connect(Slot& slot);

  ExternalConfig cfg_;
  std::vector<std::unique_ptr<Slot>> slots_;
  std::mutex id_mutex_;
  std::uint64_t next_id_ = 1;
};

}  // namespace archgen
