// SPDX-License-Identifier: Apache-2.0
//
// Evaluator backed by a child process speaking JSON Lines on stdin/stdout:
//
//   -> {"type":"init","protocol":1,"space":{...}}
//   <- {"type":"ready","layers":L}
//   -> {"type":"evaluate","id":N,"configs":[[b1,...,bL],...]}
//   <- {"type":"result","id":N,"scores":[...]}      (any id order)
//   <- {"type":"error","id":N,"message":"..."}      (fails the batch)
//   -> {"type":"shutdown"}
#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <string>

#include "bitsearch/config_space.hpp"
#include "bitsearch/evaluator.hpp"

namespace bitsearch {

inline constexpr int kProtocolVersion = 1;

struct ExternalOptions {
  /// Per batch, including a restart and resend.
  std::chrono::milliseconds timeout{600'000};
  /// Configs per evaluate request; a batch is pipelined as several requests.
  /// Zero sends the whole batch as one request.
  std::size_t request_size = 0;
};

class ExternalEvaluator : public Evaluator {
 public:
  /// Spawns `command` through /bin/sh and performs the handshake.
  ExternalEvaluator(std::string command, SearchSpace space, ExternalOptions options = {});
  ~ExternalEvaluator() override;
  ExternalEvaluator(const ExternalEvaluator&) = delete;
  ExternalEvaluator& operator=(const ExternalEvaluator&) = delete;

  /// Restarts the process once and resends the batch if it dies mid-batch.
  std::vector<double> evaluate_batch(std::span<const BitConfig> configs) override;

  std::size_t restarts() const { return restarts_; }
  std::size_t requests_sent() const { return requests_sent_; }
  std::size_t responses_received() const { return responses_received_; }

 private:
  class Process;

  void start(std::chrono::steady_clock::time_point deadline);
  std::vector<double> run_batch(std::span<const BitConfig> configs,
                                std::chrono::steady_clock::time_point deadline);

  std::string command_;
  SearchSpace space_;
  ExternalOptions options_;
  std::unique_ptr<Process> process_;
  std::size_t next_id_ = 1;
  std::size_t restarts_ = 0;
  std::size_t requests_sent_ = 0;
  std::size_t responses_received_ = 0;
};

}  // namespace bitsearch
