// SPDX-License-Identifier: Apache-2.0
#include "bitsearch/external.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <map>
#include <optional>
#include <thread>

#include <json.hpp>

#include "bitsearch/error.hpp"

extern char** environ;

namespace bitsearch {

namespace {

using Clock = std::chrono::steady_clock;

// The child went away (EOF on its stdout or EPIPE on its stdin).
struct ProcessDied {
  std::string detail;
};

struct TimedOut {};

int remaining_ms(Clock::time_point deadline) {
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
  return static_cast<int>(std::max<std::int64_t>(0, std::min<std::int64_t>(left.count(), 1 << 30)));
}

}  // namespace

class ExternalEvaluator::Process {
 public:
  explicit Process(const std::string& command) {
    int to_child[2];
    int from_child[2];
    if (pipe2(to_child, O_CLOEXEC) != 0 || pipe2(from_child, O_CLOEXEC) != 0)
      throw EvaluationError(std::string("pipe: ") + std::strerror(errno));

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);
    const char* argv[] = {"sh", "-c", command.c_str(), nullptr};
    const int rc = posix_spawn(&pid_, "/bin/sh", &actions, nullptr, const_cast<char* const*>(argv), environ);
    posix_spawn_file_actions_destroy(&actions);
    close(to_child[0]);
    close(from_child[1]);
    if (rc != 0) {
      close(to_child[1]);
      close(from_child[0]);
      throw EvaluationError("cannot spawn evaluator '" + command + "': " + std::strerror(rc));
    }
    in_ = to_child[1];
    out_ = from_child[0];
    fcntl(in_, F_SETFL, fcntl(in_, F_GETFL) | O_NONBLOCK);
    fcntl(out_, F_SETFL, fcntl(out_, F_GETFL) | O_NONBLOCK);
  }

  ~Process() { terminate(std::chrono::milliseconds(2000)); }

  /// Queues a line; next_line() and flush() do the writing.
  void send(const std::string& line) { pending_ += line + '\n'; }

  /// Writes pending bytes and reads available lines until a full line is
  /// available or the deadline passes.
  std::optional<std::string> next_line(Clock::time_point deadline) {
    for (;;) {
      if (auto line = pop_line()) return line;
      if (eof_) throw ProcessDied{exit_detail()};
      pollfd fds[2] = {{out_, POLLIN, 0}, {in_, static_cast<short>(pending_.empty() ? 0 : POLLOUT), 0}};
      const int ready = poll(fds, pending_.empty() ? 1 : 2, remaining_ms(deadline));
      if (ready < 0 && errno != EINTR) throw EvaluationError(std::string("poll: ") + std::strerror(errno));
      if (ready == 0 && Clock::now() >= deadline) throw TimedOut{};
      if (!pending_.empty() && (fds[1].revents & (POLLOUT | POLLERR | POLLHUP))) write_some();
      if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) read_some();
    }
  }

  void flush(Clock::time_point deadline) {
    while (!pending_.empty()) {
      pollfd fd{in_, POLLOUT, 0};
      const int ready = poll(&fd, 1, remaining_ms(deadline));
      if (ready == 0) throw TimedOut{};
      write_some();
    }
  }

  /// Closes stdin, waits up to `grace` for a clean exit, then kills.
  void terminate(std::chrono::milliseconds grace) {
    if (pid_ <= 0) return;
    if (in_ >= 0) close(in_), in_ = -1;
    const auto until = Clock::now() + grace;
    int status = 0;
    while (waitpid(pid_, &status, WNOHANG) == 0) {
      if (Clock::now() >= until) {
        kill(pid_, SIGKILL);
        waitpid(pid_, &status, 0);
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    pid_ = -1;
    if (out_ >= 0) close(out_), out_ = -1;
  }

  void kill_now() {
    if (pid_ > 0) kill(pid_, SIGKILL);
    terminate(std::chrono::milliseconds(1000));
  }

 private:
  std::optional<std::string> pop_line() {
    const auto nl = buffer_.find('\n');
    if (nl == std::string::npos) return std::nullopt;
    std::string line = buffer_.substr(0, nl);
    buffer_.erase(0, nl + 1);
    return line;
  }

  void write_some() {
    const ssize_t n = write(in_, pending_.data(), pending_.size());
    if (n > 0) {
      pending_.erase(0, static_cast<std::size_t>(n));
    } else if (n < 0 && errno != EAGAIN && errno != EINTR) {
      // EPIPE: the child closed its stdin; treat as death once stdout drains.
      pending_.clear();
    }
  }

  void read_some() {
    char chunk[65536];
    for (;;) {
      const ssize_t n = read(out_, chunk, sizeof chunk);
      if (n > 0) {
        buffer_.append(chunk, static_cast<std::size_t>(n));
        continue;
      }
      if (n == 0) eof_ = true;
      break;
    }
  }

  std::string exit_detail() {
    if (pid_ <= 0) return "evaluator process is not running";
    int status = 0;
    if (waitpid(pid_, &status, 0) == pid_) {
      pid_ = -1;
      if (WIFEXITED(status)) return "evaluator exited with status " + std::to_string(WEXITSTATUS(status));
      if (WIFSIGNALED(status)) return "evaluator killed by signal " + std::to_string(WTERMSIG(status));
    }
    return "evaluator process ended";
  }

  pid_t pid_ = -1;
  int in_ = -1;
  int out_ = -1;
  std::string pending_;
  std::string buffer_;
  bool eof_ = false;
};

ExternalEvaluator::ExternalEvaluator(std::string command, SearchSpace space, ExternalOptions options)
    : command_(std::move(command)), space_(std::move(space)), options_(options) {
  signal(SIGPIPE, SIG_IGN);
  start(Clock::now() + options_.timeout);
}

ExternalEvaluator::~ExternalEvaluator() {
  if (!process_) return;
  try {
    process_->send(nlohmann::json{{"type", "shutdown"}}.dump());
    process_->flush(Clock::now() + std::chrono::milliseconds(1000));
  } catch (...) {
  }
  process_.reset();
}

void ExternalEvaluator::start(Clock::time_point deadline) {
  process_ = std::make_unique<Process>(command_);
  nlohmann::json init{{"type", "init"}, {"protocol", kProtocolVersion}, {"space", to_json(space_)}};
  process_->send(init.dump());
  std::optional<std::string> line;
  try {
    line = process_->next_line(deadline);
  } catch (const ProcessDied& died) {
    process_.reset();
    throw EvaluationError("evaluator died during handshake: " + died.detail);
  } catch (const TimedOut&) {
    process_->kill_now();
    process_.reset();
    throw EvaluationError("evaluator handshake timed out");
  }
  nlohmann::json reply;
  try {
    reply = nlohmann::json::parse(*line);
  } catch (const nlohmann::json::exception&) {
    process_.reset();
    throw ProtocolError("malformed handshake reply: " + *line);
  }
  if (reply.value("type", "") != "ready") {
    process_.reset();
    throw ProtocolError("expected a ready message, got: " + *line);
  }
  const auto layers = reply.value("layers", std::int64_t{-1});
  if (layers != static_cast<std::int64_t>(space_.layer_count())) {
    process_.reset();
    throw ProtocolError("handshake mismatch: evaluator reports " + std::to_string(layers) +
                        " layers, search space has " + std::to_string(space_.layer_count()));
  }
}

std::vector<double> ExternalEvaluator::run_batch(std::span<const BitConfig> configs,
                                                 Clock::time_point deadline) {
  const std::size_t step = options_.request_size == 0 ? std::max<std::size_t>(configs.size(), 1)
                                                      : options_.request_size;
  // id -> (offset, count)
  std::map<std::size_t, std::pair<std::size_t, std::size_t>> outstanding;
  for (std::size_t offset = 0; offset < configs.size(); offset += step) {
    const std::size_t count = std::min(step, configs.size() - offset);
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = offset; i < offset + count; ++i) rows.push_back(configs[i].bits());
    const std::size_t id = next_id_++;
    process_->send(nlohmann::json{{"type", "evaluate"}, {"id", id}, {"configs", rows}}.dump());
    outstanding.emplace(id, std::make_pair(offset, count));
    ++requests_sent_;
  }

  std::vector<double> scores(configs.size());
  while (!outstanding.empty()) {
    const auto line = process_->next_line(deadline);
    nlohmann::json msg;
    try {
      msg = nlohmann::json::parse(*line);
    } catch (const nlohmann::json::exception&) {
      throw ProtocolError("malformed response: " + *line);
    }
    const auto type = msg.value("type", "");
    if (!msg.contains("id") || !msg["id"].is_number_integer())
      throw ProtocolError("response without an integer id: " + *line);
    const auto id = msg["id"].get<std::size_t>();
    auto it = outstanding.find(id);
    if (it == outstanding.end()) throw ProtocolError("response for unknown request id " + std::to_string(id));
    ++responses_received_;
    if (type == "error")
      throw EvaluationError("evaluator rejected request " + std::to_string(id) + ": " +
                            msg.value("message", std::string("(no message)")));
    if (type != "result") throw ProtocolError("unexpected message type '" + type + "'");
    const auto [offset, count] = it->second;
    std::vector<double> values;
    try {
      values = msg.at("scores").get<std::vector<double>>();
    } catch (const nlohmann::json::exception&) {
      throw ProtocolError("result " + std::to_string(id) + " has no numeric scores");
    }
    if (values.size() != count)
      throw ProtocolError("result " + std::to_string(id) + " has " + std::to_string(values.size()) +
                          " scores for " + std::to_string(count) + " configs");
    for (std::size_t k = 0; k < count; ++k) {
      if (!std::isfinite(values[k])) throw ProtocolError("non-finite score in result " + std::to_string(id));
      scores[offset + k] = values[k];
    }
    outstanding.erase(it);
  }
  return scores;
}

std::vector<double> ExternalEvaluator::evaluate_batch(std::span<const BitConfig> configs) {
  for (const auto& c : configs) space_.validate(c);
  if (configs.empty()) return {};
  const auto deadline = Clock::now() + options_.timeout;
  for (int attempt = 0;; ++attempt) {
    try {
      if (!process_) start(deadline);
      return run_batch(configs, deadline);
    } catch (const ProcessDied& died) {
      process_.reset();
      if (attempt >= 1) throw EvaluationError("evaluator died again after restart: " + died.detail);
      ++restarts_;
    } catch (const TimedOut&) {
      process_->kill_now();
      process_.reset();
      throw EvaluationError("evaluator batch timed out after " +
                            std::to_string(options_.timeout.count()) + " ms");
    } catch (const ProtocolError&) {
      // The stream position is unknown; the next batch starts a fresh process.
      process_.reset();
      throw;
    } catch (const EvaluationError&) {
      process_.reset();
      throw;
    }
  }
}

}  // namespace bitsearch
