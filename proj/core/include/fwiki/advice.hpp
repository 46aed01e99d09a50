#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <stop_token>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

namespace fwiki {

// ---------------------------------------------------------------------------
// Wire format

struct AdviceRequest {
  std::vector<std::string> assumptions;
  std::string conclusion;
  bool operator==(const AdviceRequest&) const = default;
};

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kFieldSeparator = '`';

/// Fields joined by backticks, conclusion last: a1`a2`c. Throws ProtocolError if a field holds a backtick
/// or a newline.
std::string encode_goal(const AdviceRequest& request);

/// Inverse of encode_goal. Fields are kept verbatim. Throws ProtocolError on
/// an empty line.
AdviceRequest decode_goal(std::string_view line);

// ---------------------------------------------------------------------------
// Propositional terms

struct MiniTerm {
  enum class Op { atom, truth, falsity, neg, conj, disj, imp, iff };
  Op op = Op::atom;
  std::string name;
  std::vector<MiniTerm> args;

  bool operator==(const MiniTerm&) const = default;
};

class TermSyntaxError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precedence from tightest: `~`, `/\`, `\/`, `==>`, `<=>`; binary
/// operators associate to the right.
MiniTerm parse_term(std::string_view text);
std::string print_term(const MiniTerm& term);

/// Distinct atom names in order of first occurrence.
std::vector<std::string> term_atoms(const MiniTerm& term);

/// Truth-table validity. Returns nullopt when cancelled or when the term has
/// more than `max_atoms` atoms.
std::optional<bool> is_tautology(const MiniTerm& term, std::stop_token stop = {},
                                 std::size_t max_atoms = 24);

inline constexpr std::string_view kTautologyAdvice = "e (TAUT_PROVE);;";

// ---------------------------------------------------------------------------
// Strategies

class Strategy {
 public:
  virtual ~Strategy() = default;
  virtual std::string name() const = 0;
  /// Must return promptly once `stop` is requested.
  virtual std::optional<std::string> run(const AdviceRequest& request, std::stop_token stop) = 0;
};

/// Decides (a1 /\ ... /\ an) ==> c over the MiniTerm grammar.
class TautologyStrategy final : public Strategy {
 public:
  std::string name() const override { return "tautology"; }
  std::optional<std::string> run(const AdviceRequest& request, std::stop_token stop) override;
};

/// Wraps a callable; used for stub strategies.
class FunctionStrategy final : public Strategy {
 public:
  using Fn = std::function<std::optional<std::string>(const AdviceRequest&, std::stop_token)>;
  FunctionStrategy(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}
  std::string name() const override { return name_; }
  std::optional<std::string> run(const AdviceRequest& request, std::stop_token stop) override {
    return fn_(request, std::move(stop));
  }

 private:
  std::string name_;
  Fn fn_;
};

struct Advice {
  std::string strategy;
  std::string text;
  bool operator==(const Advice&) const = default;
};

/// Runs every strategy on its own thread; the first advice wins and the
/// others are asked to stop. All threads are joined before returning. A
/// strategy that throws counts as having no advice.
std::optional<Advice> dispatch(const AdviceRequest& request,
                               const std::vector<std::shared_ptr<Strategy>>& strategies,
                               std::chrono::milliseconds timeout);

// ---------------------------------------------------------------------------
// Server

/// request line -> advice lines, including empty results.
class AdviceCache {
 public:
  std::optional<std::vector<std::string>> get(const std::string& line) const;
  void put(const std::string& line, std::vector<std::string> advice);
  std::size_t size() const;

 private:
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, std::vector<std::string>> entries_;
};

/// Line protocol: one request line per connection, one advice per line in
/// reply, then the server closes. Malformed requests get one line starting
/// with `error:`.
class AdviceServer {
 public:
  AdviceServer(std::vector<std::shared_ptr<Strategy>> strategies,
               std::chrono::milliseconds timeout = std::chrono::seconds(10),
               std::shared_ptr<AdviceCache> cache = std::make_shared<AdviceCache>());
  ~AdviceServer();
  AdviceServer(const AdviceServer&) = delete;
  AdviceServer& operator=(const AdviceServer&) = delete;

  /// Answers one request line, consulting the cache first.
  std::vector<std::string> answer(const std::string& line);

  /// Listens on `host:port` (port 0 picks a free one). Returns the port.
  std::uint16_t start(const std::string& host = "127.0.0.1", std::uint16_t port = 0,
                      std::size_t workers = 8);
  void stop();
  std::uint16_t port() const noexcept { return port_; }

  /// Times dispatch ran (cache misses).
  std::size_t dispatches() const noexcept { return dispatches_.load(); }
  /// Strategy invocations started by dispatch.
  std::size_t strategy_runs() const noexcept { return strategy_runs_.load(); }
  AdviceCache& cache() { return *cache_; }

  /// Serves one accepted socket and closes it.
  void serve_connection(int fd);

 private:
  void accept_loop(std::stop_token stop);
  void worker_loop(std::stop_token stop);

  std::vector<std::shared_ptr<Strategy>> strategies_;
  std::chrono::milliseconds timeout_;
  std::shared_ptr<AdviceCache> cache_;
  std::atomic<std::size_t> dispatches_{0};
  std::atomic<std::size_t> strategy_runs_{0};

  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::mutex queue_mutex_;
  std::condition_variable_any queue_cv_;
  std::deque<int> pending_;
  std::vector<std::jthread> workers_;
  std::jthread acceptor_;
};

class AdvisorUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sends one line and reads advice lines until the server closes. Throws
/// AdvisorUnavailable when the server cannot be reached or stalls.
std::vector<std::string> request_advice(const std::string& host, std::uint16_t port,
                                        std::string_view line,
                                        std::chrono::milliseconds timeout = std::chrono::seconds(15));

/// Parses `host:port`.
std::pair<std::string, std::uint16_t> parse_address(std::string_view address);

}  // namespace fwiki
