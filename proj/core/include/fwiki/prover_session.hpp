#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fwiki/frame_model.hpp"

namespace fwiki {

/// I/O failure talking to the prover. The session that saw it is dead.
class ProverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Names a prelude state a fresh prover can be started from.
struct SnapshotToken {
  std::string name;
  bool operator==(const SnapshotToken&) const = default;
};

inline constexpr std::string_view kUndoCommand = "b ();;";
inline constexpr std::string_view kDepthProbe = "#depth;;";
inline constexpr std::string_view kReadySentinel = "<<ready>>";

/// Contract for a REPL-style prover.
///
/// After `g ...` the probed depth is 1, every successful `e ...` adds one,
/// `b ();;` removes one (never below zero) and other commands leave it alone.
class ProverAdapter {
 public:
  virtual ~ProverAdapter() = default;
  virtual std::string send(std::string_view command_text) = 0;
  virtual std::size_t probe_depth() = 0;
  virtual SnapshotToken snapshot() const = 0;
  /// Starts a fresh prover at the snapshot state.
  virtual std::unique_ptr<ProverAdapter> restore(const SnapshotToken& token) const = 0;
};

/// Heuristic failure check on prover output.
bool response_failed(std::string_view response);

// ---------------------------------------------------------------------------
// Stub prover

struct StubOptions {
  /// Commands containing this text are answered with an exception.
  std::string reject_substring;
  /// Commands containing this text make the stub exit without answering.
  std::string crash_substring;
};

/// Deterministic goalstack simulator shared by the stub executable and the
/// in-process adapter.
class StubProver {
 public:
  explicit StubProver(StubOptions options = {}, SnapshotToken prelude = {"base"});

  /// Processes one complete command. Returns nullopt when the command asks
  /// the stub to crash.
  std::optional<std::string> execute(std::string_view command_text);
  std::size_t depth() const noexcept { return depth_; }
  const SnapshotToken& prelude() const noexcept { return prelude_; }

 private:
  StubOptions options_;
  SnapshotToken prelude_;
  std::size_t depth_ = 0;
  std::string goal_;
};

/// Runs the stub line protocol over the given streams until end of input.
int run_stub_protocol(std::istream& in, std::ostream& out, StubOptions options,
                      SnapshotToken prelude);

/// In-process stub without pipes.
class InProcessStubAdapter final : public ProverAdapter {
 public:
  explicit InProcessStubAdapter(StubOptions options = {}, SnapshotToken prelude = {"base"});
  std::string send(std::string_view command_text) override;
  std::size_t probe_depth() override;
  SnapshotToken snapshot() const override;
  std::unique_ptr<ProverAdapter> restore(const SnapshotToken& token) const override;

 private:
  StubOptions options_;
  StubProver prover_;
  bool crashed_ = false;
};

/// Child process speaking the stub wire protocol: commands end with `;;` and
/// a newline, replies end with a `<<ready>>` line, `#depth;;` is answered by
/// one decimal line. The snapshot token is passed as PROVER_SNAPSHOT.
class PipeProverAdapter final : public ProverAdapter {
 public:
  PipeProverAdapter(std::vector<std::string> argv, SnapshotToken token = {"base"},
                    int timeout_ms = 30000);
  ~PipeProverAdapter() override;
  PipeProverAdapter(const PipeProverAdapter&) = delete;
  PipeProverAdapter& operator=(const PipeProverAdapter&) = delete;

  std::string send(std::string_view command_text) override;
  std::size_t probe_depth() override;
  SnapshotToken snapshot() const override;
  std::unique_ptr<ProverAdapter> restore(const SnapshotToken& token) const override;

 private:
  void write_line(std::string_view text);
  std::string read_line();

  std::vector<std::string> argv_;
  SnapshotToken token_;
  int timeout_ms_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

/// Splits a shell-like command line on whitespace.
std::vector<std::string> split_command_line(std::string_view cmd);

struct AdapterCounters {
  std::atomic<std::size_t> sends{0};
  std::atomic<std::size_t> undos{0};
  std::atomic<std::size_t> probes{0};

  /// Sends that were not undo commands.
  std::size_t executions() const { return sends.load() - undos.load(); }
  void reset() { sends = 0; undos = 0; probes = 0; }
};

/// Decorator counting traffic to the wrapped adapter. Restored adapters share
/// the same counters.
class CountingAdapter final : public ProverAdapter {
 public:
  CountingAdapter(std::unique_ptr<ProverAdapter> inner, std::shared_ptr<AdapterCounters> counters);
  std::string send(std::string_view command_text) override;
  std::size_t probe_depth() override;
  SnapshotToken snapshot() const override;
  std::unique_ptr<ProverAdapter> restore(const SnapshotToken& token) const override;

 private:
  std::unique_ptr<ProverAdapter> inner_;
  std::shared_ptr<AdapterCounters> counters_;
};

// ---------------------------------------------------------------------------
// Session

enum class FilterDecision { send, skip };

/// `skip` for module-opening and module-closing commands.
FilterDecision filter_special(std::string_view command_text);

struct FrameOutcome {
  std::string response;
  std::size_t state_number = 0;
  bool ok = true;
  /// False for comments, module/end commands and unterminated frames.
  bool sent = false;
};

struct ExecutedFrame {
  std::size_t frame_id = 0;
  std::size_t state_number = 0;
};

class SyncError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One live prover with goalstack bookkeeping. Not thread-safe.
class ProverSession {
 public:
  explicit ProverSession(std::unique_ptr<ProverAdapter> adapter);

  /// Executes the frame after the cursor. Frame ids must follow on from the
  /// cursor. Throws ProverError (and marks the session dead) on I/O failure.
  FrameOutcome send_frame(const Frame& frame);

  /// Moves the cursor back to `target` (nullopt = before the first frame)
  /// with undo commands; returns how many were issued. Throws SyncError when
  /// undo cannot reach the recorded state; the caller must then restart.
  std::size_t sync_to(std::optional<std::size_t> target);

  /// Replaces the prover with a fresh one restored from the snapshot.
  void restart();

  std::size_t depth() const noexcept { return depth_; }
  std::optional<std::size_t> cursor() const noexcept;
  const std::vector<ExecutedFrame>& executed() const noexcept { return executed_; }
  bool dead() const noexcept { return dead_; }
  ProverAdapter& adapter() { return *adapter_; }

 private:
  std::string guarded_send(std::string_view text);
  std::size_t guarded_probe();

  std::unique_ptr<ProverAdapter> adapter_;
  SnapshotToken token_;
  std::size_t depth_ = 0;
  std::vector<ExecutedFrame> executed_;
  bool dead_ = false;
};

// ---------------------------------------------------------------------------
// Memoization

struct CachedState {
  std::string response;
  std::size_t state_number = 0;
  bool ok = true;
  bool operator==(const CachedState&) const = default;
};

/// Cache keys for every prefix of `frames`: key i hashes the snapshot name
/// and the command texts of frames 0..i.
std::vector<std::string> prefix_keys(std::span<const Frame> frames, std::string_view snapshot);

/// Prefix-keyed state cache, optionally persisted one JSON file per entry.
class StateCache {
 public:
  explicit StateCache(std::optional<std::filesystem::path> directory = std::nullopt);

  std::optional<CachedState> get(const std::string& key) const;
  void put(const std::string& key, const CachedState& value);
  std::size_t size() const;

 private:
  std::optional<std::filesystem::path> directory_;
  mutable std::shared_mutex mutex_;
  mutable std::unordered_map<std::string, CachedState> entries_;
};

/// Replay failure: a frame at or before the requested one failed.
class StateError : public std::runtime_error {
 public:
  StateError(const std::string& what, std::size_t frame, std::string response)
      : std::runtime_error(what), frame_(frame), response_(std::move(response)) {}
  std::size_t frame() const noexcept { return frame_; }
  const std::string& response() const noexcept { return response_; }

 private:
  std::size_t frame_;
  std::string response_;
};

using AdapterFactory = std::function<std::unique_ptr<ProverAdapter>()>;

/// Lazily computes frame states, one prover session per document.
class StateService {
 public:
  /// `snapshot` must name the state the factory's provers start from; it is
  /// part of every cache key.
  StateService(AdapterFactory factory, std::shared_ptr<StateCache> cache,
               SnapshotToken snapshot = {"base"});

  /// Cached (response, state) of `frame_index`, replaying the document as
  /// needed. Throws std::out_of_range for a bad index and StateError when a
  /// frame up to `frame_index` fails.
  CachedState state_for(const Document& doc, std::size_t frame_index);

  StateCache& cache() { return *cache_; }

 private:
  struct Slot {
    std::mutex mutex;
    std::unique_ptr<ProverSession> session;
    std::vector<std::string> keys;
  };

  AdapterFactory factory_;
  std::shared_ptr<StateCache> cache_;
  std::mutex slots_mutex_;
  std::map<std::string, std::shared_ptr<Slot>> slots_;
  SnapshotToken snapshot_;
};

}  // namespace fwiki
