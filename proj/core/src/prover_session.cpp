#include "fwiki/prover_session.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fwiki/hash.hpp"
#include "fwiki/script_parser.hpp"

namespace fwiki {

bool response_failed(std::string_view response) {
  const auto at_line_start = [&](std::string_view word) {
    if (response.substr(0, word.size()) == word) return true;
    std::string needle = "\n";
    needle += word;
    return response.find(needle) != std::string_view::npos;
  };
  return at_line_start("Exception:") || at_line_start("Error:");
}

// ---------------------------------------------------------------------------
// StubProver

StubProver::StubProver(StubOptions options, SnapshotToken prelude)
    : options_(std::move(options)), prelude_(std::move(prelude)) {}

namespace {

std::string goalstack_reply(std::size_t depth, const std::string& goal) {
  if (depth == 0) return "val it : goalstack = No subgoals";
  return "val it : goalstack = 1 subgoal (1 total)\n\n`" + goal + "`";
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::optional<std::string> StubProver::execute(std::string_view command_text) {
  if (!options_.crash_substring.empty() &&
      command_text.find(options_.crash_substring) != std::string_view::npos) {
    return std::nullopt;
  }
  if (!options_.reject_substring.empty() &&
      command_text.find(options_.reject_substring) != std::string_view::npos) {
    return std::string("Exception: Failure \"rejected by stub\".");
  }

  const std::string_view token = first_token(command_text);
  if (token == "g") {
    const auto open = command_text.find('`');
    const auto close = open == std::string_view::npos ? open : command_text.find('`', open + 1);
    if (close == std::string_view::npos) return std::string("Exception: Failure \"g: no term\".");
    goal_ = std::string(command_text.substr(open + 1, close - open - 1));
    depth_ = 1;
    return goalstack_reply(depth_, goal_);
  }
  if (token == "e") {
    if (depth_ == 0) return std::string("Exception: Failure \"No goals set\".");
    ++depth_;
    return goalstack_reply(depth_, goal_);
  }
  if (token == "b") {
    if (depth_ == 0) return std::string("Exception: Failure \"Can't back up any more\".");
    --depth_;
    return goalstack_reply(depth_, goal_);
  }
  if (token == "let") {
    std::string_view rest = command_text;
    rest.remove_prefix(rest.find("let") + 3);
    const std::string_view name = first_token(rest);
    if (!name.empty() && name != "rec") return "val " + std::string(name) + " : thm = |- T";
  }
  return std::string("val it : unit = ()");
}

int run_stub_protocol(std::istream& in, std::ostream& out, StubOptions options,
                      SnapshotToken prelude) {
  StubProver prover(std::move(options), std::move(prelude));
  out << kReadySentinel << '\n' << std::flush;

  std::string buffer;
  std::string line;
  while (std::getline(in, line)) {
    if (!buffer.empty()) buffer += '\n';
    buffer += line;
    const std::string_view tail = trim(line);
    if (tail.size() < 2 || tail.substr(tail.size() - 2) != ";;") continue;

    // Only dispatch once the buffer holds a complete command.
    try {
      const auto frames = split_commands(buffer);
      if (frames.empty() || frames.back().unterminated) continue;
    } catch (const ParseError&) {
      continue;
    }

    const std::string command(trim(buffer));
    buffer.clear();
    if (command == kDepthProbe) {
      out << prover.depth() << '\n' << std::flush;
      continue;
    }
    if (command == "#quit;;") return 0;
    const auto reply = prover.execute(command);
    if (!reply) return 3;
    if (!reply->empty()) out << *reply << '\n';
    out << kReadySentinel << '\n' << std::flush;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// InProcessStubAdapter

InProcessStubAdapter::InProcessStubAdapter(StubOptions options, SnapshotToken prelude)
    : options_(options), prover_(std::move(options), std::move(prelude)) {}

std::string InProcessStubAdapter::send(std::string_view command_text) {
  if (crashed_) throw ProverError("stub prover has exited");
  auto reply = prover_.execute(command_text);
  if (!reply) {
    crashed_ = true;
    throw ProverError("stub prover exited while running a command");
  }
  return std::move(*reply);
}

std::size_t InProcessStubAdapter::probe_depth() {
  if (crashed_) throw ProverError("stub prover has exited");
  return prover_.depth();
}

SnapshotToken InProcessStubAdapter::snapshot() const { return prover_.prelude(); }

std::unique_ptr<ProverAdapter> InProcessStubAdapter::restore(const SnapshotToken& token) const {
  return std::make_unique<InProcessStubAdapter>(options_, token);
}

// ---------------------------------------------------------------------------
// CountingAdapter

CountingAdapter::CountingAdapter(std::unique_ptr<ProverAdapter> inner,
                                 std::shared_ptr<AdapterCounters> counters)
    : inner_(std::move(inner)), counters_(std::move(counters)) {}

std::string CountingAdapter::send(std::string_view command_text) {
  ++counters_->sends;
  if (trim(command_text) == kUndoCommand) ++counters_->undos;
  return inner_->send(command_text);
}

std::size_t CountingAdapter::probe_depth() {
  ++counters_->probes;
  return inner_->probe_depth();
}

SnapshotToken CountingAdapter::snapshot() const { return inner_->snapshot(); }

std::unique_ptr<ProverAdapter> CountingAdapter::restore(const SnapshotToken& token) const {
  return std::make_unique<CountingAdapter>(inner_->restore(token), counters_);
}

// ---------------------------------------------------------------------------
// Session

FilterDecision filter_special(std::string_view command_text) {
  const std::string_view token = first_token(command_text);
  return token == "module" || token == "end" ? FilterDecision::skip : FilterDecision::send;
}

ProverSession::ProverSession(std::unique_ptr<ProverAdapter> adapter)
    : adapter_(std::move(adapter)) {
  if (!adapter_) throw std::invalid_argument("ProverSession needs an adapter");
  token_ = adapter_->snapshot();
}

std::optional<std::size_t> ProverSession::cursor() const noexcept {
  if (executed_.empty()) return std::nullopt;
  return executed_.size() - 1;
}

std::string ProverSession::guarded_send(std::string_view text) {
  if (dead_) throw ProverError("prover session is dead");
  try {
    return adapter_->send(text);
  } catch (const ProverError&) {
    dead_ = true;
    throw;
  }
}

std::size_t ProverSession::guarded_probe() {
  if (dead_) throw ProverError("prover session is dead");
  try {
    return adapter_->probe_depth();
  } catch (const ProverError&) {
    dead_ = true;
    throw;
  }
}

FrameOutcome ProverSession::send_frame(const Frame& frame) {
  if (frame.id != executed_.size()) {
    throw std::logic_error("send_frame: frame " + std::to_string(frame.id) +
                           " does not follow the cursor");
  }
  FrameOutcome outcome;
  if (frame.kind == FrameKind::standalone_comment ||
      filter_special(frame.command_text) == FilterDecision::skip) {
    outcome.state_number = depth_;
  } else if (frame.unterminated) {
    outcome.response = "Error: command is not terminated by ;;";
    outcome.ok = false;
    outcome.state_number = depth_;
  } else {
    outcome.response = guarded_send(frame.command_text);
    outcome.sent = true;
    outcome.ok = !response_failed(outcome.response);
    depth_ = guarded_probe();
    outcome.state_number = depth_;
  }
  executed_.push_back({frame.id, outcome.state_number});
  return outcome;
}

std::size_t ProverSession::sync_to(std::optional<std::size_t> target) {
  const auto current = cursor();
  if (target && (!current || *target > *current)) {
    throw SyncError("sync_to: target frame " + std::to_string(*target) + " is ahead of the cursor");
  }
  if (target == current) return 0;

  const std::size_t wanted = target ? executed_[*target].state_number : 0;
  if (wanted > depth_) {
    throw SyncError("sync_to: state " + std::to_string(wanted) +
                    " is not reachable by undo from depth " + std::to_string(depth_));
  }
  const std::size_t undos = depth_ - wanted;
  for (std::size_t i = 0; i < undos; ++i) guarded_send(kUndoCommand);
  depth_ = guarded_probe();
  executed_.resize(target ? *target + 1 : 0);
  if (depth_ != wanted) {
    throw SyncError("sync_to: prover reports depth " + std::to_string(depth_) + ", expected " +
                    std::to_string(wanted));
  }
  return undos;
}

void ProverSession::restart() {
  adapter_ = adapter_->restore(token_);
  depth_ = 0;
  executed_.clear();
  dead_ = false;
}

// ---------------------------------------------------------------------------
// StateCache

std::vector<std::string> prefix_keys(std::span<const Frame> frames, std::string_view snapshot) {
  std::vector<std::string> keys;
  keys.reserve(frames.size());
  Fnv128 hash;
  hash.update(snapshot);
  hash.update(std::string_view("\0", 1));
  for (const auto& f : frames) {
    hash.update(f.command_text);
    hash.update(std::string_view("\0", 1));
    keys.push_back(hash.hex());
  }
  return keys;
}

StateCache::StateCache(std::optional<std::filesystem::path> directory)
    : directory_(std::move(directory)) {
  if (directory_) std::filesystem::create_directories(*directory_);
}

std::optional<CachedState> StateCache::get(const std::string& key) const {
  {
    std::shared_lock lock(mutex_);
    if (auto it = entries_.find(key); it != entries_.end()) return it->second;
  }
  if (!directory_) return std::nullopt;
  std::ifstream in(*directory_ / (key + ".json"));
  if (!in) return std::nullopt;
  try {
    const auto j = nlohmann::json::parse(in);
    CachedState state{j.at("response").get<std::string>(), j.at("state").get<std::size_t>(),
                      j.at("ok").get<bool>()};
    std::unique_lock lock(mutex_);
    entries_.emplace(key, state);
    return state;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

void StateCache::put(const std::string& key, const CachedState& value) {
  std::unique_lock lock(mutex_);
  entries_[key] = value;
  if (!directory_) return;
  std::error_code ec;
  std::filesystem::create_directories(*directory_, ec);
  const auto final_path = *directory_ / (key + ".json");
  const auto tmp_path = *directory_ / (key + ".json.tmp");
  {
    std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
    out << nlohmann::json{{"response", value.response}, {"state", value.state_number}, {"ok", value.ok}}
               .dump();
  }
  std::filesystem::rename(tmp_path, final_path, ec);
}

std::size_t StateCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

// ---------------------------------------------------------------------------
// StateService

StateService::StateService(AdapterFactory factory, std::shared_ptr<StateCache> cache,
                           SnapshotToken snapshot)
    : factory_(std::move(factory)), cache_(std::move(cache)), snapshot_(std::move(snapshot)) {
  if (!cache_) cache_ = std::make_shared<StateCache>();
}

CachedState StateService::state_for(const Document& doc, std::size_t frame_index) {
  if (frame_index >= doc.frames.size()) {
    throw std::out_of_range("frame " + std::to_string(frame_index) + " not in " + doc.uri);
  }
  const std::span<const Frame> prefix(doc.frames.data(), frame_index + 1);
  const auto keys = prefix_keys(prefix, snapshot_.name);

  // A recorded failure anywhere in the prefix settles the answer.
  std::optional<CachedState> hit;
  for (std::size_t j = 0; j <= frame_index; ++j) {
    auto entry = cache_->get(keys[j]);
    if (!entry) break;
    if (!entry->ok) throw StateError("frame " + std::to_string(j) + " failed", j, entry->response);
    if (j == frame_index) hit = std::move(entry);
  }
  if (hit) return *hit;

  std::shared_ptr<Slot> slot;
  {
    std::lock_guard lock(slots_mutex_);
    auto& s = slots_[doc.uri];
    if (!s) s = std::make_shared<Slot>();
    slot = s;
  }
  std::lock_guard lock(slot->mutex);

  if (!slot->session || slot->session->dead()) {
    slot->session = std::make_unique<ProverSession>(factory_());
    slot->keys.clear();
  }
  ProverSession& session = *slot->session;

  std::size_t common = 0;
  while (common < slot->keys.size() && common < frame_index &&
         slot->keys[common] == keys[common]) {
    ++common;
  }
  if (common < slot->keys.size()) {
    try {
      session.sync_to(common == 0 ? std::nullopt : std::optional<std::size_t>(common - 1));
    } catch (const SyncError&) {
      session.restart();
      common = 0;
    }
    slot->keys.resize(common);
  }

  for (std::size_t j = common; j <= frame_index; ++j) {
    FrameOutcome outcome;
    try {
      outcome = session.send_frame(doc.frames[j]);
    } catch (const ProverError& e) {
      slot->session.reset();
      slot->keys.clear();
      throw StateError(std::string("prover died: ") + e.what(), j, "");
    }
    slot->keys.push_back(keys[j]);
    CachedState state{outcome.response, outcome.state_number, outcome.ok};
    cache_->put(keys[j], state);
    if (!outcome.ok) throw StateError("frame " + std::to_string(j) + " failed", j, outcome.response);
    if (j == frame_index) return state;
  }
  throw std::logic_error("state_for: replay stopped early");
}

}  // namespace fwiki
