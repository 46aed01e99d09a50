#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "fwiki/advice.hpp"
#include "fwiki/frame_model.hpp"
#include "fwiki/hyperlinker.hpp"
#include "fwiki/prover_session.hpp"
#include "fwiki/wiki_renderer.hpp"

namespace fwiki {

/// Everything loaded from one repository root at one point in time.
struct RepositorySnapshot {
  std::map<std::string, std::shared_ptr<const Document>> formal;  // src/...
  std::map<std::string, std::string> pages;                       // doc/... -> wiki text
  LinkerConfig config;
  SymbolIndex index;
  IndexedRegistry registry;

  RepositorySnapshot() = default;
  RepositorySnapshot(const RepositorySnapshot&) = delete;
  RepositorySnapshot& operator=(const RepositorySnapshot&) = delete;
};

/// Repository layout: `src/` formal scripts (*.hl, *.ml), `doc/` wiki pages
/// (*.wiki), optional `linker.conf`, generated `index/symbols.tsv`,
/// `cache/` state entries and `rendered/` static pages.
class RepositoryStore {
 public:
  explicit RepositoryStore(std::filesystem::path root);

  /// Rescans the repository. Throws on unreadable files or parse errors.
  void reload();

  std::shared_ptr<const RepositorySnapshot> snapshot() const;
  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path cache_dir() const { return root_ / "cache"; }

  /// Formal document by uri, including code scenes `doc/x.wiki::code-N`.
  std::shared_ptr<const Document> scene_document(std::string_view uri) const;

  /// Resolves `src/x.hl`, `doc/x.wiki` or their `.html` page paths.
  std::optional<std::string> resolve_page(std::string_view path) const;

  /// Full HTML for a page uri, or nullopt if unknown.
  std::optional<std::string> render(std::string_view uri, std::string_view base_href) const;

  /// Writes `index/symbols.tsv`.
  void write_index() const;

  /// Writes the index and every page under `rendered/`.
  void build() const;

  /// Replaces a formal script's text and reloads (serialised writers).
  void commit(std::string_view uri, std::string_view text);

 private:
  std::filesystem::path root_;
  mutable std::shared_mutex mutex_;
  std::mutex writer_mutex_;
  std::shared_ptr<const RepositorySnapshot> snapshot_;
};

/// `<base href>` making root-relative links work from `page`.
std::string base_href_for(std::string_view page);

/// Open goal of a goalstack reply: backquoted hypotheses and the goal.
std::optional<AdviceRequest> goal_from_response(std::string_view response);

struct ServiceOptions {
  AdapterFactory factory;
  SnapshotToken snapshot{"base"};
  /// Advisor `host:port`; empty disables advice.
  std::string advisor;
  std::chrono::milliseconds advisor_timeout{2000};
  /// Persist state entries under the repository's cache/ directory.
  bool persist_cache = true;
};

struct HttpResult {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

struct EditSession {
  std::string id;
  std::string doc;
  std::vector<Frame> frames;
  std::string text;
  /// Last reported result of each frame, as JSON text.
  std::vector<std::string> results;
  std::unique_ptr<ProverSession> prover;
  std::mutex mutex;
};

/// Endpoint logic. The HTTP layer only translates requests to these calls.
class WikiService {
 public:
  WikiService(std::shared_ptr<RepositoryStore> store, ServiceOptions options);
  ~WikiService();

  HttpResult get_page(std::string_view path) const;
  HttpResult get_state(std::string_view doc, std::size_t frame);
  /// `on_frame` receives each frame result (as a JSON line) when produced.
  HttpResult post_edit(std::string_view doc, std::string session_id, std::string_view body,
                       const std::function<void(const std::string&)>& on_frame = {});
  HttpResult post_advice(std::string_view line);
  HttpResult post_commit(std::string_view doc, std::string_view session_id);

  /// Serves until stop(); returns the bound port (0 picks a free one).
  std::uint16_t start(const std::string& host, std::uint16_t port);
  void wait();
  void stop();

  StateService& states() { return *states_; }
  RepositoryStore& store() { return *store_; }

 private:
  std::shared_ptr<EditSession> session(std::string_view doc, std::string& id);
  std::vector<std::string> advice_for(const std::string& goal_line, bool& warning);

  std::shared_ptr<RepositoryStore> store_;
  ServiceOptions options_;
  std::unique_ptr<StateService> states_;
  std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<EditSession>> sessions_;
  std::atomic<std::size_t> next_session_{1};

  struct Http;
  std::unique_ptr<Http> http_;
};

}  // namespace fwiki
