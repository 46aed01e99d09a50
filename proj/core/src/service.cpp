#include "fwiki/service.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "fwiki/script_parser.hpp"

namespace fwiki {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
  }
  fs::rename(tmp, path);
}

std::vector<std::string> list_files(const fs::path& root, const fs::path& dir,
                                    std::initializer_list<std::string_view> extensions) {
  std::vector<std::string> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = entry.path().extension().string();
    if (std::find(extensions.begin(), extensions.end(), ext) == extensions.end()) continue;
    out.push_back(entry.path().lexically_relative(root).generic_string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string title_of(std::string_view uri) { return fs::path(std::string(uri)).stem().string(); }

std::string index_page(const RepositorySnapshot& snap, std::string_view base_href) {
  std::string body = "<h1>Pages</h1>\n<ul>\n";
  for (const auto& [uri, _] : snap.pages) {
    body += "<li><a href=\"" + escape_html(page_path(uri)) + "\">" + escape_html(uri) + "</a></li>\n";
  }
  body += "</ul>\n<h1>Sources</h1>\n<ul>\n";
  for (const auto& [uri, _] : snap.formal) {
    body += "<li><a href=\"" + escape_html(page_path(uri)) + "\">" + escape_html(uri) + "</a></li>\n";
  }
  body += "</ul>\n";
  return "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>index</title>\n<base href=\"" +
         escape_html(base_href) + "\">\n</head>\n<body>\n" + body + "</body>\n</html>\n";
}

}  // namespace

// ---------------------------------------------------------------------------
// RepositoryStore

RepositoryStore::RepositoryStore(fs::path root) : root_(std::move(root)) { reload(); }

void RepositoryStore::reload() {
  auto snap = std::make_shared<RepositorySnapshot>();
  const fs::path conf = root_ / "linker.conf";
  snap->config = fs::exists(conf) ? parse_linker_config(read_file(conf)) : LinkerConfig::defaults();

  std::vector<Document> docs;
  for (const auto& uri : list_files(root_, root_ / "src", {".hl", ".ml"})) {
    docs.push_back(new_document(uri, split_commands(read_file(root_ / uri)), DocumentFlavor::formal_script));
  }
  std::vector<const Document*> corpus;
  corpus.reserve(docs.size());
  for (const auto& d : docs) corpus.push_back(&d);
  snap->index = build_index(corpus, snap->config);
  snap->registry.set_index(&snap->index);
  for (auto& d : docs) {
    auto linked = std::make_shared<const Document>(with_markup(std::move(d), snap->index));
    snap->registry.add(linked);
    snap->formal.emplace(linked->uri, linked);
  }
  for (const auto& uri : list_files(root_, root_ / "doc", {".wiki"})) {
    snap->pages.emplace(uri, read_file(root_ / uri));
  }
  std::unique_lock lock(mutex_);
  snapshot_ = std::move(snap);
}

std::shared_ptr<const RepositorySnapshot> RepositoryStore::snapshot() const {
  std::shared_lock lock(mutex_);
  return snapshot_;
}

std::shared_ptr<const Document> RepositoryStore::scene_document(std::string_view uri) const {
  const auto snap = snapshot();
  if (const auto it = snap->formal.find(std::string(uri)); it != snap->formal.end()) return it->second;
  const auto marker = uri.rfind("::code-");
  if (marker == std::string_view::npos) return nullptr;
  const auto page = snap->pages.find(std::string(uri.substr(0, marker)));
  if (page == snap->pages.end()) return nullptr;
  for (auto& doc : code_scene_documents(page->first, parse_wiki(page->second))) {
    if (doc.uri == uri) return std::make_shared<const Document>(std::move(doc));
  }
  return nullptr;
}

std::optional<std::string> RepositoryStore::resolve_page(std::string_view path) const {
  const auto snap = snapshot();
  const std::string p(path);
  if (snap->formal.contains(p) || snap->pages.contains(p)) return p;
  for (const auto& [uri, _] : snap->formal) {
    if (page_path(uri) == p) return uri;
  }
  for (const auto& [uri, _] : snap->pages) {
    if (page_path(uri) == p) return uri;
  }
  return std::nullopt;
}

std::optional<std::string> RepositoryStore::render(std::string_view uri, std::string_view base_href) const {
  const auto snap = snapshot();
  PageContext ctx;
  ctx.uri = std::string(uri);
  ctx.title = title_of(uri);
  ctx.base_href = std::string(base_href);
  ctx.registry = &snap->registry;
  ctx.index = &snap->index;
  if (const auto it = snap->formal.find(ctx.uri); it != snap->formal.end()) {
    return render_formal_page(*it->second, ctx);
  }
  if (const auto it = snap->pages.find(ctx.uri); it != snap->pages.end()) {
    return render_page(parse_wiki(it->second), ctx);
  }
  return std::nullopt;
}

std::string base_href_for(std::string_view page) {
  const auto depth = static_cast<std::size_t>(std::count(page.begin(), page.end(), '/'));
  if (depth == 0) return "./";
  std::string out;
  for (std::size_t i = 0; i < depth; ++i) out += "../";
  return out;
}

void RepositoryStore::write_index() const {
  write_file(root_ / "index" / "symbols.tsv", export_index(snapshot()->index));
}

void RepositoryStore::build() const {
  const auto snap = snapshot();
  write_file(root_ / "index" / "symbols.tsv", export_index(snap->index));
  const fs::path out = root_ / "rendered";
  const auto emit = [&](const std::string& uri) {
    const std::string page = page_path(uri);
    write_file(out / page, *render(uri, base_href_for(page)));
  };
  for (const auto& [uri, _] : snap->formal) emit(uri);
  for (const auto& [uri, _] : snap->pages) emit(uri);
  write_file(out / "index.html", index_page(*snap, "./"));
}

void RepositoryStore::commit(std::string_view uri, std::string_view text) {
  std::lock_guard writer(writer_mutex_);
  const fs::path rel{std::string(uri)};
  const auto first = rel.begin();
  if (rel.is_absolute() || first == rel.end() || *first != "src" ||
      std::find(rel.begin(), rel.end(), "..") != rel.end()) {
    throw std::invalid_argument("only scripts under src/ can be committed: " + std::string(uri));
  }
  write_file(root_ / rel, text);
  reload();
}

// ---------------------------------------------------------------------------
// Goal extraction

std::optional<AdviceRequest> goal_from_response(std::string_view response) {
  const auto marker = response.find("goalstack =");
  if (marker == std::string_view::npos) return std::nullopt;
  if (response.find("No subgoals", marker) != std::string_view::npos) return std::nullopt;
  std::vector<std::string> quoted;
  std::size_t pos = marker;
  for (;;) {
    const auto open = response.find('`', pos);
    if (open == std::string_view::npos) break;
    const auto close = response.find('`', open + 1);
    if (close == std::string_view::npos) break;
    quoted.emplace_back(response.substr(open + 1, close - open - 1));
    pos = close + 1;
  }
  if (quoted.empty()) return std::nullopt;
  AdviceRequest req;
  req.conclusion = quoted.back();
  quoted.pop_back();
  req.assumptions = std::move(quoted);
  for (const auto& f : req.assumptions) {
    if (f.find('\n') != std::string::npos) return std::nullopt;
  }
  if (req.conclusion.find('\n') != std::string::npos || req.conclusion.empty()) return std::nullopt;
  return req;
}

// ---------------------------------------------------------------------------
// WikiService

struct WikiService::Http {
  httplib::Server server;
  std::jthread thread;
};

WikiService::WikiService(std::shared_ptr<RepositoryStore> store, ServiceOptions options)
    : store_(std::move(store)), options_(std::move(options)) {
  if (!options_.factory) throw std::invalid_argument("service needs a prover factory");
  auto cache = std::make_shared<StateCache>(options_.persist_cache ? std::optional(store_->cache_dir())
                                                                   : std::nullopt);
  states_ = std::make_unique<StateService>(options_.factory, std::move(cache), options_.snapshot);
}

WikiService::~WikiService() { stop(); }

namespace {

HttpResult json_result(int status, const json& body) { return {status, "application/json", body.dump()}; }

HttpResult error_result(int status, const std::string& message) {
  return json_result(status, json{{"error", message}});
}

}  // namespace

HttpResult WikiService::get_page(std::string_view path) const {
  if (path.empty() || path == "index.html") return {200, "text/html; charset=utf-8", index_page(*store_->snapshot(), "/page/")};
  const auto uri = store_->resolve_page(path);
  if (!uri) return {404, "text/html; charset=utf-8", "<!DOCTYPE html>\n<html><body><p>not found</p></body></html>\n"};
  return {200, "text/html; charset=utf-8", *store_->render(*uri, "/page/")};
}

HttpResult WikiService::get_state(std::string_view doc_uri, std::size_t frame) {
  const auto doc = store_->scene_document(doc_uri);
  if (!doc) return error_result(404, "unknown document " + std::string(doc_uri));
  try {
    const CachedState s = states_->state_for(*doc, frame);
    return json_result(200, json{{"doc", doc->uri}, {"frame", frame}, {"response", s.response},
                                 {"state", s.state_number}, {"ok", s.ok}});
  } catch (const std::out_of_range&) {
    return error_result(404, "unknown frame " + std::to_string(frame) + " in " + doc->uri);
  } catch (const StateError& e) {
    return json_result(502, json{{"error", e.what()}, {"frame", e.frame()}, {"response", e.response()}});
  }
}

std::shared_ptr<EditSession> WikiService::session(std::string_view doc, std::string& id) {
  std::lock_guard lock(sessions_mutex_);
  if (id.empty()) id = "s" + std::to_string(next_session_++);
  auto& slot = sessions_[id];
  if (!slot) {
    slot = std::make_shared<EditSession>();
    slot->id = id;
    slot->doc = std::string(doc);
  }
  return slot;
}

std::vector<std::string> WikiService::advice_for(const std::string& goal_line, bool& warning) {
  if (options_.advisor.empty()) return {};
  try {
    const auto [host, port] = parse_address(options_.advisor);
    std::vector<std::string> lines = request_advice(host, port, goal_line, options_.advisor_timeout);
    std::erase_if(lines, [](const std::string& l) { return l.starts_with("error:"); });
    return lines;
  } catch (const std::exception&) {
    warning = true;
    return {};
  }
}

HttpResult WikiService::post_edit(std::string_view doc, std::string session_id, std::string_view body,
                                  const std::function<void(const std::string&)>& on_frame) {
  std::vector<Frame> frames;
  try {
    frames = new_document(std::string(doc), split_commands(body), DocumentFlavor::formal_script).frames;
  } catch (const ParseError& e) {
    return json_result(400, json{{"error", e.what()}, {"offset", e.offset()}});
  }
  auto es = session(doc, session_id);
  std::lock_guard lock(es->mutex);
  if (es->doc != doc) return error_result(409, "session " + session_id + " edits " + es->doc);

  const auto snap = store_->snapshot();
  Document working = with_markup(new_document(std::string(doc), frames, DocumentFlavor::formal_script), snap->index);

  std::size_t common = 0;
  while (common < es->frames.size() && common < working.frames.size() &&
         es->frames[common].command_text == working.frames[common].command_text &&
         es->frames[common].kind == working.frames[common].kind &&
         es->frames[common].unterminated == working.frames[common].unterminated) {
    ++common;
  }

  std::size_t undos = 0;
  std::size_t executed = 0;
  bool advisor_warning = false;
  json results = json::array();
  const auto frame_json = [](const Frame& f) {
    return json{{"id", f.id},
                {"markup", f.markup.value_or(escape_html(f.command_text))},
                {"state", f.state_number.value_or(0)},
                {"ok", !f.response || !response_failed(*f.response)},
                {"response", f.response.value_or("")},
                {"advice", json::array()}};
  };

  try {
    if (!es->prover) es->prover = std::make_unique<ProverSession>(options_.factory());
    ProverSession& prover = *es->prover;
    std::size_t replay_from = common;
    if (prover.executed().size() > common) {
      try {
        undos = prover.sync_to(common == 0 ? std::nullopt : std::optional<std::size_t>(common - 1));
      } catch (const SyncError&) {
        prover.restart();
        replay_from = 0;
      }
    } else if (prover.executed().size() < common) {
      prover.restart();
      replay_from = 0;
    }
    for (std::size_t i = 0; i < working.frames.size(); ++i) {
      Frame& f = working.frames[i];
      json entry;
      if (i < common) {
        f.response = es->frames[i].response;
        f.state_number = es->frames[i].state_number;
        if (i >= replay_from && prover.send_frame(f).sent) ++executed;
        entry = json::parse(es->results[i]);
      } else {
        const FrameOutcome outcome = prover.send_frame(f);
        if (outcome.sent) ++executed;
        f.response = outcome.response;
        f.state_number = outcome.state_number;
        entry = frame_json(f);
        entry["ok"] = outcome.ok;
        if (outcome.sent && outcome.ok) {
          if (auto goal = goal_from_response(outcome.response)) {
            entry["advice"] = advice_for(encode_goal(*goal), advisor_warning);
          }
        }
        if (on_frame) on_frame(entry.dump());
      }
      results.push_back(std::move(entry));
    }
  } catch (const ProverError& e) {
    es->prover.reset();
    es->frames.clear();
    es->results.clear();
    try {
      es->prover = std::make_unique<ProverSession>(options_.factory());
    } catch (const std::exception&) {
    }
    return json_result(502, json{{"error", std::string("prover died: ") + e.what()}, {"session", session_id}});
  }

  es->frames = std::move(working.frames);
  es->text = std::string(body);
  es->results.clear();
  for (const auto& r : results) es->results.push_back(r.dump());
  return json_result(200, json{{"session", session_id},
                               {"doc", std::string(doc)},
                               {"first_changed", common},
                               {"executed", executed},
                               {"undos", undos},
                               {"advisor_warning", advisor_warning},
                               {"frames", std::move(results)}});
}

HttpResult WikiService::post_advice(std::string_view line) {
  std::string goal(line);
  while (!goal.empty() && (goal.back() == '\n' || goal.back() == '\r')) goal.pop_back();
  if (goal.empty()) return error_result(400, "empty goal line");
  if (options_.advisor.empty()) return json_result(200, json{{"advice", json::array()}, {"warning", "no advisor configured"}});
  bool warning = false;
  auto advice = advice_for(goal, warning);
  json body{{"advice", advice}};
  if (warning) body["warning"] = "advisor unreachable";
  return json_result(200, body);
}

HttpResult WikiService::post_commit(std::string_view doc, std::string_view session_id) {
  std::shared_ptr<EditSession> es;
  {
    std::lock_guard lock(sessions_mutex_);
    const auto it = sessions_.find(std::string(session_id));
    if (it == sessions_.end()) return error_result(404, "unknown session " + std::string(session_id));
    es = it->second;
  }
  std::lock_guard lock(es->mutex);
  if (es->doc != doc) return error_result(409, "session " + std::string(session_id) + " edits " + es->doc);
  try {
    store_->commit(doc, es->text);
  } catch (const std::invalid_argument& e) {
    return error_result(400, e.what());
  }
  return json_result(200, json{{"committed", es->doc}, {"bytes", es->text.size()}});
}

std::uint16_t WikiService::start(const std::string& host, std::uint16_t port) {
  if (http_) throw std::logic_error("service already started");
  http_ = std::make_unique<Http>();
  auto& srv = http_->server;
  const auto send = [](httplib::Response& res, const HttpResult& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  srv.Get("/", [this, send](const httplib::Request&, httplib::Response& res) { send(res, get_page("")); });
  srv.Get(R"(/page/(.*))", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, get_page(req.matches[1].str()));
  });
  srv.Get(R"(/state/(.+)/(\d+))", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, get_state(req.matches[1].str(), std::stoul(req.matches[2].str())));
  });
  srv.Post(R"(/edit/(.+))", [this, send](const httplib::Request& req, httplib::Response& res) {
    const std::string doc = req.matches[1].str();
    const std::string id = req.get_param_value("session");
    if (req.get_param_value("stream") != "1") {
      send(res, post_edit(doc, id, req.body));
      return;
    }
    const std::string body = req.body;
    res.set_chunked_content_provider("application/x-ndjson",
                                     [this, doc, id, body](std::size_t, httplib::DataSink& sink) {
                                       const HttpResult r = post_edit(doc, id, body, [&sink](const std::string& line) {
                                         const std::string out = line + "\n";
                                         sink.write(out.data(), out.size());
                                       });
                                       const std::string summary = r.body + "\n";
                                       sink.write(summary.data(), summary.size());
                                       sink.done();
                                       return true;
                                     });
  });
  srv.Post("/advice", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, post_advice(req.body));
  });
  srv.Post(R"(/commit/(.+))", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, post_commit(req.matches[1].str(), req.get_param_value("session")));
  });

  int bound = port == 0 ? srv.bind_to_any_port(host) : (srv.bind_to_port(host, port) ? port : -1);
  if (bound < 0) {
    http_.reset();
    throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
  }
  http_->thread = std::jthread([this] { http_->server.listen_after_bind(); });
  http_->server.wait_until_ready();
  return static_cast<std::uint16_t>(bound);
}

void WikiService::wait() {
  if (http_ && http_->thread.joinable()) http_->thread.join();
}

void WikiService::stop() {
  if (!http_) return;
  http_->server.stop();
  if (http_->thread.joinable()) http_->thread.join();
  http_.reset();
}

}  // namespace fwiki
