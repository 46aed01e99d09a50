// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 on any failure.

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include "fwiki/advice.hpp"
#include "fwiki/creolifier.hpp"
#include "fwiki/frame_model.hpp"
#include "fwiki/hyperlinker.hpp"
#include "fwiki/prover_session.hpp"
#include "fwiki/script_parser.hpp"
#include "fwiki/service.hpp"
#include "fwiki/wiki_renderer.hpp"
#include "support.hpp"

using namespace fwiki;
using json = nlohmann::json;
using namespace std::chrono_literals;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool cond, const std::string& what) {
  if (!cond) throw Failure(what);
}

template <class A, class B>
void require_eq(const A& a, const B& b, const std::string& what) {
  if (!(a == b)) {
    std::ostringstream s;
    s << what << ": got " << a << ", want " << b;
    throw Failure(s.str());
  }
}

int failures = 0;

void criterion(const std::string& name, const std::function<std::string()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  bool ok = true;
  try {
    detail = body();
  } catch (const std::exception& e) {
    ok = false;
    detail = e.what();
  }
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
  std::cout << (ok ? "PASS " : "FAIL ") << name << " (" << ms << " ms)";
  if (!detail.empty()) std::cout << ": " << detail;
  std::cout << std::endl;
  if (!ok) ++failures;
}

std::unique_ptr<ProverAdapter> pipe_stub() {
  return std::make_unique<PipeProverAdapter>(std::vector<std::string>{test::stub_prover_path()});
}

Frame command(std::size_t id, std::string text) {
  Frame f;
  f.id = id;
  f.command_text = std::move(text);
  return f;
}

// ---------------------------------------------------------------------------

std::string parser_golden() {
  const auto frames = split_commands(test::kExampleScript);
  require_eq(frames.size(), 4u, "frame count");
  const std::vector<std::string> want = {"(* Example code fragment. *)", "g `x=x`;;", "e REFL_TAC;;",
                                         "let t = (* Use top_thm to verify the proof. *)\n  top_thm();;"};
  for (std::size_t i = 0; i < 4; ++i) require_eq(frames[i].command_text, want[i], "frame " + std::to_string(i));
  require(frames[0].kind == FrameKind::standalone_comment, "frame 0 is a comment");
  const Document doc = new_document("example.hl", frames, DocumentFlavor::formal_script);
  require(reconstruct_source(doc) == test::kExampleScript, "reconstruction differs");
  return "4 frames, byte-identical reconstruction";
}

std::string state_numbers() {
  ProverSession session(pipe_stub());
  std::vector<std::size_t> states;
  for (const Frame& f : split_commands(test::kExampleScript)) states.push_back(session.send_frame(f).state_number);
  require(states == std::vector<std::size_t>{0, 1, 2, 2}, "states differ");
  return "0 1 2 2";
}

std::string undo_sync() {
  std::mt19937 rng(1);
  auto counters = std::make_shared<AdapterCounters>();
  ProverSession session(std::make_unique<CountingAdapter>(pipe_stub(), counters));
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    session.restart();
    const std::size_t n = 1 + rng() % 12;
    std::vector<std::size_t> recorded;
    for (std::size_t i = 0; i < n; ++i) {
      std::string text = i == 0 ? "g `p" + std::to_string(t) + "`;;"
                                : (rng() % 4 == 0 ? "let x" + std::to_string(i) + " = 1;;"
                                                  : "e TAC" + std::to_string(i) + ";;");
      recorded.push_back(session.send_frame(command(i, text)).state_number);
    }
    const std::size_t target = rng() % n;
    const std::size_t before = session.depth();
    counters->reset();
    const std::size_t issued = session.sync_to(target);
    require_eq(issued, before - recorded[target], "undos issued");
    require_eq(counters->undos.load(), before - recorded[target], "undos sent");
    require_eq(session.adapter().probe_depth(), recorded[target], "probed depth");
  }
  return std::to_string(trials) + " random scripts";
}

struct MemoRepo {
  test::TempDir dir;
  MemoRepo() {
    test::write_text(dir.path() / "src" / "ex.hl", test::kExampleScript);
  }
};

std::string memoization() {
  MemoRepo repo;
  const auto run = [&](std::shared_ptr<AdapterCounters> counters, std::vector<std::string>& bodies) {
    auto store = std::make_shared<RepositoryStore>(repo.dir.path());
    store->reload();
    ServiceOptions options;
    options.factory = test::counted_stub_factory(counters);
    WikiService service(store, options);
    const auto port = service.start("127.0.0.1", 0);
    httplib::Client client("127.0.0.1", port);
    client.set_read_timeout(30, 0);
    for (int frame = 0; frame < 4; ++frame) {
      auto r = client.Get("/state/src/ex.hl/" + std::to_string(frame));
      require(r && r->status == 200, "GET /state failed");
      bodies.push_back(r->body);
    }
    const std::size_t sends = counters->sends.load();
    for (int frame = 3; frame >= 0; --frame) {
      auto r = client.Get("/state/src/ex.hl/" + std::to_string(frame));
      require(r && r->body == bodies[static_cast<std::size_t>(frame)], "repeat body differs");
    }
    require_eq(counters->sends.load(), sends, "sends on repeated requests");
    service.stop();
  };
  auto first = std::make_shared<AdapterCounters>();
  std::vector<std::string> a;
  run(first, a);
  require(std::filesystem::exists(repo.dir.path() / "cache"), "no cache directory");
  std::filesystem::remove_all(repo.dir.path() / "cache");
  auto second = std::make_shared<AdapterCounters>();
  std::vector<std::string> b;
  run(second, b);
  require(b == a, "bodies after cache loss differ");
  require(second->sends.load() > 0, "second service did not recompute");
  return "repeat requests send nothing; recomputed bodies identical";
}

std::string hyperlinker_scale() {
  const std::size_t files = 500, per_file = 30;
  std::mt19937 rng(2);
  std::vector<std::string> names;
  for (std::size_t f = 0; f < files; ++f) {
    for (std::size_t i = 0; i < per_file; ++i) names.push_back("THM_" + std::to_string(f) + "_" + std::to_string(i));
  }
  const std::set<std::string> denied = {"THM_0_0", "THM_7_3", "THM_499_29"};
  std::vector<Document> docs;
  docs.reserve(files);
  for (std::size_t f = 0; f < files; ++f) {
    std::string src;
    for (std::size_t i = 0; i < per_file; ++i) {
      const std::string& self = names[f * per_file + i];
      std::string refs;
      for (int r = 0; r < 3; ++r) refs += (r ? "; " : "") + names[rng() % names.size()];
      for (const auto& d : denied) {
        if (rng() % 50 == 0) refs += "; " + d;
      }
      src += "let " + self + " = prove (`T`, REWRITE_TAC[" + refs + "]) (* " + names[rng() % names.size()] +
             " *);;\nprint_string \"" + self + "\";;\n";
    }
    docs.push_back(new_document("src/f" + std::to_string(f) + ".hl", split_commands(src), DocumentFlavor::formal_script));
  }
  LinkerConfig config = LinkerConfig::defaults();
  config.deny_list.insert(denied.begin(), denied.end());

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<const Document*> corpus;
  for (const auto& d : docs) corpus.push_back(&d);
  const SymbolIndex index = build_index(corpus, config);
  std::vector<std::vector<std::string>> html;
  for (const auto& d : docs) html.push_back(link_text(d, index));
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double budget = std::getenv("CI") ? 20.0 : 10.0;

  require_eq(index.size(), names.size() - denied.size(), "index size");
  std::map<std::string, std::set<std::string>> anchors;
  const std::regex id_re("<a id=\"([^\"]+)\"");
  const std::regex href_re("href=\"([^\"#]+)#([^\"]+)\"");
  std::vector<std::pair<std::string, std::string>> hrefs;
  for (std::size_t f = 0; f < files; ++f) {
    const std::string page = page_path(docs[f].uri);
    for (const auto& frame : html[f]) {
      for (std::sregex_iterator it(frame.begin(), frame.end(), id_re), end; it != end; ++it) anchors[page].insert((*it)[1]);
      for (std::sregex_iterator it(frame.begin(), frame.end(), href_re), end; it != end; ++it) {
        hrefs.emplace_back((*it)[1], (*it)[2]);
      }
      if (frame.find("print_string") != std::string::npos) {
        require(frame.find("<a href") == std::string::npos, "string literal linked");
      }
    }
  }
  for (const auto& [page, anchor] : hrefs) {
    require(!denied.contains(anchor), "deny-listed name linked: " + anchor);
    require(anchors[page].contains(anchor), "dangling link " + page + "#" + anchor);
  }
  require(seconds < budget, "took " + std::to_string(seconds) + " s");
  return std::to_string(names.size()) + " entities, " + std::to_string(hrefs.size()) + " links resolved in " +
         std::to_string(seconds) + " s";
}

std::string creolifier_goldens() {
  SymbolIndex index;
  for (const char* n : {"QSRHLXB", "MUGGQUF"}) index.add({n, SymbolKind::theorem, "src/fan.hl", 1, n, false});
  for (const char* n : {"azim_fan", "is_Moebius_contour", "closed_half_space", "open_half_space"}) {
    index.add({n, SymbolKind::definition, "src/fan.hl", 2, n, false});
  }
  const std::string polyhedron =
      "\\begin{definition}[polyhedron]\\guid{QSRHLXB}\n"
      "A \\newterm{polyhedron} is the\n"
      "intersection of a finite number of closed half-spaces in\n"
      "$\\ring{R}^n$.  \n"
      "\\end{definition}\n";
  require_eq(creolify(polyhedron, index).wiki,
             std::string("\n=== Definition (polyhedron) ===\n{{src/fan.hl#QSRHLXB|QSRHLXB}}\n"
                         "A [[#polyhedron]]//polyhedron// is the\n"
                         "intersection of a finite number of closed half-spaces in\n$\\ring{R}^n$.  \n\n\n"),
             "polyhedron");
  const std::string lemma =
      "\\begin{lemma}[Krein--Milman]\\guid{MUGGQUF} \n"
      "Every compact convex set $P\\subset\\ring{R}^n$ is the convex hull \n"
      "of its set of extreme points.\n"
      "\\end{lemma}\n";
  const auto lemma_wiki = creolify(lemma, index).wiki;
  require(lemma_wiki.find("=== Lemma (Krein\xE2\x80\x93Milman) ===") != std::string::npos, "lemma heading");
  require(lemma_wiki.find("{{src/fan.hl#MUGGQUF|MUGGQUF}}") != std::string::npos, "lemma guid");
  require(lemma_wiki.find("$P\\subset\\ring{R}^n$") != std::string::npos, "lemma math");
  const auto defs = creolify(
      "\\formaldef{$\\op{azim}(x)$}{azim\\_fan}\n"
      "\\formaldef{M\\\"obius contour}{is\\_Moebius\\_contour}\n"
      "\\formaldef{half space}{closed\\_half\\_space, open\\_half\\_space}\n",
      index);
  require_eq(defs.wiki,
             std::string("$\\op{azim}(x)$ ([[src/fan.hl#azim_fan|azim_fan]])\n"
                         "M\xC3\xB6" "bius contour ([[src/fan.hl#is_Moebius_contour|is_Moebius_contour]])\n"
                         "half space ([[src/fan.hl#closed_half_space|closed_half_space]], "
                         "[[src/fan.hl#open_half_space|open_half_space]])\n"),
             "formaldefs");
  PageContext ctx;
  ctx.uri = "doc/fan.wiki";
  ctx.index = &index;
  const std::string html = render_page(parse_wiki(creolify(polyhedron + lemma, index).wiki), ctx);
  std::string err;
  require(test::html_well_formed(html, &err), "html: " + err);
  require(html.find("<h3>Definition (polyhedron)</h3>") != std::string::npos, "rendered heading");
  require(html.find("<a id=\"polyhedron\"></a><em>polyhedron</em>") != std::string::npos, "rendered anchor");
  require(html.find("<span class=\"math\">$\\ring{R}^n$</span>") != std::string::npos, "rendered math");
  return "3 goldens, math preserved, rendered headings and anchors";
}

// Independent formula model for the advice oracle.
struct F {
  char op;
  int var = 0;
  int a = -1, b = -1;
};

struct Enumerator {
  std::vector<F> nodes;
  std::size_t checked = 0, tautologies = 0;
  TautologyStrategy strategy;

  std::string show(int n) const {
    const F& f = nodes[static_cast<std::size_t>(n)];
    switch (f.op) {
      case 'v': return std::string(1, static_cast<char>('p' + f.var));
      case 'T': return "T";
      case 'F': return "F";
      case '~': return "~(" + show(f.a) + ")";
      default: break;
    }
    const char* sym = f.op == '&' ? "/\\" : f.op == '|' ? "\\/" : f.op == '>' ? "==>" : "<=>";
    return "(" + show(f.a) + ") " + sym + " (" + show(f.b) + ")";
  }
  bool eval(int n, unsigned env) const {
    const F& f = nodes[static_cast<std::size_t>(n)];
    switch (f.op) {
      case 'v': return (env >> f.var) & 1u;
      case 'T': return true;
      case 'F': return false;
      case '~': return !eval(f.a, env);
      case '&': return eval(f.a, env) && eval(f.b, env);
      case '|': return eval(f.a, env) || eval(f.b, env);
      case '>': return !eval(f.a, env) || eval(f.b, env);
      default: return eval(f.a, env) == eval(f.b, env);
    }
  }
  void check(int root) {
    bool valid = true;
    for (unsigned env = 0; env < 16 && valid; ++env) valid = eval(root, env);
    const std::string text = show(root);
    const auto got = strategy.run({{}, text}, {});
    require(got.has_value() == valid, "oracle disagrees on " + text);
    ++checked;
    tautologies += valid;
  }

  // Shapes with exactly `size` connectives; leaves filled in order with
  // canonically named atoms (restricted growth) or constants.
  using Cont = std::function<void(int root, int used)>;
  void shape(int size, int used, const Cont& k) {
    if (size == 0) {
      for (int leaf = 0; leaf <= std::min(used, 3) + 2; ++leaf) {
        F f{leaf == 0 ? 'T' : leaf == 1 ? 'F' : 'v', leaf - 2};
        nodes.push_back(f);
        k(static_cast<int>(nodes.size()) - 1, leaf >= 2 && leaf - 2 == used ? used + 1 : used);
        nodes.pop_back();
      }
      return;
    }
    shape(size - 1, used, [&](int child, int u) {
      nodes.push_back({'~', 0, child});
      k(static_cast<int>(nodes.size()) - 1, u);
      nodes.pop_back();
    });
    for (int left = 0; left < size; ++left) {
      shape(left, used, [&](int l, int u1) {
        shape(size - 1 - left, u1, [&](int r, int u2) {
          for (char op : {'&', '|', '>', '='}) {
            nodes.push_back({op, 0, l, r});
            k(static_cast<int>(nodes.size()) - 1, u2);
            nodes.pop_back();
          }
        });
      });
    }
  }
};

std::string advice_protocol() {
  std::mt19937 rng(4);
  const std::string alphabet = "pqr ~/\\=<>()TF_1x";
  for (int t = 0; t < 10000; ++t) {
    AdviceRequest req;
    const auto field = [&] {
      std::string s;
      for (unsigned n = rng() % 10; n > 0; --n) s += alphabet[rng() % alphabet.size()];
      return s;
    };
    for (unsigned n = rng() % 5; n > 0; --n) req.assumptions.push_back(field());
    req.conclusion = field();
    if (req.assumptions.empty() && req.conclusion.empty()) req.conclusion = "p";
    require(decode_goal(encode_goal(req)) == req, "round trip");
  }

  Enumerator e;
  for (int size = 0; size <= 4; ++size) e.shape(size, 0, [&](int root, int) { e.check(root); });
  const std::size_t exhaustive = e.checked;
  // Deeper random sample over the same atoms.
  for (int t = 0; t < 20000; ++t) {
    e.nodes.clear();
    std::function<int(int)> gen = [&](int depth) -> int {
      F f{};
      if (depth == 0 || rng() % 4 == 0) {
        const unsigned r = rng() % 6;
        f = r == 4 ? F{'T'} : r == 5 ? F{'F'} : F{'v', static_cast<int>(r)};
      } else {
        static const char ops[] = {'~', '&', '|', '>', '='};
        f.op = ops[rng() % 5];
        f.a = gen(depth - 1);
        if (f.op != '~') f.b = gen(depth - 1);
      }
      e.nodes.push_back(f);
      return static_cast<int>(e.nodes.size()) - 1;
    };
    e.check(gen(6));
  }

  AdviceServer server({std::make_shared<TautologyStrategy>()}, 5s);
  const auto port = server.start();
  const std::string goal = "p /\\ q`q ==> r`r";
  const auto first = request_advice("127.0.0.1", port, goal);
  require(first == std::vector<std::string>{std::string(kTautologyAdvice)}, "advice reply");
  const auto runs = server.strategy_runs();
  const auto second = request_advice("127.0.0.1", port, goal);
  require(second == first, "repeat reply differs");
  require_eq(server.strategy_runs(), runs, "strategy runs on repeat");
  server.stop();
  return "10000 round trips; " + std::to_string(exhaustive) + " exhaustive + 20000 sampled formulas (" +
         std::to_string(e.tautologies) + " valid); cached repeat";
}

std::string dispatch_semantics() {
  std::atomic<bool> b_stopped{false};
  std::atomic<long long> b_stop_ms{-1};
  const auto t0 = std::chrono::steady_clock::now();
  auto a = std::make_shared<FunctionStrategy>("A", [](const AdviceRequest&, std::stop_token) {
    std::this_thread::sleep_for(20ms);
    return std::optional<std::string>("advice from A");
  });
  auto b = std::make_shared<FunctionStrategy>("B", [&](const AdviceRequest&, std::stop_token st) {
    while (!st.stop_requested()) std::this_thread::sleep_for(1ms);
    b_stopped = true;
    b_stop_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
    return std::optional<std::string>();
  });
  const auto won = dispatch({{}, "p"}, {a, b}, 3s);
  require(won && won->strategy == "A" && won->text == "advice from A", "winner");
  require(b_stopped.load(), "loser not stopped");
  require(b_stop_ms.load() < 3000, "loser stopped late");

  auto fail = std::make_shared<FunctionStrategy>("N", [](const AdviceRequest&, std::stop_token) {
    return std::optional<std::string>();
  });
  require(!dispatch({{}, "p"}, {fail, fail}, 1s), "all-fail gave advice");
  AdviceServer server({fail}, 1s);
  const auto port = server.start();
  require(request_advice("127.0.0.1", port, "p", 5s).empty(), "all-fail server reply not empty");
  server.stop();
  return "A wins, B stopped after " + std::to_string(b_stop_ms.load()) + " ms; all-fail replies empty";
}

std::string edit_prefix_rule() {
  test::TempDir dir;
  test::write_text(dir.path() / "src" / "e.hl", "");
  auto store = std::make_shared<RepositoryStore>(dir.path());
  store->reload();
  auto counters = std::make_shared<AdapterCounters>();
  ServiceOptions options;
  options.factory = test::counted_stub_factory(counters);
  options.persist_cache = false;
  WikiService service(store, options);
  std::mt19937 rng(9);
  const auto script = [](std::size_t n, std::size_t keep, int salt) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) {
      const bool old = i < keep;
      if (i == 0) s += old ? "g `p`;;\n" : "g `q" + std::to_string(salt) + "`;;\n";
      else s += "e " + std::string(old ? "OLD" : "NEW") + std::to_string(i) + "_" + std::to_string(old ? 0 : salt) + ";;\n";
    }
    return s;
  };
  const int trials = 200;
  std::string session;
  std::size_t current = 0;
  {
    const json r = json::parse(service.post_edit("src/e.hl", "", script(current = 6, 6, 0)).body);
    session = r["session"];
  }
  for (int t = 1; t <= trials; ++t) {
    // Current text keeps the OLD prefix for all frames; edit from frame k.
    const std::size_t k = rng() % (current + 1);
    const std::size_t m = std::max<std::size_t>(k, 1 + rng() % 12);
    counters->reset();
    const auto res = service.post_edit("src/e.hl", session, script(m, k, t));
    require_eq(res.status, 200, "edit status");
    const json j = json::parse(res.body);
    const std::size_t common = j["first_changed"];
    require(common >= k, "prefix too short");
    require_eq(counters->executions(), m - common, "executions");
    require_eq(counters->undos.load(), current - common, "undos");
    // Restore an all-OLD script of random length so every trial starts alike.
    const std::size_t n = 1 + rng() % 12;
    counters->reset();
    const json back = json::parse(service.post_edit("src/e.hl", session, script(n, n, 0)).body);
    require_eq(counters->executions(), n - back["first_changed"].get<std::size_t>(), "restore executions");
    current = n;
  }
  return std::to_string(trials) + " random edits";
}

}  // namespace

int main() {
  criterion("parser: example script gives four frames and reconstructs exactly", parser_golden);
  criterion("prover: example state numbers", state_numbers);
  criterion("prover: undo synchronisation reaches recorded state", undo_sync);
  criterion("service: state memoisation and cache rebuild", memoization);
  criterion("hyperlinker: 15000 entities link without dangling anchors", hyperlinker_scale);
  criterion("creolifier: example translations", creolifier_goldens);
  criterion("advice: protocol, tautology oracle and caching", advice_protocol);
  criterion("advice: dispatch winner and cancellation", dispatch_semantics);
  criterion("service: edits re-execute only changed suffix", edit_prefix_rule);
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
