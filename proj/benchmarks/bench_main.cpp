#include <benchmark/benchmark.h>

#include <filesystem>
#include <random>

#include "fwiki/advice.hpp"
#include "fwiki/creolifier.hpp"
#include "fwiki/hyperlinker.hpp"
#include "fwiki/prover_session.hpp"
#include "fwiki/script_parser.hpp"
#include "fwiki/wiki_renderer.hpp"

using namespace fwiki;

namespace {

std::string synthetic_script(std::size_t commands, std::size_t file = 0) {
  std::string s;
  for (std::size_t i = 0; i < commands; ++i) {
    const std::string name = "THM_" + std::to_string(file) + "_" + std::to_string(i);
    s += "(* lemma " + std::to_string(i) + " *)\nlet " + name + " = prove (`!x. x = x`,\n  REWRITE_TAC[" +
         (i ? "THM_" + std::to_string(file) + "_" + std::to_string(i - 1) : std::string("REFL")) + "]);;\n";
  }
  return s;
}

void BM_SplitCommands(benchmark::State& state) {
  const std::string src = synthetic_script(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(split_commands(src));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * src.size()));
}
BENCHMARK(BM_SplitCommands)->Arg(100)->Arg(1000);

void BM_IndexAndLink(benchmark::State& state) {
  const auto files = static_cast<std::size_t>(state.range(0));
  std::vector<Document> docs;
  for (std::size_t f = 0; f < files; ++f) {
    docs.push_back(new_document("src/f" + std::to_string(f) + ".hl", split_commands(synthetic_script(30, f)),
                                DocumentFlavor::formal_script));
  }
  std::vector<const Document*> corpus;
  for (const auto& d : docs) corpus.push_back(&d);
  for (auto _ : state) {
    const SymbolIndex index = build_index(corpus, LinkerConfig::defaults());
    for (const auto& d : docs) benchmark::DoNotOptimize(link_text(d, index));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * files * 30));
}
BENCHMARK(BM_IndexAndLink)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_Creolify(benchmark::State& state) {
  SymbolIndex index;
  index.add({"QSRHLXB", SymbolKind::theorem, "src/fan.hl", 1, "QSRHLXB", false});
  std::string tex;
  for (int i = 0; i < state.range(0); ++i) {
    tex += "\\begin{definition}[polyhedron]\\guid{QSRHLXB}\nA \\newterm{polyhedron} is the\n"
           "intersection of a finite number of closed half-spaces in $\\ring{R}^n$.\n\\end{definition}\n\n";
  }
  for (auto _ : state) benchmark::DoNotOptimize(creolify(tex, index));
}
BENCHMARK(BM_Creolify)->Arg(10)->Arg(100)->Unit(benchmark::kMicrosecond);

void BM_RenderPage(benchmark::State& state) {
  std::string wiki;
  for (int i = 0; i < 200; ++i) wiki += "== Section ==\nSome //text// with $x^2$ and [[#a" + std::to_string(i) + "]].\n\n";
  PageContext ctx;
  ctx.uri = "doc/p.wiki";
  for (auto _ : state) benchmark::DoNotOptimize(render_page(parse_wiki(wiki), ctx));
}
BENCHMARK(BM_RenderPage)->Unit(benchmark::kMicrosecond);

void BM_Tautology(benchmark::State& state) {
  std::string f = "a0";
  for (int i = 1; i < state.range(0); ++i) f = "(" + f + " \\/ a" + std::to_string(i) + ")";
  const MiniTerm t = parse_term(f + " \\/ ~a0");
  for (auto _ : state) benchmark::DoNotOptimize(is_tautology(t));
}
BENCHMARK(BM_Tautology)->Arg(8)->Arg(16)->Unit(benchmark::kMicrosecond);

void BM_StateReplayMemoised(benchmark::State& state) {
  const Document doc = new_document("b.hl", split_commands(synthetic_script(50)), DocumentFlavor::formal_script);
  StateService service([] { return std::make_unique<InProcessStubAdapter>(); }, std::make_shared<StateCache>());
  service.state_for(doc, doc.frames.size() - 1);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(service.state_for(doc, i++ % doc.frames.size()));
}
BENCHMARK(BM_StateReplayMemoised);

}  // namespace
BENCHMARK_MAIN();
