#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "fwiki/frame_model.hpp"
#include "fwiki/hyperlinker.hpp"

namespace fwiki {

struct Inline {
  enum class Kind { text, emphasis, strong, link, anchor, math, transclusion };
  Kind kind = Kind::text;
  /// text: literal characters; math: the segment including delimiters;
  /// anchor: the name.
  std::string text;
  /// link target, or transclusion document uri.
  std::string target;
  /// transclusion anchor (may be empty: the whole document).
  std::string anchor;
  std::string label;
  std::vector<Inline> children;

  bool operator==(const Inline&) const = default;
};

struct Block {
  enum class Kind { heading, paragraph, code };
  Kind kind = Kind::paragraph;
  int level = 0;
  std::vector<Inline> inlines;
  std::string language;
  std::string body;

  bool operator==(const Block&) const = default;
};

struct WikiAst {
  std::vector<Block> blocks;
  bool operator==(const WikiAst&) const = default;
};

/// Total: malformed constructs come back as literal text. `~` escapes the
/// following character.
WikiAst parse_wiki(std::string_view text);

/// Language tag of the code block holding math macro definitions.
inline constexpr std::string_view kMacroBlockLanguage = "latex-macros";

/// Resolves `uri#anchor` against formal documents, using the symbol index to
/// map an anchor to its defining frame. An empty anchor names the root scene.
class IndexedRegistry final : public SceneRegistry {
 public:
  explicit IndexedRegistry(const SymbolIndex* index = nullptr) : index_(index) {}
  void add(std::shared_ptr<const Document> doc);
  void set_index(const SymbolIndex* index) { index_ = index; }
  std::shared_ptr<const Document> document(std::string_view uri) const;
  std::optional<ResolvedScene> resolve(std::string_view uri, std::string_view anchor) const override;

 private:
  const SymbolIndex* index_;
  std::map<std::string, std::shared_ptr<const Document>, std::less<>> docs_;
};

struct PageContext {
  /// uri of the page being rendered, e.g. `doc/fan.wiki`.
  std::string uri;
  std::string title;
  /// Emitted as `<base href>` when non-empty.
  std::string base_href;
  const SceneRegistry* registry = nullptr;
  const SymbolIndex* index = nullptr;
  /// Maps a document uri to the href of its page. Defaults to page_path.
  std::function<std::string(std::string_view uri)> page_href;
};

/// Document uri given to the n-th code block of an informal page.
std::string code_scene_uri(std::string_view page_uri, std::size_t n);

/// The code blocks of a page as formal documents (macro blocks excluded).
/// Blocks that fail to split are returned as a single unterminated frame.
std::vector<Document> code_scene_documents(std::string_view page_uri, const WikiAst& ast);

/// HTML for the page body only.
std::string render_body(const WikiAst& ast, const PageContext& ctx);

/// Complete HTML page for an informal document.
std::string render_page(const WikiAst& ast, const PageContext& ctx);

/// Complete HTML page listing a formal script (frames carry data attributes).
std::string render_formal_page(const Document& doc, const PageContext& ctx);

}  // namespace fwiki
