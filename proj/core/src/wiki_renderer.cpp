#include "fwiki/wiki_renderer.hpp"

#include <set>

#include "fwiki/script_parser.hpp"

namespace fwiki {

namespace {

std::string_view trim_view(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

const std::set<std::string, std::less<>>& math_envs() {
  static const std::set<std::string, std::less<>> envs = {
      "equation", "equation*", "align",     "align*",      "eqnarray", "eqnarray*", "gather",
      "gather*",  "multline",  "multline*", "displaymath", "math",     "alignat",   "alignat*"};
  return envs;
}

// ---------------------------------------------------------------------------
// Inline grammar

class InlineParser {
 public:
  explicit InlineParser(std::string_view s) : s_(s) {}

  std::vector<Inline> parse() {
    std::vector<Inline> out;
    parse_until(out, {});
    return out;
  }

 private:
  enum class Stop { end, closed, aborted };

  static void append_text(std::vector<Inline>& out, std::string_view text) {
    if (text.empty()) return;
    if (!out.empty() && out.back().kind == Inline::Kind::text) {
      out.back().text += text;
    } else {
      Inline node;
      node.text = std::string(text);
      out.push_back(std::move(node));
    }
  }

  static void append_all(std::vector<Inline>& out, std::vector<Inline>&& nodes) {
    for (auto& n : nodes) {
      if (n.kind == Inline::Kind::text) {
        append_text(out, n.text);
      } else {
        out.push_back(std::move(n));
      }
    }
  }

  // Parses until `closer` (the innermost span's) or an ancestor's closer.
  Stop parse_until(std::vector<Inline>& out, std::string_view closer) {
    while (pos_ < s_.size()) {
      const std::string_view rest = s_.substr(pos_);
      if (!closer.empty() && rest.starts_with(closer)) {
        pos_ += closer.size();
        return Stop::closed;
      }
      for (std::string_view c : open_) {
        if (c != closer && rest.starts_with(c)) return Stop::aborted;
      }
      if (rest[0] == '~' && rest.size() > 1) {
        append_text(out, rest.substr(1, 1));
        pos_ += 2;
      } else if (rest.starts_with("//") || rest.starts_with("**")) {
        span(out, rest.substr(0, 2));
      } else if (rest.starts_with("[[")) {
        bracket(out);
      } else if (rest.starts_with("{{")) {
        transclusion(out);
      } else if (!math(out)) {
        append_text(out, rest.substr(0, 1));
        ++pos_;
      }
    }
    return Stop::end;
  }

  void span(std::vector<Inline>& out, std::string_view delim) {
    pos_ += 2;
    open_.push_back(delim);
    std::vector<Inline> children;
    const Stop stop = parse_until(children, delim);
    open_.pop_back();
    if (stop == Stop::closed) {
      Inline node;
      node.kind = delim == "//" ? Inline::Kind::emphasis : Inline::Kind::strong;
      node.children = std::move(children);
      out.push_back(std::move(node));
    } else {
      append_text(out, delim);
      append_all(out, std::move(children));
    }
  }

  void bracket(std::vector<Inline>& out) {
    const auto close = s_.find("]]", pos_ + 2);
    if (close == std::string_view::npos) {
      append_text(out, "[[");
      pos_ += 2;
      return;
    }
    const std::string_view body = s_.substr(pos_ + 2, close - pos_ - 2);
    const auto bar = body.find('|');
    const std::string_view target = trim_view(body.substr(0, bar));
    Inline node;
    if (bar == std::string_view::npos && target.size() > 1 && target[0] == '#') {
      node.kind = Inline::Kind::anchor;
      node.text = std::string(target.substr(1));
    } else if (!target.empty() && target != "#") {
      node.kind = Inline::Kind::link;
      node.target = std::string(target);
      node.label = bar == std::string_view::npos ? std::string(target) : std::string(body.substr(bar + 1));
    } else {
      append_text(out, "[[");
      pos_ += 2;
      return;
    }
    out.push_back(std::move(node));
    pos_ = close + 2;
  }

  void transclusion(std::vector<Inline>& out) {
    const auto close = s_.find("}}", pos_ + 2);
    if (close == std::string_view::npos) {
      append_text(out, "{{");
      pos_ += 2;
      return;
    }
    const std::string_view body = s_.substr(pos_ + 2, close - pos_ - 2);
    const auto bar = body.find('|');
    const std::string_view ref = trim_view(body.substr(0, bar));
    const auto hash = ref.rfind('#');
    const std::string_view uri = ref.substr(0, hash);
    if (uri.empty() || uri.find_first_of("{}") != std::string_view::npos) {
      append_text(out, "{{");
      pos_ += 2;
      return;
    }
    Inline node;
    node.kind = Inline::Kind::transclusion;
    node.target = std::string(uri);
    if (hash != std::string_view::npos) node.anchor = std::string(ref.substr(hash + 1));
    if (bar != std::string_view::npos) {
      node.label = std::string(body.substr(bar + 1));
    } else {
      node.label = node.anchor.empty() ? node.target : node.anchor;
    }
    out.push_back(std::move(node));
    pos_ = close + 2;
  }

  // Recognises a math segment at pos_; returns false when there is none.
  bool math(std::vector<Inline>& out) {
    const std::string_view rest = s_.substr(pos_);
    std::size_t end = std::string_view::npos;
    if (rest.starts_with("$$")) {
      const auto c = rest.find("$$", 2);
      if (c != std::string_view::npos) end = c + 2;
    } else if (rest[0] == '$') {
      for (std::size_t i = 1; i < rest.size(); ++i) {
        if (rest[i] == '\\') {
          ++i;
        } else if (rest[i] == '$') {
          end = i + 1;
          break;
        }
      }
    } else if (rest.starts_with("\\[") || rest.starts_with("\\(")) {
      const auto c = rest.find(rest[1] == '[' ? "\\]" : "\\)", 2);
      if (c != std::string_view::npos) end = c + 2;
    } else if (rest.starts_with("\\begin{")) {
      const auto brace = rest.find('}', 7);
      if (brace != std::string_view::npos) {
        const std::string env(rest.substr(7, brace - 7));
        if (math_envs().contains(env)) {
          const std::string closer = "\\end{" + env + "}";
          const auto c = rest.find(closer, brace);
          if (c != std::string_view::npos) end = c + closer.size();
        }
      }
    }
    if (end == std::string_view::npos) return false;
    Inline node;
    node.kind = Inline::Kind::math;
    node.text = std::string(rest.substr(0, end));
    out.push_back(std::move(node));
    pos_ += end;
    return true;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::vector<std::string_view> open_;
};

// Heading level of a line, or 0.
int heading_level(std::string_view line, std::string_view& text) {
  int level = 0;
  while (static_cast<std::size_t>(level) < line.size() && line[static_cast<std::size_t>(level)] == '=') ++level;
  if (level == 0 || level > 4) return 0;
  std::string_view rest = trim_view(line.substr(static_cast<std::size_t>(level)));
  while (!rest.empty() && rest.back() == '=' && !(rest.size() >= 2 && rest[rest.size() - 2] == '~')) {
    rest.remove_suffix(1);
  }
  text = trim_view(rest);
  return level;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

// ---------------------------------------------------------------------------
// Rendering

class BodyRenderer {
 public:
  explicit BodyRenderer(const PageContext& ctx) : ctx_(ctx) {}

  std::string render(const WikiAst& ast) {
    std::string out;
    for (const Block& b : ast.blocks) {
      switch (b.kind) {
        case Block::Kind::heading: {
          const std::string tag = "h" + std::to_string(b.level);
          out += "<" + tag + ">" + inlines(b.inlines) + "</" + tag + ">\n";
          break;
        }
        case Block::Kind::paragraph: {
          const bool block_content = contains_transclusion(b.inlines);
          out += block_content ? "<div class=\"para\">" : "<p>";
          out += inlines(b.inlines);
          out += block_content ? "</div>\n" : "</p>\n";
          break;
        }
        case Block::Kind::code: out += code(b); break;
      }
    }
    return out;
  }

 private:
  static bool contains_transclusion(const std::vector<Inline>& nodes) {
    for (const auto& n : nodes) {
      if (n.kind == Inline::Kind::transclusion || contains_transclusion(n.children)) return true;
    }
    return false;
  }

  std::string href_for(std::string_view uri) const {
    return ctx_.page_href ? ctx_.page_href(uri) : page_path(uri);
  }

  std::string link_href(std::string_view target) const {
    if (target.starts_with("#")) return href_for(ctx_.uri) + std::string(target);
    if (target.find("://") != std::string_view::npos || target.starts_with("/") ||
        target.starts_with("mailto:")) {
      return std::string(target);
    }
    if (const auto hash = target.rfind('#'); hash != std::string_view::npos) {
      return href_for(target.substr(0, hash)) + std::string(target.substr(hash));
    }
    if (ctx_.index != nullptr) {
      if (const SymbolIndexEntry* e = ctx_.index->find(target)) return href_for(e->file) + "#" + e->anchor;
    }
    return href_for(target);
  }

  std::string inlines(const std::vector<Inline>& nodes) {
    std::string out;
    for (const Inline& n : nodes) {
      switch (n.kind) {
        case Inline::Kind::text: out += escape_html(n.text); break;
        case Inline::Kind::emphasis: out += "<em>" + inlines(n.children) + "</em>"; break;
        case Inline::Kind::strong: out += "<strong>" + inlines(n.children) + "</strong>"; break;
        case Inline::Kind::anchor: out += "<a id=\"" + escape_html(n.text) + "\"></a>"; break;
        case Inline::Kind::math: out += "<span class=\"math\">" + escape_html(n.text) + "</span>"; break;
        case Inline::Kind::link:
          if (n.target.starts_with("unresolved:")) {
            out += "<span class=\"unresolved\" title=\"no formal counterpart\">" + escape_html(n.label) + "</span>";
          } else {
            out += "<a href=\"" + escape_html(link_href(n.target)) + "\">" + escape_html(n.label) + "</a>";
          }
          break;
        case Inline::Kind::transclusion: out += island(n); break;
      }
    }
    return out;
  }

  std::string island(const Inline& n) const {
    if (ctx_.registry != nullptr) {
      if (auto resolved = ctx_.registry->resolve(n.target, n.anchor)) {
        return render_island(n.label, n.target, n.anchor,
                             render_scene(*resolved->scene, *resolved->document, ctx_.registry));
      }
    }
    return render_island(n.label, n.target, n.anchor, broken_reference_marker(n.target + "#" + n.anchor));
  }

  std::string code(const Block& b) {
    if (b.language == kMacroBlockLanguage) {
      return "<div class=\"math-macros\" hidden>" + escape_html(b.body) + "</div>\n";
    }
    const std::string uri = code_scene_uri(ctx_.uri, code_count_++);
    Document doc = code_document(uri, b.body);
    if (ctx_.index != nullptr) {
      doc = with_markup(std::move(doc), *ctx_.index, [this](const SymbolIndexEntry& e, std::string_view) {
        return href_for(e.file) + "#" + e.anchor;
      });
    }
    std::string out = "<div class=\"scene code\" data-doc=\"" + escape_html(uri) + "\" data-language=\"" +
                      escape_html(b.language) + "\"><pre class=\"formal\">";
    out += render_scene(doc.root, doc, nullptr);
    out += "</pre><button type=\"button\" class=\"edit\" data-doc=\"" + escape_html(uri) + "\">edit</button></div>\n";
    return out;
  }

 public:
  static Document code_document(const std::string& uri, const std::string& body) {
    std::vector<Frame> frames;
    try {
      frames = split_commands(body);
    } catch (const ParseError&) {
      Frame f;
      f.command_text = body;
      f.unterminated = true;
      frames.push_back(std::move(f));
    }
    return new_document(uri, std::move(frames), DocumentFlavor::formal_script);
  }

 private:
  const PageContext& ctx_;
  std::size_t code_count_ = 0;
};

std::string page_shell(const PageContext& ctx, std::string_view article_class, const std::string& body) {
  std::string out = "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>";
  out += escape_html(ctx.title.empty() ? ctx.uri : ctx.title);
  out += "</title>\n";
  if (!ctx.base_href.empty()) out += "<base href=\"" + escape_html(ctx.base_href) + "\">\n";
  out += "</head>\n<body data-doc=\"" + escape_html(ctx.uri) + "\">\n<article class=\"page ";
  out += article_class;
  out += "\">\n" + body + "</article>\n</body>\n</html>\n";
  return out;
}

}  // namespace

WikiAst parse_wiki(std::string_view text) {
  WikiAst ast;
  const auto lines = split_lines(text);
  std::string para;
  const auto flush = [&] {
    if (para.empty()) return;
    Block b;
    b.kind = Block::Kind::paragraph;
    b.inlines = InlineParser(para).parse();
    ast.blocks.push_back(std::move(b));
    para.clear();
  };
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string_view line = lines[i];
    const std::string_view trimmed = trim_view(line);
    if (line.starts_with("{{{")) {
      std::size_t close = i + 1;
      while (close < lines.size() && trim_view(lines[close]) != "}}}") ++close;
      if (close < lines.size()) {
        flush();
        Block b;
        b.kind = Block::Kind::code;
        b.language = std::string(trim_view(line.substr(3)));
        for (std::size_t j = i + 1; j < close; ++j) {
          b.body += lines[j];
          b.body += '\n';
        }
        ast.blocks.push_back(std::move(b));
        i = close;
        continue;
      }
    }
    if (trimmed.empty()) {
      flush();
      continue;
    }
    std::string_view heading_text;
    if (const int level = heading_level(trimmed, heading_text); level > 0) {
      flush();
      Block b;
      b.kind = Block::Kind::heading;
      b.level = level;
      b.inlines = InlineParser(heading_text).parse();
      ast.blocks.push_back(std::move(b));
      continue;
    }
    if (!para.empty()) para += '\n';
    para += line;
  }
  flush();
  return ast;
}

void IndexedRegistry::add(std::shared_ptr<const Document> doc) {
  const std::string uri = doc->uri;
  docs_[uri] = std::move(doc);
}

std::shared_ptr<const Document> IndexedRegistry::document(std::string_view uri) const {
  const auto it = docs_.find(uri);
  return it == docs_.end() ? nullptr : it->second;
}

namespace {

std::shared_ptr<const SceneNode> find_scene(const SceneNode& node, std::string_view id) {
  for (const auto& child : node.children) {
    if (const auto* nested = std::get_if<std::shared_ptr<const SceneNode>>(&child)) {
      if (!*nested) continue;
      if ((*nested)->id == id) return *nested;
      if (auto found = find_scene(**nested, id)) return found;
    }
  }
  return nullptr;
}

}  // namespace

std::optional<ResolvedScene> IndexedRegistry::resolve(std::string_view uri, std::string_view anchor) const {
  auto doc = document(uri);
  if (!doc) return std::nullopt;
  if (anchor.empty()) {
    return ResolvedScene{doc, std::shared_ptr<const SceneNode>(doc, &doc->root)};
  }
  if (auto scene = find_scene(doc->root, anchor)) return ResolvedScene{doc, scene};
  if (index_ != nullptr) {
    const SymbolIndexEntry* e = index_->find(anchor);
    if (e != nullptr && e->file == uri && e->frame < doc->frames.size()) {
      auto scene = std::make_shared<SceneNode>();
      scene->id = std::string(anchor);
      scene->children.emplace_back(FrameRef{e->frame});
      return ResolvedScene{doc, std::move(scene)};
    }
  }
  return std::nullopt;
}

std::string code_scene_uri(std::string_view page_uri, std::size_t n) {
  return std::string(page_uri) + "::code-" + std::to_string(n);
}

std::vector<Document> code_scene_documents(std::string_view page_uri, const WikiAst& ast) {
  std::vector<Document> out;
  for (const Block& b : ast.blocks) {
    if (b.kind != Block::Kind::code || b.language == kMacroBlockLanguage) continue;
    out.push_back(BodyRenderer::code_document(code_scene_uri(page_uri, out.size()), b.body));
  }
  return out;
}

std::string render_body(const WikiAst& ast, const PageContext& ctx) {
  return BodyRenderer(ctx).render(ast);
}

std::string render_page(const WikiAst& ast, const PageContext& ctx) {
  return page_shell(ctx, "informal", render_body(ast, ctx));
}

std::string render_formal_page(const Document& doc, const PageContext& ctx) {
  std::string body = "<pre class=\"formal\">";
  body += render_scene(doc.root, doc, ctx.registry);
  if (!doc.frames.empty()) body += escape_html(doc.frames.back().trailing_sep);
  body += "</pre>\n";
  return page_shell(ctx, "formal", body);
}

}  // namespace fwiki
