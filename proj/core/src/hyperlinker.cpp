#include "fwiki/hyperlinker.hpp"

#include <filesystem>
#include <sstream>

namespace fwiki {

namespace {

bool ident_start(char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_'; }
bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9') || c == '\''; }
bool space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && space(s.front())) s.remove_prefix(1);
  while (!s.empty() && space(s.back())) s.remove_suffix(1);
  return s;
}

// Offset just past the comment opened at `open`, or the end of the text.
std::size_t comment_end(std::string_view text, std::size_t open) {
  std::size_t depth = 0;
  std::size_t pos = open;
  while (pos < text.size()) {
    if (text.substr(pos, 2) == "(*") {
      ++depth;
      pos += 2;
    } else if (text.substr(pos, 2) == "*)") {
      pos += 2;
      if (--depth == 0) return pos;
    } else {
      ++pos;
    }
  }
  return text.size();
}

std::size_t string_end(std::string_view text, std::size_t open) {
  std::size_t pos = open + 1;
  while (pos < text.size()) {
    if (text[pos] == '\\') {
      pos += 2;
    } else if (text[pos] == '"') {
      return pos + 1;
    } else {
      ++pos;
    }
  }
  return text.size();
}

struct CompiledPattern {
  // Empty string stands for the name capture.
  std::vector<std::string> tokens;
  SymbolKind kind;
};

CompiledPattern compile(const DefinitionPattern& p) {
  CompiledPattern out{{}, p.kind};
  std::string_view t = p.text;
  std::size_t pos = 0;
  while (pos < t.size()) {
    if (space(t[pos])) {
      ++pos;
    } else if (t.substr(pos, 6) == "<NAME>") {
      out.tokens.emplace_back();
      pos += 6;
    } else if (ident_char(t[pos])) {
      std::size_t end = pos;
      while (end < t.size() && ident_char(t[end])) ++end;
      out.tokens.emplace_back(t.substr(pos, end - pos));
      pos = end;
    } else {
      out.tokens.emplace_back(1, t[pos]);
      ++pos;
    }
  }
  return out;
}

std::size_t skip_leading(std::string_view text) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    if (space(text[pos])) {
      ++pos;
    } else if (text.substr(pos, 2) == "(*") {
      pos = comment_end(text, pos);
    } else {
      break;
    }
  }
  return pos;
}

std::optional<std::string> match(const CompiledPattern& pattern, std::string_view text) {
  std::size_t pos = skip_leading(text);
  std::optional<std::string> name;
  for (const auto& token : pattern.tokens) {
    while (pos < text.size() && space(text[pos])) ++pos;
    if (token.empty()) {
      if (pos >= text.size() || !ident_start(text[pos])) return std::nullopt;
      std::size_t end = pos;
      while (end < text.size() && ident_char(text[end])) ++end;
      name = std::string(text.substr(pos, end - pos));
      pos = end;
      continue;
    }
    if (text.substr(pos, token.size()) != token) return std::nullopt;
    pos += token.size();
    if (ident_char(token.back()) && pos < text.size() && ident_char(text[pos])) return std::nullopt;
  }
  return name;
}

}  // namespace

std::string_view to_string(SymbolKind kind) {
  switch (kind) {
    case SymbolKind::theorem: return "theorem";
    case SymbolKind::definition: return "definition";
    case SymbolKind::other: return "other";
  }
  return "other";
}

std::optional<SymbolKind> parse_symbol_kind(std::string_view text) {
  if (text == "theorem") return SymbolKind::theorem;
  if (text == "definition") return SymbolKind::definition;
  if (text == "other") return SymbolKind::other;
  return std::nullopt;
}

LinkerConfig LinkerConfig::defaults() {
  LinkerConfig config;
  config.patterns = {
      {"let <NAME> = prove", SymbolKind::theorem},
      {"let <NAME> = new_definition", SymbolKind::definition},
      {"let <NAME> = define", SymbolKind::definition},
      {"let <NAME> = new_axiom", SymbolKind::theorem},
      {"let <NAME> = new_basic_definition", SymbolKind::definition},
      {"let <NAME> = REWRITE_RULE", SymbolKind::theorem},
  };
  return config;
}

LinkerConfig parse_linker_config(std::string_view text) {
  LinkerConfig config = LinkerConfig::defaults();
  bool patterns_seen = false;
  enum class Section { none, patterns, allow, deny } section = Section::none;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line == "[patterns]") {
      section = Section::patterns;
      if (!patterns_seen) config.patterns.clear();
      patterns_seen = true;
      continue;
    }
    if (line == "[allow]") {
      section = Section::allow;
      continue;
    }
    if (line == "[deny]") {
      section = Section::deny;
      continue;
    }
    switch (section) {
      case Section::none:
        throw ConfigError("line " + std::to_string(line_no) + ": entry outside of a section");
      case Section::patterns: {
        DefinitionPattern p{std::string(line), SymbolKind::other};
        if (const auto arrow = line.rfind("=>"); arrow != std::string_view::npos) {
          const auto kind = parse_symbol_kind(trim(line.substr(arrow + 2)));
          if (!kind) throw ConfigError("line " + std::to_string(line_no) + ": unknown kind");
          p.kind = *kind;
          p.text = std::string(trim(line.substr(0, arrow)));
        }
        if (p.text.find("<NAME>") == std::string::npos) {
          throw ConfigError("line " + std::to_string(line_no) + ": pattern lacks <NAME>");
        }
        config.patterns.push_back(std::move(p));
        break;
      }
      case Section::allow: {
        std::istringstream fields{std::string(line)};
        AllowEntry entry;
        fields >> entry.name >> entry.file;
        if (entry.file.empty()) {
          throw ConfigError("line " + std::to_string(line_no) + ": allow entry needs NAME and file");
        }
        config.allow_list.push_back(std::move(entry));
        break;
      }
      case Section::deny:
        config.deny_list.emplace(line);
        break;
    }
  }
  return config;
}

void SymbolIndex::add(SymbolIndexEntry entry) {
  auto [it, inserted] = by_name_.try_emplace(entry.name, entry);
  if (!inserted) it->second.ambiguous = true;
}

void SymbolIndex::erase(const std::string& name) { by_name_.erase(name); }

const SymbolIndexEntry* SymbolIndex::find(std::string_view name) const {
  const auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : &it->second;
}

std::vector<const SymbolIndexEntry*> SymbolIndex::sorted() const {
  std::vector<const SymbolIndexEntry*> out;
  out.reserve(by_name_.size());
  for (const auto& [name, entry] : by_name_) out.push_back(&entry);
  return out;
}

SymbolIndex build_index(const std::vector<const Document*>& corpus, const LinkerConfig& config) {
  std::vector<CompiledPattern> patterns;
  patterns.reserve(config.patterns.size());
  for (const auto& p : config.patterns) patterns.push_back(compile(p));

  SymbolIndex index;
  for (const Document* doc : corpus) {
    for (const Frame& frame : doc->frames) {
      if (frame.kind != FrameKind::command) continue;
      for (const auto& pattern : patterns) {
        auto name = match(pattern, frame.command_text);
        if (!name) continue;
        if (!config.deny_list.contains(*name)) {
          index.add({*name, pattern.kind, doc->uri, frame.id, *name, false});
        }
        break;
      }
    }
  }
  for (const auto& allowed : config.allow_list) {
    if (config.deny_list.contains(allowed.name) || index.find(allowed.name) != nullptr) continue;
    index.add({allowed.name, SymbolKind::other, allowed.file, 0, allowed.name, false});
  }
  return index;
}

std::string page_path(std::string_view source_file) {
  std::filesystem::path p{std::string(source_file)};
  p.replace_extension(".html");
  return p.generic_string();
}

std::string export_index(const SymbolIndex& index) {
  std::string out;
  for (const SymbolIndexEntry* e : index.sorted()) {
    out += e->name;
    out += '\t';
    out += to_string(e->kind);
    out += '\t';
    out += e->file;
    out += '\t';
    out += page_path(e->file);
    out += '#';
    out += e->anchor;
    out += '\n';
  }
  return out;
}

SymbolIndex import_index(std::string_view text) {
  SymbolIndex index;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    const auto kind = fields.size() == 4 ? parse_symbol_kind(fields[1]) : std::nullopt;
    const auto hash = fields.size() == 4 ? fields[3].rfind('#') : std::string_view::npos;
    if (!kind || hash == std::string_view::npos) {
      throw ConfigError("symbol index line " + std::to_string(line_no) + " is malformed");
    }
    index.add({std::string(fields[0]), *kind, std::string(fields[2]), 0,
               std::string(fields[3].substr(hash + 1)), false});
  }
  return index;
}

HrefBuilder static_hrefs() {
  return [](const SymbolIndexEntry& target, std::string_view) {
    return page_path(target.file) + "#" + target.anchor;
  };
}

namespace {

class FrameLinker {
 public:
  FrameLinker(const Document& doc, const SymbolIndex& index, const HrefBuilder& href)
      : doc_(doc), index_(index), href_(href) {}

  std::string render(const Frame& frame) {
    std::string out = "<span class=\"frame\" data-doc=\"" + escape_html(doc_.uri) +
                      "\" data-frame=\"" + std::to_string(frame.id) + "\">";
    defined_.clear();
    current_frame_ = frame.id;
    const std::string_view text = frame.command_text;
    std::string body;
    std::size_t pos = 0;
    while (pos < text.size()) {
      if (text.substr(pos, 2) == "(*") {
        const std::size_t end = comment_end(text, pos);
        body += "<span class=\"comment\">";
        emit_linked(text.substr(pos, end - pos), body);
        body += "</span>";
        pos = end;
      } else if (text[pos] == '"') {
        const std::size_t end = string_end(text, pos);
        body += "<span class=\"string\">";
        body += escape_html(text.substr(pos, end - pos));
        body += "</span>";
        pos = end;
      } else {
        std::size_t end = pos;
        while (end < text.size() && text.substr(end, 2) != "(*" && text[end] != '"') ++end;
        emit_linked(text.substr(pos, end - pos), body);
        pos = end;
      }
    }
    if (frame.id == 0) out += file_start_anchors();
    out += body;
    out += "</span>";
    return out;
  }

 private:
  void emit_linked(std::string_view text, std::string& out) {
    std::size_t pos = 0;
    while (pos < text.size()) {
      const char c = text[pos];
      if (ident_start(c)) {
        std::size_t end = pos;
        while (end < text.size() && ident_char(text[end])) ++end;
        emit_identifier(text.substr(pos, end - pos), out);
        pos = end;
      } else if (c >= '0' && c <= '9') {
        std::size_t end = pos;
        while (end < text.size() && ident_char(text[end])) ++end;
        out += escape_html(text.substr(pos, end - pos));
        pos = end;
      } else {
        const std::size_t start = pos;
        while (pos < text.size() && !ident_char(text[pos])) ++pos;
        out += escape_html(text.substr(start, pos - start));
      }
    }
  }

  void emit_identifier(std::string_view name, std::string& out) {
    const SymbolIndexEntry* entry = index_.find(name);
    if (entry == nullptr) {
      out += name;
      return;
    }
    if (entry->file == doc_.uri && entry->frame == current_frame_ && !defined_.contains(entry->name)) {
      defined_.insert(entry->name);
      out += "<a id=\"" + escape_html(entry->anchor) + "\" class=\"def\">" + escape_html(name) + "</a>";
      return;
    }
    out += "<a href=\"" + escape_html(href_(*entry, doc_.uri)) + "\">" + escape_html(name) + "</a>";
  }

  // Allow-listed names anchored at the start of the file whose first frame
  // does not mention them.
  std::string file_start_anchors() {
    std::string out;
    for (const SymbolIndexEntry* e : index_.sorted()) {
      if (e->file != doc_.uri || e->frame != 0 || defined_.contains(e->name)) continue;
      out += "<a id=\"" + escape_html(e->anchor) + "\" class=\"def\"></a>";
    }
    return out;
  }

  const Document& doc_;
  const SymbolIndex& index_;
  const HrefBuilder& href_;
  std::set<std::string, std::less<>> defined_;
  std::size_t current_frame_ = 0;
};

}  // namespace

std::vector<std::string> link_text(const Document& doc, const SymbolIndex& index,
                                   const HrefBuilder& href) {
  FrameLinker linker(doc, index, href);
  std::vector<std::string> out;
  out.reserve(doc.frames.size());
  for (const Frame& frame : doc.frames) out.push_back(linker.render(frame));
  return out;
}

Document with_markup(Document doc, const SymbolIndex& index, const HrefBuilder& href) {
  auto markups = link_text(doc, index, href);
  for (std::size_t i = 0; i < doc.frames.size(); ++i) doc.frames[i].markup = std::move(markups[i]);
  return doc;
}

}  // namespace fwiki
