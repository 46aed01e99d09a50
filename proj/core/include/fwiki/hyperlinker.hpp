#pragma once

#include <cstddef>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fwiki/frame_model.hpp"

namespace fwiki {

enum class SymbolKind { theorem, definition, other };

std::string_view to_string(SymbolKind kind);
std::optional<SymbolKind> parse_symbol_kind(std::string_view text);

struct SymbolIndexEntry {
  std::string name;
  SymbolKind kind = SymbolKind::other;
  std::string file;
  std::size_t frame = 0;
  std::string anchor;
  bool ambiguous = false;

  bool operator==(const SymbolIndexEntry&) const = default;
};

/// A definition-introducing template such as `let <NAME> = prove`.
/// Literal words must match whole tokens; whitespace is flexible.
struct DefinitionPattern {
  std::string text;
  SymbolKind kind = SymbolKind::other;
};

struct AllowEntry {
  std::string name;
  std::string file;
};

struct LinkerConfig {
  std::vector<DefinitionPattern> patterns;
  std::vector<AllowEntry> allow_list;
  std::set<std::string> deny_list;

  static LinkerConfig defaults();
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads the `[patterns] [allow] [deny]` config format. A pattern line may
/// end with `=> kind`; an allow line is `NAME file`. Sections that do not
/// appear keep the defaults for patterns and stay empty otherwise.
LinkerConfig parse_linker_config(std::string_view text);

class SymbolIndex {
 public:
  /// Adds an entry unless the name is present; a repeat marks it ambiguous.
  void add(SymbolIndexEntry entry);
  void erase(const std::string& name);

  const SymbolIndexEntry* find(std::string_view name) const;
  std::size_t size() const noexcept { return by_name_.size(); }
  bool empty() const noexcept { return by_name_.empty(); }

  /// Entries sorted by name.
  std::vector<const SymbolIndexEntry*> sorted() const;

 private:
  std::map<std::string, SymbolIndexEntry, std::less<>> by_name_;
};

/// Indexes first definitions across the corpus (in corpus order).
SymbolIndex build_index(const std::vector<const Document*>& corpus, const LinkerConfig& config);

/// `fan.hl` -> `fan.html`: the static page holding a source file.
std::string page_path(std::string_view source_file);

/// One line per entry: name, kind, file, page_path(file)#anchor, tab-separated.
std::string export_index(const SymbolIndex& index);

/// Inverse of export_index on the exported fields.
SymbolIndex import_index(std::string_view text);

/// Builds the href for a link to an index entry from the page of `from_file`.
using HrefBuilder = std::function<std::string(const SymbolIndexEntry& target, std::string_view from_file)>;

/// Links relative to the site root; pages set `<base href>` accordingly.
HrefBuilder static_hrefs();

/// Per-frame HTML for a formal document. Each frame is wrapped in
/// `<span class="frame" data-doc=... data-frame=...>`; indexed identifiers
/// link to their definition, definition sites become anchors, comments are
/// styled (and linked) and string literals are left unlinked.
std::vector<std::string> link_text(const Document& doc, const SymbolIndex& index,
                                   const HrefBuilder& href = static_hrefs());

/// Convenience: a copy of `doc` with every frame's markup filled in.
Document with_markup(Document doc, const SymbolIndex& index, const HrefBuilder& href = static_hrefs());

}  // namespace fwiki
