#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fwiki/hyperlinker.hpp"

namespace fwiki {

enum class RulePhase { cleanup = 0, sectioning = 1, linking = 2 };

/// One rewrite step.
///
/// `match` is either a regular expression prefixed with `re:` or a macro
/// pattern: literal text with `{#n}` (balanced brace argument) and `[#n]`
/// (optional bracket argument) placeholders, e.g. `\formaldef{#1}{#2}`.
/// `replace` substitutes `#n` and may call helpers as `@name(arg, ...)`:
/// guid, formaldef, newterm, label, ref, heading, umlaut, acute, grave.
struct TransformRule {
  std::string name;
  std::string match;
  std::string replace;
  RulePhase phase = RulePhase::cleanup;
};

std::vector<TransformRule> default_rules();

/// Tab-separated `phase name match replace` lines; `\n` and `\t` in the
/// replacement are unescaped. Blank lines and `#` comments are skipped.
std::vector<TransformRule> parse_rules(std::string_view text);

struct CreolifyOptions {
  std::vector<TransformRule> rules = default_rules();
  /// Math macro definitions handed to the client-side typesetter as-is.
  std::string macro_prelude;
};

struct CreolifyResult {
  std::string wiki;
  /// Unknown macros left in the output.
  std::vector<std::string> warnings;
  /// guid/formaldef names missing from the index.
  std::vector<std::string> unresolved;
};

class CreolifyError : public std::runtime_error {
 public:
  CreolifyError(const std::string& what, std::string environment, std::size_t line)
      : std::runtime_error(what), environment_(std::move(environment)), line_(line) {}
  const std::string& environment() const noexcept { return environment_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string environment_;
  std::size_t line_;
};

/// Translates annotated LaTeX into wiki markup. Math segments (`$..$`,
/// `$$..$$`, `\[..\]`, `\(..\)` and math environments) are copied byte for
/// byte. Throws CreolifyError on unbalanced environments or math.
CreolifyResult creolify(std::string_view latex, const SymbolIndex& index,
                        const CreolifyOptions& options = {});

/// Anchor name used for labels and new terms.
std::string anchor_slug(std::string_view text);

}  // namespace fwiki
