#include "fwiki/creolifier.hpp"

#include <algorithm>
#include <map>
#include <regex>
#include <set>
#include <sstream>

namespace fwiki {

namespace {

constexpr char kMathOpen = '\x01';
constexpr char kMathClose = '\x02';

bool is_letter(char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z'); }

std::string trim_copy(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

const std::set<std::string, std::less<>>& math_environments() {
  static const std::set<std::string, std::less<>> envs = {
      "equation", "equation*", "align",     "align*",   "eqnarray", "eqnarray*", "gather",
      "gather*",  "multline",  "multline*", "displaymath", "math",  "alignat",   "alignat*"};
  return envs;
}

// ---------------------------------------------------------------------------
// Comment removal, math protection and environment balance in one pass.

struct Protected {
  std::string text;
  std::vector<std::string> math;
};

class Protector {
 public:
  explicit Protector(std::string_view src) : src_(src) {}

  Protected run() {
    struct Open {
      std::string name;
      std::size_t line;
    };
    std::vector<Open> stack;
    std::size_t pos = 0;
    while (pos < src_.size()) {
      const char c = src_[pos];
      if (c == '\\') {
        if (starts("\\[", pos)) {
          pos = take_math(pos, "\\]", "\\[");
        } else if (starts("\\(", pos)) {
          pos = take_math(pos, "\\)", "\\(");
        } else if (starts("\\begin{", pos)) {
          const auto name = env_name(pos + 7);
          if (math_environments().contains(name)) {
            pos = take_math(pos, "\\end{" + name + "}", name);
          } else {
            stack.push_back({name, line_of(pos)});
            out_.text += src_.substr(pos, 7);
            pos += 7;
          }
        } else if (starts("\\end{", pos)) {
          const auto name = env_name(pos + 5);
          if (stack.empty() || stack.back().name != name) {
            throw CreolifyError("unbalanced environment '" + name + "' at line " +
                                    std::to_string(line_of(pos)),
                                name, line_of(pos));
          }
          stack.pop_back();
          out_.text += src_.substr(pos, 5);
          pos += 5;
        } else {
          out_.text += src_.substr(pos, 2);
          pos += 2;
        }
      } else if (c == '%') {
        pos = drop_comment(pos);
      } else if (c == '$') {
        pos = starts("$$", pos) ? take_math(pos, "$$", "$$", 2) : take_math(pos, "$", "$", 1);
      } else {
        out_.text += c;
        ++pos;
      }
    }
    if (!stack.empty()) {
      throw CreolifyError("unbalanced environment '" + stack.back().name + "' opened at line " +
                              std::to_string(stack.back().line),
                          stack.back().name, stack.back().line);
    }
    return std::move(out_);
  }

 private:
  bool starts(std::string_view prefix, std::size_t pos) const {
    return src_.substr(pos, prefix.size()) == prefix;
  }

  std::size_t line_of(std::size_t pos) const {
    return 1 + static_cast<std::size_t>(std::count(src_.begin(), src_.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
  }

  std::string env_name(std::size_t pos) const {
    const auto close = src_.find('}', pos);
    if (close == std::string_view::npos) return std::string(src_.substr(pos));
    return std::string(src_.substr(pos, close - pos));
  }

  // Copies a math segment opened at `pos` into the math table.
  std::size_t take_math(std::size_t pos, const std::string& closer, const std::string& what,
                        std::size_t open_len = 0) {
    std::size_t search = pos + (open_len != 0 ? open_len : 2);
    std::size_t end = std::string_view::npos;
    while (search < src_.size()) {
      if (src_[search] == '\\' && closer.front() != '\\') {
        search += 2;
        continue;
      }
      if (starts(closer, search)) {
        end = search + closer.size();
        break;
      }
      ++search;
    }
    if (end == std::string_view::npos) {
      throw CreolifyError("unbalanced math '" + what + "' at line " + std::to_string(line_of(pos)),
                          what, line_of(pos));
    }
    out_.text += kMathOpen;
    out_.text += std::to_string(out_.math.size());
    out_.text += kMathClose;
    out_.math.emplace_back(src_.substr(pos, end - pos));
    return end;
  }

  std::size_t drop_comment(std::size_t pos) {
    const auto nl = src_.find('\n', pos);
    const std::size_t line_start = out_.text.rfind('\n') == std::string::npos ? 0 : out_.text.rfind('\n') + 1;
    const bool blank_so_far = out_.text.find_first_not_of(" \t", line_start) == std::string::npos;
    if (nl == std::string_view::npos) {
      if (blank_so_far) out_.text.erase(line_start);
      return src_.size();
    }
    if (blank_so_far) {
      out_.text.erase(line_start);
      return nl + 1;
    }
    return nl;
  }

  std::string_view src_;
  Protected out_;
};

std::string restore_math(std::string_view text, const std::vector<std::string>& math) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    if (text[pos] == kMathOpen) {
      const auto close = text.find(kMathClose, pos);
      const auto id = std::stoul(std::string(text.substr(pos + 1, close - pos - 1)));
      out += math.at(id);
      pos = close + 1;
    } else {
      out += text[pos++];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Replacement templates

struct TemplateNode {
  enum class Kind { literal, capture, call } kind = Kind::literal;
  std::string text;
  std::size_t capture = 0;
  std::vector<std::vector<TemplateNode>> args;
};

using Template = std::vector<TemplateNode>;

Template parse_template(std::string_view t);

// Parses `(a, b, ...)` starting at `pos` (the open paren).
std::size_t parse_call_args(std::string_view t, std::size_t pos, TemplateNode& call) {
  std::size_t depth = 0;
  std::size_t arg_start = pos + 1;
  for (std::size_t i = pos; i < t.size(); ++i) {
    if (t[i] == '(') {
      ++depth;
    } else if (t[i] == ')') {
      if (--depth == 0) {
        call.args.push_back(parse_template(t.substr(arg_start, i - arg_start)));
        return i + 1;
      }
    } else if (t[i] == ',' && depth == 1) {
      call.args.push_back(parse_template(t.substr(arg_start, i - arg_start)));
      arg_start = i + 1;
    }
  }
  throw std::invalid_argument("unclosed helper call in template: " + std::string(t));
}

Template parse_template(std::string_view t) {
  Template out;
  std::string literal;
  const auto flush = [&] {
    if (!literal.empty()) out.push_back({TemplateNode::Kind::literal, std::move(literal), 0, {}});
    literal.clear();
  };
  std::size_t pos = 0;
  while (pos < t.size()) {
    if (t[pos] == '#' && pos + 1 < t.size() && t[pos + 1] >= '0' && t[pos + 1] <= '9') {
      flush();
      out.push_back({TemplateNode::Kind::capture, {}, static_cast<std::size_t>(t[pos + 1] - '0'), {}});
      pos += 2;
    } else if (t[pos] == '@' && pos + 1 < t.size() && is_letter(t[pos + 1])) {
      std::size_t end = pos + 1;
      while (end < t.size() && is_letter(t[end])) ++end;
      if (end < t.size() && t[end] == '(') {
        flush();
        TemplateNode call{TemplateNode::Kind::call, std::string(t.substr(pos + 1, end - pos - 1)), 0, {}};
        pos = parse_call_args(t, end, call);
        out.push_back(std::move(call));
      } else {
        literal += t.substr(pos, end - pos);
        pos = end;
      }
    } else {
      literal += t[pos++];
    }
  }
  flush();
  return out;
}

class Helpers {
 public:
  Helpers(const SymbolIndex& index, CreolifyResult& result) : index_(index), result_(result) {}

  std::string call(const std::string& name, const std::vector<std::string>& args) {
    const auto arg = [&](std::size_t i) { return i < args.size() ? args[i] : std::string(); };
    if (name == "guid") return guid(trim_copy(arg(0)));
    if (name == "formaldef") return formaldef(arg(0), arg(1));
    if (name == "newterm") return "[[#" + anchor_slug(arg(0)) + "]]//" + arg(0) + "//";
    if (name == "label") return "[[#" + anchor_slug(arg(0)) + "]]";
    if (name == "ref") return "[[#" + anchor_slug(arg(0)) + "|" + trim_copy(arg(0)) + "]]";
    if (name == "heading") {
      const std::string title = trim_copy(arg(1));
      return "\n=== " + trim_copy(arg(0)) + (title.empty() ? "" : " (" + title + ")") + " ===\n";
    }
    if (name == "umlaut") return accent(arg(0), kUmlauts);
    if (name == "acute") return accent(arg(0), kAcutes);
    if (name == "grave") return accent(arg(0), kGraves);
    throw std::invalid_argument("unknown template helper @" + name);
  }

 private:
  using AccentTable = std::map<char, const char*>;
  static inline const AccentTable kUmlauts = {{'a', "ä"}, {'o', "ö"}, {'u', "ü"}, {'e', "ë"}, {'i', "ï"},
                                              {'A', "Ä"}, {'O', "Ö"}, {'U', "Ü"}};
  static inline const AccentTable kAcutes = {{'a', "á"}, {'e', "é"}, {'i', "í"}, {'o', "ó"}, {'u', "ú"},
                                             {'E', "É"}};
  static inline const AccentTable kGraves = {{'a', "à"}, {'e', "è"}, {'i', "ì"}, {'o', "ò"}, {'u', "ù"}};

  static std::string accent(const std::string& letter, const AccentTable& table) {
    if (letter.size() == 1) {
      if (auto it = table.find(letter[0]); it != table.end()) return it->second;
    }
    return letter;
  }

  std::string formal_link(const std::string& name, bool transclude) {
    if (const SymbolIndexEntry* e = index_.find(name)) {
      const std::string target = e->file + "#" + e->anchor;
      return transclude ? "{{" + target + "|" + name + "}}" : "[[" + target + "|" + name + "]]";
    }
    result_.unresolved.push_back(name);
    return "[[unresolved:" + name + "|" + name + "]]";
  }

  std::string guid(const std::string& name) { return formal_link(name, true); }

  std::string formaldef(const std::string& informal, const std::string& names) {
    std::string out = informal + " (";
    std::size_t start = 0;
    bool first = true;
    while (start <= names.size()) {
      const auto comma = names.find(',', start);
      const std::string name = trim_copy(std::string_view(names).substr(start, comma - start));
      if (!name.empty()) {
        if (!first) out += ", ";
        out += formal_link(name, false);
        first = false;
      }
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    return out + ")";
  }

  const SymbolIndex& index_;
  CreolifyResult& result_;
};

std::string evaluate(const Template& t, const std::vector<std::string>& captures, Helpers& helpers) {
  std::string out;
  for (const auto& node : t) {
    switch (node.kind) {
      case TemplateNode::Kind::literal: out += node.text; break;
      case TemplateNode::Kind::capture:
        if (node.capture < captures.size()) out += captures[node.capture];
        break;
      case TemplateNode::Kind::call: {
        std::vector<std::string> args;
        args.reserve(node.args.size());
        for (const auto& a : node.args) args.push_back(evaluate(a, captures, helpers));
        out += helpers.call(node.text, args);
        break;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Macro patterns

struct MacroPart {
  enum class Kind { literal, brace, optional } kind = Kind::literal;
  std::string text;
  std::size_t index = 0;
};

std::vector<MacroPart> compile_macro(std::string_view m) {
  std::vector<MacroPart> parts;
  std::string literal;
  std::size_t pos = 0;
  while (pos < m.size()) {
    const bool placeholder = pos + 3 < m.size() && m[pos + 1] == '#' && m[pos + 2] >= '0' &&
                             m[pos + 2] <= '9' &&
                             ((m[pos] == '{' && m[pos + 3] == '}') || (m[pos] == '[' && m[pos + 3] == ']'));
    if (placeholder) {
      if (!literal.empty()) parts.push_back({MacroPart::Kind::literal, std::move(literal), 0});
      literal.clear();
      parts.push_back({m[pos] == '{' ? MacroPart::Kind::brace : MacroPart::Kind::optional, {},
                       static_cast<std::size_t>(m[pos + 2] - '0')});
      pos += 4;
    } else {
      literal += m[pos++];
    }
  }
  if (!literal.empty()) parts.push_back({MacroPart::Kind::literal, std::move(literal), 0});
  if (parts.empty() || parts.front().kind != MacroPart::Kind::literal) {
    throw std::invalid_argument("macro pattern must start with literal text: " + std::string(m));
  }
  return parts;
}

// Offset just past the group closed by `close` opened at `pos`.
std::size_t balanced_end(std::string_view text, std::size_t pos, char open, char close) {
  std::size_t depth = 0;
  for (std::size_t i = pos; i < text.size(); ++i) {
    if (text[i] == '\\') {
      ++i;
    } else if (text[i] == open) {
      ++depth;
    } else if (text[i] == close) {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

std::size_t skip_blank(std::string_view text, std::size_t pos) {
  while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t' || text[pos] == '\n')) ++pos;
  return pos;
}

// Tries to match at `pos`; returns the end offset and fills captures.
std::size_t match_macro(const std::vector<MacroPart>& parts, std::string_view text, std::size_t pos,
                        std::vector<std::string>& captures) {
  captures.assign(10, std::string());
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& part = parts[i];
    switch (part.kind) {
      case MacroPart::Kind::literal:
        if (text.substr(pos, part.text.size()) != part.text) return std::string_view::npos;
        pos += part.text.size();
        if (i == 0 && is_letter(part.text.back()) && pos < text.size() && is_letter(text[pos])) {
          return std::string_view::npos;
        }
        break;
      case MacroPart::Kind::brace: {
        const std::size_t open = skip_blank(text, pos);
        if (open >= text.size() || text[open] != '{') return std::string_view::npos;
        const std::size_t end = balanced_end(text, open, '{', '}');
        if (end == std::string_view::npos) return std::string_view::npos;
        captures[part.index] = std::string(text.substr(open + 1, end - open - 2));
        pos = end;
        break;
      }
      case MacroPart::Kind::optional: {
        std::size_t open = pos;
        while (open < text.size() && (text[open] == ' ' || text[open] == '\t')) ++open;
        if (open < text.size() && text[open] == '[') {
          const std::size_t end = balanced_end(text, open, '[', ']');
          if (end == std::string_view::npos) return std::string_view::npos;
          captures[part.index] = std::string(text.substr(open + 1, end - open - 2));
          pos = end;
        }
        break;
      }
    }
  }
  captures[0] = std::string(text.substr(0, 0));
  return pos;
}

std::string apply_macro_rule(const std::string& text, const std::vector<MacroPart>& parts,
                             const Template& replace, Helpers& helpers) {
  const std::string& head = parts.front().text;
  std::string current = text;
  std::vector<std::string> captures;
  std::size_t pos = 0;
  for (std::size_t guard = 0; guard < 1000000; ++guard) {
    const auto found = current.find(head, pos);
    if (found == std::string::npos) break;
    const std::size_t end = match_macro(parts, current, found, captures);
    if (end == std::string_view::npos) {
      pos = found + 1;
      continue;
    }
    captures[0] = current.substr(found, end - found);
    const std::string replacement = evaluate(replace, captures, helpers);
    current.replace(found, end - found, replacement);
    // Rescan the replacement so nested uses of the same macro are handled.
    pos = found + (replacement.starts_with(head) ? 1 : 0);
  }
  return current;
}

std::string apply_regex_rule(const std::string& text, const std::regex& re, const Template& replace,
                             Helpers& helpers) {
  std::string out;
  auto begin = text.cbegin();
  std::smatch m;
  std::vector<std::string> captures;
  while (std::regex_search(begin, text.cend(), m, re)) {
    out.append(begin, m[0].first);
    captures.assign(10, std::string());
    for (std::size_t i = 0; i < m.size() && i < 10; ++i) captures[i] = m[i].matched ? m[i].str() : "";
    out += evaluate(replace, captures, helpers);
    if (m[0].length() == 0) {
      if (m[0].second == text.cend()) {
        begin = text.cend();
        break;
      }
      out += *m[0].second;
      begin = m[0].second + 1;
    } else {
      begin = m[0].second;
    }
  }
  out.append(begin, text.cend());
  return out;
}

}  // namespace

std::string anchor_slug(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : trim_copy(text)) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      pending_space = true;
      continue;
    }
    if (c == '|' || c == '[' || c == ']' || c == '{' || c == '}' || c == '#' || c == '"' ||
        c == '<' || c == '>' || c == kMathOpen || c == kMathClose) {
      continue;
    }
    if (pending_space && !out.empty()) out += '_';
    pending_space = false;
    out += c;
  }
  return out;
}

std::vector<TransformRule> default_rules() {
  using P = RulePhase;
  std::vector<TransformRule> rules = {
      // cleanup: characters that mean something in wiki syntax
      {"tie", "re:~", " ", P::cleanup},
      {"wiki-escape", R"(re:([/*\[\]])(?=\1))", "~#1", P::cleanup},
      {"wiki-heading-escape", R"(re:(\n[ \t]*)=)", "#1~=", P::cleanup},
      {"linebreak", R"(re:\\\\(\[[^\]]*\])?)", "\n", P::cleanup},
      {"dollar", R"(re:\\\$)", "~$", P::cleanup},
      {"specials", R"(re:\\([%&#_{}]))", "#1", P::cleanup},
      // cleanup: fonts
      {"emph", "\\emph{#1}", "//#1//", P::cleanup},
      {"textit", "\\textit{#1}", "//#1//", P::cleanup},
      {"textbf", "\\textbf{#1}", "**#1**", P::cleanup},
      {"em-group", R"(re:\{\\(em|it)\s+([^{}]*)\})", "//#2//", P::cleanup},
      {"bf-group", R"(re:\{\\bf\s+([^{}]*)\})", "**#1**", P::cleanup},
      {"texttt", "\\texttt{#1}", "#1", P::cleanup},
      // cleanup: section markup
      {"chapter", "\\chapter{#1}", "\n= #1 =\n", P::cleanup},
      {"section", "\\section{#1}", "\n== #1 ==\n", P::cleanup},
      {"subsection", "\\subsection{#1}", "\n=== #1 ===\n", P::cleanup},
      {"subsubsection", "\\subsubsection{#1}", "\n==== #1 ====\n", P::cleanup},
      // cleanup: text symbols
      {"em-dash", "re:---", "\xE2\x80\x94", P::cleanup},
      {"en-dash", "re:--", "\xE2\x80\x93", P::cleanup},
      {"quotes", "re:``|''", "\"", P::cleanup},
      {"umlaut", R"(re:\\"\{?([A-Za-z])\}?)", "@umlaut(#1)", P::cleanup},
      {"acute", R"(re:\\'\{?([A-Za-z])\}?)", "@acute(#1)", P::cleanup},
      {"grave", R"(re:\\`\{?([A-Za-z])\}?)", "@grave(#1)", P::cleanup},
      {"dots", R"(re:\\l?dots(\{\})?)", "\xE2\x80\xA6", P::cleanup},
      {"cite", "\\cite[#2]{#1}", "[#1]", P::cleanup},
      {"footnote", "\\footnote{#1}", " (#1)", P::cleanup},
      {"index", "\\index{#1}", "", P::cleanup},
      {"item", R"(re:\\item\b(?:\[([^\]]*)\])?[ \t]*)", "\n* #1", P::cleanup},
      {"layout-envs", R"(re:\\(begin|end)\{(itemize|enumerate|description|center|flushleft|flushright|quote|quotation|document)\})",
       "", P::cleanup},
      {"spacing", R"(re:\\(noindent|medskip|smallskip|bigskip|newpage|par)\b)", "", P::cleanup},
  };
  // sectioning: each environment becomes its own subsection
  for (const auto& [env, title] : std::vector<std::pair<std::string, std::string>>{
           {"definition", "Definition"},
           {"lemma", "Lemma"},
           {"theorem", "Theorem"},
           {"remark", "Remark"},
           {"corollary", "Corollary"},
           {"proof", "Proof"}}) {
    rules.push_back({env + "-begin", "\\begin{" + env + "}[#1]", "@heading(" + title + ",#1)", P::sectioning});
    rules.push_back({env + "-end", "\\end{" + env + "}", "\n", P::sectioning});
  }
  // linking
  rules.push_back({"label", "\\label{#1}", "@label(#1)", P::linking});
  rules.push_back({"ref", "\\ref{#1}", "@ref(#1)", P::linking});
  rules.push_back({"eqref", "\\eqref{#1}", "(@ref(#1))", P::linking});
  rules.push_back({"newterm", "\\newterm{#1}", "@newterm(#1)", P::linking});
  rules.push_back({"guid", "\\guid{#1}", "@guid(#1)", P::linking});
  rules.push_back({"formaldef", "\\formaldef{#1}{#2}", "@formaldef(#1,#2)", P::linking});
  return rules;
}

std::vector<TransformRule> parse_rules(std::string_view text) {
  std::vector<TransformRule> rules;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim_copy(line).empty() || trim_copy(line).front() == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (int i = 0; i < 3; ++i) {
      const auto tab = line.find('\t', start);
      if (tab == std::string::npos) break;
      fields.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    fields.push_back(line.substr(start));
    if (fields.size() != 4) {
      throw std::invalid_argument("rules line " + std::to_string(line_no) + ": expected 4 tab-separated fields");
    }
    TransformRule rule;
    if (fields[0] == "cleanup") {
      rule.phase = RulePhase::cleanup;
    } else if (fields[0] == "sectioning") {
      rule.phase = RulePhase::sectioning;
    } else if (fields[0] == "linking") {
      rule.phase = RulePhase::linking;
    } else {
      throw std::invalid_argument("rules line " + std::to_string(line_no) + ": unknown phase '" + fields[0] + "'");
    }
    rule.name = fields[1];
    rule.match = fields[2];
    std::string replace;
    for (std::size_t i = 0; i < fields[3].size(); ++i) {
      if (fields[3][i] == '\\' && i + 1 < fields[3].size() && (fields[3][i + 1] == 'n' || fields[3][i + 1] == 't')) {
        replace += fields[3][i + 1] == 'n' ? '\n' : '\t';
        ++i;
      } else {
        replace += fields[3][i];
      }
    }
    rule.replace = std::move(replace);
    rules.push_back(std::move(rule));
  }
  return rules;
}

CreolifyResult creolify(std::string_view latex, const SymbolIndex& index, const CreolifyOptions& options) {
  CreolifyResult result;
  Protected prot = Protector(latex).run();
  Helpers helpers(index, result);

  std::vector<const TransformRule*> ordered;
  ordered.reserve(options.rules.size());
  for (const auto& r : options.rules) ordered.push_back(&r);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const TransformRule* a, const TransformRule* b) { return a->phase < b->phase; });

  std::string text = std::move(prot.text);
  for (const TransformRule* rule : ordered) {
    const Template replace = parse_template(rule->replace);
    if (rule->match.starts_with("re:")) {
      const std::regex re(rule->match.substr(3), std::regex::ECMAScript);
      text = apply_regex_rule(text, re, replace, helpers);
    } else {
      text = apply_macro_rule(text, compile_macro(rule->match), replace, helpers);
    }
  }

  static const std::regex unknown_macro(R"(\\[A-Za-z]+)");
  std::set<std::string> seen;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), unknown_macro); it != std::sregex_iterator(); ++it) {
    if (seen.insert(it->str()).second) result.warnings.push_back("unknown macro " + it->str());
  }

  std::string wiki;
  if (!options.macro_prelude.empty()) {
    wiki += "{{{latex-macros\n" + options.macro_prelude;
    if (!options.macro_prelude.ends_with('\n')) wiki += '\n';
    wiki += "}}}\n";
  }
  wiki += restore_math(text, prot.math);
  result.wiki = std::move(wiki);
  return result;
}

}  // namespace fwiki
