#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fwiki/prover_session.hpp"

namespace fwiki::test {

inline constexpr std::string_view kExampleScript =
    "(* Example code fragment. *)\n"
    "g `x=x`;;\n"
    "e REFL_TAC;;\n"
    "let t = (* Use top_thm to verify the proof. *)\n"
    "  top_thm();;\n";

inline std::string stub_prover_path() { return FWIKI_STUB_PROVER; }

/// Pipe-backed stub provers sharing one set of counters.
inline AdapterFactory counted_stub_factory(std::shared_ptr<AdapterCounters> counters,
                                           std::vector<std::string> extra_args = {},
                                           SnapshotToken token = {"base"}) {
  std::vector<std::string> argv{stub_prover_path()};
  argv.insert(argv.end(), extra_args.begin(), extra_args.end());
  return [argv, counters, token] {
    return std::make_unique<CountingAdapter>(std::make_unique<PipeProverAdapter>(argv, token), counters);
  };
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("fwiki-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, std::string_view text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Minimal HTML well-formedness check: balanced non-void tags, quoted
// attributes, no stray '<', entities terminated.

inline bool html_well_formed(std::string_view html, std::string* error = nullptr) {
  static const std::set<std::string, std::less<>> void_tags = {"meta", "base", "br", "hr", "img", "input", "link"};
  const auto fail = [&](const std::string& what, std::size_t at) {
    if (error) *error = what + " at offset " + std::to_string(at);
    return false;
  };
  std::vector<std::string> stack;
  std::size_t pos = 0;
  if (html.starts_with("<!DOCTYPE html>")) pos = 15;
  while (pos < html.size()) {
    const char c = html[pos];
    if (c == '&') {
      const auto semi = html.find(';', pos);
      if (semi == std::string_view::npos || semi - pos > 10) return fail("unterminated entity", pos);
      for (std::size_t i = pos + 1; i < semi; ++i) {
        const char e = html[i];
        if (!std::isalnum(static_cast<unsigned char>(e)) && e != '#') return fail("bad entity", pos);
      }
      pos = semi + 1;
      continue;
    }
    if (c == '>') return fail("stray '>'", pos);
    if (c != '<') {
      ++pos;
      continue;
    }
    const bool closing = pos + 1 < html.size() && html[pos + 1] == '/';
    std::size_t p = pos + (closing ? 2 : 1);
    const std::size_t name_start = p;
    while (p < html.size() && std::isalnum(static_cast<unsigned char>(html[p]))) ++p;
    const std::string name(html.substr(name_start, p - name_start));
    if (name.empty()) return fail("stray '<'", pos);
    if (closing) {
      if (p >= html.size() || html[p] != '>') return fail("malformed end tag", pos);
      if (stack.empty() || stack.back() != name) return fail("mismatched </" + name + ">", pos);
      stack.pop_back();
      pos = p + 1;
      continue;
    }
    // attributes
    for (;;) {
      while (p < html.size() && html[p] == ' ') ++p;
      if (p >= html.size()) return fail("unterminated tag", pos);
      if (html[p] == '>') break;
      const std::size_t attr_start = p;
      while (p < html.size() && (std::isalnum(static_cast<unsigned char>(html[p])) || html[p] == '-')) ++p;
      if (p == attr_start) return fail("bad attribute", p);
      if (p < html.size() && html[p] == '=') {
        if (p + 1 >= html.size() || html[p + 1] != '"') return fail("unquoted attribute", p);
        const auto close = html.find('"', p + 2);
        if (close == std::string_view::npos) return fail("unterminated attribute", p);
        const std::string_view value = html.substr(p + 2, close - p - 2);
        if (value.find('<') != std::string_view::npos) return fail("'<' in attribute", p);
        p = close + 1;
      }
    }
    if (!void_tags.contains(name)) stack.push_back(name);
    pos = p + 1;
  }
  if (!stack.empty()) return fail("unclosed <" + stack.back() + ">", html.size());
  return true;
}

inline std::string unescape_html(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out += s[i];
      continue;
    }
    const auto semi = s.find(';', i);
    const std::string_view ent = s.substr(i + 1, semi - i - 1);
    if (ent == "amp") out += '&';
    else if (ent == "lt") out += '<';
    else if (ent == "gt") out += '>';
    else if (ent == "quot") out += '"';
    else if (ent == "#39") out += '\'';
    else out += std::string(s.substr(i, semi - i + 1));
    i = semi;
  }
  return out;
}

/// Text content with tags removed and entities decoded.
inline std::string strip_tags(std::string_view html) {
  std::string text;
  bool in_tag = false;
  for (char c : html) {
    if (c == '<') in_tag = true;
    else if (c == '>') in_tag = false;
    else if (!in_tag) text += c;
  }
  return unescape_html(text);
}

}  // namespace fwiki::test
