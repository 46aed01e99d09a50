#include "fwiki/script_parser.hpp"

namespace fwiki {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool starts_with_at(std::string_view s, std::size_t pos, std::string_view prefix) {
  return s.substr(pos, prefix.size()) == prefix;
}

class Scanner {
 public:
  explicit Scanner(std::string_view src) : src_(src) {}

  // Returns the offset just past the comment opened at `open`.
  std::size_t skip_comment(std::size_t open) const {
    std::size_t depth = 0;
    std::size_t pos = open;
    while (pos < src_.size()) {
      if (starts_with_at(src_, pos, "(*")) {
        ++depth;
        pos += 2;
      } else if (starts_with_at(src_, pos, "*)")) {
        --depth;
        pos += 2;
        if (depth == 0) return pos;
      } else {
        ++pos;
      }
    }
    throw ParseError("unterminated comment", open);
  }

  std::size_t skip_string(std::size_t open) const {
    std::size_t pos = open + 1;
    while (pos < src_.size()) {
      if (src_[pos] == '\\') {
        pos += 2;
      } else if (src_[pos] == '"') {
        return pos + 1;
      } else {
        ++pos;
      }
    }
    throw ParseError("unterminated string literal", open);
  }

  std::size_t skip_quotation(std::size_t open) const {
    const auto close = src_.find('`', open + 1);
    if (close == std::string_view::npos) throw ParseError("unterminated term quotation", open);
    return close + 1;
  }

  // A terminator `;;` at `pos` counts when followed by a newline or the end.
  bool terminator_at(std::size_t pos) const {
    if (!starts_with_at(src_, pos, ";;")) return false;
    const std::size_t after = pos + 2;
    return after == src_.size() || src_[after] == '\n' ||
           (src_[after] == '\r' && after + 1 < src_.size() && src_[after + 1] == '\n');
  }

  // Scans a command starting at `start`; returns the end offset and whether
  // a terminator was found.
  std::pair<std::size_t, bool> scan_command(std::size_t start) const {
    std::size_t pos = start;
    while (pos < src_.size()) {
      const char c = src_[pos];
      if (starts_with_at(src_, pos, "(*")) {
        pos = skip_comment(pos);
      } else if (c == '"') {
        pos = skip_string(pos);
      } else if (c == '`') {
        pos = skip_quotation(pos);
      } else if (terminator_at(pos)) {
        return {pos + 2, true};
      } else {
        ++pos;
      }
    }
    return {pos, false};
  }

  // A comment closing at `end` is standalone when the rest of its line is
  // blank or it is followed by another comment.
  bool standalone_after(std::size_t end) const {
    std::size_t pos = end;
    while (pos < src_.size() && (src_[pos] == ' ' || src_[pos] == '\t' || src_[pos] == '\r')) ++pos;
    return pos == src_.size() || src_[pos] == '\n' || starts_with_at(src_, pos, "(*");
  }

  std::size_t skip_whitespace(std::size_t pos) const {
    while (pos < src_.size() && is_space(src_[pos])) ++pos;
    return pos;
  }

 private:
  std::string_view src_;
};

}  // namespace

std::vector<Frame> split_commands(std::string_view source) {
  const Scanner scanner(source);
  std::vector<Frame> frames;
  std::size_t pos = 0;

  while (pos < source.size()) {
    const std::size_t content = scanner.skip_whitespace(pos);
    if (content == source.size()) {
      if (frames.empty()) {
        // Whitespace-only input still has to round-trip.
        Frame blank;
        blank.kind = FrameKind::standalone_comment;
        blank.trailing_sep = std::string(source.substr(pos));
        frames.push_back(std::move(blank));
      } else {
        frames.back().trailing_sep = std::string(source.substr(pos));
      }
      break;
    }

    Frame frame;
    frame.id = frames.size();
    frame.leading_sep = std::string(source.substr(pos, content - pos));

    std::size_t end = 0;
    if (starts_with_at(source, content, "(*")) {
      const std::size_t comment_end = scanner.skip_comment(content);
      if (scanner.standalone_after(comment_end)) {
        frame.kind = FrameKind::standalone_comment;
        end = comment_end;
      }
    }
    if (frame.kind == FrameKind::command) {
      const auto [cmd_end, terminated] = scanner.scan_command(content);
      end = cmd_end;
      frame.unterminated = !terminated;
    }
    frame.command_text = std::string(source.substr(content, end - content));
    frames.push_back(std::move(frame));
    pos = end;
  }
  return frames;
}

std::string_view first_token(std::string_view text) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    if (is_space(text[pos])) {
      ++pos;
    } else if (starts_with_at(text, pos, "(*")) {
      try {
        pos = Scanner(text).skip_comment(pos);
      } catch (const ParseError&) {
        return {};
      }
    } else {
      break;
    }
  }
  const auto ident = [](char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' ||
           c == '\'';
  };
  std::size_t end = pos;
  while (end < text.size() && ident(text[end])) ++end;
  return text.substr(pos, end - pos);
}

}  // namespace fwiki
