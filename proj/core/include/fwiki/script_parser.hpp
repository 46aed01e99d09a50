#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fwiki/frame_model.hpp"

namespace fwiki {

/// Raised for an unterminated comment, string literal or term quotation.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what), offset_(offset) {}

  /// Byte offset of the construct that was left open.
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Splits a proof script into frames.
///
/// A command ends at `;;` followed by a newline or the end of input, provided
/// the terminator is outside comments `(* *)` (which nest), double-quoted
/// strings and backtick term quotations. Comment blocks that start a line
/// segment and are followed by a newline (or another comment) become
/// standalone_comment frames. Trailing text without a terminator becomes a
/// final frame with `unterminated` set.
///
/// Concatenating leading_sep + command_text + trailing_sep over all frames
/// reproduces `source` exactly.
std::vector<Frame> split_commands(std::string_view source);

/// First identifier-like token of a command after leading whitespace and
/// comments. Empty when there is none.
std::string_view first_token(std::string_view command_text);

}  // namespace fwiki
