#include <gtest/gtest.h>

#include <random>

#include "fwiki/script_parser.hpp"
#include "support.hpp"

using namespace fwiki;

namespace {

std::string joined(const std::vector<Frame>& frames) {
  std::string out;
  for (const auto& f : frames) out += f.leading_sep + f.command_text + f.trailing_sep;
  return out;
}

}  // namespace

TEST(SplitCommands, ExampleScriptGivesFourFrames) {
  const auto frames = split_commands(test::kExampleScript);
  ASSERT_EQ(frames.size(), 4u);
  EXPECT_EQ(frames[0].kind, FrameKind::standalone_comment);
  EXPECT_EQ(frames[0].command_text, "(* Example code fragment. *)");
  EXPECT_EQ(frames[1].command_text, "g `x=x`;;");
  EXPECT_EQ(frames[2].command_text, "e REFL_TAC;;");
  EXPECT_EQ(frames[3].command_text, "let t = (* Use top_thm to verify the proof. *)\n  top_thm();;");
  EXPECT_EQ(frames[3].kind, FrameKind::command);
  for (std::size_t i = 0; i < frames.size(); ++i) EXPECT_EQ(frames[i].id, i);
  EXPECT_EQ(joined(frames), test::kExampleScript);
}

TEST(SplitCommands, EmptyAndBlankInput) {
  EXPECT_TRUE(split_commands("").empty());
  const auto blank = split_commands("  \n\t\n");
  ASSERT_EQ(blank.size(), 1u);
  EXPECT_EQ(joined(blank), "  \n\t\n");
}

TEST(SplitCommands, SingleCommandWithNewline) {
  const auto frames = split_commands("let a = 1;;\n");
  ASSERT_EQ(frames.size(), 1u);
  EXPECT_EQ(frames[0].command_text, "let a = 1;;");
  EXPECT_EQ(frames[0].trailing_sep, "\n");
}

TEST(SplitCommands, TerminatorInsideCommentStringAndQuotation) {
  const std::string src =
      "let a = (* ;;\n nested (* ;;\n *) *) 1;;\n"
      "let s = \"x;;\ny\";;\n"
      "g `a ;;\nb`;;\n";
  const auto frames = split_commands(src);
  ASSERT_EQ(frames.size(), 3u);
  EXPECT_TRUE(frames[0].command_text.starts_with("let a"));
  EXPECT_TRUE(frames[1].command_text.starts_with("let s"));
  EXPECT_TRUE(frames[2].command_text.starts_with("g `a"));
  EXPECT_EQ(joined(frames), src);
}

TEST(SplitCommands, TerminatorMustBeFollowedByNewline) {
  const auto frames = split_commands("a;; b;;\nc;;");
  ASSERT_EQ(frames.size(), 2u);
  EXPECT_EQ(frames[0].command_text, "a;; b;;");
  EXPECT_EQ(frames[1].command_text, "c;;");
}

TEST(SplitCommands, CrLfTerminator) {
  const std::string src = "a;;\r\nb;;\r\n";
  const auto frames = split_commands(src);
  ASSERT_EQ(frames.size(), 2u);
  EXPECT_EQ(joined(frames), src);
}

TEST(SplitCommands, CommentBeforeCodeOnSameLineStartsCommand) {
  const auto frames = split_commands("(* note *) let x = 1;;\n");
  ASSERT_EQ(frames.size(), 1u);
  EXPECT_EQ(frames[0].kind, FrameKind::command);
}

TEST(SplitCommands, ConsecutiveComments) {
  const auto frames = split_commands("(* a *)\n(* b *) (* c *)\nx;;\n");
  ASSERT_GE(frames.size(), 3u);
  EXPECT_EQ(frames[0].kind, FrameKind::standalone_comment);
  EXPECT_EQ(frames.back().command_text, "x;;");
}

TEST(SplitCommands, UnterminatedTail) {
  const auto frames = split_commands("a;;\ne TAC");
  ASSERT_EQ(frames.size(), 2u);
  EXPECT_FALSE(frames[0].unterminated);
  EXPECT_TRUE(frames[1].unterminated);
  EXPECT_EQ(frames[1].command_text, "e TAC");
}

TEST(SplitCommands, UnclosedConstructsThrowWithOffset) {
  try {
    split_commands("a;;\n(* open");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 4u);
  }
  EXPECT_THROW(split_commands("let s = \"abc;;\n"), ParseError);
  EXPECT_THROW(split_commands("g `abc;;\n"), ParseError);
}

TEST(SplitCommands, RandomRoundTrip) {
  const std::vector<std::string> pieces = {"g `p`;;", "e TAC;;", "(* c *)", "(* a (* b *) *)", "let x = \"s;;\";;",
                                           "\n",      " ",       "\n\n",    "b ();;",          "module M = struct;;"};
  std::mt19937 rng(7);
  for (int trial = 0; trial < 2000; ++trial) {
    std::string src;
    const int n = static_cast<int>(rng() % 12);
    for (int i = 0; i < n; ++i) {
      src += pieces[rng() % pieces.size()];
      if (rng() % 2) src += '\n';
    }
    const auto frames = split_commands(src);
    ASSERT_EQ(joined(frames), src) << src;
  }
}

TEST(FirstToken, SkipsCommentsAndSpace) {
  EXPECT_EQ(first_token("  (* x *) module Foo = struct;;"), "module");
  EXPECT_EQ(first_token("e(TAC);;"), "e");
  EXPECT_EQ(first_token("(* only *)"), "");
}
