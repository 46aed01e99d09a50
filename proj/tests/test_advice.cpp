#include <gtest/gtest.h>

#include <random>

#include "fwiki/advice.hpp"

using namespace fwiki;
using namespace std::chrono_literals;

namespace {

// Independent formula model: fully parenthesised printing, direct evaluation.
struct F {
  char op;  // 'v' variable, 'T', 'F', '~', '&', '|', '>', '='
  int var = 0;
  std::vector<F> kids;
};

std::string show(const F& f) {
  switch (f.op) {
    case 'v': return std::string(1, static_cast<char>('p' + f.var));
    case 'T': return "T";
    case 'F': return "F";
    case '~': return "~(" + show(f.kids[0]) + ")";
    default: break;
  }
  const char* sym = f.op == '&' ? "/\\" : f.op == '|' ? "\\/" : f.op == '>' ? "==>" : "<=>";
  return "(" + show(f.kids[0]) + ") " + sym + " (" + show(f.kids[1]) + ")";
}

bool eval(const F& f, unsigned env) {
  switch (f.op) {
    case 'v': return (env >> f.var) & 1u;
    case 'T': return true;
    case 'F': return false;
    case '~': return !eval(f.kids[0], env);
    case '&': return eval(f.kids[0], env) && eval(f.kids[1], env);
    case '|': return eval(f.kids[0], env) || eval(f.kids[1], env);
    case '>': return !eval(f.kids[0], env) || eval(f.kids[1], env);
    default: return eval(f.kids[0], env) == eval(f.kids[1], env);
  }
}

bool valid(const F& f, int vars) {
  for (unsigned env = 0; env < (1u << vars); ++env) {
    if (!eval(f, env)) return false;
  }
  return true;
}

F random_formula(std::mt19937& rng, int depth) {
  if (depth == 0 || rng() % 4 == 0) {
    const unsigned r = rng() % 8;
    if (r == 6) return {'T'};
    if (r == 7) return {'F'};
    return {'v', static_cast<int>(r % 4)};
  }
  static const char ops[] = {'~', '&', '|', '>', '='};
  F f{ops[rng() % 5]};
  f.kids.push_back(random_formula(rng, depth - 1));
  if (f.op != '~') f.kids.push_back(random_formula(rng, depth - 1));
  return f;
}

}  // namespace

TEST(Protocol, EncodeDecode) {
  const AdviceRequest req{{"p", "p ==> q"}, "q"};
  EXPECT_EQ(encode_goal(req), "p`p ==> q`q");
  EXPECT_EQ(decode_goal("p`p ==> q`q"), req);
  EXPECT_EQ(decode_goal("q"), (AdviceRequest{{}, "q"}));
  EXPECT_EQ(decode_goal("`q"), (AdviceRequest{{""}, "q"}));
  EXPECT_THROW(encode_goal({{"a`b"}, "c"}), ProtocolError);
  EXPECT_THROW(encode_goal({{}, "a\nb"}), ProtocolError);
  EXPECT_THROW(decode_goal(""), ProtocolError);
}

TEST(Protocol, RandomRoundTrip) {
  std::mt19937 rng(3);
  const std::string alphabet = "pq ~/\\=<>()TFx_1";
  for (int trial = 0; trial < 2000; ++trial) {
    AdviceRequest req;
    const auto field = [&] {
      std::string s;
      for (unsigned n = rng() % 8; n > 0; --n) s += alphabet[rng() % alphabet.size()];
      return s;
    };
    for (unsigned n = rng() % 4; n > 0; --n) req.assumptions.push_back(field());
    req.conclusion = field();
    if (req.assumptions.empty() && req.conclusion.empty()) req.conclusion = "p";
    ASSERT_EQ(decode_goal(encode_goal(req)), req);
  }
}

TEST(Terms, ParsePrintPrecedence) {
  EXPECT_EQ(print_term(parse_term("p /\\ q \\/ r ==> s <=> t")), "p /\\ q \\/ r ==> s <=> t");
  EXPECT_EQ(print_term(parse_term("((p ==> q) ==> r)")), "(p ==> q) ==> r");
  EXPECT_EQ(print_term(parse_term("p ==> (q ==> r)")), "p ==> q ==> r");
  EXPECT_EQ(print_term(parse_term("~(~p)")), "~~p");
  EXPECT_EQ(print_term(parse_term("~(p /\\ q)")), "~(p /\\ q)");
  EXPECT_EQ(term_atoms(parse_term("b /\\ a ==> b")), (std::vector<std::string>{"b", "a"}));
  EXPECT_THROW(parse_term("p /\\"), TermSyntaxError);
  EXPECT_THROW(parse_term("(p"), TermSyntaxError);
  EXPECT_THROW(parse_term("p q"), TermSyntaxError);
  EXPECT_THROW(parse_term("x = y"), TermSyntaxError);
}

TEST(Terms, TautologyAgreesWithIndependentEvaluator) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 5000; ++trial) {
    const F f = random_formula(rng, 4);
    const std::string text = show(f);
    const MiniTerm t = parse_term(text);
    ASSERT_EQ(is_tautology(t), std::optional<bool>(valid(f, 4))) << text;
    ASSERT_EQ(parse_term(print_term(t)), t) << text;
  }
}

TEST(Terms, AtomLimitAndCancellation) {
  std::string wide = "a0";
  for (int i = 1; i < 26; ++i) wide += " \\/ a" + std::to_string(i);
  EXPECT_EQ(is_tautology(parse_term(wide)), std::nullopt);
  std::stop_source stop;
  stop.request_stop();
  EXPECT_EQ(is_tautology(parse_term("p ==> p"), stop.get_token()), std::nullopt);
}

TEST(Strategy, TautologyUsesAssumptions) {
  TautologyStrategy s;
  EXPECT_EQ(s.run({{"p", "p ==> q"}, "q"}, {}), std::optional<std::string>(kTautologyAdvice));
  EXPECT_EQ(s.run({{"p"}, "q"}, {}), std::nullopt);
  EXPECT_EQ(s.run({{}, "x + 1 = 2"}, {}), std::nullopt);
}

TEST(Dispatch, FirstSuccessWinsAndLosersStop) {
  std::atomic<bool> loser_stopped{false};
  auto a = std::make_shared<FunctionStrategy>("A", [](const AdviceRequest&, std::stop_token) {
    return std::optional<std::string>("a");
  });
  auto b = std::make_shared<FunctionStrategy>("B", [&](const AdviceRequest&, std::stop_token st) {
    while (!st.stop_requested()) std::this_thread::sleep_for(1ms);
    loser_stopped = true;
    return std::optional<std::string>();
  });
  const auto t0 = std::chrono::steady_clock::now();
  const auto won = dispatch({{}, "p"}, {a, b}, 5s);
  EXPECT_LT(std::chrono::steady_clock::now() - t0, 2s);
  EXPECT_EQ(won, (std::optional<Advice>(Advice{"A", "a"})));
  EXPECT_TRUE(loser_stopped.load());
}

TEST(Dispatch, AllFailOrThrowGivesNothing) {
  auto none = std::make_shared<FunctionStrategy>("N", [](const AdviceRequest&, std::stop_token) {
    return std::optional<std::string>();
  });
  auto thrower = std::make_shared<FunctionStrategy>("X", [](const AdviceRequest&, std::stop_token) -> std::optional<std::string> {
    throw std::runtime_error("boom");
  });
  EXPECT_EQ(dispatch({{}, "p"}, {none, thrower}, 1s), std::nullopt);
  EXPECT_EQ(dispatch({{}, "p"}, {}, 1s), std::nullopt);
}

TEST(Dispatch, TimeoutStopsSlowStrategies) {
  auto slow = std::make_shared<FunctionStrategy>("S", [](const AdviceRequest&, std::stop_token st) {
    while (!st.stop_requested()) std::this_thread::sleep_for(1ms);
    return std::optional<std::string>("late");
  });
  const auto t0 = std::chrono::steady_clock::now();
  EXPECT_EQ(dispatch({{}, "p"}, {slow}, 50ms), std::nullopt);
  EXPECT_LT(std::chrono::steady_clock::now() - t0, 2s);
}

TEST(Server, AnswersCachesAndCloses) {
  AdviceServer server({std::make_shared<TautologyStrategy>()}, 2s);
  const auto port = server.start();
  ASSERT_NE(port, 0);
  const auto first = request_advice("127.0.0.1", port, "p`p ==> q`q");
  EXPECT_EQ(first, (std::vector<std::string>{std::string(kTautologyAdvice)}));
  const auto runs = server.strategy_runs();
  EXPECT_EQ(request_advice("127.0.0.1", port, "p`p ==> q`q"), first);
  EXPECT_EQ(server.strategy_runs(), runs);
  EXPECT_EQ(server.dispatches(), 1u);
  EXPECT_TRUE(request_advice("127.0.0.1", port, "p`q").empty());
  EXPECT_TRUE(request_advice("127.0.0.1", port, "p`q").empty());
  EXPECT_EQ(server.dispatches(), 2u);
  const auto err = request_advice("127.0.0.1", port, "");
  ASSERT_EQ(err.size(), 1u);
  EXPECT_TRUE(err[0].starts_with("error:"));
  server.stop();
  EXPECT_THROW(request_advice("127.0.0.1", port, "p", 500ms), AdvisorUnavailable);
}

TEST(Server, ConcurrentClients) {
  AdviceServer server({std::make_shared<TautologyStrategy>()}, 2s);
  const auto port = server.start("127.0.0.1", 0, 4);
  std::vector<std::jthread> clients;
  std::atomic<int> good{0};
  for (int i = 0; i < 16; ++i) {
    clients.emplace_back([&, i] {
      const std::string goal = "p" + std::to_string(i % 4) + " ==> p" + std::to_string(i % 4);
      if (request_advice("127.0.0.1", port, goal).size() == 1) ++good;
    });
  }
  clients.clear();
  EXPECT_EQ(good.load(), 16);
  EXPECT_GE(server.dispatches(), 4u);
  EXPECT_EQ(server.cache().size(), 4u);
}

TEST(Address, Parse) {
  EXPECT_EQ(parse_address("localhost:7070"), (std::pair<std::string, std::uint16_t>{"localhost", 7070}));
  EXPECT_THROW(parse_address("nohost"), std::invalid_argument);
  EXPECT_THROW(parse_address("h:99999"), std::invalid_argument);
}
