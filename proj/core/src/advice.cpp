#include "fwiki/advice.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstring>

namespace fwiki {

// ---------------------------------------------------------------------------
// Wire format

std::string encode_goal(const AdviceRequest& request) {
  const auto check = [](const std::string& field) {
    if (field.find(kFieldSeparator) != std::string::npos) {
      throw ProtocolError("goal field contains the separator: " + field);
    }
    if (field.find('\n') != std::string::npos) throw ProtocolError("goal field contains a newline");
  };
  std::string line;
  for (const auto& a : request.assumptions) {
    check(a);
    line += a;
    line += kFieldSeparator;
  }
  check(request.conclusion);
  line += request.conclusion;
  return line;
}

AdviceRequest decode_goal(std::string_view line) {
  if (line.empty()) throw ProtocolError("empty goal line");
  AdviceRequest req;
  std::size_t start = 0;
  for (;;) {
    const auto sep = line.find(kFieldSeparator, start);
    if (sep == std::string_view::npos) {
      req.conclusion = std::string(line.substr(start));
      return req;
    }
    req.assumptions.emplace_back(line.substr(start, sep - start));
    start = sep + 1;
  }
}

// ---------------------------------------------------------------------------
// Terms

namespace {

class TermParser {
 public:
  explicit TermParser(std::string_view s) : s_(s) {}

  MiniTerm parse() {
    MiniTerm t = iff();
    skip_space();
    if (pos_ != s_.size()) fail("unexpected input");
    return t;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw TermSyntaxError(what + " at offset " + std::to_string(pos_));
  }

  void skip_space() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  bool eat(std::string_view op) {
    skip_space();
    if (s_.substr(pos_).starts_with(op)) {
      pos_ += op.size();
      return true;
    }
    return false;
  }

  static MiniTerm binary(MiniTerm::Op op, MiniTerm lhs, MiniTerm rhs) {
    MiniTerm t;
    t.op = op;
    t.args.push_back(std::move(lhs));
    t.args.push_back(std::move(rhs));
    return t;
  }

  MiniTerm iff() {
    MiniTerm lhs = imp();
    if (eat("<=>")) return binary(MiniTerm::Op::iff, std::move(lhs), iff());
    return lhs;
  }

  MiniTerm imp() {
    MiniTerm lhs = disj();
    if (eat("==>")) return binary(MiniTerm::Op::imp, std::move(lhs), imp());
    return lhs;
  }

  MiniTerm disj() {
    MiniTerm lhs = conj();
    if (eat("\\/")) return binary(MiniTerm::Op::disj, std::move(lhs), disj());
    return lhs;
  }

  MiniTerm conj() {
    MiniTerm lhs = unary();
    if (eat("/\\")) return binary(MiniTerm::Op::conj, std::move(lhs), conj());
    return lhs;
  }

  MiniTerm unary() {
    if (eat("~")) {
      MiniTerm t;
      t.op = MiniTerm::Op::neg;
      t.args.push_back(unary());
      return t;
    }
    if (eat("(")) {
      MiniTerm t = iff();
      if (!eat(")")) fail("expected ')'");
      return t;
    }
    skip_space();
    const std::size_t start = pos_;
    const auto ident_char = [](char c) {
      return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '\'';
    };
    if (pos_ < s_.size() && ident_char(s_[pos_]) && !(s_[pos_] >= '0' && s_[pos_] <= '9') && s_[pos_] != '\'') {
      while (pos_ < s_.size() && ident_char(s_[pos_])) ++pos_;
    } else {
      fail("expected a formula");
    }
    MiniTerm t;
    const std::string_view word = s_.substr(start, pos_ - start);
    if (word == "T") {
      t.op = MiniTerm::Op::truth;
    } else if (word == "F") {
      t.op = MiniTerm::Op::falsity;
    } else {
      t.name = std::string(word);
    }
    return t;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

int precedence(const MiniTerm& t) {
  switch (t.op) {
    case MiniTerm::Op::iff: return 1;
    case MiniTerm::Op::imp: return 2;
    case MiniTerm::Op::disj: return 3;
    case MiniTerm::Op::conj: return 4;
    case MiniTerm::Op::neg: return 5;
    default: return 6;
  }
}

void print_rec(const MiniTerm& t, std::string& out) {
  const auto sub = [&out](const MiniTerm& child, bool parens) {
    if (parens) out += '(';
    print_rec(child, out);
    if (parens) out += ')';
  };
  switch (t.op) {
    case MiniTerm::Op::atom: out += t.name; return;
    case MiniTerm::Op::truth: out += 'T'; return;
    case MiniTerm::Op::falsity: out += 'F'; return;
    case MiniTerm::Op::neg:
      out += '~';
      sub(t.args[0], precedence(t.args[0]) < 5);
      return;
    default: break;
  }
  const int p = precedence(t);
  sub(t.args[0], precedence(t.args[0]) <= p);
  switch (t.op) {
    case MiniTerm::Op::conj: out += " /\\ "; break;
    case MiniTerm::Op::disj: out += " \\/ "; break;
    case MiniTerm::Op::imp: out += " ==> "; break;
    default: out += " <=> "; break;
  }
  sub(t.args[1], precedence(t.args[1]) < p);
}

void collect_atoms(const MiniTerm& t, std::vector<std::string>& out) {
  if (t.op == MiniTerm::Op::atom) {
    if (std::find(out.begin(), out.end(), t.name) == out.end()) out.push_back(t.name);
    return;
  }
  for (const auto& a : t.args) collect_atoms(a, out);
}

// Term with atoms replaced by variable indices, for fast evaluation.
struct Compiled {
  MiniTerm::Op op;
  std::size_t var = 0;
  std::vector<Compiled> args;
};

Compiled compile(const MiniTerm& t, const std::vector<std::string>& atoms) {
  Compiled c{t.op, 0, {}};
  if (t.op == MiniTerm::Op::atom) {
    c.var = static_cast<std::size_t>(std::find(atoms.begin(), atoms.end(), t.name) - atoms.begin());
  }
  for (const auto& a : t.args) c.args.push_back(compile(a, atoms));
  return c;
}

bool eval(const Compiled& c, std::uint64_t row) {
  switch (c.op) {
    case MiniTerm::Op::atom: return ((row >> c.var) & 1U) != 0;
    case MiniTerm::Op::truth: return true;
    case MiniTerm::Op::falsity: return false;
    case MiniTerm::Op::neg: return !eval(c.args[0], row);
    case MiniTerm::Op::conj: return eval(c.args[0], row) && eval(c.args[1], row);
    case MiniTerm::Op::disj: return eval(c.args[0], row) || eval(c.args[1], row);
    case MiniTerm::Op::imp: return !eval(c.args[0], row) || eval(c.args[1], row);
    case MiniTerm::Op::iff: return eval(c.args[0], row) == eval(c.args[1], row);
  }
  return false;
}

}  // namespace

MiniTerm parse_term(std::string_view text) { return TermParser(text).parse(); }

std::string print_term(const MiniTerm& term) {
  std::string out;
  print_rec(term, out);
  return out;
}

std::vector<std::string> term_atoms(const MiniTerm& term) {
  std::vector<std::string> out;
  collect_atoms(term, out);
  return out;
}

std::optional<bool> is_tautology(const MiniTerm& term, std::stop_token stop, std::size_t max_atoms) {
  const auto atoms = term_atoms(term);
  if (atoms.size() > max_atoms) return std::nullopt;
  const Compiled c = compile(term, atoms);
  const std::uint64_t rows = std::uint64_t{1} << atoms.size();
  for (std::uint64_t row = 0; row < rows; ++row) {
    if ((row & 0x3FF) == 0 && stop.stop_requested()) return std::nullopt;
    if (!eval(c, row)) return false;
  }
  return true;
}

std::optional<std::string> TautologyStrategy::run(const AdviceRequest& request, std::stop_token stop) {
  MiniTerm goal;
  try {
    goal = parse_term(request.conclusion);
    for (auto it = request.assumptions.rbegin(); it != request.assumptions.rend(); ++it) {
      MiniTerm imp;
      imp.op = MiniTerm::Op::imp;
      imp.args.push_back(parse_term(*it));
      imp.args.push_back(std::move(goal));
      goal = std::move(imp);
    }
  } catch (const TermSyntaxError&) {
    return std::nullopt;
  }
  // a1 ==> (a2 ==> c) is equivalent to (a1 /\ a2) ==> c.
  const auto valid = is_tautology(goal, stop);
  if (valid && *valid) return std::string(kTautologyAdvice);
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Dispatch

std::optional<Advice> dispatch(const AdviceRequest& request,
                               const std::vector<std::shared_ptr<Strategy>>& strategies,
                               std::chrono::milliseconds timeout) {
  struct Shared {
    std::mutex mutex;
    std::condition_variable cv;
    std::optional<Advice> winner;
    std::size_t finished = 0;
  };
  auto shared = std::make_shared<Shared>();
  std::vector<std::jthread> threads;
  threads.reserve(strategies.size());
  for (const auto& strategy : strategies) {
    threads.emplace_back([shared, strategy, &request](std::stop_token stop) {
      std::optional<std::string> result;
      try {
        result = strategy->run(request, stop);
      } catch (...) {
        result.reset();
      }
      std::lock_guard lock(shared->mutex);
      if (result && !shared->winner && !stop.stop_requested()) {
        shared->winner = Advice{strategy->name(), std::move(*result)};
      }
      ++shared->finished;
      shared->cv.notify_all();
    });
  }
  {
    std::unique_lock lock(shared->mutex);
    shared->cv.wait_for(lock, timeout, [&] {
      return shared->winner.has_value() || shared->finished == strategies.size();
    });
  }
  for (auto& t : threads) t.request_stop();
  threads.clear();
  std::lock_guard lock(shared->mutex);
  return shared->winner;
}

// ---------------------------------------------------------------------------
// Cache

std::optional<std::vector<std::string>> AdviceCache::get(const std::string& line) const {
  std::shared_lock lock(mutex_);
  const auto it = entries_.find(line);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void AdviceCache::put(const std::string& line, std::vector<std::string> advice) {
  std::unique_lock lock(mutex_);
  entries_.insert_or_assign(line, std::move(advice));
}

std::size_t AdviceCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

// ---------------------------------------------------------------------------
// Server

namespace {

void ignore_sigpipe() {
  static const bool done = [] {
    ::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)done;
}

bool write_all(int fd, std::string_view data) {
  std::size_t written = 0;
  while (written < data.size()) {
    const ssize_t n = ::send(fd, data.data() + written, data.size() - written, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    written += static_cast<std::size_t>(n);
  }
  return true;
}

constexpr std::size_t kMaxLine = 1 << 16;

}  // namespace

AdviceServer::AdviceServer(std::vector<std::shared_ptr<Strategy>> strategies, std::chrono::milliseconds timeout,
                           std::shared_ptr<AdviceCache> cache)
    : strategies_(std::move(strategies)), timeout_(timeout), cache_(std::move(cache)) {
  ignore_sigpipe();
}

AdviceServer::~AdviceServer() { stop(); }

std::vector<std::string> AdviceServer::answer(const std::string& line) {
  if (auto hit = cache_->get(line)) return *hit;
  const AdviceRequest request = decode_goal(line);
  ++dispatches_;
  strategy_runs_ += strategies_.size();
  std::vector<std::string> advice;
  if (auto won = dispatch(request, strategies_, timeout_)) advice.push_back(won->text);
  cache_->put(line, advice);
  return advice;
}

void AdviceServer::serve_connection(int fd) {
  std::string buffer;
  bool complete = false;
  while (!complete && buffer.size() < kMaxLine) {
    pollfd pfd{fd, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, 5000);
    if (ready < 0 && errno == EINTR) continue;
    if (ready <= 0) break;
    char chunk[4096];
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    complete = buffer.find('\n') != std::string::npos;
  }
  if (const auto nl = buffer.find('\n'); nl != std::string::npos) buffer.resize(nl);
  if (!buffer.empty() && buffer.back() == '\r') buffer.pop_back();

  std::string reply;
  try {
    for (const auto& a : answer(buffer)) reply += a + "\n";
  } catch (const std::exception& e) {
    reply = std::string("error: ") + e.what() + "\n";
  }
  write_all(fd, reply);
  ::shutdown(fd, SHUT_RDWR);
  ::close(fd);
}

std::uint16_t AdviceServer::start(const std::string& host, std::uint16_t port, std::size_t workers) {
  if (listen_fd_ >= 0) throw std::logic_error("advice server already started");
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (listen_fd_ < 0) throw std::runtime_error("socket: " + std::string(std::strerror(errno)));
  const int yes = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw std::runtime_error("bad listen address: " + host);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listen_fd_, 64) != 0) {
    const std::string err = std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw std::runtime_error("bind " + host + ":" + std::to_string(port) + ": " + err);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  for (std::size_t i = 0; i < std::max<std::size_t>(workers, 1); ++i) {
    workers_.emplace_back([this](std::stop_token st) { worker_loop(st); });
  }
  acceptor_ = std::jthread([this](std::stop_token st) { accept_loop(st); });
  return port_;
}

void AdviceServer::accept_loop(std::stop_token stop) {
  while (!stop.stop_requested()) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, 100);
    if (ready <= 0) continue;
    const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) continue;
    {
      std::lock_guard lock(queue_mutex_);
      pending_.push_back(fd);
    }
    queue_cv_.notify_one();
  }
}

void AdviceServer::worker_loop(std::stop_token stop) {
  for (;;) {
    int fd = -1;
    {
      std::unique_lock lock(queue_mutex_);
      if (!queue_cv_.wait(lock, stop, [this] { return !pending_.empty(); })) return;
      fd = pending_.front();
      pending_.pop_front();
    }
    serve_connection(fd);
  }
}

void AdviceServer::stop() {
  if (acceptor_.joinable()) {
    acceptor_.request_stop();
    acceptor_.join();
  }
  for (auto& w : workers_) w.request_stop();
  workers_.clear();
  {
    std::lock_guard lock(queue_mutex_);
    for (int fd : pending_) ::close(fd);
    pending_.clear();
  }
  if (listen_fd_ >= 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
}

// ---------------------------------------------------------------------------
// Client

std::vector<std::string> request_advice(const std::string& host, std::uint16_t port, std::string_view line,
                                        std::chrono::milliseconds timeout) {
  ignore_sigpipe();
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  const std::string service = std::to_string(port);
  if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &found) != 0 || found == nullptr) {
    throw AdvisorUnavailable("cannot resolve advisor host " + host);
  }
  int fd = -1;
  for (addrinfo* ai = found; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(found);
  if (fd < 0) throw AdvisorUnavailable("cannot connect to advisor at " + host + ":" + service);

  std::string request(line);
  request += '\n';
  if (!write_all(fd, request)) {
    ::close(fd);
    throw AdvisorUnavailable("advisor closed the connection early");
  }
  std::string reply;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      ::close(fd);
      throw AdvisorUnavailable("advisor did not answer in time");
    }
    pollfd pfd{fd, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (ready < 0 && errno == EINTR) continue;
    if (ready <= 0) continue;
    char chunk[4096];
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    reply.append(chunk, static_cast<std::size_t>(n));
  }
  ::close(fd);
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < reply.size()) {
    auto nl = reply.find('\n', start);
    if (nl == std::string::npos) nl = reply.size();
    lines.push_back(reply.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

std::pair<std::string, std::uint16_t> parse_address(std::string_view address) {
  const auto colon = address.rfind(':');
  if (colon == std::string_view::npos) throw std::invalid_argument("expected host:port, got " + std::string(address));
  unsigned port = 0;
  const std::string_view digits = address.substr(colon + 1);
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || port > 65535) {
    throw std::invalid_argument("bad port in " + std::string(address));
  }
  return {std::string(address.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

}  // namespace fwiki
