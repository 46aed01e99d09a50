#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <chrono>
#include <cstring>
#include <thread>

#include "fwiki/prover_session.hpp"

namespace fwiki {

namespace {

void ignore_sigpipe() {
  static const bool done = [] {
    ::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)done;
}

}  // namespace

std::vector<std::string> split_command_line(std::string_view cmd) {
  std::vector<std::string> out;
  std::string current;
  bool in_token = false;
  char quote = 0;
  for (char c : cmd) {
    if (quote != 0) {
      if (c == quote) {
        quote = 0;
      } else {
        current += c;
      }
    } else if (c == '"' || c == '\'') {
      quote = c;
      in_token = true;
    } else if (c == ' ' || c == '\t' || c == '\n') {
      if (in_token) out.push_back(std::move(current));
      current.clear();
      in_token = false;
    } else {
      current += c;
      in_token = true;
    }
  }
  if (in_token) out.push_back(std::move(current));
  return out;
}

PipeProverAdapter::PipeProverAdapter(std::vector<std::string> argv, SnapshotToken token,
                                     int timeout_ms)
    : argv_(std::move(argv)), token_(std::move(token)), timeout_ms_(timeout_ms) {
  if (argv_.empty()) throw ProverError("empty prover command");
  ignore_sigpipe();

  int in_pipe[2];
  int out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw ProverError("pipe: " + std::string(std::strerror(errno)));
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw ProverError("pipe: " + std::string(std::strerror(errno)));
  }

  std::vector<char*> args;
  args.reserve(argv_.size() + 1);
  for (auto& a : argv_) args.push_back(a.data());
  args.push_back(nullptr);
  // Environment is prepared before fork so the child only calls exec.
  std::string env_entry = "PROVER_SNAPSHOT=" + token_.name;
  std::vector<char*> envp;
  for (char** e = environ; *e != nullptr; ++e) {
    if (std::strncmp(*e, "PROVER_SNAPSHOT=", 16) != 0) envp.push_back(*e);
  }
  envp.push_back(env_entry.data());
  envp.push_back(nullptr);

  pid_ = ::fork();
  if (pid_ < 0) throw ProverError("fork: " + std::string(std::strerror(errno)));
  if (pid_ == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::execvpe(args[0], args.data(), envp.data());
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];

  // The prover announces that it finished loading.
  try {
    std::string line;
    do {
      line = read_line();
    } while (line != kReadySentinel);
  } catch (...) {
    ::close(to_child_);
    ::close(from_child_);
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
    throw;
  }
}

PipeProverAdapter::~PipeProverAdapter() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  if (pid_ > 0) {
    int status = 0;
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) return;
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, &status, 0);
  }
}

void PipeProverAdapter::write_line(std::string_view text) {
  std::string data(text);
  data += '\n';
  std::size_t written = 0;
  while (written < data.size()) {
    const ssize_t n = ::write(to_child_, data.data() + written, data.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ProverError("write to prover failed: " + std::string(std::strerror(errno)));
    }
    written += static_cast<std::size_t>(n);
  }
}

std::string PipeProverAdapter::read_line() {
  for (;;) {
    if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    pollfd pfd{from_child_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, timeout_ms_);
    if (ready < 0 && errno == EINTR) continue;
    if (ready <= 0) throw ProverError("prover did not answer in time");
    char chunk[4096];
    const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw ProverError("prover closed its output");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

std::string PipeProverAdapter::send(std::string_view command_text) {
  write_line(command_text);
  std::string response;
  bool first = true;
  for (;;) {
    std::string line = read_line();
    if (line == kReadySentinel) return response;
    if (!first) response += '\n';
    response += line;
    first = false;
  }
}

std::size_t PipeProverAdapter::probe_depth() {
  write_line(kDepthProbe);
  const std::string line = read_line();
  std::size_t depth = 0;
  const auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), depth);
  if (ec != std::errc{} || ptr != line.data() + line.size()) {
    throw ProverError("malformed depth reply: '" + line + "'");
  }
  return depth;
}

SnapshotToken PipeProverAdapter::snapshot() const { return token_; }

std::unique_ptr<ProverAdapter> PipeProverAdapter::restore(const SnapshotToken& token) const {
  return std::make_unique<PipeProverAdapter>(argv_, token, timeout_ms_);
}

}  // namespace fwiki
