#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <sstream>

#include "abcbl/errors.hpp"
#include "abcbl/models.hpp"
#include "abcbl/table_io.hpp"

extern char** environ;

namespace abcbl {

namespace {

struct Fd {
  int fd = -1;
  ~Fd() { reset(); }
  void reset() {
    if (fd >= 0) ::close(fd);
    fd = -1;
  }
};

void write_all(int fd, const std::string& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t w = ::write(fd, data.data() + off, data.size() - off);
    if (w < 0) {
      if (errno == EINTR) continue;
      if (errno == EPIPE) return;  // child exited early; its status decides
      throw std::runtime_error(std::string("write to simulator failed: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(w);
  }
}

std::string read_all(int fd) {
  std::string out;
  char buf[4096];
  for (;;) {
    const ssize_t r = ::read(fd, buf, sizeof(buf));
    if (r < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error(std::string("read from simulator failed: ") + std::strerror(errno));
    }
    if (r == 0) break;
    out.append(buf, static_cast<std::size_t>(r));
  }
  return out;
}

}  // namespace

ExternalSimulator::ExternalSimulator(std::string command, int p, int d) : command_(std::move(command)), p_(p), d_(d) {
  if (command_.empty()) throw ValidationError("external simulator: empty command");
  if (p < 1 || d < 1) throw ValidationError("external simulator: p and d must be positive");
  ::signal(SIGPIPE, SIG_IGN);
}

Eigen::VectorXd ExternalSimulator::draw(const Eigen::Ref<const Eigen::VectorXd>& theta, Rng& rng) const {
  int in_pipe[2], out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw std::runtime_error("pipe failed");
  Fd in_r{in_pipe[0]}, in_w{in_pipe[1]};
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) throw std::runtime_error("pipe failed");
  Fd out_r{out_pipe[0]}, out_w{out_pipe[1]};

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_r.fd, STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out_w.fd, STDOUT_FILENO);

  std::vector<std::string> env_strings;
  for (char** e = environ; e && *e; ++e)
    if (std::strncmp(*e, "ABCBL_SEED=", 11) != 0) env_strings.emplace_back(*e);
  env_strings.push_back("ABCBL_SEED=" + std::to_string(rng()));
  std::vector<char*> envp;
  for (auto& s : env_strings) envp.push_back(s.data());
  envp.push_back(nullptr);

  std::string sh = "/bin/sh", dash_c = "-c", cmd = command_;
  char* argv[] = {sh.data(), dash_c.data(), cmd.data(), nullptr};
  pid_t pid = 0;
  const int rc = posix_spawn(&pid, "/bin/sh", &actions, nullptr, argv, envp.data());
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) throw std::runtime_error(std::string("cannot start simulator: ") + std::strerror(rc));
  in_r.reset();
  out_w.reset();

  std::string line;
  for (Eigen::Index i = 0; i < theta.size(); ++i) line += (i ? " " : "") + format_double(theta[i]);
  line += '\n';
  std::string output;
  try {
    write_all(in_w.fd, line);
    in_w.reset();
    output = read_all(out_r.fd);
  } catch (...) {
    int status = 0;
    ::waitpid(pid, &status, 0);
    throw;
  }
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
    throw std::runtime_error("simulator exited with status " + std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1));

  std::istringstream is(output);
  std::vector<double> values;
  std::string tok;
  while (is >> tok) values.push_back(parse_double(tok));
  if (static_cast<int>(values.size()) != d_)
    throw std::runtime_error("simulator printed " + std::to_string(values.size()) + " values, expected " +
                             std::to_string(d_));
  return Eigen::Map<Eigen::VectorXd>(values.data(), d_);
}

}  // namespace abcbl
