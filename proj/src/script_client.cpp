#include "tabdsr/script_client.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace tabdsr {

using nlohmann::json;

std::string build_runner_request(const CleanTable& table, std::string_view code, int timeout_s) {
  json req{{"table", table_to_json(table)}, {"code", std::string(code)}, {"timeout_s", timeout_s}};
  return req.dump() + "\n";
}

ExecCategory map_runner_error(std::string_view error_type) {
  static const std::map<std::string, ExecCategory, std::less<>> kNative = {
      {"KeyError", ExecCategory::UnknownColumn},
      {"NameError", ExecCategory::UnknownIdentifier},
      {"AttributeError", ExecCategory::UnknownIdentifier},
      {"TypeError", ExecCategory::TypeMismatch},
      {"ValueError", ExecCategory::TypeMismatch},
      {"UFuncTypeError", ExecCategory::TypeMismatch},
      {"IndexError", ExecCategory::IndexOutOfRange},
      {"SyntaxError", ExecCategory::SyntaxError},
      {"IndentationError", ExecCategory::SyntaxError},
      {"ZeroDivisionError", ExecCategory::DivisionByZero},
      {"Timeout", ExecCategory::Timeout},
  };
  if (auto it = kNative.find(error_type); it != kNative.end()) return it->second;
  if (auto c = exec_category_from_string(error_type)) return *c;
  // Any other runtime exception from model code is a data/type problem.
  return ExecCategory::TypeMismatch;
}

namespace {

[[noreturn]] void protocol_error(std::string msg) { throw ExecError(ExecCategory::RunnerProtocolError, std::move(msg)); }

CellValue scalar_from_json(const json& j) {
  switch (j.type()) {
    case json::value_t::null: return NullVal{};
    case json::value_t::boolean: return std::string(j.get<bool>() ? "true" : "false");
    case json::value_t::string: return j.get<std::string>();
    case json::value_t::number_integer: return j.get<std::int64_t>();
    case json::value_t::number_unsigned: {
      auto u = j.get<std::uint64_t>();
      if (u <= static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) return static_cast<std::int64_t>(u);
      return static_cast<double>(u);
    }
    case json::value_t::number_float: {
      double d = j.get<double>();
      if (!std::isfinite(d)) throw ExecError(ExecCategory::TypeMismatch, "runner returned a non-finite number");
      return d;
    }
    default: protocol_error(fmt::format("value must be a scalar or a list of scalars, got {}", j.type_name()));
  }
}

}  // namespace

ExecValue parse_runner_response(std::string_view line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) protocol_error("runner reply is not a JSON object");
  auto ok = j.find("ok");
  if (ok == j.end() || !ok->is_boolean()) protocol_error("runner reply has no boolean \"ok\"");
  if (ok->get<bool>()) {
    auto v = j.find("value");
    if (v == j.end()) protocol_error("successful runner reply has no \"value\"");
    if (v->is_array()) {
      std::vector<CellValue> out;
      for (const auto& item : *v) out.push_back(scalar_from_json(item));
      return out;
    }
    return scalar_from_json(*v);
  }
  auto type = j.find("error_type");
  auto msg = j.find("error_message");
  if (type == j.end() || !type->is_string() || msg == j.end() || !msg->is_string()) {
    protocol_error("failed runner reply needs string \"error_type\" and \"error_message\"");
  }
  const auto& name = type->get_ref<const std::string&>();
  throw ExecError(map_runner_error(name), fmt::format("{}: {}", name, msg->get<std::string>()));
}

ProcessResult run_process(const std::vector<std::string>& argv, std::string_view input,
                          std::chrono::milliseconds timeout) {
  if (argv.empty()) throw std::invalid_argument("empty command");
  int in_pipe[2], out_pipe[2], err_pipe[2];
  if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0 || pipe(err_pipe) != 0) {
    throw std::runtime_error(fmt::format("pipe: {}", std::strerror(errno)));
  }
  pid_t pid = fork();
  if (pid < 0) throw std::runtime_error(fmt::format("fork: {}", std::strerror(errno)));
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    dup2(err_pipe[1], STDERR_FILENO);
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]}) close(fd);
    setpgid(0, 0);
    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    execvp(args[0], args.data());
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  close(err_pipe[1]);
  signal(SIGPIPE, SIG_IGN);
  for (int fd : {in_pipe[1], out_pipe[0], err_pipe[0]}) fcntl(fd, F_SETFL, fcntl(fd, F_GETFL) | O_NONBLOCK);

  ProcessResult result;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  std::size_t written = 0;
  int in_fd = in_pipe[1];
  if (input.empty()) {
    close(in_fd);
    in_fd = -1;
  }
  bool out_open = true, err_open = true;
  char buf[4096];
  while (out_open || err_open) {
    auto now = std::chrono::steady_clock::now();
    if (now >= deadline) {
      result.timed_out = true;
      break;
    }
    std::vector<pollfd> fds;
    if (in_fd >= 0) fds.push_back({in_fd, POLLOUT, 0});
    if (out_open) fds.push_back({out_pipe[0], POLLIN, 0});
    if (err_open) fds.push_back({err_pipe[0], POLLIN, 0});
    auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
    int rc = poll(fds.data(), fds.size(), static_cast<int>(std::max<long long>(1, remaining)));
    if (rc < 0 && errno != EINTR) break;
    for (const auto& p : fds) {
      if (!p.revents) continue;
      if (p.fd == in_fd) {
        ssize_t n = write(in_fd, input.data() + written, input.size() - written);
        if (n > 0) written += static_cast<std::size_t>(n);
        if (n < 0 && errno != EAGAIN) written = input.size();
        if (written >= input.size()) {
          close(in_fd);
          in_fd = -1;
        }
        continue;
      }
      ssize_t n = read(p.fd, buf, sizeof(buf));
      if (n > 0) {
        (p.fd == out_pipe[0] ? result.stdout_text : result.stderr_text).append(buf, static_cast<std::size_t>(n));
      } else if (n == 0 || errno != EAGAIN) {
        (p.fd == out_pipe[0] ? out_open : err_open) = false;
      }
    }
  }
  if (in_fd >= 0) close(in_fd);
  close(out_pipe[0]);
  close(err_pipe[0]);
  if (result.timed_out) {
    kill(-pid, SIGKILL);
    kill(pid, SIGKILL);
  }
  int status = 0;
  waitpid(pid, &status, 0);
  result.exit_status = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

ExternalExecutor::ExternalExecutor(std::vector<std::string> command, int timeout_s)
    : command_(std::move(command)), timeout_s_(timeout_s) {
  if (command_.empty()) throw std::invalid_argument("runner command is empty");
  if (timeout_s_ < 1) throw std::invalid_argument("timeout_s must be >= 1");
}

ExecValue ExternalExecutor::run(std::string_view program, const CleanTable& table) {
  if (trim(program).empty()) throw ExecError(ExecCategory::SyntaxError, "program is empty");
  // The runner enforces timeout_s itself; the extra second covers startup.
  auto limit = std::chrono::seconds(timeout_s_) + std::chrono::seconds(1);
  ProcessResult res = run_process(command_, build_runner_request(table, program, timeout_s_),
                                  std::chrono::duration_cast<std::chrono::milliseconds>(limit));
  if (res.timed_out) {
    throw ExecError(ExecCategory::Timeout, fmt::format("runner killed after {} s", timeout_s_));
  }
  std::string line = trim(res.stdout_text);
  if (line.empty()) {
    throw ExecError(ExecCategory::RunnerProtocolError,
                    fmt::format("runner exited with status {} and no reply: {}", res.exit_status, trim(res.stderr_text)));
  }
  if (line.find('\n') != std::string::npos) {
    throw ExecError(ExecCategory::RunnerProtocolError, "runner reply spans more than one line");
  }
  return parse_runner_response(line);
}

}  // namespace tabdsr
