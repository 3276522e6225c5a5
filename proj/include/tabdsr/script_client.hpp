#pragma once

#include <chrono>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tabdsr/exec.hpp"
#include "tabdsr/table.hpp"

namespace tabdsr {

// Client side of the external script runner. The runner is a child process
// that reads one JSON request line on stdin and writes one JSON response line
// on stdout:
//
//   request:  {"table": {...}, "code": "...", "timeout_s": N}
//   response: {"ok": true, "value": v}
//           | {"ok": false, "error_type": "...", "error_message": "..."}

std::string build_runner_request(const CleanTable& table, std::string_view code, int timeout_s);

/// Maps a runner-side exception name (KeyError, NameError, ...) onto the
/// shared taxonomy.
ExecCategory map_runner_error(std::string_view error_type);

/// Decodes one response line. Throws ExecError for `ok: false` replies and
/// RunnerProtocolError for anything that is not a well-formed reply.
ExecValue parse_runner_response(std::string_view line);

struct ProcessResult {
  std::string stdout_text;
  std::string stderr_text;
  int exit_status = -1;
  bool timed_out = false;
};

/// Runs `argv` with `input` on stdin, killing it after `timeout`.
ProcessResult run_process(const std::vector<std::string>& argv, std::string_view input,
                          std::chrono::milliseconds timeout);

class ExternalExecutor : public Executor {
 public:
  /// `command` is the runner's argv, e.g. {"python3", "runner/tabdsr_runner.py"}.
  explicit ExternalExecutor(std::vector<std::string> command, int timeout_s = 10);

  Dialect dialect() const override { return Dialect::DfScript; }
  ExecValue run(std::string_view program, const CleanTable& table) override;

 private:
  std::vector<std::string> command_;
  int timeout_s_;
};

}  // namespace tabdsr
