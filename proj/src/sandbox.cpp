#include "snipex/sandbox.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/stat.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "json.hpp"

namespace snipex::sandbox {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string decode_entities(const std::string& in) {
  std::string out;
  out.reserve(in.size());
  size_t i = 0;
  while (i < in.size()) {
    if (in[i] != '&') {
      out += in[i++];
      continue;
    }
    size_t semi = in.find(';', i + 1);
    if (semi == std::string::npos || semi - i > 10) {
      out += in[i++];
      continue;
    }
    std::string name = in.substr(i + 1, semi - i - 1);
    if (name == "lt") out += '<';
    else if (name == "gt") out += '>';
    else if (name == "amp") out += '&';
    else if (name == "quot") out += '"';
    else if (name == "apos") out += '\'';
    else if (name.size() > 1 && name[0] == '#') {
      long code;
      char* end = nullptr;
      if (name[1] == 'x' || name[1] == 'X')
        code = std::strtol(name.c_str() + 2, &end, 16);
      else
        code = std::strtol(name.c_str() + 1, &end, 10);
      if (end == nullptr || *end != '\0' || code < 0 || code > 0x10FFFF) {
        out += in[i++];
        continue;
      }
      // encode code point as UTF-8
      if (code < 0x80) {
        out += char(code);
      } else if (code < 0x800) {
        out += char(0xC0 | (code >> 6));
        out += char(0x80 | (code & 0x3F));
      } else if (code < 0x10000) {
        out += char(0xE0 | (code >> 12));
        out += char(0x80 | ((code >> 6) & 0x3F));
        out += char(0x80 | (code & 0x3F));
      } else {
        out += char(0xF0 | (code >> 18));
        out += char(0x80 | ((code >> 12) & 0x3F));
        out += char(0x80 | ((code >> 6) & 0x3F));
        out += char(0x80 | (code & 0x3F));
      }
    } else {
      out += in[i++];
      continue;
    }
    i = semi + 1;
  }
  return out;
}

bool is_blank(const std::string& line) {
  return line.find_first_not_of(" \t") == std::string::npos;
}

std::string dedent(const std::string& text) {
  auto lines = split_lines(text);
  std::optional<std::string> prefix;
  for (const auto& line : lines) {
    if (is_blank(line)) continue;
    size_t ws = line.find_first_not_of(" \t");
    std::string lead = line.substr(0, ws);
    if (!prefix) {
      prefix = lead;
    } else {
      size_t k = 0;
      while (k < prefix->size() && k < lead.size() && (*prefix)[k] == lead[k])
        ++k;
      prefix->resize(k);
    }
    if (prefix->empty()) break;
  }
  if (!prefix || prefix->empty()) return text;
  std::string out;
  for (size_t i = 0; i < lines.size(); ++i) {
    const auto& line = lines[i];
    if (is_blank(line))
      out += line;
    else
      out += line.substr(prefix->size());
    if (i + 1 < lines.size() || (!text.empty() && text.back() == '\n'))
      out += '\n';
  }
  return out;
}

// tail buffer: keeps only the last `cap` bytes
void append_capped(std::string& buf, const char* data, size_t n, int64_t cap) {
  buf.append(data, n);
  if (static_cast<int64_t>(buf.size()) > cap)
    buf.erase(0, buf.size() - static_cast<size_t>(cap));
}

std::vector<std::string> substitute(const std::vector<std::string>& tmpl,
                                    const std::string& placeholder,
                                    const std::string& value) {
  std::vector<std::string> out;
  out.reserve(tmpl.size());
  for (std::string arg : tmpl) {
    size_t pos;
    while ((pos = arg.find(placeholder)) != std::string::npos)
      arg.replace(pos, placeholder.size(), value);
    out.push_back(std::move(arg));
  }
  return out;
}

// The child inherits only a minimal environment plus overrides.
std::vector<std::string> build_env(
    const std::map<std::string, std::string>& overrides) {
  std::vector<std::string> env;
  for (const char* key : {"PATH", "HOME", "LANG", "LC_ALL", "TMPDIR", "TERM"}) {
    if (overrides.count(key)) continue;
    if (const char* v = std::getenv(key)) env.push_back(std::string(key) + "=" + v);
  }
  for (const auto& [k, v] : overrides) env.push_back(k + "=" + v);
  return env;
}

}  // namespace

std::string prepare_source(const std::string& raw) {
  std::string text = utf8_lossy(raw);
  if (text.rfind("\xEF\xBB\xBF", 0) == 0) text.erase(0, 3);
  text = decode_entities(text);
  // CRLF -> LF
  std::string lf;
  lf.reserve(text.size());
  for (size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\r' && i + 1 < text.size() && text[i + 1] == '\n') continue;
    if (text[i] == '\r') {
      lf += '\n';
      continue;
    }
    lf += text[i];
  }
  return dedent(lf);
}

RawExecution run_command(const std::vector<std::string>& argv,
                         const std::map<std::string, std::string>& env,
                         Duration timeout, int64_t max_output_bytes,
                         const std::string& cwd) {
  RawExecution result;
  if (argv.empty()) {
    result.spawn_error = "empty command";
    return result;
  }

  int out_pipe[2], err_pipe[2], exec_pipe[2];
  if (pipe(out_pipe) < 0 || pipe(err_pipe) < 0 || pipe2(exec_pipe, O_CLOEXEC) < 0) {
    result.spawn_error = std::string("pipe: ") + std::strerror(errno);
    return result;
  }

  auto start = std::chrono::steady_clock::now();
  pid_t pid = fork();
  if (pid < 0) {
    result.spawn_error = std::string("fork: ") + std::strerror(errno);
    return result;
  }

  if (pid == 0) {
    setpgid(0, 0);
    if (!cwd.empty() && chdir(cwd.c_str()) != 0) _exit(127);
    int devnull = open("/dev/null", O_RDONLY);
    if (devnull >= 0) dup2(devnull, STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    dup2(err_pipe[1], STDERR_FILENO);
    close(out_pipe[0]);
    close(out_pipe[1]);
    close(err_pipe[0]);
    close(err_pipe[1]);
    close(exec_pipe[0]);

    std::vector<char*> cargv;
    for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
    cargv.push_back(nullptr);
    auto envs = build_env(env);
    std::vector<char*> cenv;
    for (const auto& e : envs) cenv.push_back(const_cast<char*>(e.c_str()));
    cenv.push_back(nullptr);
    execvpe(cargv[0], cargv.data(), cenv.data());
    int err = errno;
    (void)!write(exec_pipe[1], &err, sizeof(err));
    _exit(127);
  }

  setpgid(pid, pid);  // also from the parent side, to close the race
  close(out_pipe[1]);
  close(err_pipe[1]);
  close(exec_pipe[1]);

  // exec failure is reported over the CLOEXEC pipe
  int exec_errno = 0;
  ssize_t n = read(exec_pipe[0], &exec_errno, sizeof(exec_errno));
  close(exec_pipe[0]);
  if (n == sizeof(exec_errno)) {
    waitpid(pid, nullptr, 0);
    close(out_pipe[0]);
    close(err_pipe[0]);
    result.spawn_error =
        argv[0] + ": " + std::strerror(exec_errno);
    result.duration = std::chrono::duration_cast<Duration>(
        std::chrono::steady_clock::now() - start);
    return result;
  }

  fcntl(out_pipe[0], F_SETFL, O_NONBLOCK);
  fcntl(err_pipe[0], F_SETFL, O_NONBLOCK);

  auto deadline = start + timeout;
  auto hard_deadline = deadline + std::chrono::seconds(1);
  bool sent_term = false, sent_kill = false;
  bool out_open = true, err_open = true;
  bool reaped = false;
  int status = 0;
  char buf[8192];

  while (out_open || err_open) {
    if (!reaped) {
      pid_t w = waitpid(pid, &status, WNOHANG);
      if (w == pid) {
        reaped = true;
        // direct child gone: anything still holding the pipes is a stray
        kill(-pid, SIGKILL);
      }
    }
    auto now = std::chrono::steady_clock::now();
    if (now >= deadline && !sent_term && !reaped) {
      kill(-pid, SIGTERM);
      sent_term = true;
      result.timed_out = true;
    }
    if (now >= hard_deadline && !sent_kill && !reaped) {
      kill(-pid, SIGKILL);
      sent_kill = true;
    }

    struct pollfd fds[2];
    int nfds = 0;
    int out_idx = -1, err_idx = -1;
    if (out_open) {
      out_idx = nfds;
      fds[nfds++] = {out_pipe[0], POLLIN, 0};
    }
    if (err_open) {
      err_idx = nfds;
      fds[nfds++] = {err_pipe[0], POLLIN, 0};
    }
    auto until = sent_term ? hard_deadline : deadline;
    int wait_ms = static_cast<int>(std::chrono::duration_cast<Duration>(
                                       until - now)
                                       .count());
    if (wait_ms < 0) wait_ms = 0;
    if (wait_ms > 200) wait_ms = 200;
    poll(fds, nfds, wait_ms);

    auto drain = [&](int fd, bool& open_flag, std::string& tail) {
      for (;;) {
        ssize_t r = read(fd, buf, sizeof(buf));
        if (r > 0) {
          append_capped(tail, buf, static_cast<size_t>(r), max_output_bytes);
        } else if (r == 0) {
          open_flag = false;
          break;
        } else {
          if (errno != EAGAIN && errno != EWOULDBLOCK) open_flag = false;
          break;
        }
      }
    };
    if (out_idx >= 0 && (fds[out_idx].revents & (POLLIN | POLLHUP)))
      drain(out_pipe[0], out_open, result.stdout_tail);
    if (err_idx >= 0 && (fds[err_idx].revents & (POLLIN | POLLHUP)))
      drain(err_pipe[0], err_open, result.stderr_tail);
  }
  close(out_pipe[0]);
  close(err_pipe[0]);

  if (!reaped) {
    while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
  }
  result.duration = std::chrono::duration_cast<Duration>(
      std::chrono::steady_clock::now() - start);

  // sweep any stragglers the child left in its process group
  kill(-pid, SIGKILL);

  if (!result.timed_out) {
    if (WIFEXITED(status))
      result.exit_status = WEXITSTATUS(status);
    else if (WIFSIGNALED(status))
      result.exit_status = 128 + WTERMSIG(status);
  }
  return result;
}

std::string make_temp_workdir() {
  auto base = fs::temp_directory_path() / "snipex";
  std::error_code ec;
  fs::create_directories(base, ec);
  thread_local std::mt19937_64 rng{std::random_device{}()};
  for (int attempt = 0; attempt < 16; ++attempt) {
    auto dir = base / ("run-" + std::to_string(getpid()) + "-" +
                       std::to_string(rng()));
    if (fs::create_directory(dir, ec)) return dir.string();
  }
  throw EnvironmentError("cannot create temp workdir under " + base.string());
}

RawExecution run_snippet(const std::string& source,
                         const InterpreterConfig& config,
                         const std::string& workdir) {
  fs::path dir(workdir);
  std::error_code ec;
  if (!fs::is_directory(dir, ec))
    throw EnvironmentError("workdir missing: " + workdir);
  if (!fs::is_empty(dir, ec))
    throw EnvironmentError("workdir not empty: " + workdir);

  struct Cleanup {
    fs::path dir;
    ~Cleanup() {
      std::error_code ec;
      fs::remove_all(dir, ec);
    }
  } cleanup{dir};

  fs::path script = dir / "snippet.py";
  {
    std::ofstream out(script, std::ios::binary);
    if (!out) throw EnvironmentError("cannot write " + script.string());
    out << source;
  }
  auto argv = substitute(config.command, "{file}", script.string());
  return run_command(argv, config.env_overrides, config.timeout,
                     config.max_output_bytes, workdir);
}

std::vector<InterpreterConfig> parse_configs(const std::string& json_text) {
  json j = json::parse(json_text);
  std::vector<InterpreterConfig> configs;
  for (const auto& item : j) {
    InterpreterConfig c;
    c.id = item.at("id").get<std::string>();
    c.command = item.at("command").get<std::vector<std::string>>();
    if (item.contains("installer_command"))
      c.installer_command =
          item["installer_command"].get<std::vector<std::string>>();
    if (item.contains("env"))
      c.env_overrides =
          item["env"].get<std::map<std::string, std::string>>();
    if (item.contains("timeout_seconds"))
      c.timeout = std::chrono::duration_cast<Duration>(
          std::chrono::duration<double>(item["timeout_seconds"].get<double>()));
    if (item.contains("installer_timeout_seconds"))
      c.installer_timeout = std::chrono::duration_cast<Duration>(
          std::chrono::duration<double>(
              item["installer_timeout_seconds"].get<double>()));
    if (item.contains("max_output_bytes"))
      c.max_output_bytes = item["max_output_bytes"].get<int64_t>();
    if (c.timeout.count() <= 0)
      throw std::invalid_argument("config " + c.id + ": timeout must be > 0");
    configs.push_back(std::move(c));
  }
  return configs;
}

std::vector<InterpreterConfig> load_configs(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EnvironmentError("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_configs(text);
}

}  // namespace snipex::sandbox
