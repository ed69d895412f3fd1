// Copyright 2026 The privbias Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <fcntl.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <csignal>
#include <cstring>
#include <future>
#include <mutex>
#include <thread>
#include <unordered_map>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "privbias/errors.h"
#include "privbias/scoring.h"

namespace privbias {

// --- HTTP -----------------------------------------------------------------

HttpTransport::HttpTransport(std::string base_url, std::chrono::seconds timeout)
    : timeout_(timeout) {
  constexpr std::string_view kScheme = "http://";
  if (!std::string_view(base_url).starts_with(kScheme)) {
    throw InvalidArgument("HTTP scorer URL must start with http://");
  }
  const size_t slash = base_url.find('/', kScheme.size());
  host_ = base_url.substr(0, slash);
  if (slash != std::string::npos) {
    path_prefix_ = base_url.substr(slash);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  }
}

std::string HttpTransport::Exchange(Route route, const std::string& request_line) {
  httplib::Client client(host_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  const std::string path =
      path_prefix_ + (route == Route::kScoreMasked ? "/score_masked" : "/score_next");
  auto res = client.Post(path, request_line, "application/json");
  if (!res) {
    throw TransportError("POST " + host_ + path + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status >= 500 || res->status == 408 || res->status == 429) {
    throw TransportError("POST " + host_ + path + " returned HTTP " +
                         std::to_string(res->status));
  }
  if (res->status != 200) {
    throw ProtocolError("POST " + host_ + path + " returned HTTP " +
                        std::to_string(res->status) + ": " + res->body);
  }
  std::string body = std::move(res->body);
  while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
  return body;
}

// --- Child process ----------------------------------------------------------

struct ProcessTransport::State {
  pid_t pid = -1;
  int to_child = -1;
  int from_child = -1;
  std::mutex write_mu;
  std::mutex pending_mu;
  std::unordered_map<std::string, std::promise<std::string>> pending;
  bool closed = false;  // guarded by pending_mu
  std::thread reader;

  void FailAll(const std::string& why) {
    std::lock_guard<std::mutex> lock(pending_mu);
    closed = true;
    for (auto& [id, promise] : pending) {
      promise.set_exception(std::make_exception_ptr(TransportError(why)));
    }
    pending.clear();
  }

  void ReadLoop() {
    std::string buffer;
    char chunk[4096];
    for (;;) {
      const ssize_t n = ::read(from_child, chunk, sizeof(chunk));
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) break;
      buffer.append(chunk, static_cast<size_t>(n));
      size_t nl;
      while ((nl = buffer.find('\n')) != std::string::npos) {
        std::string line = buffer.substr(0, nl);
        buffer.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        Deliver(std::move(line));
      }
    }
    FailAll("scorer process closed its output");
  }

  void Deliver(std::string line) {
    std::string id;
    try {
      auto j = nlohmann::json::parse(line);
      if (j.is_object() && j.contains("id") && j["id"].is_string()) {
        id = j["id"].get<std::string>();
      }
    } catch (const nlohmann::json::parse_error&) {
    }
    std::lock_guard<std::mutex> lock(pending_mu);
    auto it = pending.find(id);
    if (it == pending.end()) return;  // unsolicited line
    it->second.set_value(std::move(line));
    pending.erase(it);
  }
};

ProcessTransport::ProcessTransport(const std::string& command)
    : state_(std::make_shared<State>()) {
  // Writes to a dead child must surface as EPIPE, not kill this process.
  std::signal(SIGPIPE, SIG_IGN);
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw TransportError("pipe failed");
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw TransportError("pipe failed");
  }
  const pid_t pid = ::fork();
  if (pid < 0) throw TransportError("fork failed: " + std::string(std::strerror(errno)));
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  state_->pid = pid;
  state_->to_child = in_pipe[1];
  state_->from_child = out_pipe[0];
  state_->reader = std::thread([s = state_] { s->ReadLoop(); });
}

ProcessTransport::~ProcessTransport() {
  {
    std::lock_guard<std::mutex> lock(state_->write_mu);
    if (state_->to_child >= 0) ::close(state_->to_child);
    state_->to_child = -1;
  }
  if (state_->reader.joinable()) state_->reader.join();
  ::close(state_->from_child);
  int status = 0;
  ::waitpid(state_->pid, &status, 0);
}

std::string ProcessTransport::Exchange(Route route, const std::string& request_line) {
  (void)route;  // the server routes on the message fields
  std::string id;
  try {
    auto j = nlohmann::json::parse(request_line);
    id = j.at("id").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("request without a string id: ") + e.what());
  }
  std::future<std::string> reply;
  {
    std::lock_guard<std::mutex> lock(state_->pending_mu);
    if (state_->closed) throw TransportError("scorer process is not running");
    auto [it, inserted] = state_->pending.try_emplace(id);
    if (!inserted) throw ProtocolError("request id '" + id + "' is already in flight");
    reply = it->second.get_future();
  }
  {
    std::lock_guard<std::mutex> lock(state_->write_mu);
    std::string framed = request_line + "\n";
    const char* p = framed.data();
    size_t left = framed.size();
    while (left > 0) {
      const ssize_t n = state_->to_child < 0 ? -1 : ::write(state_->to_child, p, left);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) {
        std::lock_guard<std::mutex> plock(state_->pending_mu);
        state_->pending.erase(id);
        throw TransportError("writing to scorer process failed: " +
                             std::string(std::strerror(errno)));
      }
      p += n;
      left -= static_cast<size_t>(n);
    }
  }
  return reply.get();
}

}  // namespace privbias
