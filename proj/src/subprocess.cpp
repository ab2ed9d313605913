#include <atomic>
#include <cerrno>
#include <csignal>
#include <cstdlib>
#include <cstring>
#include <optional>

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include "foliage/detector.hpp"

namespace foliage {

using nlohmann::json;

namespace {

std::filesystem::path make_staging_dir() {
  static std::atomic<int> counter{0};
  const char* env = std::getenv("FOLIAGE_TMPDIR");
  const std::filesystem::path root = (env && *env) ? std::filesystem::path(env) : std::filesystem::temp_directory_path();
  const auto dir = root / ("foliage-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DetectorError("cannot create crop staging directory " + dir.string() + ": " + ec.message());
  return dir;
}

bool write_all(int fd, const std::string& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    off += std::size_t(n);
  }
  return true;
}

std::optional<std::string> read_line(std::FILE* f) {
  std::string line;
  int c;
  while ((c = std::fgetc(f)) != EOF) {
    if (c == '\n') return line;
    line.push_back(char(c));
  }
  if (line.empty()) return std::nullopt;
  return line;
}

}  // namespace

SubprocessDetector::SubprocessDetector(std::string command) : command_(std::move(command)) {
  // A dead child must surface as an error on write, not kill this process.
  std::signal(SIGPIPE, SIG_IGN);
  staging_ = make_staging_dir();

  int in_pipe[2];
  int out_pipe[2];
  if (::pipe(in_pipe) != 0) throw DetectorError(std::string("pipe failed: ") + std::strerror(errno));
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw DetectorError(std::string("pipe failed: ") + std::strerror(errno));
  }
  const pid_t pid = ::fork();
  if (pid < 0) {
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
    throw DetectorError(std::string("fork failed: ") + std::strerror(errno));
  }
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
    ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  ::fcntl(in_pipe[1], F_SETFD, FD_CLOEXEC);
  ::fcntl(out_pipe[0], F_SETFD, FD_CLOEXEC);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = ::fdopen(out_pipe[0], "r");
}

SubprocessDetector::~SubprocessDetector() { shutdown(); }

void SubprocessDetector::shutdown() {
  if (to_child_ >= 0) ::close(to_child_);
  to_child_ = -1;
  if (from_child_) std::fclose(from_child_);
  from_child_ = nullptr;
  if (pid_ > 0) {
    int status = 0;
    while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
    }
  }
  pid_ = -1;
  std::error_code ec;
  if (!staging_.empty()) std::filesystem::remove_all(staging_, ec);
}

std::vector<Detection> SubprocessDetector::detect(const CropRequest& req) {
  const std::string rid = std::to_string(req.request_id);
  if (!req.crop) throw DetectorError("request " + rid + " has no crop");
  if (pid_ < 0 || !from_child_) throw DetectorError("request " + rid + ": detector process is not running");

  const auto crop_path = staging_ / ("crop_" + rid + ".png");
  write_png(crop_path, *req.crop);
  const std::string line = json{{"id", req.request_id}, {"image", crop_path.string()}}.dump() + "\n";
  if (!write_all(to_child_, line)) {
    std::filesystem::remove(crop_path);
    throw DetectorError("request " + rid + ": detector process closed its input (crashed?)");
  }
  const std::optional<std::string> reply = read_line(from_child_);
  std::error_code ec;
  std::filesystem::remove(crop_path, ec);
  if (!reply) throw DetectorError("request " + rid + ": detector process exited without responding");

  json resp;
  try {
    resp = json::parse(*reply);
  } catch (const json::parse_error& e) {
    throw ProtocolError("request " + rid + ": response is not JSON: " + e.what());
  }
  if (!resp.is_object() || !resp.contains("id") || !resp["id"].is_number_integer())
    throw ProtocolError("request " + rid + ": response lacks an integer id");
  const std::int64_t got = resp["id"].get<std::int64_t>();
  if (got != req.request_id)
    throw ProtocolError("response id " + std::to_string(got) + " does not match request id " + rid);
  if (!resp.contains("detections") || !resp["detections"].is_array())
    throw ProtocolError("request " + rid + ": response lacks a detections list");

  std::vector<Detection> dets;
  try {
    for (const json& d : resp["detections"]) dets.push_back(detection_from_json(d));
  } catch (const ProtocolError& e) {
    throw ProtocolError("request " + rid + ": " + e.what());
  }
  clip_to_crop(dets, req.crop->width(), req.crop->height());
  return dets;
}

}  // namespace foliage
