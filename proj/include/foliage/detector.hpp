#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "foliage/geometry.hpp"
#include "foliage/image.hpp"

namespace foliage {

class DetectorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The child broke the wire contract (bad JSON, wrong id, bad field).
class ProtocolError : public DetectorError {
 public:
  using DetectorError::DetectorError;
};

struct Detection {
  Box bbox;  // crop-local
  double score = 0.0;
  std::string category = "person";

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// One crop submitted for detection. `image_id` and `rect` locate the crop
/// in its source image (used as the lookup key in precomputed mode).
struct CropRequest {
  std::int64_t request_id = 0;
  std::int64_t image_id = 0;
  PixelRect rect;
  const RgbImage* crop = nullptr;
};

/// Pluggable detector. Implementations are subprocess, precomputed and mock.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::vector<Detection> detect(const CropRequest& req) = 0;
  /// True when detect() may be called from several threads at once.
  virtual bool shareable() const = 0;
  virtual std::string describe() const = 0;
};

/// Detections are 4-connected components of pixels whose channels all lie
/// within `tolerance` of `color`; score = component area / bbox area.
std::vector<Detection> detect_mock(const RgbImage& crop, Rgb color, int tolerance);

class MockDetector final : public Detector {
 public:
  MockDetector(Rgb color, int tolerance) : color_(color), tolerance_(tolerance) {}
  std::vector<Detection> detect(const CropRequest& req) override;
  bool shareable() const override { return true; }
  std::string describe() const override;

 private:
  Rgb color_;
  int tolerance_;
};

/// Results file: JSON object mapping "imageid:x:y:w:h" to detection lists.
class PrecomputedDetector final : public Detector {
 public:
  explicit PrecomputedDetector(std::unordered_map<std::string, std::vector<Detection>> table)
      : table_(std::move(table)) {}
  static PrecomputedDetector load(const std::filesystem::path& path);
  static PrecomputedDetector parse(std::string_view document);
  static std::string key(std::int64_t image_id, const PixelRect& rect);

  std::vector<Detection> detect(const CropRequest& req) override;
  bool shareable() const override { return true; }
  std::string describe() const override { return "precomputed"; }

 private:
  std::unordered_map<std::string, std::vector<Detection>> table_;
};

/// Runs `command` under /bin/sh and talks newline-delimited JSON over its
/// stdin/stdout, one request in flight:
///   request   {"id":int,"image":"<path to PNG crop>"}
///   response  {"id":int,"detections":[{"bbox":[x,y,w,h],"score":float,"category":"person"}]}
/// Crops are staged under $FOLIAGE_TMPDIR (or the system temp directory).
class SubprocessDetector final : public Detector {
 public:
  explicit SubprocessDetector(std::string command);
  ~SubprocessDetector() override;
  SubprocessDetector(const SubprocessDetector&) = delete;
  SubprocessDetector& operator=(const SubprocessDetector&) = delete;

  std::vector<Detection> detect(const CropRequest& req) override;
  bool shareable() const override { return false; }
  std::string describe() const override { return "subprocess: " + command_; }

 private:
  void shutdown();

  std::string command_;
  std::filesystem::path staging_;
  int pid_ = -1;
  int to_child_ = -1;
  std::FILE* from_child_ = nullptr;
};

nlohmann::json detection_to_json(const Detection& d);
/// Throws ProtocolError on missing fields or a score outside [0, 1].
Detection detection_from_json(const nlohmann::json& j);

/// Clips each bbox to a width x height crop.
void clip_to_crop(std::vector<Detection>& dets, int width, int height);

/// "mock:R,G,B[:TOL]", "precomputed:<file>", or "subprocess:<command line>".
std::unique_ptr<Detector> make_detector(std::string_view spec);

}  // namespace foliage
