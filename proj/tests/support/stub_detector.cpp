// Test double for the subprocess detector protocol.
//   stub_detector echo    canned detections (second one spans the whole crop)
//   stub_detector red     colour-blob detections for pure red, like the mock
//   stub_detector badid   replies with id + 1
//   stub_detector garbage replies with a line that is not JSON
//   stub_detector crash   exits after reading the first request
#include <iostream>
#include <string>

#include "json.hpp"

#include "foliage/detector.hpp"
#include "foliage/image.hpp"

using nlohmann::json;

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "echo";
  std::string line;
  while (std::getline(std::cin, line)) {
    const json req = json::parse(line);
    const std::int64_t id = req.at("id").get<std::int64_t>();
    if (mode == "crash") return 3;
    if (mode == "garbage") {
      std::cout << "this is not json" << std::endl;
      continue;
    }
    const foliage::RgbImage crop = foliage::read_png_rgb(req.at("image").get<std::string>());
    json dets = json::array();
    if (mode == "red") {
      for (const auto& d : foliage::detect_mock(crop, foliage::Rgb{255, 0, 0}, 0))
        dets.push_back(foliage::detection_to_json(d));
    } else {
      dets.push_back({{"bbox", {1, 2, 3, 4}}, {"score", 0.25}, {"category", "person"}});
      dets.push_back({{"bbox", {0, 0, crop.width(), crop.height()}}, {"score", 0.75}, {"category", "dog"}});
    }
    std::cout << json{{"id", mode == "badid" ? id + 1 : id}, {"detections", dets}}.dump() << std::endl;
  }
  return 0;
}
