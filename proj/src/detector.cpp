#include "foliage/detector.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace foliage {

using nlohmann::json;

std::vector<Detection> detect_mock(const RgbImage& crop, Rgb color, int tolerance) {
  const int w = crop.width();
  const int h = crop.height();
  auto matches = [&](int x, int y) {
    const std::uint8_t* p = crop.pixel(x, y);
    return std::abs(int(p[0]) - color.r) <= tolerance && std::abs(int(p[1]) - color.g) <= tolerance &&
           std::abs(int(p[2]) - color.b) <= tolerance;
  };

  std::vector<std::uint8_t> seen(std::size_t(w) * std::size_t(h), 0);
  std::vector<std::pair<int, int>> stack;
  std::vector<Detection> out;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t idx = std::size_t(y) * std::size_t(w) + std::size_t(x);
      if (seen[idx] || !matches(x, y)) continue;
      int min_x = x, max_x = x, min_y = y, max_y = y;
      std::int64_t area = 0;
      seen[idx] = 1;
      stack.assign(1, {x, y});
      while (!stack.empty()) {
        const auto [cx, cy] = stack.back();
        stack.pop_back();
        ++area;
        min_x = std::min(min_x, cx);
        max_x = std::max(max_x, cx);
        min_y = std::min(min_y, cy);
        max_y = std::max(max_y, cy);
        constexpr int kDx[4] = {1, -1, 0, 0};
        constexpr int kDy[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int nx = cx + kDx[k];
          const int ny = cy + kDy[k];
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const std::size_t nidx = std::size_t(ny) * std::size_t(w) + std::size_t(nx);
          if (seen[nidx] || !matches(nx, ny)) continue;
          seen[nidx] = 1;
          stack.emplace_back(nx, ny);
        }
      }
      const int bw = max_x - min_x + 1;
      const int bh = max_y - min_y + 1;
      out.push_back(Detection{Box{double(min_x), double(min_y), double(bw), double(bh)},
                              double(area) / (double(bw) * double(bh)), "person"});
    }
  }
  return out;
}

std::vector<Detection> MockDetector::detect(const CropRequest& req) {
  if (!req.crop) throw DetectorError("request " + std::to_string(req.request_id) + " has no crop");
  return detect_mock(*req.crop, color_, tolerance_);
}

std::string MockDetector::describe() const {
  return "mock: rgb(" + std::to_string(color_.r) + "," + std::to_string(color_.g) + "," + std::to_string(color_.b) +
         ") tol " + std::to_string(tolerance_);
}

json detection_to_json(const Detection& d) {
  return json{{"bbox", {d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h}}, {"score", d.score}, {"category", d.category}};
}

Detection detection_from_json(const json& j) {
  if (!j.is_object()) throw ProtocolError("detection must be an object");
  auto bbox = j.find("bbox");
  if (bbox == j.end() || !bbox->is_array() || bbox->size() != 4)
    throw ProtocolError("detection bbox must be [x, y, w, h]");
  for (const json& v : *bbox)
    if (!v.is_number()) throw ProtocolError("detection bbox entries must be numbers");
  auto score = j.find("score");
  if (score == j.end() || !score->is_number()) throw ProtocolError("detection score must be a number");
  Detection d;
  d.bbox = Box{(*bbox)[0].get<double>(), (*bbox)[1].get<double>(), (*bbox)[2].get<double>(), (*bbox)[3].get<double>()};
  if (d.bbox.w < 0 || d.bbox.h < 0) throw ProtocolError("detection bbox has negative size");
  d.score = score->get<double>();
  if (!(d.score >= 0.0 && d.score <= 1.0)) throw ProtocolError("detection score outside [0, 1]");
  if (auto cat = j.find("category"); cat != j.end()) {
    if (!cat->is_string()) throw ProtocolError("detection category must be a string");
    d.category = cat->get<std::string>();
  }
  return d;
}

void clip_to_crop(std::vector<Detection>& dets, int width, int height) {
  for (Detection& d : dets) {
    const double x0 = std::clamp(d.bbox.x, 0.0, double(width));
    const double y0 = std::clamp(d.bbox.y, 0.0, double(height));
    const double x1 = std::clamp(d.bbox.right(), 0.0, double(width));
    const double y1 = std::clamp(d.bbox.bottom(), 0.0, double(height));
    d.bbox = Box{x0, y0, x1 - x0, y1 - y0};
  }
}

std::string PrecomputedDetector::key(std::int64_t image_id, const PixelRect& r) {
  return std::to_string(image_id) + ":" + std::to_string(r.x) + ":" + std::to_string(r.y) + ":" +
         std::to_string(r.w) + ":" + std::to_string(r.h);
}

PrecomputedDetector PrecomputedDetector::parse(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw DetectorError(std::string("malformed precomputed results: ") + e.what());
  }
  if (!doc.is_object()) throw DetectorError("precomputed results must be a JSON object");
  std::unordered_map<std::string, std::vector<Detection>> table;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (!it->is_array()) throw DetectorError("precomputed entry " + it.key() + " must be a list");
    std::vector<Detection> dets;
    try {
      for (const json& d : *it) dets.push_back(detection_from_json(d));
    } catch (const ProtocolError& e) {
      throw DetectorError("precomputed entry " + it.key() + ": " + e.what());
    }
    table.emplace(it.key(), std::move(dets));
  }
  return PrecomputedDetector(std::move(table));
}

PrecomputedDetector PrecomputedDetector::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DetectorError("cannot open precomputed results " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::vector<Detection> PrecomputedDetector::detect(const CropRequest& req) {
  const std::string k = key(req.image_id, req.rect);
  auto it = table_.find(k);
  if (it == table_.end())
    throw DetectorError("request " + std::to_string(req.request_id) + ": no precomputed results for key " + k);
  std::vector<Detection> dets = it->second;
  clip_to_crop(dets, req.rect.w, req.rect.h);
  return dets;
}

std::unique_ptr<Detector> make_detector(std::string_view spec) {
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos)
    throw std::invalid_argument("detector spec must look like mode:args, got \"" + std::string(spec) + "\"");
  const std::string_view mode = spec.substr(0, colon);
  const std::string_view args = spec.substr(colon + 1);

  if (mode == "subprocess") {
    if (args.empty()) throw std::invalid_argument("subprocess detector needs a command line");
    return std::make_unique<SubprocessDetector>(std::string(args));
  }
  if (mode == "precomputed") {
    if (args.empty()) throw std::invalid_argument("precomputed detector needs a results file");
    return std::make_unique<PrecomputedDetector>(PrecomputedDetector::load(std::string(args)));
  }
  if (mode == "mock") {
    // R,G,B[:TOL]
    std::vector<int> values;
    std::string_view rest = args;
    int tolerance = 0;
    if (const auto c = rest.find(':'); c != std::string_view::npos) {
      const std::string_view tol = rest.substr(c + 1);
      auto [p, ec] = std::from_chars(tol.data(), tol.data() + tol.size(), tolerance);
      if (ec != std::errc() || p != tol.data() + tol.size() || tolerance < 0)
        throw std::invalid_argument("mock detector tolerance must be a non-negative integer");
      rest = rest.substr(0, c);
    }
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const std::string_view part = rest.substr(0, comma);
      int v = 0;
      auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
      if (ec != std::errc() || p != part.data() + part.size() || v < 0 || v > 255)
        throw std::invalid_argument("mock detector colour must be R,G,B with 0..255 components");
      values.push_back(v);
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
    if (values.size() != 3) throw std::invalid_argument("mock detector colour must be R,G,B");
    return std::make_unique<MockDetector>(
        Rgb{std::uint8_t(values[0]), std::uint8_t(values[1]), std::uint8_t(values[2])}, tolerance);
  }
  throw std::invalid_argument("unknown detector mode \"" + std::string(mode) + "\"");
}

}  // namespace foliage
