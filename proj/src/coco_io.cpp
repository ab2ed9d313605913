#include "foliage/coco_io.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace foliage {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw DatasetError(msg); }

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(where + ": missing \"" + key + "\"");
  return *it;
}

std::int64_t as_int(const json& v, const std::string& what) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d == std::floor(d)) return std::int64_t(d);
  }
  fail(what + " must be an integer");
}

double as_number(const json& v, const std::string& what) {
  if (!v.is_number()) fail(what + " must be a number");
  return v.get<double>();
}

json extras_of(const json& obj, std::initializer_list<const char*> known) {
  json extra = json::object();
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool is_known = false;
    for (const char* k : known) is_known = is_known || it.key() == k;
    if (!is_known) extra[it.key()] = it.value();
  }
  return extra;
}

Segmentation parse_segmentation(const json& v, const std::string& where) {
  if (v.is_null()) return std::monostate{};
  if (v.is_array()) {
    std::vector<Polygon> polys;
    for (const json& flat : v) {
      if (!flat.is_array() || flat.size() % 2 != 0) fail(where + ": polygon must be a flat array of x,y pairs");
      Polygon poly;
      for (std::size_t i = 0; i < flat.size(); i += 2)
        poly.push_back({as_number(flat[i], where + " polygon x"), as_number(flat[i + 1], where + " polygon y")});
      polys.push_back(std::move(poly));
    }
    return polys;
  }
  if (v.is_object()) {
    const json& size = require(v, "size", where + " segmentation");
    if (!size.is_array() || size.size() != 2) fail(where + ": RLE size must be [h, w]");
    const int h = int(as_int(size[0], where + " RLE height"));
    const int w = int(as_int(size[1], where + " RLE width"));
    const json& counts = require(v, "counts", where + " segmentation");
    if (counts.is_string()) return CompressedRle{h, w, counts.get<std::string>()};
    if (counts.is_array()) {
      RleCounts r{h, w, {}};
      for (const json& c : counts) {
        const std::int64_t n = as_int(c, where + " RLE count");
        if (n < 0 || n > std::int64_t(UINT32_MAX)) fail(where + ": RLE count out of range");
        r.counts.push_back(std::uint32_t(n));
      }
      return r;
    }
    fail(where + ": RLE counts must be a string or an array");
  }
  fail(where + ": unsupported segmentation form");
}

json segmentation_to_json(const Segmentation& s) {
  if (const auto* polys = std::get_if<std::vector<Polygon>>(&s)) {
    json arr = json::array();
    for (const Polygon& p : *polys) {
      json flat = json::array();
      for (const Point& pt : p) {
        flat.push_back(pt.x);
        flat.push_back(pt.y);
      }
      arr.push_back(std::move(flat));
    }
    return arr;
  }
  if (const auto* r = std::get_if<RleCounts>(&s)) return json{{"size", {r->height, r->width}}, {"counts", r->counts}};
  if (const auto* c = std::get_if<CompressedRle>(&s)) return json{{"size", {c->height, c->width}}, {"counts", c->counts}};
  return nullptr;
}

}  // namespace

const ImageRecord* Dataset::find_image(std::int64_t id) const {
  for (const ImageRecord& im : images)
    if (im.id == id) return &im;
  return nullptr;
}

std::optional<std::int64_t> Dataset::category_id(std::string_view name) const {
  for (const Category& c : categories)
    if (c.name == name) return c.id;
  return std::nullopt;
}

Dataset parse_dataset(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    fail(std::string("malformed COCO document: ") + e.what());
  }
  if (!doc.is_object()) fail("COCO document must be a JSON object");

  auto array_at = [&](const char* key) -> json {
    auto it = doc.find(key);
    if (it == doc.end() || it->is_null()) return json::array();
    if (!it->is_array()) fail(std::string("\"") + key + "\" must be an array");
    return *it;
  };

  Dataset d;
  d.extra = extras_of(doc, {"images", "annotations", "categories"});

  for (const json& c : array_at("categories")) {
    if (!c.is_object()) fail("category entry must be an object");
    Category cat;
    cat.id = as_int(require(c, "id", "category"), "category id");
    const json& name = require(c, "name", "category " + std::to_string(cat.id));
    if (!name.is_string()) fail("category " + std::to_string(cat.id) + ": name must be a string");
    cat.name = name.get<std::string>();
    cat.extra = extras_of(c, {"id", "name"});
    d.categories.push_back(std::move(cat));
  }

  for (const json& im : array_at("images")) {
    if (!im.is_object()) fail("image entry must be an object");
    ImageRecord rec;
    rec.id = as_int(require(im, "id", "image"), "image id");
    const std::string where = "image " + std::to_string(rec.id);
    const json& fname = require(im, "file_name", where);
    if (!fname.is_string()) fail(where + ": file_name must be a string");
    rec.file_name = fname.get<std::string>();
    rec.width = int(as_int(require(im, "width", where), where + " width"));
    rec.height = int(as_int(require(im, "height", where), where + " height"));
    rec.extra = extras_of(im, {"id", "file_name", "width", "height"});
    d.images.push_back(std::move(rec));
  }

  for (const json& a : array_at("annotations")) {
    if (!a.is_object()) fail("annotation entry must be an object");
    Annotation ann;
    ann.id = as_int(require(a, "id", "annotation"), "annotation id");
    const std::string where = "annotation " + std::to_string(ann.id);
    ann.image_id = as_int(require(a, "image_id", where), where + " image_id");
    ann.category_id = as_int(require(a, "category_id", where), where + " category_id");
    const json& bbox = require(a, "bbox", where);
    if (!bbox.is_array() || bbox.size() != 4) fail(where + ": bbox must be [x, y, w, h]");
    ann.bbox = Box{as_number(bbox[0], where + " bbox"), as_number(bbox[1], where + " bbox"),
                   as_number(bbox[2], where + " bbox"), as_number(bbox[3], where + " bbox")};
    if (auto it = a.find("area"); it != a.end()) ann.area = as_number(*it, where + " area");
    if (auto it = a.find("segmentation"); it != a.end()) ann.segmentation = parse_segmentation(*it, where);
    if (auto it = a.find("iscrowd"); it != a.end()) {
      if (it->is_boolean()) ann.iscrowd = it->get<bool>();
      else ann.iscrowd = as_int(*it, where + " iscrowd") != 0;
    }

    std::initializer_list<const char*> known = {"id", "image_id", "category_id", "bbox", "area", "segmentation",
                                                "iscrowd", "attributes"};
    auto attrs = a.find("attributes");
    if (attrs != a.end() && attrs->is_object() && attrs->contains("occlusion_level")) {
      OcclusionAttributes oa;
      const std::int64_t lvl = as_int((*attrs)["occlusion_level"], where + " occlusion_level");
      if (lvl < 0 || lvl > 3) fail(where + ": occlusion_level must be 0..3");
      oa.level = level_from_index(int(lvl));
      if (auto vf = attrs->find("visible_fraction"); vf != attrs->end()) {
        oa.visible_fraction = as_number(*vf, where + " visible_fraction");
        if (*oa.visible_fraction < 0.0 || *oa.visible_fraction > 1.0)
          fail(where + ": visible_fraction must lie in [0, 1]");
      }
      if (auto fo = attrs->find("fully_occluded"); fo != attrs->end()) {
        if (!fo->is_boolean()) fail(where + ": fully_occluded must be a boolean");
        oa.fully_occluded = fo->get<bool>();
      }
      oa.extra = extras_of(*attrs, {"occlusion_level", "visible_fraction", "fully_occluded"});
      ann.attributes = std::move(oa);
      ann.extra = extras_of(a, known);
    } else {
      // Attributes without an occlusion level are carried opaquely.
      ann.extra = extras_of(a, {"id", "image_id", "category_id", "bbox", "area", "segmentation", "iscrowd"});
    }
    d.annotations.push_back(std::move(ann));
  }

  validate_dataset(d);
  return d;
}

void validate_dataset(const Dataset& d) {
  std::unordered_map<std::int64_t, const ImageRecord*> images;
  for (const ImageRecord& im : d.images) {
    if (!images.emplace(im.id, &im).second) fail("duplicate image id " + std::to_string(im.id));
    if (im.width <= 0 || im.height <= 0) fail("image " + std::to_string(im.id) + " has non-positive size");
  }
  std::set<std::int64_t> categories;
  for (const Category& c : d.categories)
    if (!categories.insert(c.id).second) fail("duplicate category id " + std::to_string(c.id));

  // Real COCO boxes overshoot the image edge by a fraction of a pixel.
  constexpr double kBoundsSlack = 1.0;
  std::set<std::int64_t> ann_ids;
  for (const Annotation& a : d.annotations) {
    const std::string where = "annotation " + std::to_string(a.id);
    if (!ann_ids.insert(a.id).second) fail("duplicate annotation id " + std::to_string(a.id));
    auto im = images.find(a.image_id);
    if (im == images.end()) fail(where + " references missing image id " + std::to_string(a.image_id));
    if (!categories.count(a.category_id))
      fail(where + " references missing category id " + std::to_string(a.category_id));
    const Box& b = a.bbox;
    if (!(b.w >= 0 && b.h >= 0)) fail(where + ": bbox has negative size");
    if (b.x < -kBoundsSlack || b.y < -kBoundsSlack || b.right() > im->second->width + kBoundsSlack ||
        b.bottom() > im->second->height + kBoundsSlack)
      fail(where + ": bbox outside image " + std::to_string(a.image_id));
  }
}

std::string serialize_dataset(const Dataset& d) {
  json doc = d.extra;
  json images = json::array();
  for (const ImageRecord& im : d.images) {
    json j = im.extra;
    j["id"] = im.id;
    j["file_name"] = im.file_name;
    j["width"] = im.width;
    j["height"] = im.height;
    images.push_back(std::move(j));
  }
  json categories = json::array();
  for (const Category& c : d.categories) {
    json j = c.extra;
    j["id"] = c.id;
    j["name"] = c.name;
    categories.push_back(std::move(j));
  }
  json annotations = json::array();
  for (const Annotation& a : d.annotations) {
    json j = a.extra;
    j["id"] = a.id;
    j["image_id"] = a.image_id;
    j["category_id"] = a.category_id;
    j["bbox"] = {a.bbox.x, a.bbox.y, a.bbox.w, a.bbox.h};
    j["area"] = a.area;
    j["iscrowd"] = a.iscrowd ? 1 : 0;
    if (!std::holds_alternative<std::monostate>(a.segmentation)) j["segmentation"] = segmentation_to_json(a.segmentation);
    if (a.attributes) {
      json attrs = a.attributes->extra;
      attrs["occlusion_level"] = level_index(a.attributes->level);
      if (a.attributes->visible_fraction) attrs["visible_fraction"] = *a.attributes->visible_fraction;
      if (a.attributes->fully_occluded) attrs["fully_occluded"] = *a.attributes->fully_occluded;
      j["attributes"] = std::move(attrs);
    }
    annotations.push_back(std::move(j));
  }
  doc["images"] = std::move(images);
  doc["annotations"] = std::move(annotations);
  doc["categories"] = std::move(categories);
  return doc.dump() + "\n";
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open dataset " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str());
}

void save_dataset(const Dataset& d, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError("cannot write dataset " + path);
  out << serialize_dataset(d);
  if (!out) throw DatasetError("write failed for " + path);
}

}  // namespace foliage
