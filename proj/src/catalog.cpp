#include "loadshift/catalog.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace loadshift {

namespace {

using nlohmann::json;

constexpr std::string_view kCatalogFormat = "loadshift-catalog";
constexpr std::string_view kFrontFormat = "loadshift-front";
constexpr int kFileVersion = 1;

// Catalog accuracies carry three or four decimals; the gain test must
// not flip on binary rounding of e.g. 0.935 - 0.934.
constexpr double kAccuracyTolerance = 1e-9;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CatalogError(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw CatalogError(fmt::format("malformed catalog document: {}", e.what()));
  }
}

template <typename T>
T require(const json& obj, const char* key, std::string_view where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw CatalogError(fmt::format("{}: missing field '{}'", where, key));
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw CatalogError(fmt::format("{}: field '{}' has the wrong type", where, key));
  }
}

FeatureMask parse_mask(const json& value, std::string_view where) {
  if (value.is_string()) {
    const auto text = value.get<std::string>();
    if (text.size() < 3 || (text.rfind("0x", 0) != 0 && text.rfind("0X", 0) != 0)) {
      throw CatalogError(fmt::format("{}: mask '{}' is not a 0x-prefixed hex string", where, text));
    }
    std::size_t used = 0;
    unsigned long bits = 0;
    try {
      bits = std::stoul(text.substr(2), &used, 16);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != text.size() - 2 || bits > 0xffffffffUL) {
      throw CatalogError(fmt::format("{}: mask '{}' is not valid hex", where, text));
    }
    return FeatureMask(static_cast<std::uint32_t>(bits));
  }
  if (value.is_array()) {
    std::uint32_t bits = 0;
    for (const auto& id : value) {
      if (!id.is_number_unsigned() || id.get<std::uint64_t>() >= kMaxCatalogFeatures) {
        throw CatalogError(fmt::format("{}: mask id list contains an invalid id", where));
      }
      bits |= 1u << id.get<unsigned>();
    }
    return FeatureMask(bits);
  }
  throw CatalogError(fmt::format("{}: mask must be a hex string or an id list", where));
}

void check_accuracy(double accuracy, std::string_view where) {
  if (!(accuracy >= 0.0 && accuracy <= 1.0)) {
    throw CatalogError(fmt::format("{}: accuracy {} outside [0, 1]", where, accuracy));
  }
}

struct ParsedModel {
  FeatureMask mask;
  std::optional<Cycles> cost;
  double accuracy = 0.0;
};

struct ParsedDocument {
  std::string format;
  Catalog catalog;
  std::vector<ParsedModel> models;
};

ParsedDocument parse_document(std::string_view text) {
  const json doc = parse_json(text);
  if (!doc.is_object()) throw CatalogError("catalog document must be a JSON object");

  ParsedDocument out;
  out.format = require<std::string>(doc, "format", "document");
  if (out.format != kCatalogFormat && out.format != kFrontFormat) {
    throw CatalogError(fmt::format("unknown document format '{}'", out.format));
  }
  const int version = require<int>(doc, "version", "document");
  if (version != kFileVersion) {
    throw CatalogError(fmt::format("unsupported {} version {}", out.format, version));
  }

  Catalog& cat = out.catalog;
  cat.name = doc.value("name", std::string{});
  cat.base_packet_cost = require<Cycles>(doc, "base_packet_cost", "document");
  if (doc.contains("first_n_packets") && !doc["first_n_packets"].is_null()) {
    const auto n = require<std::int64_t>(doc, "first_n_packets", "document");
    if (n < 1) throw CatalogError("first_n_packets must be >= 1 when present");
    cat.first_n_packets = static_cast<std::uint32_t>(n);
  }

  const auto& features = doc.contains("features") ? doc["features"] : json();
  if (!features.is_array() || features.empty()) {
    throw CatalogError("document: 'features' must be a non-empty array");
  }
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto where = fmt::format("features[{}]", i);
    const auto& f = features[i];
    FeatureSpec spec;
    spec.id = require<unsigned>(f, "id", where);
    spec.name = require<std::string>(f, "name", where);
    if (!f.contains("unit_cost") || !f["unit_cost"].is_number_integer() ||
        f["unit_cost"].get<std::int64_t>() < 0) {
      throw CatalogError(fmt::format("{}: unit_cost must be a non-negative integer", where));
    }
    spec.unit_cost = f["unit_cost"].get<Cycles>();
    spec.kind = parse_feature_kind(require<std::string>(f, "kind", where));
    cat.features.push_back(std::move(spec));
  }

  const auto& models = doc.contains("models") ? doc["models"] : json();
  if (!models.is_array()) throw CatalogError("document: 'models' must be an array");
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto where = fmt::format("models[{}]", i);
    const auto& m = models[i];
    if (!m.is_object() || !m.contains("mask")) {
      throw CatalogError(fmt::format("{}: missing field 'mask'", where));
    }
    ParsedModel pm;
    pm.mask = parse_mask(m["mask"], where);
    if (m.contains("cost")) {
      if (!m["cost"].is_number_integer() || m["cost"].get<std::int64_t>() < 0) {
        throw CatalogError(fmt::format("{}: cost must be a non-negative integer", where));
      }
      pm.cost = m["cost"].get<Cycles>();
    }
    if (!m.contains("accuracy") || !m["accuracy"].is_number()) {
      throw CatalogError(fmt::format("{}: missing numeric field 'accuracy'", where));
    }
    pm.accuracy = m["accuracy"].get<double>();
    check_accuracy(pm.accuracy, where);
    out.models.push_back(pm);
  }

  cat.validate();
  for (std::size_t i = 0; i < out.models.size(); ++i) {
    const auto& pm = out.models[i];
    const auto where = fmt::format("models[{}]", i);
    if (pm.mask.empty() || !cat.mask_valid(pm.mask)) {
      throw CatalogError(fmt::format("{}: mask {} is not valid over the catalog features", where,
                                     pm.mask.hex()));
    }
    const Cycles summed = aggregate_cost(cat, pm.mask);
    if (pm.cost && *pm.cost != summed) {
      throw CatalogError(fmt::format("{}: declared cost {} differs from summed unit cost {}",
                                     where, *pm.cost, summed));
    }
    if (!cat.accuracy_map.emplace(pm.mask.bits(), pm.accuracy).second) {
      throw CatalogError(fmt::format("{}: duplicate mask {}", where, pm.mask.hex()));
    }
  }
  return out;
}

json features_json(const Catalog& catalog) {
  json arr = json::array();
  for (const auto& f : catalog.features) {
    arr.push_back({{"id", f.id}, {"name", f.name}, {"unit_cost", f.unit_cost},
                   {"kind", std::string(to_string(f.kind))}});
  }
  return arr;
}

json header_json(const Catalog& catalog, std::string_view format) {
  json doc;
  doc["format"] = std::string(format);
  doc["version"] = kFileVersion;
  doc["name"] = catalog.name;
  doc["base_packet_cost"] = catalog.base_packet_cost;
  doc["first_n_packets"] =
      catalog.first_n_packets ? json(*catalog.first_n_packets) : json(nullptr);
  doc["features"] = features_json(catalog);
  return doc;
}

json ids_json(FeatureMask mask) {
  json ids = json::array();
  for (auto id : mask.ids()) ids.push_back(id);
  return ids;
}

}  // namespace

std::string_view to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::counter: return "counter";
    case FeatureKind::throughput: return "throughput";
    case FeatureKind::latency: return "latency";
    case FeatureKind::retransmission: return "retransmission";
    case FeatureKind::segment: return "segment";
    case FeatureKind::raw_header: return "raw_header";
  }
  return "unknown";
}

FeatureKind parse_feature_kind(std::string_view text) {
  for (auto kind : {FeatureKind::counter, FeatureKind::throughput, FeatureKind::latency,
                    FeatureKind::retransmission, FeatureKind::segment, FeatureKind::raw_header}) {
    if (to_string(kind) == text) return kind;
  }
  throw CatalogError(fmt::format("unknown feature kind '{}'", text));
}

FeatureMask FeatureMask::of(std::initializer_list<unsigned> ids) {
  std::uint32_t bits = 0;
  for (auto id : ids) bits |= 1u << id;
  return FeatureMask(bits);
}

int FeatureMask::count() const { return std::popcount(bits_); }

std::vector<unsigned> FeatureMask::ids() const {
  std::vector<unsigned> out;
  for (unsigned i = 0; i < 32; ++i) {
    if (contains(i)) out.push_back(i);
  }
  return out;
}

std::string FeatureMask::hex() const { return fmt::format("0x{:x}", bits_); }

ParetoFront::ParetoFront(std::vector<CandidateModel> models) : models_(std::move(models)) {
  for (std::size_t i = 1; i < models_.size(); ++i) {
    const auto& lo = models_[i - 1];
    const auto& hi = models_[i];
    if (!(lo.cost < hi.cost && lo.accuracy < hi.accuracy)) {
      throw CatalogError(fmt::format(
          "front is not strictly increasing at m{}: ({}, {}) -> ({}, {})", i + 1, lo.cost,
          lo.accuracy, hi.cost, hi.accuracy));
    }
  }
}

const CandidateModel& ParetoFront::at(std::size_t index) const {
  if (index < 1 || index > models_.size()) {
    throw CatalogError(fmt::format("front index {} outside [1, {}]", index, models_.size()));
  }
  return models_[index - 1];
}

void Catalog::validate() const {
  if (features.empty()) throw CatalogError("catalog has no features");
  if (features.size() > kMaxCatalogFeatures) {
    throw CatalogError(fmt::format("catalog has {} features; at most {} are supported",
                                   features.size(), kMaxCatalogFeatures));
  }
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].id != i) {
      throw CatalogError(fmt::format("feature ids must be unique and contiguous from 0; "
                                     "position {} has id {}",
                                     i, features[i].id));
    }
  }
  for (const auto& [bits, acc] : accuracy_map) {
    if (!mask_valid(FeatureMask(bits))) {
      throw CatalogError(fmt::format("accuracy entry for invalid mask {}", FeatureMask(bits).hex()));
    }
    check_accuracy(acc, "accuracy_map");
  }
}

FeatureMask Catalog::full_mask() const {
  if (features.size() >= 32) return FeatureMask(0xffffffffu);
  return FeatureMask((1u << features.size()) - 1u);
}

bool Catalog::mask_valid(FeatureMask mask) const {
  return (mask.bits() & ~full_mask().bits()) == 0;
}

Cycles aggregate_cost(const Catalog& catalog, FeatureMask mask) {
  if (!catalog.mask_valid(mask)) {
    throw CatalogError(fmt::format("mask {} sets bits beyond the {} catalog features", mask.hex(),
                                   catalog.features.size()));
  }
  Cycles total = 0;
  for (auto id : mask.ids()) total += catalog.features[id].unit_cost;
  return total;
}

Enumeration enumerate_candidates(const Catalog& catalog) {
  const auto n = catalog.features.size();
  if (n < 1) throw CatalogError("cannot enumerate an empty catalog");
  if (n > kMaxEnumerableFeatures) {
    throw CatalogError(fmt::format("catalog has {} features; enumeration is limited to {} "
                                   "(2^{} - 1 subsets)",
                                   n, kMaxEnumerableFeatures, kMaxEnumerableFeatures));
  }
  Enumeration out;
  const std::uint32_t limit = 1u << n;
  out.candidates.reserve(std::min<std::size_t>(catalog.accuracy_map.size(), limit));
  for (std::uint32_t bits = 1; bits < limit; ++bits) {
    const auto it = catalog.accuracy_map.find(bits);
    if (it == catalog.accuracy_map.end()) {
      ++out.skipped;
      continue;
    }
    const FeatureMask mask(bits);
    out.candidates.push_back({mask, aggregate_cost(catalog, mask), it->second});
  }
  return out;
}

ParetoFront compute_pareto_front(const std::vector<CandidateModel>& candidates) {
  if (candidates.empty()) throw CatalogError("cannot compute a Pareto front of no candidates");

  std::vector<CandidateModel> sorted = candidates;
  std::sort(sorted.begin(), sorted.end(), [](const CandidateModel& a, const CandidateModel& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    if (a.accuracy != b.accuracy) return a.accuracy > b.accuracy;
    if (a.mask.count() != b.mask.count()) return a.mask.count() < b.mask.count();
    return a.mask < b.mask;
  });

  // Ascending cost sweep: a candidate survives only if it beats every cheaper one.
  std::vector<CandidateModel> front;
  for (const auto& c : sorted) {
    if (front.empty() || c.accuracy > front.back().accuracy) front.push_back(c);
  }
  return ParetoFront(std::move(front));
}

ParetoFront filter_marginal_gains(const ParetoFront& front, double epsilon) {
  if (epsilon < 0.0) throw CatalogError("epsilon must be non-negative");
  const auto& models = front.models();
  if (models.size() <= 2) return front;

  const double threshold = epsilon - kAccuracyTolerance;
  // Walk down from the most accurate model; a model whose gain over the next
  // retained one below it is under epsilon is dropped, except the endpoints.
  std::vector<CandidateModel> kept{models.back()};
  for (std::size_t i = models.size() - 2; i >= 1; --i) {
    if (kept.back().accuracy - models[i].accuracy >= threshold) kept.push_back(models[i]);
  }
  const auto& cheapest = models.front();
  while (kept.size() > 1 && kept.back().accuracy - cheapest.accuracy < threshold) {
    kept.pop_back();
  }
  kept.push_back(cheapest);
  std::reverse(kept.begin(), kept.end());
  return ParetoFront(std::move(kept));
}

ParetoFront profile_catalog(const Catalog& catalog, double epsilon) {
  const auto enumeration = enumerate_candidates(catalog);
  if (enumeration.candidates.empty()) {
    throw CatalogError(fmt::format("catalog '{}' has no models with an accuracy entry",
                                   catalog.name));
  }
  return filter_marginal_gains(compute_pareto_front(enumeration.candidates), epsilon);
}

Catalog parse_catalog(std::string_view text) { return parse_document(text).catalog; }

Catalog load_catalog(const std::filesystem::path& path) {
  try {
    return parse_catalog(read_file(path));
  } catch (const CatalogError& e) {
    throw CatalogError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

FrontBundle parse_front_bundle(std::string_view text) {
  auto doc = parse_document(text);
  if (doc.format == kCatalogFormat) {
    auto front = profile_catalog(doc.catalog, kDefaultEpsilon);
    return {std::move(doc.catalog), std::move(front)};
  }
  std::vector<CandidateModel> models;
  for (const auto& pm : doc.models) {
    models.push_back({pm.mask, aggregate_cost(doc.catalog, pm.mask), pm.accuracy});
  }
  if (models.empty()) throw CatalogError("front document lists no models");
  return {std::move(doc.catalog), ParetoFront(std::move(models))};
}

FrontBundle load_front_bundle(const std::filesystem::path& path) {
  try {
    return parse_front_bundle(read_file(path));
  } catch (const CatalogError& e) {
    throw CatalogError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

ParetoFront load_front(const std::filesystem::path& path) {
  return load_front_bundle(path).front;
}

std::string serialize_catalog(const Catalog& catalog) {
  json doc = header_json(catalog, kCatalogFormat);
  json models = json::array();
  for (const auto& [bits, acc] : catalog.accuracy_map) {
    const FeatureMask mask(bits);
    models.push_back({{"mask", ids_json(mask)}, {"cost", aggregate_cost(catalog, mask)},
                      {"accuracy", acc}});
  }
  doc["models"] = std::move(models);
  return doc.dump(2) + "\n";
}

std::string serialize_front(const Catalog& catalog, const ParetoFront& front) {
  json doc = header_json(catalog, kFrontFormat);
  json models = json::array();
  for (std::size_t i = 1; i <= front.size(); ++i) {
    const auto& m = front.at(i);
    models.push_back({{"index", i}, {"mask", ids_json(m.mask)}, {"cost", m.cost},
                      {"accuracy", m.accuracy}});
  }
  doc["models"] = std::move(models);
  return doc.dump(2) + "\n";
}

}  // namespace loadshift
