#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "loadshift/error.hpp"

namespace loadshift {

using Cycles = std::uint64_t;

// Catalogs are limited by the mask width; enumeration is further capped.
inline constexpr std::size_t kMaxCatalogFeatures = 32;
inline constexpr std::size_t kMaxEnumerableFeatures = 20;
inline constexpr double kDefaultEpsilon = 0.001;

enum class FeatureKind { counter, throughput, latency, retransmission, segment, raw_header };

std::string_view to_string(FeatureKind kind);
FeatureKind parse_feature_kind(std::string_view text);

// Set of catalog feature ids, bit i <=> feature i.
class FeatureMask {
 public:
  constexpr FeatureMask() = default;
  constexpr explicit FeatureMask(std::uint32_t bits) : bits_(bits) {}

  static FeatureMask of(std::initializer_list<unsigned> ids);

  constexpr std::uint32_t bits() const { return bits_; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr bool contains(unsigned id) const { return id < 32 && ((bits_ >> id) & 1u) != 0; }
  int count() const;
  std::vector<unsigned> ids() const;

  constexpr FeatureMask operator|(FeatureMask o) const { return FeatureMask(bits_ | o.bits_); }
  constexpr FeatureMask operator&(FeatureMask o) const { return FeatureMask(bits_ & o.bits_); }
  constexpr auto operator<=>(const FeatureMask&) const = default;

  // "0x..." form used in files and logs.
  std::string hex() const;

 private:
  std::uint32_t bits_ = 0;
};

struct FeatureSpec {
  unsigned id = 0;
  std::string name;
  Cycles unit_cost = 0;
  FeatureKind kind = FeatureKind::counter;
};

struct CandidateModel {
  FeatureMask mask;
  Cycles cost = 0;
  double accuracy = 0.0;

  bool operator==(const CandidateModel&) const = default;
};

// Non-dominated candidates in ascending cost (and accuracy). Index 1 is the
// cheapest model, size() the most accurate one.
class ParetoFront {
 public:
  ParetoFront() = default;
  // Throws CatalogError unless cost and accuracy are both strictly increasing.
  explicit ParetoFront(std::vector<CandidateModel> models);

  std::size_t size() const { return models_.size(); }
  bool empty() const { return models_.empty(); }
  const CandidateModel& at(std::size_t index) const;  // 1-based
  const std::vector<CandidateModel>& models() const { return models_; }

  bool operator==(const ParetoFront&) const = default;

 private:
  std::vector<CandidateModel> models_;
};

struct Catalog {
  std::string name;
  std::vector<FeatureSpec> features;
  std::map<std::uint32_t, double> accuracy_map;  // keyed by FeatureMask::bits()
  Cycles base_packet_cost = 0;
  // Only the first N packets of a flow update features (service recognition).
  std::optional<std::uint32_t> first_n_packets;

  // Throws CatalogError on duplicate/non-contiguous ids or bad accuracies.
  void validate() const;
  FeatureMask full_mask() const;
  bool mask_valid(FeatureMask mask) const;
};

// Sum of unit costs over the set bits. The per-packet base cost is not included.
Cycles aggregate_cost(const Catalog& catalog, FeatureMask mask);

struct Enumeration {
  std::vector<CandidateModel> candidates;
  std::size_t skipped = 0;  // subsets with no accuracy entry
};

Enumeration enumerate_candidates(const Catalog& catalog);

ParetoFront compute_pareto_front(const std::vector<CandidateModel>& candidates);

ParetoFront filter_marginal_gains(const ParetoFront& front, double epsilon);

// enumerate -> front -> epsilon filter.
ParetoFront profile_catalog(const Catalog& catalog, double epsilon = kDefaultEpsilon);

Catalog parse_catalog(std::string_view text);
Catalog load_catalog(const std::filesystem::path& path);

// Accepts either a front file or a catalog (profiled with kDefaultEpsilon).
ParetoFront load_front(const std::filesystem::path& path);

// A front together with the feature definitions it was built from.
struct FrontBundle {
  Catalog catalog;
  ParetoFront front;
};

FrontBundle parse_front_bundle(std::string_view text);
FrontBundle load_front_bundle(const std::filesystem::path& path);

std::string serialize_catalog(const Catalog& catalog);
std::string serialize_front(const Catalog& catalog, const ParetoFront& front);

}  // namespace loadshift
