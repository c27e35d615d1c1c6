#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace influence {

/// The four rating attributes used in the illusory-truth study.
enum class Attribute : std::uint8_t { truth = 0, interest = 1, sentiment = 2, importance = 3 };

inline constexpr std::size_t kNumAttributes = 4;
inline constexpr std::array<Attribute, kNumAttributes> kAttributes = {
    Attribute::truth, Attribute::interest, Attribute::sentiment, Attribute::importance};

constexpr std::size_t index(Attribute a) { return static_cast<std::size_t>(a); }

std::string_view attribute_name(Attribute a);
std::optional<Attribute> attribute_from_name(std::string_view name);

enum class Phase : std::uint8_t { ite_exposure, ite_test, pfn_probe };

std::string_view phase_name(Phase p);
std::optional<Phase> phase_from_name(std::string_view name);

/// Bounds of a rating scale. ITE attributes are 1..6, PFN agreement scales 1..7.
struct ScaleBounds {
  int lo = 1;
  int hi = 6;
  constexpr bool contains(int v) const { return v >= lo && v <= hi; }
};

inline constexpr ScaleBounds kIteScale{1, 6};
inline constexpr ScaleBounds kAgreementScale{1, 7};

/// One parsed rating event.
struct RatingRecord {
  std::uint32_t participant_id = 0;
  Phase phase = Phase::ite_exposure;
  std::string item_id;                  // statement id or probe id
  std::optional<Attribute> attribute;   // set for ITE records
  int value = 0;
  int scale_max = 6;
  std::string raw_line;

  bool operator==(const RatingRecord&) const = default;
};

using Rng = std::mt19937_64;

/// Deterministic seed derivation: mixes a root seed with a stream tag so that
/// per-block, per-participant and per-replicate generators are independent of
/// execution order.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t tag);
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t tag_a, std::uint64_t tag_b);

/// 64-bit FNV-1a, used for content hashes in manifests and synthetic backends.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t v);

/// Rounds to the nearest integer (halves away from zero), then clips into the scale.
int round_clip(double x, ScaleBounds bounds);

}  // namespace influence
