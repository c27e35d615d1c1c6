#include "influence/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace influence {

std::string_view attribute_name(Attribute a) {
  switch (a) {
    case Attribute::truth: return "truth";
    case Attribute::interest: return "interest";
    case Attribute::sentiment: return "sentiment";
    case Attribute::importance: return "importance";
  }
  return "?";
}

std::optional<Attribute> attribute_from_name(std::string_view name) {
  for (Attribute a : kAttributes)
    if (attribute_name(a) == name) return a;
  return std::nullopt;
}

std::string_view phase_name(Phase p) {
  switch (p) {
    case Phase::ite_exposure: return "ite_exposure";
    case Phase::ite_test: return "ite_test";
    case Phase::pfn_probe: return "pfn_probe";
  }
  return "?";
}

std::optional<Phase> phase_from_name(std::string_view name) {
  for (Phase p : {Phase::ite_exposure, Phase::ite_test, Phase::pfn_probe})
    if (phase_name(p) == name) return p;
  return std::nullopt;
}

namespace {
std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t tag) {
  return splitmix64(splitmix64(root) ^ splitmix64(tag + 0x632be59bd9b4e019ULL));
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t tag_a, std::uint64_t tag_b) {
  return derive_seed(derive_seed(root, tag_a), tag_b);
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

int round_clip(double x, ScaleBounds bounds) {
  const double r = std::round(x);
  if (!(r >= bounds.lo)) return bounds.lo;  // also catches NaN
  if (r > bounds.hi) return bounds.hi;
  return static_cast<int>(r);
}

}  // namespace influence
