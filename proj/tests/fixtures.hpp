#pragma once

#include <fstream>

#include "helpers.hpp"
#include "influence/pipeline.hpp"

namespace testing {

inline influence::RunOptions run_options(const std::filesystem::path& out) {
  influence::RunOptions o;
  o.data_dir = data_dir();
  o.out_dir = out;
  return o;
}

inline influence::IteConfig null_ite_config(std::uint64_t seed, std::size_t blocks = 1) {
  influence::IteConfig c;
  c.seed = seed;
  c.blocks = blocks;
  c.synthetic.effect = "none";
  return c;
}

inline influence::IteDataset read_ite(const std::filesystem::path& data) {
  std::ifstream in(data, std::ios::binary);
  return influence::read_ite_dataset(in);
}

inline influence::PfnDataset read_pfn(const std::filesystem::path& data) {
  std::ifstream in(data, std::ios::binary);
  return influence::read_pfn_dataset(in);
}

/// One null ITE block shared by several tests.
inline const std::filesystem::path& shared_null_run() {
  static TempDir dir;
  static const std::filesystem::path data = influence::run_ite(null_ite_config(31), run_options(dir.path())).data;
  return data;
}

inline influence::PfnConfig zero_pfn_config(std::uint64_t seed, std::size_t participants) {
  influence::PfnConfig c;
  c.seed = seed;
  c.participants = participants;
  for (auto* o : {&c.synthetic.persuasion, &c.synthetic.mobilization}) o->intercept = 4.0;
  return c;
}

}  // namespace testing
