#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include "semwm/dataset_builder.hpp"
#include "semwm/text_core.hpp"

namespace semwm::test {

inline std::filesystem::path source_dir() { return SEMWM_SOURCE_DIR; }

inline std::vector<std::string> bundled_corpus() {
  return read_lines(source_dir() / "data/corpus/mini_corpus.txt");
}

inline Lexicons bundled_lexicons() { return Lexicons::load(source_dir() / "data/lexicons"); }

// A few hand-made entries, enough for exact expectations.
inline Lexicons tiny_lexicons() {
  Lexicons lex;
  lex.add_synset(std::vector<std::string>{"big", "large"});
  lex.add_synset(std::vector<std::string>{"house", "home", "dwelling"});
  lex.add_synset(std::vector<std::string>{"movie", "film"});
  lex.add_antonym_pair("good", "bad");
  lex.add_antonym_pair("great", "awful");
  lex.hate_templates = {"[GROUP] are vile", "i hate [GROUP]"};
  lex.groups = {"martians", "robots"};
  return lex;
}

// Unique scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("semwm_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace semwm::test
