#pragma once

#include <string_view>
#include <vector>

namespace planahead::detail {

struct CorpusFile {
  std::string_view path;  // relative to prompts/
  std::string_view text;
};

// Defined in a source file generated from prompts/ at configure time.
const std::vector<CorpusFile>& builtin_corpus_files();

}  // namespace planahead::detail
