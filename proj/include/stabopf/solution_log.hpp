#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "stabopf/opfcore.hpp"

namespace stabopf {

// Everything needed to recompute derived quantities (NSSP, margins) from a
// logged solve. Non-finite numbers are written as null and read back as NaN.
struct SolutionRecord {
    std::string experiment;
    std::size_t point = 0;
    std::map<std::string, double> params;  // sweep coordinates
    OpfSolution solution;
};

std::string to_json_line(const SolutionRecord& rec, const OpfProblem& prob);
// Throws std::invalid_argument on malformed input.
SolutionRecord parse_json_line(const std::string& line);

// Append-only line-delimited JSON file.
class SolutionLog {
  public:
    explicit SolutionLog(const std::filesystem::path& path);
    void append(const SolutionRecord& rec, const OpfProblem& prob);
    // Free-form record (e.g. scan summaries) given as a JSON object text.
    void append_raw(const std::string& json_object);

  private:
    std::ofstream out_;
};

}  // namespace stabopf
