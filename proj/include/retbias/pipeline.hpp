#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "retbias/config.hpp"

namespace retbias {

inline constexpr const char* kToolVersion = "0.1.0";

/// Canonical locations inside the output directory.
std::string index_dir(const ExperimentConfig& cfg);
std::string vector_path(const ExperimentConfig& cfg, const std::string& name);
std::string report_dir(const ExperimentConfig& cfg);
std::string manifest_path(const ExperimentConfig& cfg);

/// Ingests the corpus, builds the index, writes the snapshot.
void cmd_index(const ExperimentConfig& cfg, std::ostream& log);

/// Generates the named query sets; empty names = all configured sets.
void cmd_gen_queries(const ExperimentConfig& cfg, const std::vector<std::string>& names,
                     std::ostream& log);

/// Scores the named query sets against the saved index snapshot and writes
/// one retrievability vector per set. resume continues from a checkpoint
/// when one exists.
void cmd_run(const ExperimentConfig& cfg, const std::vector<std::string>& names, bool resume,
             std::ostream& log);

/// Writes per-vector bias reports, the combined Lorenz plot, the Markdown
/// summary, and (with at least two vectors) the correlation matrices.
/// vector_files overrides the configured vector locations; labels are then
/// taken from the file stems.
void cmd_report(const ExperimentConfig& cfg, const std::vector<std::string>& vector_files,
                std::ostream& log);

}  // namespace retbias
