#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mplnet/eval.hpp"
#include "mplnet/types.hpp"

namespace mplnet {

/// Numbers in TSV artifacts are written with 17 significant digits so
/// write-then-read round-trips reproduce doubles exactly.
std::string format_double(double v);

/// Matrix TSV: header row of column names, one row per sample.
void write_matrix_tsv(const std::filesystem::path& path, const Matrix& m,
                      const std::vector<std::string>& col_names);
Matrix read_matrix_tsv(const std::filesystem::path& path,
                       std::vector<std::string>* col_names = nullptr);

/// Single-column TSV with a header.
void write_vector_tsv(const std::filesystem::path& path, const Vector& v,
                      const std::string& name);
Vector read_vector_tsv(const std::filesystem::path& path);

void write_labels_tsv(const std::filesystem::path& path, const IntVector& v,
                      const std::string& name = "label");
IntVector read_labels_tsv(const std::filesystem::path& path);

/// Edge list TSV: feature_a, feature_b, partial_correlation.
void write_edges_tsv(const std::filesystem::path& path,
                     const EdgeScoreList& scores,
                     const std::vector<std::string>& feature_names,
                     bool nonzero_only = true);
EdgeSet read_edges_tsv(const std::filesystem::path& path,
                       const std::vector<std::string>& feature_names);

/// Zero-edge constraints as feature-name pairs.
ZeroEdgeSet read_zero_edges_tsv(const std::filesystem::path& path,
                                const std::vector<std::string>& feature_names);

/// FNV-1a 64-bit digest of the canonical config text; platform independent.
std::uint64_t fnv1a64(const std::string& text);
std::string digest_hex(const std::string& text);

}  // namespace mplnet
