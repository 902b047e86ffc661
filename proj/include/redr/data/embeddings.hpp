#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>

#include <Eigen/Dense>

#include "redr/data/vocabulary.hpp"

namespace redr::data {

/// dim x vocab.size() matrix; column i is the vector of token id i. Rows
/// come from lines "token v1 ... v_dim"; tokens absent from the file are
/// drawn from uniform(-0.1, 0.1) with `seed`. On duplicate tokens the first
/// occurrence wins and a warning is logged.
Eigen::MatrixXd load_embeddings(std::istream& in, const Vocabulary& vocab, int dim, std::uint64_t seed);
Eigen::MatrixXd load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, int dim,
                                std::uint64_t seed);

}  // namespace redr::data
