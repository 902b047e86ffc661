#include "redr/data/embeddings.hpp"

#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "redr/error.hpp"
#include "redr/log.hpp"

namespace redr::data {

Eigen::MatrixXd load_embeddings(std::istream& in, const Vocabulary& vocab, int dim, std::uint64_t seed) {
  if (dim < 1) throw ConfigError("load_embeddings: dim must be positive");
  Eigen::MatrixXd table(dim, vocab.size());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-0.1, 0.1);
  for (Eigen::Index j = 0; j < table.cols(); ++j) {
    for (Eigen::Index i = 0; i < table.rows(); ++i) table(i, j) = uniform(rng);
  }

  std::vector<bool> filled(static_cast<std::size_t>(vocab.size()), false);
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string token;
    fields >> token;
    std::vector<double> values;
    double v;
    while (fields >> v) values.push_back(v);
    if (!fields.eof()) throw ParseError("embeddings line " + std::to_string(line_no) + ": non-numeric value");
    if (static_cast<int>(values.size()) != dim) {
      throw ParseError("embeddings line " + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                       " values, found " + std::to_string(values.size()));
    }
    if (!vocab.contains(token)) continue;
    const int id = vocab.id(token);
    if (filled[static_cast<std::size_t>(id)]) {
      log::warn("embeddings line " + std::to_string(line_no) + ": duplicate token '" + token + "' ignored");
      continue;
    }
    filled[static_cast<std::size_t>(id)] = true;
    for (int i = 0; i < dim; ++i) table(i, id) = values[static_cast<std::size_t>(i)];
  }
  return table;
}

Eigen::MatrixXd load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, int dim,
                                std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return load_embeddings(in, vocab, dim, seed);
}

}  // namespace redr::data
