#pragma once

// Model-agnostic greedy and beam decoding.
//
// A step model exposes
//   State initial() const;
//   std::pair<State, Eigen::VectorXd> step(const State& s, int prev_token) const;
// where the vector holds log-probabilities of the next token.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "redr/error.hpp"

namespace redr::model {

/// Index of the largest entry; ties go to the lowest index.
inline int argmax_lowest(const Eigen::VectorXd& v) {
  if (v.size() == 0) throw Error("argmax over an empty distribution");
  int best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = static_cast<int>(i);
  }
  return best;
}

template <typename State>
struct BeamHypothesis {
  using StateType = State;

  std::vector<int> tokens;
  double log_prob = 0.0;
  State state{};
  bool finished = false;

  /// Length-normalized log-probability.
  double score() const { return tokens.empty() ? log_prob : log_prob / static_cast<double>(tokens.size()); }
};

template <typename StepModel>
using HypothesisOf = BeamHypothesis<decltype(std::declval<const StepModel&>().initial())>;

/// Argmax decoding; the returned tokens include the final EOS when emitted.
template <typename StepModel>
HypothesisOf<StepModel> greedy_decode(const StepModel& model, int bos, int eos, int max_len) {
  if (max_len < 1) throw ConfigError("greedy_decode: max_len must be >= 1");
  HypothesisOf<StepModel> hyp;
  hyp.state = model.initial();
  int prev = bos;
  for (int t = 0; t < max_len; ++t) {
    auto [next, logp] = model.step(hyp.state, prev);
    const int tok = argmax_lowest(logp);
    hyp.state = std::move(next);
    hyp.tokens.push_back(tok);
    hyp.log_prob += logp[tok];
    prev = tok;
    if (tok == eos) {
      hyp.finished = true;
      break;
    }
  }
  return hyp;
}

/// Keeps the `beam` best partial hypotheses by accumulated log-probability
/// at every step (ties: larger last-step log-probability, earlier parent,
/// lower token id). Hypotheses that emit EOS retire; search stops once `beam`
/// have retired or max_len is hit, and surviving partial hypotheses are
/// returned too. The result is sorted by length-normalized score, best first.
template <typename StepModel>
std::vector<HypothesisOf<StepModel>> beam_search(const StepModel& model, int beam, int bos, int eos, int max_len) {
  using Hyp = HypothesisOf<StepModel>;
  if (beam < 1) throw ConfigError("beam_search: beam must be >= 1");
  if (max_len < 1) throw ConfigError("beam_search: max_len must be >= 1");

  struct Candidate {
    std::size_t parent;
    int token;
    double log_prob;
    double step_log_prob;
  };

  std::vector<Hyp> alive(1);
  alive.front().state = model.initial();
  std::vector<Hyp> done;
  for (int t = 0; t < max_len && !alive.empty() && static_cast<int>(done.size()) < beam; ++t) {
    std::vector<Candidate> candidates;
    std::vector<typename Hyp::StateType> states;
    states.reserve(alive.size());
    for (std::size_t p = 0; p < alive.size(); ++p) {
      const int prev = alive[p].tokens.empty() ? bos : alive[p].tokens.back();
      auto [next, logp] = model.step(alive[p].state, prev);
      states.push_back(std::move(next));
      for (Eigen::Index k = 0; k < logp.size(); ++k) {
        if (!std::isfinite(logp[k])) continue;
        candidates.push_back({p, static_cast<int>(k), alive[p].log_prob + logp[k], logp[k]});
      }
    }
    const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(beam) - done.size(), candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                      [](const Candidate& a, const Candidate& b) {
                        if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
                        if (a.step_log_prob != b.step_log_prob) return a.step_log_prob > b.step_log_prob;
                        if (a.parent != b.parent) return a.parent < b.parent;
                        return a.token < b.token;
                      });
    std::vector<Hyp> next_alive;
    for (std::size_t i = 0; i < keep; ++i) {
      const Candidate& c = candidates[i];
      Hyp h;
      h.tokens = alive[c.parent].tokens;
      h.tokens.push_back(c.token);
      h.log_prob = c.log_prob;
      h.state = states[c.parent];
      if (c.token == eos) {
        h.finished = true;
        done.push_back(std::move(h));
      } else {
        next_alive.push_back(std::move(h));
      }
    }
    alive = std::move(next_alive);
  }
  for (auto& h : alive) done.push_back(std::move(h));
  std::stable_sort(done.begin(), done.end(), [](const Hyp& a, const Hyp& b) { return a.score() > b.score(); });
  if (static_cast<int>(done.size()) > beam) done.resize(static_cast<std::size_t>(beam));
  return done;
}

}  // namespace redr::model
