#include "redr/qa/oracle.hpp"

#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <nlohmann/json.hpp>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "redr/error.hpp"
#include "redr/log.hpp"

namespace redr::qa {

namespace {

const std::unordered_set<std::string_view>& stopwords() {
  static const std::unordered_set<std::string_view> words = {
      "a",     "about", "above", "after", "again", "against", "all",   "am",    "an",    "and",   "any",
      "are",   "as",    "at",    "be",    "because", "been",  "before", "being", "below", "between", "both",
      "but",   "by",    "can",   "could", "did",   "do",      "does",  "doing", "down",  "during", "each",
      "few",   "for",   "from",  "further", "had", "has",     "have",  "having", "he",   "her",   "here",
      "hers",  "herself", "him", "himself", "his", "how",     "i",     "if",    "in",    "into",  "is",
      "it",    "its",   "itself", "just", "me",    "more",    "most",  "my",    "myself", "no",   "nor",
      "not",   "now",   "of",    "off",   "on",    "once",    "only",  "or",    "other", "our",   "ours",
      "ourselves", "out", "over", "own",  "s",     "same",    "she",   "should", "so",   "some",  "such",
      "t",     "than",  "that",  "the",   "their", "theirs",  "them",  "themselves", "then", "there", "these",
      "they",  "this",  "those", "through", "to",  "too",     "under", "until", "up",    "very",  "was",
      "we",    "were",  "what",  "when",  "where", "which",   "while", "who",   "whom",  "why",   "will",
      "with",  "would", "you",   "your",  "yours", "yourself", "yourselves", "'s", "n't", "also", "may",
      "might", "must",  "shall", "us",    "yes",   "whose"};
  return words;
}

bool is_content(std::string_view tok) { return !data::is_punctuation(tok) && !is_stopword(tok); }

}  // namespace

bool is_stopword(std::string_view token) { return stopwords().contains(token); }

OracleAnswer LexicalOracle::answer(const OracleRequest& request) const {
  std::set<std::string> query;
  for (const auto& t : request.question) {
    if (is_content(t)) query.insert(t);
  }
  std::size_t best = 0;
  std::size_t best_score = 0;
  for (std::size_t s = 0; s < request.passage_sentences.size(); ++s) {
    std::set<std::string> seen;
    for (const auto& t : request.passage_sentences[s]) {
      if (query.contains(t)) seen.insert(t);
    }
    if (seen.size() > best_score) {
      best_score = seen.size();
      best = s;
    }
  }
  if (best_score == 0) return {{"unknown"}, 0.0};
  OracleAnswer out;
  for (const auto& t : request.passage_sentences[best]) {
    if (out.answer.size() >= max_tokens_) break;
    if (is_content(t) && !query.contains(t)) out.answer.push_back(t);
  }
  if (out.answer.empty()) return {{"unknown"}, 0.0};
  out.confidence = static_cast<double>(best_score) / static_cast<double>(query.size());
  return out;
}

OracleAnswer MarkerOracle::answer(const OracleRequest& request) const {
  if (std::find(request.question.begin(), request.question.end(), marker_) != request.question.end()) {
    return {{marker_}, 1.0};
  }
  return {};
}

// --- pipe -------------------------------------------------------------------

PipeOracle::PipeOracle(std::string command) : command_(std::move(command)) {
  int fds[2];
  if (socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0) throw Error("pipe oracle: socketpair failed");
  const pid_t pid = fork();
  if (pid < 0) {
    close(fds[0]);
    close(fds[1]);
    throw Error("pipe oracle: fork failed");
  }
  if (pid == 0) {
    close(fds[0]);
    dup2(fds[1], STDIN_FILENO);
    dup2(fds[1], STDOUT_FILENO);
    close(fds[1]);
    execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(fds[1]);
  pid_ = pid;
  to_child_ = fds[0];
  from_child_ = fds[0];
}

PipeOracle::~PipeOracle() {
  if (to_child_ >= 0) {
    shutdown(to_child_, SHUT_RDWR);
    close(to_child_);
  }
  if (pid_ > 0) {
    kill(pid_, SIGTERM);
    waitpid(pid_, nullptr, 0);
  }
}

std::string PipeOracle::read_line() const {
  constexpr int kTimeoutMs = 30000;
  for (;;) {
    const auto nl = pending_.find('\n');
    if (nl != std::string::npos) {
      std::string line = pending_.substr(0, nl);
      pending_.erase(0, nl + 1);
      return line;
    }
    pollfd pfd{from_child_, POLLIN, 0};
    const int ready = poll(&pfd, 1, kTimeoutMs);
    if (ready <= 0) throw Error("pipe oracle: no reply from '" + command_ + "'");
    char buf[4096];
    const ssize_t n = read(from_child_, buf, sizeof buf);
    if (n <= 0) throw Error("pipe oracle: '" + command_ + "' closed its output");
    pending_.append(buf, static_cast<std::size_t>(n));
  }
}

OracleAnswer PipeOracle::answer(const OracleRequest& request) const {
  std::lock_guard lock(mutex_);
  const nlohmann::json req = {
      {"passage", request.passage_sentences}, {"history", request.history}, {"question", request.question}};
  const std::string line = req.dump() + "\n";
  std::size_t sent = 0;
  while (sent < line.size()) {
    const ssize_t n = send(to_child_, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
    if (n <= 0) throw Error("pipe oracle: cannot write to '" + command_ + "'");
    sent += static_cast<std::size_t>(n);
  }
  const nlohmann::json reply = nlohmann::json::parse(read_line());
  OracleAnswer out;
  out.answer = reply.at("answer").get<data::Tokens>();
  out.confidence = reply.value("confidence", 0.0);
  return out;
}

// --- helpers ----------------------------------------------------------------

std::unique_ptr<QaOracle> make_oracle(std::string_view spec) {
  if (spec == "lexical") return std::make_unique<LexicalOracle>();
  if (spec == "gold") return std::make_unique<GoldReplayOracle>();
  if (spec == "null") return std::make_unique<NullOracle>();
  if (spec.starts_with("marker:") && spec.size() > 7) return std::make_unique<MarkerOracle>(std::string(spec.substr(7)));
  if (spec.starts_with("pipe:") && spec.size() > 5) return std::make_unique<PipeOracle>(std::string(spec.substr(5)));
  throw ConfigError("unknown oracle '" + std::string(spec) +
                    "' (expected lexical, gold, null, marker:<token> or pipe:<command>)");
}

OracleAnswer oracle_answer(const OracleRequest& request, const QaOracle& oracle) {
  if (request.question.empty()) return {{"unknown"}, 0.0};
  try {
    OracleAnswer a = oracle.answer(request);
    if (!(a.confidence >= 0.0 && a.confidence <= 1.0)) a.confidence = std::clamp(a.confidence, 0.0, 1.0);
    return a;
  } catch (const std::exception& e) {
    log::warn(std::string("oracle ") + oracle.name() + " failed: " + e.what());
    return {{"unknown"}, 0.0};
  }
}

data::Tokens normalize_answer(const data::Tokens& tokens) {
  data::Tokens out;
  for (const auto& t : tokens) {
    std::string s;
    for (const char ch : t) {
      const auto c = static_cast<unsigned char>(ch);
      if (!std::ispunct(c)) s.push_back(static_cast<char>(std::tolower(c)));
    }
    if (!s.empty()) out.push_back(std::move(s));
  }
  return out;
}

double f1_score(const data::Tokens& prediction, const data::Tokens& gold) {
  const data::Tokens p = normalize_answer(prediction);
  const data::Tokens g = normalize_answer(gold);
  if (p.empty() && g.empty()) return 1.0;
  if (p.empty() || g.empty()) return 0.0;
  std::unordered_map<std::string, int> counts;
  for (const auto& t : g) ++counts[t];
  int overlap = 0;
  for (const auto& t : p) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  const double precision = static_cast<double>(overlap) / static_cast<double>(p.size());
  const double recall = static_cast<double>(overlap) / static_cast<double>(g.size());
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace redr::qa
